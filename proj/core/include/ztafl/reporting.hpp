#pragma once

#include <string>
#include <vector>

namespace ztafl {

struct ReportResult {
    std::vector<std::string> written;   // paths of emitted files
    std::vector<std::string> warnings;  // missing inputs, partial families
};

// Reshapes a completed run directory (or a sweep directory of run
// directories) into plot-ready CSVs under <dir>/report/:
//   convergence.csv        accuracy per round
//   stability_scores.csv   per-agent stability trajectories with honest flag
//   accuracy_vs_eps.csv    final-model robust accuracy over the eps grid
//   accuracy_vs_beta.csv   final accuracy per configuration
// Missing inputs produce a partial report plus warnings. Re-running is
// idempotent.
ReportResult emit_report(const std::string& run_dir);

}  // namespace ztafl
