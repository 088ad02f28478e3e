#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ztafl/config.hpp"
#include "ztafl/orchestrator.hpp"
#include "ztafl/reporting.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"ZTA-FL simulator: attested, SHAP-weighted federated learning"};
    app.require_subcommand(1);

    std::string config_path, out_dir, configs_dir, report_dir;
    std::int64_t seed_override = -1;

    CLI::App* run = app.add_subcommand("run", "Run one experiment (all configured seeds)");
    run->add_option("--config", config_path, "Experiment config JSON")->required();
    run->add_option("--seed", seed_override, "Override: run this single seed only");
    run->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run every config in a directory");
    sweep_cmd->add_option("--configs", configs_dir, "Directory of *.json configs")->required();
    sweep_cmd->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* report = app.add_subcommand("report", "Emit plot-ready CSVs for a run directory");
    report->add_option("run_dir", report_dir, "Run or sweep output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            ztafl::ExperimentConfig config = ztafl::load_config(config_path);
            if (seed_override >= 0) {
                config.seed = static_cast<std::uint64_t>(seed_override);
                config.seeds = {config.seed};
            }
            const ztafl::ExperimentSummary s = ztafl::run_experiment(config, out_dir);
            std::printf("final val acc %.4f +- %.4f over %zu seed(s); output in %s\n",
                        s.final_val_acc.mean, s.final_val_acc.stddev, s.seeds.size(),
                        out_dir.c_str());
        } else if (sweep_cmd->parsed()) {
            std::vector<std::pair<std::string, ztafl::ExperimentConfig>> configs;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(configs_dir))
                if (e.is_regular_file() && e.path().extension() == ".json")
                    files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files)
                configs.emplace_back(f.stem().string(), ztafl::load_config(f.string()));
            if (configs.empty()) {
                std::fprintf(stderr, "no *.json configs in %s\n", configs_dir.c_str());
                return 1;
            }
            ztafl::sweep(configs, out_dir);
            std::printf("%zu configs swept; comparison.csv in %s\n", configs.size(),
                        out_dir.c_str());
        } else if (report->parsed()) {
            const ztafl::ReportResult res = ztafl::emit_report(report_dir);
            for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            for (const auto& p : res.written) std::printf("wrote %s\n", p.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
