#include "ztafl/reporting.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ztafl/errors.hpp"

namespace ztafl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

// Rows of a CSV keyed by header name.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("report: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) return {};
    const auto header = csv_fields(line);
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = csv_fields(line);
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size() && i < fields.size(); ++i)
            row[header[i]] = fields[i];
        rows.push_back(std::move(row));
    }
    return rows;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("report: cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

struct SeedDir {
    std::string seed;
    fs::path dir;
};

struct RunDir {
    std::string name;
    fs::path dir;
    std::vector<SeedDir> seeds;
};

std::vector<RunDir> discover(const fs::path& root) {
    const auto collect_seeds = [](RunDir& rd) {
        std::vector<fs::path> children;
        for (const auto& e : fs::directory_iterator(rd.dir))
            if (e.is_directory() && e.path().filename().string().starts_with("seed_"))
                children.push_back(e.path());
        std::sort(children.begin(), children.end());
        for (const auto& c : children)
            rd.seeds.push_back({c.filename().string().substr(5), c});
    };

    std::vector<RunDir> runs;
    if (fs::exists(root / "summary.json")) {
        RunDir rd{root.filename().string(), root, {}};
        collect_seeds(rd);
        runs.push_back(std::move(rd));
        return runs;
    }
    std::vector<fs::path> children;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "summary.json"))
            children.push_back(e.path());
    std::sort(children.begin(), children.end());
    for (const auto& c : children) {
        RunDir rd{c.filename().string(), c, {}};
        collect_seeds(rd);
        runs.push_back(std::move(rd));
    }
    return runs;
}

}  // namespace

ReportResult emit_report(const std::string& run_dir) {
    ReportResult res;
    const fs::path root(run_dir);
    if (!fs::exists(root)) throw InvalidInputError("report: no such directory: " + run_dir);

    const std::vector<RunDir> runs = discover(root);
    if (runs.empty()) {
        res.warnings.push_back("no run directories with summary.json found");
        return res;
    }

    const fs::path report_dir = root / "report";
    fs::create_directories(report_dir);

    std::ostringstream convergence;
    convergence << "config,seed,round,val_acc\n";
    std::ostringstream stability;
    stability << "config,seed,round,agent,s_i,honest\n";
    std::ostringstream eps;
    eps << "config,seed,eps,robust_acc\n";
    std::ostringstream beta;
    beta << "config,rule,attack,beta,final_val_acc_mean,final_val_acc_std\n";

    bool have_convergence = false, have_stability = false, have_eps = false, have_beta = false;

    for (const RunDir& run : runs) {
        try {
            const json summary = read_json(run.dir / "summary.json");
            beta << run.name << ',' << summary.value("rule", std::string("?")) << ','
                 << summary.value("attack", std::string("?")) << ','
                 << summary.value("beta", 0.0) << ','
                 << summary.at("final_val_acc").value("mean", 0.0) << ','
                 << summary.at("final_val_acc").value("std", 0.0) << '\n';
            have_beta = true;
        } catch (const std::exception& e) {
            res.warnings.push_back(run.name + ": summary.json unreadable: " + e.what());
        }

        for (const SeedDir& sd : run.seeds) {
            if (fs::exists(sd.dir / "metrics.csv")) {
                for (const auto& row : read_csv(sd.dir / "metrics.csv")) {
                    convergence << run.name << ',' << sd.seed << ',' << row.at("round") << ','
                                << row.at("val_acc") << '\n';
                    have_convergence = true;
                }
            } else {
                res.warnings.push_back(run.name + "/seed_" + sd.seed + ": missing metrics.csv");
            }

            std::set<int> compromised;
            if (fs::exists(sd.dir / "meta.json")) {
                const json meta = read_json(sd.dir / "meta.json");
                for (const auto& v : meta.value("compromised", std::vector<int>{}))
                    compromised.insert(v);
            }
            if (fs::exists(sd.dir / "filter.csv")) {
                for (const auto& row : read_csv(sd.dir / "filter.csv")) {
                    const int agent = std::stoi(row.at("agent"));
                    stability << run.name << ',' << sd.seed << ',' << row.at("round") << ','
                              << agent << ',' << row.at("s_i") << ','
                              << (compromised.count(agent) ? 0 : 1) << '\n';
                    have_stability = true;
                }
            } else {
                res.warnings.push_back(run.name + "/seed_" + sd.seed + ": missing filter.csv");
            }

            if (fs::exists(sd.dir / "eps_sweep.csv")) {
                for (const auto& row : read_csv(sd.dir / "eps_sweep.csv")) {
                    eps << run.name << ',' << sd.seed << ',' << row.at("eps") << ','
                        << row.at("robust_acc") << '\n';
                    have_eps = true;
                }
            } else {
                res.warnings.push_back(run.name + "/seed_" + sd.seed + ": missing eps_sweep.csv");
            }
        }
    }

    const auto write_family = [&](const char* name, const std::ostringstream& body, bool have) {
        const fs::path p = report_dir / name;
        std::ofstream out(p, std::ios::binary);
        out << body.str();
        res.written.push_back(p.string());
        if (!have) res.warnings.push_back(std::string(name) + ": no data rows");
    };
    write_family("convergence.csv", convergence, have_convergence);
    write_family("stability_scores.csv", stability, have_stability);
    write_family("accuracy_vs_eps.csv", eps, have_eps);
    write_family("accuracy_vs_beta.csv", beta, have_beta);
    return res;
}

}  // namespace ztafl
