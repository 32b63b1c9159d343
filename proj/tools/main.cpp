// reguider CLI: representation-guided training for desk-scale time series
// forecasting. See README.md for the config key reference.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "reguider/config.hpp"
#include "reguider/experiment.hpp"
#include "reguider/report.hpp"
#include "reguider/train.hpp"

namespace {

using namespace reguider;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

const char* kUsage = R"(usage: reguider <command> [--config=FILE] [--key=value ...]

commands:
  pretrain-teacher   pretrain a frozen desk teacher, write RGM1 checkpoint
  train              train base / +reguider variants over horizons x seeds
  report             aggregate run directories into comparison tables
  gradcheck          verify analytic gradients against finite differences
  export-embeddings  write per-window embeddings to an RGE1 file

Options are flat key=value pairs; --config=FILE loads them from a file and
the command line overrides it. Exit codes: 0 ok, 1 failed check, 2 bad
configuration or I/O.
)";

std::string g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

KvMap gather_options(int argc, char** argv) {
    KvMap kv;
    std::vector<std::string> args(argv + 2, argv + argc);
    for (const std::string& a : args) {
        if (a.rfind("--config=", 0) == 0) {
            KvMap file_kv = parse_config_file(a.substr(9));
            for (auto& [k, v] : file_kv) kv.emplace(k, v);  // file never beats CLI
        }
    }
    for (const std::string& a : args) {
        if (a.rfind("--config=", 0) == 0) continue;
        KvMap tmp;
        if (!apply_override(tmp, a)) throw ConfigError("unexpected argument: " + a);
        for (auto& [k, v] : tmp) kv[k] = v;
    }
    kv.erase("config");
    return kv;
}

int cmd_gradcheck(const KvMap& kv) {
    double tol = 1e-4, h = 1e-5;
    if (auto it = kv.find("tol"); it != kv.end()) tol = std::stod(it->second);
    if (auto it = kv.find("fd_step"); it != kv.end()) h = std::stod(it->second);

    bool all_pass = true;
    for (const auto& [metric, report] : check_training_gradients(h, tol)) {
        all_pass = all_pass && report.pass;
        std::cout << (report.pass ? "PASS " : "FAIL ") << to_string(metric)
                  << ": max rel err " << g6(report.max_rel_err) << " at " << report.worst.param
                  << "[" << report.worst.index << "] (analytic " << g6(report.worst.analytic)
                  << ", numeric " << g6(report.worst.numeric) << ", " << report.coords_checked
                  << " coords, tol " << g6(tol) << ")\n";
    }
    return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_report(const KvMap& kv) {
    auto it = kv.find("out");
    if (it == kv.end()) throw ConfigError("report needs --out=RUN_DIR");
    const std::string dir = it->second;
    bool overwrite = false;
    if (auto o = kv.find("overwrite"); o != kv.end()) overwrite = o->second != "false";

    Report report = build_report(dir);
    const std::string main_csv = report_main_csv(report);
    const std::string main_path = dir + "/report.csv";
    if (std::filesystem::exists(main_path) && !overwrite)
        throw ConfigError("output exists (pass --overwrite to replace): " + main_path);
    std::ofstream(main_path, std::ios::trunc) << main_csv;
    std::cout << main_csv;

    if (report.metrics_present.size() >= 2) {
        const std::string metric_csv = report_metric_csv(report);
        const std::string metric_path = dir + "/report_metrics.csv";
        if (std::filesystem::exists(metric_path) && !overwrite)
            throw ConfigError("output exists (pass --overwrite to replace): " + metric_path);
        std::ofstream(metric_path, std::ios::trunc) << metric_csv;
        std::cout << "\n" << metric_csv;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << kUsage;
        return kExitConfig;
    }
    const std::string cmd = argv[1];
    if (cmd == "-h" || cmd == "--help" || cmd == "help") {
        std::cout << kUsage;
        return kExitOk;
    }

    try {
        KvMap kv = gather_options(argc, argv);
        if (cmd == "gradcheck") return cmd_gradcheck(kv);
        if (cmd == "report") return cmd_report(kv);

        if (cmd == "pretrain-teacher") {
            run_pretrain(experiment_config_from(kv), std::cout);
            return kExitOk;
        }
        if (cmd == "train") {
            run_training(experiment_config_from(kv), std::cout);
            return kExitOk;
        }
        if (cmd == "export-embeddings") {
            run_export(experiment_config_from(kv), std::cout);
            return kExitOk;
        }
        std::cerr << "unknown command: " << cmd << "\n" << kUsage;
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
}
