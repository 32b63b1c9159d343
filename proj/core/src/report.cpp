#include "reguider/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "reguider/config.hpp"

namespace reguider {

namespace fs = std::filesystem;

namespace {

std::string g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct RunSummary {
    std::string dataset;
    std::string variant;
    std::string metric;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    double test_mse = 0;
    double test_mae = 0;
};

double kv_double(const KvMap& kv, const std::string& key, const std::string& where) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(where + ": missing key " + key);
    double v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{}) throw ConfigError(where + ": bad number for " + key);
    return v;
}

std::uint64_t kv_u64(const KvMap& kv, const std::string& key, const std::string& where) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(where + ": missing key " + key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (ec != std::errc{}) throw ConfigError(where + ": bad integer for " + key);
    return v;
}

std::string kv_str(const KvMap& kv, const std::string& key, const std::string& where) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(where + ": missing key " + key);
    return it->second;
}

struct Stats {
    double mean = 0, stddev = 0;
};

Stats mean_std(const std::vector<double>& xs) {
    Stats s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    var /= static_cast<double>(xs.size());
    s.stddev = std::sqrt(var);
    return s;
}

int metric_order(const std::string& m) {
    if (m == "euclidean") return 0;
    if (m == "cosine") return 1;
    if (m == "kl") return 2;
    return 3;
}

}  // namespace

Report build_report(const std::string& run_dir) {
    if (!fs::is_directory(run_dir)) throw ConfigError("not a run directory: " + run_dir);

    std::vector<fs::path> summary_files;
    for (const auto& entry : fs::directory_iterator(run_dir)) {
        if (!entry.is_directory()) continue;
        fs::path p = entry.path() / "summary.txt";
        if (fs::exists(p)) summary_files.push_back(p);
    }
    std::sort(summary_files.begin(), summary_files.end());
    if (summary_files.empty())
        throw ConfigError("no run records found under " + run_dir);

    std::vector<RunSummary> runs;
    for (const fs::path& p : summary_files) {
        KvMap kv = parse_config_file(p.string());
        RunSummary r;
        const std::string where = p.string();
        r.dataset = kv_str(kv, "dataset", where);
        r.variant = kv_str(kv, "variant", where);
        r.metric = kv_str(kv, "metric", where);
        r.horizon = static_cast<std::size_t>(kv_u64(kv, "T", where));
        r.seed = kv_u64(kv, "seed", where);
        r.test_mse = kv_double(kv, "test_mse", where);
        r.test_mae = kv_double(kv, "test_mae", where);
        runs.push_back(std::move(r));
    }

    Report report;

    std::map<std::pair<std::string, std::size_t>, std::vector<const RunSummary*>> groups;
    for (const RunSummary& r : runs) groups[{r.dataset, r.horizon}].push_back(&r);

    for (const auto& [key, members] : groups) {
        ReportRow row;
        row.dataset = key.first;
        row.horizon = key.second;

        std::vector<double> b_mse, b_mae, r_mse, r_mae;
        std::map<std::uint64_t, double> base_by_seed;
        for (const RunSummary* r : members) {
            if (r->variant == "base") {
                b_mse.push_back(r->test_mse);
                b_mae.push_back(r->test_mae);
                base_by_seed[r->seed] = r->test_mse;
            } else {
                r_mse.push_back(r->test_mse);
                r_mae.push_back(r->test_mae);
            }
        }
        std::vector<double> improvements;
        for (const RunSummary* r : members) {
            if (r->variant == "base") continue;
            auto it = base_by_seed.find(r->seed);
            if (it == base_by_seed.end() || it->second == 0.0) continue;
            improvements.push_back((it->second - r->test_mse) / it->second * 100.0);
        }

        row.base_runs = b_mse.size();
        row.reguider_runs = r_mse.size();
        Stats s;
        s = mean_std(b_mse), row.base_mse_mean = s.mean, row.base_mse_std = s.stddev;
        s = mean_std(b_mae), row.base_mae_mean = s.mean, row.base_mae_std = s.stddev;
        s = mean_std(r_mse), row.reguider_mse_mean = s.mean, row.reguider_mse_std = s.stddev;
        s = mean_std(r_mae), row.reguider_mae_mean = s.mean, row.reguider_mae_std = s.stddev;
        s = mean_std(improvements);
        row.improvement_mean = s.mean;
        row.improvement_std = s.stddev;
        row.improvement_pairs = improvements.size();
        report.rows.push_back(std::move(row));
    }

    std::map<std::tuple<std::string, std::size_t, std::string>, std::vector<const RunSummary*>>
        by_metric;
    for (const RunSummary& r : runs)
        if (r.variant == "reguider") by_metric[{r.dataset, r.horizon, r.metric}].push_back(&r);

    for (const auto& [key, members] : by_metric) {
        MetricRow row;
        row.dataset = std::get<0>(key);
        row.horizon = std::get<1>(key);
        row.metric = std::get<2>(key);
        std::vector<double> mse, mae;
        for (const RunSummary* r : members) {
            mse.push_back(r->test_mse);
            mae.push_back(r->test_mae);
        }
        row.runs = mse.size();
        Stats s;
        s = mean_std(mse), row.mse_mean = s.mean, row.mse_std = s.stddev;
        s = mean_std(mae), row.mae_mean = s.mean, row.mae_std = s.stddev;
        if (std::find(report.metrics_present.begin(), report.metrics_present.end(),
                      row.metric) == report.metrics_present.end())
            report.metrics_present.push_back(row.metric);
        report.metric_rows.push_back(std::move(row));
    }
    std::sort(report.metric_rows.begin(), report.metric_rows.end(),
              [](const MetricRow& a, const MetricRow& b) {
                  return std::tie(a.dataset, a.horizon) != std::tie(b.dataset, b.horizon)
                             ? std::tie(a.dataset, a.horizon) < std::tie(b.dataset, b.horizon)
                             : metric_order(a.metric) < metric_order(b.metric);
              });
    std::sort(report.metrics_present.begin(), report.metrics_present.end(),
              [](const std::string& a, const std::string& b) {
                  return metric_order(a) < metric_order(b);
              });
    return report;
}

std::string report_main_csv(const Report& r) {
    std::string out =
        "dataset,T,base_mse_mean,base_mse_std,base_mae_mean,base_mae_std,"
        "reguider_mse_mean,reguider_mse_std,reguider_mae_mean,reguider_mae_std,"
        "improvement_pct_mean,improvement_pct_std\n";
    for (const ReportRow& row : r.rows) {
        out += row.dataset + "," + std::to_string(row.horizon);
        if (row.base_runs > 0)
            out += "," + g6(row.base_mse_mean) + "," + g6(row.base_mse_std) + "," +
                   g6(row.base_mae_mean) + "," + g6(row.base_mae_std);
        else
            out += ",,,,";
        if (row.reguider_runs > 0)
            out += "," + g6(row.reguider_mse_mean) + "," + g6(row.reguider_mse_std) + "," +
                   g6(row.reguider_mae_mean) + "," + g6(row.reguider_mae_std);
        else
            out += ",,,,";
        if (row.improvement_pairs > 0)
            out += "," + g6(row.improvement_mean) + "," + g6(row.improvement_std);
        else
            out += ",,";
        out += "\n";
    }
    return out;
}

std::string report_metric_csv(const Report& r) {
    std::string out = "dataset,T,metric,mse_mean,mse_std,mae_mean,mae_std\n";
    for (const MetricRow& row : r.metric_rows)
        out += row.dataset + "," + std::to_string(row.horizon) + "," + row.metric + "," +
               g6(row.mse_mean) + "," + g6(row.mse_std) + "," + g6(row.mae_mean) + "," +
               g6(row.mae_std) + "\n";
    return out;
}

}  // namespace reguider
