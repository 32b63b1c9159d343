#ifndef REGUIDER_REPORT_HPP
#define REGUIDER_REPORT_HPP

#include <string>
#include <vector>

namespace reguider {

// One (dataset, T) row of the main comparison table; every value column is
// a seed mean paired with its population standard deviation.
struct ReportRow {
    std::string dataset;
    std::size_t horizon = 0;
    std::size_t base_runs = 0;
    std::size_t reguider_runs = 0;
    double base_mse_mean = 0, base_mse_std = 0;
    double base_mae_mean = 0, base_mae_std = 0;
    double reguider_mse_mean = 0, reguider_mse_std = 0;
    double reguider_mae_mean = 0, reguider_mae_std = 0;
    // (base - reguider) / base * 100 on MSE, paired by seed
    double improvement_mean = 0, improvement_std = 0;
    std::size_t improvement_pairs = 0;
};

struct MetricRow {
    std::string dataset;
    std::size_t horizon = 0;
    std::string metric;
    std::size_t runs = 0;
    double mse_mean = 0, mse_std = 0;
    double mae_mean = 0, mae_std = 0;
};

struct Report {
    std::vector<ReportRow> rows;
    std::vector<MetricRow> metric_rows;
    std::vector<std::string> metrics_present;
};

// Aggregates every summary.txt found one level below run_dir. Pure function
// of the directory contents; directories are visited in sorted order.
Report build_report(const std::string& run_dir);

// CSV renderings, 6 significant digits.
std::string report_main_csv(const Report& r);
std::string report_metric_csv(const Report& r);

}  // namespace reguider

#endif
