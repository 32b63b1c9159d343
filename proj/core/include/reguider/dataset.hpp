#ifndef REGUIDER_DATASET_HPP
#define REGUIDER_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "reguider/errors.hpp"

namespace reguider {

// Channel-major multivariate series: values[c * steps + t].
struct MultivariateSeries {
    std::vector<std::string> names;
    std::vector<double> values;
    std::size_t steps = 0;

    std::size_t channels() const { return names.size(); }
    double at(std::size_t c, std::size_t t) const { return values[c * steps + t]; }
    double& at(std::size_t c, std::size_t t) { return values[c * steps + t]; }
};

// (x, y) pair cut from a series: x is C x L, y is C x T, both channel-major
// and adjacent in time (y starts at origin + L).
struct WindowPair {
    std::vector<double> x;  // C x L
    std::vector<double> y;  // C x T
    std::size_t channels = 0;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::uint64_t origin = 0;
};

// Per-channel look-back statistics; y is normalized with x's stats.
struct NormState {
    std::vector<double> mean;
    std::vector<double> stddev;  // population std, floored at 1e-8
};

struct SplitSpec {
    double train_frac = 0.7;
    double val_frac = 0.1;
    double test_frac = 0.2;

    void validate() const;
};

struct SplitSeries {
    MultivariateSeries train;
    MultivariateSeries val;   // prefixed with the last L steps of train
    MultivariateSeries test;  // prefixed with the last L steps before its core
};

// CSV: UTF-8, comma-separated, one header row, optional leading timestamp
// column (dropped from values), remaining cells finite decimal numbers.
MultivariateSeries load_csv(const std::string& path, bool has_timestamp_column);

SplitSeries chronological_split(const MultivariateSeries& s, const SplitSpec& spec,
                                std::size_t lookback);

std::vector<WindowPair> make_windows(const MultivariateSeries& s, std::size_t lookback,
                                     std::size_t horizon, std::size_t stride);

// x' = (x - mean) / max(std_pop, 1e-8) per channel; y shares x's stats.
std::pair<WindowPair, NormState> instance_normalize(const WindowPair& w);

// Inverse of the transform above for a C x K channel-major block.
std::vector<double> denormalize(const std::vector<double>& values, std::size_t channels,
                                const NormState& norm);

// Deterministic per-epoch shuffle into batches; the final partial batch is
// kept. Identical (seed, epoch) always yields the identical order.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch);

}  // namespace reguider

#endif
