#include "reguider/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "reguider/rng.hpp"

namespace reguider {

namespace {

constexpr double kStdFloor = 1e-8;

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t data_row, std::size_t col) {
    std::string cell = trim(raw);
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || first == last || !std::isfinite(v))
        throw ParseError("cell \"" + cell + "\" at data row " + std::to_string(data_row) +
                         ", column " + std::to_string(col) + " is not a finite number");
    return v;
}

MultivariateSeries take_steps(const MultivariateSeries& s, std::size_t begin, std::size_t end) {
    MultivariateSeries out;
    out.names = s.names;
    out.steps = end - begin;
    out.values.resize(s.channels() * out.steps);
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t t = begin; t < end; ++t) out.at(c, t - begin) = s.at(c, t);
    return out;
}

}  // namespace

void SplitSpec::validate() const {
    if (train_frac < 0.0 || val_frac < 0.0 || test_frac < 0.0)
        throw ConfigError("split fractions must be nonnegative");
    double sum = train_frac + val_frac + test_frac;
    if (std::abs(sum - 1.0) > 1e-12)
        throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));
}

MultivariateSeries load_csv(const std::string& path, bool has_timestamp_column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty dataset file: " + path);
    std::vector<std::string> header = split_fields(line);
    std::size_t skip = has_timestamp_column ? 1 : 0;
    if (header.size() <= skip)
        throw ParseError("header of " + path + " has no value columns");

    MultivariateSeries s;
    for (std::size_t i = skip; i < header.size(); ++i) s.names.push_back(trim(header[i]));
    const std::size_t cols = header.size();
    const std::size_t c = s.names.size();

    std::vector<std::vector<double>> columns(c);
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        if (line.empty() && in.eof()) break;
        ++data_row;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != cols)
            throw ParseError("row " + std::to_string(data_row) + " of " + path + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(cols));
        for (std::size_t i = skip; i < cols; ++i)
            columns[i - skip].push_back(parse_cell(fields[i], data_row, i + 1));
    }
    if (data_row == 0) throw ParseError("dataset file has no data rows: " + path);

    s.steps = data_row;
    s.values.resize(c * s.steps);
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t t = 0; t < s.steps; ++t) s.at(ci, t) = columns[ci][t];
    return s;
}

SplitSeries chronological_split(const MultivariateSeries& s, const SplitSpec& spec,
                                std::size_t lookback) {
    spec.validate();
    const std::size_t n = s.steps;
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_frac));
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.val_frac));
    if (n_train + n_val > n) throw ConfigError("split fractions overflow the series");
    const std::size_t n_test = n - n_train - n_val;

    if (n_train < lookback + 1)
        throw ConfigError("train segment has " + std::to_string(n_train) +
                          " steps, needs at least L+1 = " + std::to_string(lookback + 1));
    if (n_val < 1 || n_test < 1)
        throw ConfigError("validation/test segments must be nonempty (got " +
                          std::to_string(n_val) + "/" + std::to_string(n_test) + " steps)");

    SplitSeries out;
    out.train = take_steps(s, 0, n_train);
    out.val = take_steps(s, n_train - lookback, n_train + n_val);
    out.test = take_steps(s, n_train + n_val - lookback, n);
    return out;
}

std::vector<WindowPair> make_windows(const MultivariateSeries& s, std::size_t lookback,
                                     std::size_t horizon, std::size_t stride) {
    if (lookback < 1 || horizon < 1) throw ConfigError("window lengths must be at least 1");
    if (stride < 1) throw ConfigError("stride must be at least 1");
    if (s.steps < lookback + horizon)
        throw ConfigError("series too short for windows: N=" + std::to_string(s.steps) +
                          ", L=" + std::to_string(lookback) + ", T=" + std::to_string(horizon));

    const std::size_t c = s.channels();
    const std::size_t count = (s.steps - lookback - horizon) / stride + 1;
    std::vector<WindowPair> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t o = w * stride;
        WindowPair p;
        p.channels = c;
        p.lookback = lookback;
        p.horizon = horizon;
        p.origin = o;
        p.x.resize(c * lookback);
        p.y.resize(c * horizon);
        for (std::size_t ci = 0; ci < c; ++ci) {
            for (std::size_t t = 0; t < lookback; ++t) p.x[ci * lookback + t] = s.at(ci, o + t);
            for (std::size_t t = 0; t < horizon; ++t)
                p.y[ci * horizon + t] = s.at(ci, o + lookback + t);
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::pair<WindowPair, NormState> instance_normalize(const WindowPair& w) {
    NormState norm;
    norm.mean.resize(w.channels);
    norm.stddev.resize(w.channels);
    WindowPair out = w;
    for (std::size_t c = 0; c < w.channels; ++c) {
        double m = 0.0;
        for (std::size_t t = 0; t < w.lookback; ++t) m += w.x[c * w.lookback + t];
        m /= static_cast<double>(w.lookback);
        double var = 0.0;
        for (std::size_t t = 0; t < w.lookback; ++t) {
            double d = w.x[c * w.lookback + t] - m;
            var += d * d;
        }
        var /= static_cast<double>(w.lookback);
        double sd = std::sqrt(var);
        if (sd < kStdFloor) sd = kStdFloor;
        norm.mean[c] = m;
        norm.stddev[c] = sd;
        for (std::size_t t = 0; t < w.lookback; ++t)
            out.x[c * w.lookback + t] = (w.x[c * w.lookback + t] - m) / sd;
        for (std::size_t t = 0; t < w.horizon; ++t)
            out.y[c * w.horizon + t] = (w.y[c * w.horizon + t] - m) / sd;
    }
    return {std::move(out), std::move(norm)};
}

std::vector<double> denormalize(const std::vector<double>& values, std::size_t channels,
                                const NormState& norm) {
    if (channels == 0 || values.size() % channels != 0)
        throw ContractError("denormalize: values not divisible into channels");
    const std::size_t k = values.size() / channels;
    std::vector<double> out(values.size());
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t t = 0; t < k; ++t)
            out[c * k + t] = values[c * k + t] * norm.stddev[c] + norm.mean[c];
    return out;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    Rng rng(mix_seed(seed, epoch));
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t b = 0; b < count; b += batch_size) {
        std::size_t e = std::min(count, b + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                             order.begin() + static_cast<std::ptrdiff_t>(e));
    }
    return batches;
}

}  // namespace reguider
