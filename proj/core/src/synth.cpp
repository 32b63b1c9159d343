#include "reguider/synth.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>

#include "reguider/rng.hpp"

namespace reguider {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double parse_double_field(const std::string& key, const std::string& v) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ParseError("synth spec: bad value \"" + v + "\" for " + key);
    return out;
}

std::uint64_t parse_u64_field(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ParseError("synth spec: bad value \"" + v + "\" for " + key);
    return out;
}

}  // namespace

MultivariateSeries generate_synth(const SynthSpec& spec) {
    if (spec.channels < 1 || spec.length < 2) throw ConfigError("synth: need channels >= 1, n >= 2");
    if (spec.periods.empty()) throw ConfigError("synth: need at least one period");

    MultivariateSeries s;
    s.steps = spec.length;
    for (std::size_t c = 0; c < spec.channels; ++c) s.names.push_back("ch" + std::to_string(c));
    s.values.resize(spec.channels * spec.length);

    Rng rng(mix_seed(spec.seed, 0x5EED));
    const std::size_t k = spec.periods.size();

    // two parameter regimes per channel; the second applies from shift_at on
    std::vector<double> amp(2 * spec.channels * k), phase(2 * spec.channels * k);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < spec.channels; ++c)
            for (std::size_t i = 0; i < k; ++i) {
                amp[(r * spec.channels + c) * k + i] = rng.uniform(0.4, 1.6);
                phase[(r * spec.channels + c) * k + i] = rng.uniform(0.0, kTwoPi);
            }

    for (std::size_t t = 0; t < spec.length; ++t) {
        const std::size_t regime = (spec.shift_at > 0 && t >= spec.shift_at) ? 1 : 0;
        for (std::size_t c = 0; c < spec.channels; ++c) {
            double v = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t p = (regime * spec.channels + c) * k + i;
                v += amp[p] * std::sin(kTwoPi * static_cast<double>(t) / spec.periods[i] +
                                       phase[p]);
            }
            if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
            s.at(c, t) = v;
        }
    }
    return s;
}

bool is_synth_spec(const std::string& s) { return s.rfind("synth:", 0) == 0 || s == "synth"; }

SynthSpec parse_synth_spec(const std::string& s) {
    if (!is_synth_spec(s)) throw ParseError("not a synth spec: " + s);
    SynthSpec spec;
    if (s == "synth") return spec;
    std::string body = s.substr(6);
    std::size_t start = 0;
    while (start < body.size()) {
        std::size_t comma = body.find(',', start);
        std::string item = body.substr(start, comma == std::string::npos ? comma : comma - start);
        start = comma == std::string::npos ? body.size() : comma + 1;
        if (item.empty()) continue;
        std::size_t eq = item.find('=');
        if (eq == std::string::npos) throw ParseError("synth spec: expected key=value, got " + item);
        std::string key = item.substr(0, eq), val = item.substr(eq + 1);
        if (key == "channels")
            spec.channels = static_cast<std::size_t>(parse_u64_field(key, val));
        else if (key == "n" || key == "length")
            spec.length = static_cast<std::size_t>(parse_u64_field(key, val));
        else if (key == "shift")
            spec.shift_at = static_cast<std::size_t>(parse_u64_field(key, val));
        else if (key == "noise")
            spec.noise_std = parse_double_field(key, val);
        else if (key == "seed")
            spec.seed = parse_u64_field(key, val);
        else if (key == "periods") {
            spec.periods.clear();
            std::size_t b = 0;
            while (b <= val.size()) {
                std::size_t bar = val.find('|', b);
                std::string p = val.substr(b, bar == std::string::npos ? bar : bar - b);
                if (!p.empty()) spec.periods.push_back(parse_double_field(key, p));
                if (bar == std::string::npos) break;
                b = bar + 1;
            }
            if (spec.periods.empty()) throw ParseError("synth spec: empty period list");
        } else {
            throw ParseError("synth spec: unknown key " + key);
        }
    }
    return spec;
}

MultivariateSeries load_dataset(const std::string& spec_or_path, bool csv_timestamp_column) {
    if (is_synth_spec(spec_or_path)) return generate_synth(parse_synth_spec(spec_or_path));
    return load_csv(spec_or_path, csv_timestamp_column);
}

std::string dataset_label(const std::string& spec_or_path) {
    if (is_synth_spec(spec_or_path)) return "synth";
    return std::filesystem::path(spec_or_path).stem().string();
}

}  // namespace reguider
