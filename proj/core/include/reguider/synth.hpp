#ifndef REGUIDER_SYNTH_HPP
#define REGUIDER_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "reguider/dataset.hpp"

namespace reguider {

// Sum-of-sinusoids generator with one optional regime shift (amplitudes and
// phases are redrawn at shift_at) plus Gaussian noise.
struct SynthSpec {
    std::size_t channels = 2;
    std::size_t length = 6000;
    std::vector<double> periods = {24.0, 96.0, 168.0};
    std::size_t shift_at = 0;  // 0 = no regime shift
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

MultivariateSeries generate_synth(const SynthSpec& spec);

// "synth:channels=2,n=6000,periods=24|96|168,shift=3000,noise=0.1,seed=7"
bool is_synth_spec(const std::string& s);
SynthSpec parse_synth_spec(const std::string& s);

// Dispatches between the synth: scheme and a CSV path.
MultivariateSeries load_dataset(const std::string& spec_or_path, bool csv_timestamp_column);

// Short label for report rows: "synth" or the file stem.
std::string dataset_label(const std::string& spec_or_path);

}  // namespace reguider

#endif
