#ifndef REGUIDER_RNG_HPP
#define REGUIDER_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace reguider {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// value mappings below avoid std::*_distribution, whose sequences are
// implementation-defined, so streams replay identically everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1) with 53 bits of mantissa
    double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Box-Muller with a cached spare draw
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0.0) u1 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + stddev * (r * std::cos(a));
    }

    // Unbiased integer in [0, n) via rejection sampling.
    std::size_t bounded(std::size_t n) {
        if (n <= 1) return 0;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return static_cast<std::size_t>(x % n);
    }

    // Fisher-Yates; fully determined by the seed.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = bounded(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace reguider

#endif
