#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace affcorr {

// Deterministic random source. All distributions are implemented by hand on
// top of mt19937_64 so that streams are identical across standard libraries;
// std::uniform_int_distribution and friends are implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Marsaglia polar; the spare value is cached.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename V>
    void shuffle(V &v) {
        if (v.size() < 2) {
            return;
        }
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
            std::swap(v[i], v[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent substream seed from a base seed and a label, so the
// order in which subsystems are set up does not couple their streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

} // namespace affcorr
