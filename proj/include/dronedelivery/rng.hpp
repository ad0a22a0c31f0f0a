#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dd {

// Seeded random stream with platform-independent distributions.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The <random> distributions are not, so the transforms below are
// written out by hand; golden logs depend on them being bit-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Independent stream for a named subsystem, derived from a master seed.
    static Rng stream(std::uint64_t seed, std::string_view name);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53 bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; the second variate of each pair is cached.
    double normal(double mean, double sigma);

    // Knuth product-of-uniforms; fine for the small means used per tick.
    std::uint32_t poisson(double mean);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace dd
