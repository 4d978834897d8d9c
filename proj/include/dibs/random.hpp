#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dibs {

/// splitmix64 finalizer; used to derive decorrelated seeds from a master seed.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed for a named substream, e.g. (master, iteration, particle).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix64(master);
    s = mix64(s ^ a);
    s = mix64(s ^ b);
    s = mix64(s ^ c);
    return s;
}

// Seeded generator with explicit, portable draw procedures. Distributions are
// produced by fixed transforms of the uniform stream so that a seed pins the
// exact sequence independent of the standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on (0, 1); never returns exactly 0 or 1.
    double uniform() {
        const double u = (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; consumes exactly two uniforms per draw.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Logistic(0,1) by inverse CDF.
    double logistic() {
        const double u = uniform();
        return std::log(u / (1.0 - u));
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
    }

    /// Independent generator for a named child stream.
    Rng spawn(std::uint64_t stream) { return Rng(derive_seed(gen_(), stream)); }

private:
    std::mt19937_64 gen_;
};

}  // namespace dibs
