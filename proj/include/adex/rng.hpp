#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace adex {

// splitmix64 mixing step (Steele, Lea, Flood 2014). Used for seed expansion
// and for deriving independent substream seeds.
inline std::uint64_t splitmix64_next(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives a stream seed from a master seed and a stream index. Distinct
// indices give statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t x = master ^ (0xa0761d6478bd642fULL * (stream + 1));
    splitmix64_next(x);
    return splitmix64_next(x);
}

// Deterministic random stream: xoshiro256++ core with hand-rolled variate
// transforms. The standard library's distributions are implementation
// defined, so every draw here is produced by code we own; identical seeds
// give bit-identical streams, and the full generator state is four words,
// which makes snapshots cheap.
class Rng {
public:
    using state_type = std::array<std::uint64_t, 4>;

    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t x = seed;
        for (auto& w : state_) w = splitmix64_next(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0,1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0,1]; safe as a log() argument.
    double next_double_pos() { return 1.0 - next_double(); }

    // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Standard normal via Box-Muller. The sine companion is discarded so the
    // generator carries no cached value between calls.
    double normal() {
        const double u1 = next_double_pos();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // Gamma(shape, 1) via Marsaglia and Tsang (2000); shapes below one use
    // the boost trick Gamma(a) = Gamma(a+1) * U^(1/a).
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
        if (shape < 1.0) {
            const double u = next_double_pos();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = next_double_pos();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Beta(a, b) as the ratio of two Gamma variates.
    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    const state_type& state() const { return state_; }

    void set_state(const state_type& s) {
        bool all_zero = true;
        for (auto w : s) all_zero = all_zero && w == 0;
        if (all_zero) throw std::invalid_argument("Rng: all-zero state is invalid");
        state_ = s;
    }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    static constexpr double two_pi = 6.283185307179586476925286766559;

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    state_type state_{};
};

}  // namespace adex
