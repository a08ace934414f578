// rng.hpp - Counter-based RNG with keyed substreams.
//
// Every random draw in the project flows through CounterRng. A generator is
// identified by (seed, stream); the stream id lets callers hand out one
// independent substream per trial / sample / purpose, so parallel workers
// produce bit-identical results regardless of scheduling. The core mixing
// function is SplitMix64.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace moelab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(splitmix64(splitmix64(seed) ^ splitmix64(~stream))), counter_(0) {}

    // Derive an independent substream; child(i) != child(j) for i != j.
    CounterRng child(std::uint64_t stream) const {
        CounterRng r(0);
        r.key_ = splitmix64(key_ ^ splitmix64(stream * 0xD1B54A32D192ED03ull + 1));
        r.counter_ = 0;
        return r;
    }

    std::uint64_t next_u64() { return splitmix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ull); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n >= 1. Lemire-style multiply-shift (biased by
    // less than 2^-64, acceptable for simulation work and fully deterministic).
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller; second value cached.
    double gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // u1 == 0 would give log(0); nudge to the smallest representable draw.
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    // Binomial(m, p) draw, exact for the full parameter range.
    // Small means use CDF inversion; large means use Hormann's BTRS rejection.
    std::uint64_t binomial(std::uint64_t m, double p) {
        if (m == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return m;
        if (p > 0.5) return m - binomial_impl(m, 1.0 - p);
        return binomial_impl(m, p);
    }

  private:
    std::uint64_t binomial_impl(std::uint64_t m, double p) {
        const double mean = static_cast<double>(m) * p;
        if (mean < 30.0) return binomial_inversion(m, p);
        return binomial_btrs(m, p);
    }

    std::uint64_t binomial_inversion(std::uint64_t m, double p) {
        const double odds = p / (1.0 - p);
        double pmf = std::pow(1.0 - p, static_cast<double>(m));
        double cdf = pmf;
        const double u = uniform01();
        std::uint64_t k = 0;
        while (u > cdf && k < m) {
            ++k;
            pmf *= odds * static_cast<double>(m - k + 1) / static_cast<double>(k);
            cdf += pmf;
        }
        return k;
    }

    // BTRS (Hormann 1993), valid for m*p >= 10 and p <= 0.5.
    std::uint64_t binomial_btrs(std::uint64_t m, double p) {
        const double md = static_cast<double>(m);
        const double spq = std::sqrt(md * p * (1.0 - p));
        const double b = 1.15 + 2.53 * spq;
        const double a = -0.0873 + 0.0248 * b + 0.01 * p;
        const double c = md * p + 0.5;
        const double vr = 0.92 - 4.2 / b;
        const double alpha = (2.83 + 5.1 / b) * spq;
        const double lpq = std::log(p / (1.0 - p));
        const double mode = std::floor((md + 1.0) * p);
        const double h = std::lgamma(mode + 1.0) + std::lgamma(md - mode + 1.0);
        for (;;) {
            const double u = uniform01() - 0.5;
            double v = uniform01();
            const double us = 0.5 - std::fabs(u);
            const double kd = std::floor((2.0 * a / us + b) * u + c);
            if (kd < 0.0 || kd > md) continue;
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kd);
            v = std::log(v * alpha / (a / (us * us) + b));
            const double bound =
                h - std::lgamma(kd + 1.0) - std::lgamma(md - kd + 1.0) + (kd - mode) * lpq;
            if (v <= bound) return static_cast<std::uint64_t>(kd);
        }
    }

    std::uint64_t key_;
    std::uint64_t counter_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace moelab
