#include "moelab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <string>
#include <thread>

#include "moelab/rng.hpp"
#include "moelab/stats.hpp"

namespace moelab {

void SimSpec::validate() const {
    if (tokens < 1) throw std::invalid_argument("spec: tokens (s) must be >= 1");
    if (experts < 1) throw std::invalid_argument("spec: experts (n) must be >= 1");
    if (capacity < 1) throw std::invalid_argument("spec: capacity (C) must be >= 1");
    if (true_positive.size() != experts) {
        throw std::invalid_argument("spec: need one true-positive probability per expert");
    }
    if (false_positive.size() != experts) {
        throw std::invalid_argument("spec: need one false-positive probability per expert");
    }
    const double floor = 1.0 / static_cast<double>(experts);
    for (std::size_t i = 0; i < experts; ++i) {
        if (!(true_positive[i] >= floor - 1e-12 && true_positive[i] <= 1.0)) {
            throw std::invalid_argument("spec: p[" + std::to_string(i) +
                                        "] outside [1/n, 1]");
        }
        if (!(false_positive[i] >= 0.0 && false_positive[i] <= 1.0)) {
            throw std::invalid_argument("spec: q[" + std::to_string(i) + "] outside [0, 1]");
        }
    }
}

double SimSpec::sum_true_positive() const {
    double s = 0.0;
    for (double p : true_positive) s += p;
    return s;
}

namespace {

void check_shape(const SimSpec& spec, bool needs_p, bool needs_q) {
    if (spec.tokens < 1 || spec.experts < 1 || spec.capacity < 1) {
        throw std::invalid_argument("spec: s, n, C must all be >= 1");
    }
    if (needs_p && spec.true_positive.size() != spec.experts) {
        throw std::invalid_argument("spec: need one true-positive probability per expert");
    }
    if (needs_q && spec.false_positive.size() != spec.experts) {
        throw std::invalid_argument("spec: need one false-positive probability per expert");
    }
}

}  // namespace

double tcr_success_exact(const SimSpec& spec) {
    check_shape(spec, true, false);
    if (spec.tokens > 100000) {
        throw std::invalid_argument("tcr_success_exact: s > 1e5 not supported");
    }
    const auto s = static_cast<std::int64_t>(spec.tokens);
    const auto c = static_cast<std::int64_t>(spec.capacity);
    const double inv_n = 1.0 / static_cast<double>(spec.experts);

    // sum over k of P(fewer than C competitors arrived before position k);
    // the first C positions contribute 1 each.
    double position_sum = static_cast<double>(std::min(s, c));
    for (std::int64_t k = c + 1; k <= s; ++k) {
        const double term = binom_cdf(c - 1, k - 1, inv_n);
        position_sum += term;
        if (term < 1e-18) break;  // CDF is decreasing in k; the rest is negligible
    }
    return spec.sum_true_positive() * position_sum /
           (static_cast<double>(spec.experts) * static_cast<double>(spec.tokens));
}

double ecr_success_exact(const SimSpec& spec) {
    check_shape(spec, false, true);
    const auto s = static_cast<std::int64_t>(spec.tokens);
    const auto c = static_cast<std::int64_t>(spec.capacity);
    double total = 0.0;
    for (double q : spec.false_positive) total += binom_cdf(c - 1, s - 1, q);
    return total / static_cast<double>(spec.experts);
}

namespace {

// Runs `trials` Bernoulli experiments on per-trial substreams, split across
// threads; the success count is an integer sum, so the result is bit-stable
// for any worker count.
template <typename TrialFn>
SuccessEstimate run_trials(std::uint64_t trials, std::uint64_t seed, TrialFn&& trial) {
    if (trials < 1) throw std::invalid_argument("mc: trials must be >= 1");
    const CounterRng root(seed);
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                       trials < 4096 ? 1 : 8));
    std::vector<std::future<std::uint64_t>> parts;
    const std::uint64_t chunk = (trials + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::uint64_t lo = w * chunk;
        const std::uint64_t hi = std::min(trials, lo + chunk);
        if (lo >= hi) break;
        parts.push_back(std::async(std::launch::async, [&, lo, hi] {
            std::uint64_t hits = 0;
            for (std::uint64_t t = lo; t < hi; ++t) {
                CounterRng rng = root.child(t);
                if (trial(rng)) ++hits;
            }
            return hits;
        }));
    }
    std::uint64_t hits = 0;
    for (auto& part : parts) hits += part.get();

    SuccessEstimate est;
    est.estimate = static_cast<double>(hits) / static_cast<double>(trials);
    est.std_error =
        std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(trials));
    return est;
}

}  // namespace

SuccessEstimate tcr_success_mc(const SimSpec& spec) {
    check_shape(spec, true, false);
    const double inv_n = 1.0 / static_cast<double>(spec.experts);
    return run_trials(spec.trials, spec.seed, [&](CounterRng& rng) {
        const std::uint64_t k = rng.below(spec.tokens) + 1;  // position, 1-based
        const std::uint64_t i = rng.below(spec.experts);     // class
        if (!rng.bernoulli(spec.true_positive[i])) return false;
        const std::uint64_t competitors = rng.binomial(k - 1, inv_n);
        return competitors < spec.capacity;
    });
}

SuccessEstimate ecr_success_mc(const SimSpec& spec) {
    check_shape(spec, false, true);
    return run_trials(spec.trials, spec.seed, [&](CounterRng& rng) {
        const std::uint64_t i = rng.below(spec.experts);
        const std::uint64_t outscored = rng.binomial(spec.tokens - 1, spec.false_positive[i]);
        return outscored <= spec.capacity - 1;
    });
}

TheoremBounds theorem_bounds(const SimSpec& spec) {
    check_shape(spec, true, true);
    const double s = static_cast<double>(spec.tokens);
    const double c = static_cast<double>(spec.capacity);
    const double n = static_cast<double>(spec.experts);
    const double sum_p = spec.sum_true_positive();

    TheoremBounds b;
    b.tcr_lower = c * sum_p / (5.0 * s);
    b.tcr_upper = 10.0 * c * sum_p / s;
    b.tcr_lower_valid = spec.capacity >= 48;

    double upper_sum = 0.0;
    bool upper_ok = true;
    bool lower_ok = true;
    for (double q : spec.false_positive) {
        upper_sum += std::exp(-(s - 1.0) * q / 8.0);
        if (!(c <= (s - 1.0) * q / 2.0 + 1.0)) upper_ok = false;
        if (!(c >= 2.0 * (s - 1.0) * q)) lower_ok = false;
    }
    b.ecr_upper_tail = upper_sum / n;
    b.ecr_lower_tail = 1.0 - std::exp(-3.0 * c / 16.0);
    b.ecr_upper_valid = upper_ok;
    b.ecr_lower_valid = lower_ok;
    return b;
}

ChernoffTails chernoff_tails(double expectation, double lambda) {
    if (expectation < 0.0) {
        throw std::invalid_argument("chernoff_tails: expectation must be nonnegative");
    }
    if (!(lambda > 0.0)) throw std::invalid_argument("chernoff_tails: lambda must be positive");
    ChernoffTails t;
    t.lower_tail = expectation == 0.0
                       ? 0.0
                       : std::exp(-lambda * lambda / (2.0 * expectation));
    t.upper_tail = std::exp(-lambda * lambda / (2.0 * (expectation + lambda / 3.0)));
    return t;
}

}  // namespace moelab
