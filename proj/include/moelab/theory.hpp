// theory.hpp - Dispatch-success probabilities for TCR and ECR routing.
//
// Model: a sample holds s tokens, one of which is class-discriminative with
// position uniform on [s] and class uniform on [n]. Under token choice, the
// discriminative token reaches its expert with probability p_i and competes
// for capacity with the irrelevant tokens routed before it, whose count is
// Binomial(k-1, 1/n). Under expert choice, expert i keeps the token unless at
// least C irrelevant tokens outscore it, their count being Binomial(s-1, q_i).
//
// Exact values use the closed binomial-CDF forms; Monte-Carlo estimators
// simulate the same processes on per-trial substreams and agree with the
// exact values to sampling error. Closed-form tail bounds on both success
// rates are provided together with their regime-validity flags.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace moelab {

struct SimSpec {
    std::size_t tokens = 1;       // s
    std::size_t experts = 1;      // n
    std::size_t capacity = 1;     // C
    std::vector<double> true_positive;   // p_i, one per expert, in [1/n, 1]
    std::vector<double> false_positive;  // q_i, one per expert, in [0, 1]
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument naming the violated precondition.
    void validate() const;
    double sum_true_positive() const;
};

struct TheoremBounds {
    double tcr_lower = 0.0;      // C * sum(p) / (5s)
    double tcr_upper = 0.0;      // 10 * C * sum(p) / s
    double ecr_upper_tail = 0.0; // (1/n) * sum_i exp(-(s-1) q_i / 8)
    double ecr_lower_tail = 0.0; // 1 - exp(-3C/16)
    bool tcr_lower_valid = false;  // requires C >= 48
    bool ecr_upper_valid = false;  // requires C <= (s-1) q_i / 2 + 1 for all i
    bool ecr_lower_valid = false;  // requires C >= 2 (s-1) q_i for all i
};

struct SuccessEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    std::optional<double> exact;
    std::optional<TheoremBounds> bounds;
};

// (1/(ns)) * sum_i p_i * sum_{k=1..s} BinCDF(C-1; k-1, 1/n). Requires s <= 1e5.
double tcr_success_exact(const SimSpec& spec);

// (1/n) * sum_i BinCDF(C-1; s-1, q_i).
double ecr_success_exact(const SimSpec& spec);

// Simulation counterparts; deterministic per seed, trials run on independent
// counter-based substreams so the result is identical for any worker count.
SuccessEstimate tcr_success_mc(const SimSpec& spec);
SuccessEstimate ecr_success_mc(const SimSpec& spec);

TheoremBounds theorem_bounds(const SimSpec& spec);

struct ChernoffTails {
    double lower_tail = 0.0;  // P(X <= E - lambda) <= exp(-lambda^2 / (2E))
    double upper_tail = 0.0;  // P(X >= E + lambda) <= exp(-lambda^2 / (2(E + lambda/3)))
};

ChernoffTails chernoff_tails(double expectation, double lambda);

}  // namespace moelab
