// routing.hpp - Token-choice, expert-choice, and hybrid dispatch with capacity.
//
// Tie-breaking is "lower index wins" everywhere, which makes every plan a pure
// deterministic function of its inputs. "First-C" keeps the C smallest token
// indices (arrival order). Dropped tokens are recorded, never padded.

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "moelab/gating.hpp"

namespace moelab {

enum class RouteMode { Tcr, Ecr, Hybrid };

const char* route_mode_name(RouteMode mode);
RouteMode route_mode_from_name(const std::string& name);

struct DispatchPlan {
    RouteMode mode = RouteMode::Tcr;
    std::size_t capacity = 0;
    std::size_t token_count = 0;
    // per_expert[i]: token indices kept by expert i.
    //   TCR / hybrid: ascending token index. ECR: descending score.
    std::vector<std::vector<std::size_t>> per_expert;
    // (token index, intended expert), ascending by token index then expert.
    std::vector<std::pair<std::size_t, std::size_t>> dropped;
    // Tokens each expert ends up keeping (the hybrid's per-expert top-l*).
    std::vector<std::size_t> ell_star;

    std::size_t expert_count() const { return per_expert.size(); }
    std::size_t assigned_total() const;
    bool operator==(const DispatchPlan&) const = default;
};

// Each token proposes itself to its top-ell experts; each expert keeps the
// first `capacity` proposals in arrival order and drops the rest.
DispatchPlan route_tcr(const ScoreMatrix& scores, std::size_t ell, std::size_t capacity);

// Each expert keeps the top-min(capacity, s) tokens of its score column.
// Tokens may be kept by several experts or by none; nothing is "dropped".
DispatchPlan route_ecr(const ScoreMatrix& scores, std::size_t capacity);

// Stage 1: unbounded top-1 TCR. Stage 2: each expert ranks its tokens by the
// shifted score sigma = (delta+1)/2 and keeps the shortest prefix reaching
// theta * (its total sigma mass), capped at capacity_max. Cut tokens are
// recorded as dropped.
DispatchPlan route_hybrid(const ScoreMatrix& scores, std::size_t capacity_max, double theta);

struct CapacityEstimate {
    double c_min_real = 0.0;
    std::size_t c_effective = 1;
    double delta_max = 0.0;  // current EMA of the batch max affinity
    bool initialized = false;
};

// C_min = (1/n) * exp(d * delta^2 / (2 - delta^2)), rounded up and floored at 1.
CapacityEstimate capacity_lower_bound(std::size_t d, std::size_t n, double delta_max);

// Updates the delta_max EMA with this batch's max affinity (clamped to
// [0, 1-1e-6]), recomputes the bound, and caps the effective capacity by the
// largest hybrid prefix observed in the batch.
CapacityEstimate adaptive_capacity(const ScoreMatrix& scores, std::size_t d, double theta,
                                   const CapacityEstimate& prev, double ema_alpha);

}  // namespace moelab
