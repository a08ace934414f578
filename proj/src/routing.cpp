#include "moelab/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace moelab {

const char* route_mode_name(RouteMode mode) {
    switch (mode) {
        case RouteMode::Tcr: return "tcr";
        case RouteMode::Ecr: return "ecr";
        case RouteMode::Hybrid: return "hybrid";
    }
    return "?";
}

RouteMode route_mode_from_name(const std::string& name) {
    if (name == "tcr") return RouteMode::Tcr;
    if (name == "ecr") return RouteMode::Ecr;
    if (name == "hybrid") return RouteMode::Hybrid;
    throw std::invalid_argument("unknown route mode: " + name);
}

std::size_t DispatchPlan::assigned_total() const {
    std::size_t total = 0;
    for (const auto& list : per_expert) total += list.size();
    return total;
}

namespace {

void sort_dropped(DispatchPlan& plan) {
    std::sort(plan.dropped.begin(), plan.dropped.end());
}

void fill_ell_star(DispatchPlan& plan) {
    plan.ell_star.resize(plan.per_expert.size());
    for (std::size_t i = 0; i < plan.per_expert.size(); ++i) {
        plan.ell_star[i] = plan.per_expert[i].size();
    }
}

// Indices of the top-ell entries of `row`, best first, ties to lower index.
std::vector<std::size_t> top_ell(const double* row, std::size_t n, std::size_t ell) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + ell, idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (row[a] != row[b]) return row[a] > row[b];
                          return a < b;
                      });
    idx.resize(ell);
    return idx;
}

}  // namespace

DispatchPlan route_tcr(const ScoreMatrix& scores, std::size_t ell, std::size_t capacity) {
    const std::size_t s = scores.token_count();
    const std::size_t n = scores.expert_count();
    if (ell < 1 || ell > n) {
        throw std::invalid_argument("route_tcr: ell must be in [1, n], got " + std::to_string(ell));
    }
    if (capacity < 1) throw std::invalid_argument("route_tcr: capacity must be >= 1");

    DispatchPlan plan;
    plan.mode = RouteMode::Tcr;
    plan.capacity = capacity;
    plan.token_count = s;
    plan.per_expert.assign(n, {});
    for (std::size_t t = 0; t < s; ++t) {
        for (std::size_t i : top_ell(scores.scores.row(t), n, ell)) {
            if (plan.per_expert[i].size() < capacity) {
                plan.per_expert[i].push_back(t);
            } else {
                plan.dropped.emplace_back(t, i);
            }
        }
    }
    sort_dropped(plan);
    fill_ell_star(plan);
    return plan;
}

DispatchPlan route_ecr(const ScoreMatrix& scores, std::size_t capacity) {
    const std::size_t s = scores.token_count();
    const std::size_t n = scores.expert_count();
    if (capacity < 1) throw std::invalid_argument("route_ecr: capacity must be >= 1");

    DispatchPlan plan;
    plan.mode = RouteMode::Ecr;
    plan.capacity = capacity;
    plan.token_count = s;
    plan.per_expert.assign(n, {});
    const std::size_t keep = std::min(capacity, s);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> idx(s);
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + keep, idx.end(),
                          [&](std::size_t a, std::size_t b) {
                              const double sa = scores.scores(a, i);
                              const double sb = scores.scores(b, i);
                              if (sa != sb) return sa > sb;
                              return a < b;
                          });
        idx.resize(keep);
        plan.per_expert[i] = std::move(idx);
    }
    fill_ell_star(plan);
    return plan;
}

DispatchPlan route_hybrid(const ScoreMatrix& scores, std::size_t capacity_max, double theta) {
    const std::size_t s = scores.token_count();
    if (capacity_max < 1) throw std::invalid_argument("route_hybrid: capacity_max must be >= 1");
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw std::invalid_argument("route_hybrid: theta must be in (0, 1]");
    }

    DispatchPlan plan = route_tcr(scores, 1, std::max<std::size_t>(s, 1));
    plan.mode = RouteMode::Hybrid;
    plan.capacity = capacity_max;
    for (std::size_t i = 0; i < plan.per_expert.size(); ++i) {
        auto& list = plan.per_expert[i];
        std::stable_sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
            const double sa = scores.scores(a, i);
            const double sb = scores.scores(b, i);
            if (sa != sb) return sa > sb;
            return a < b;
        });
        double total = 0.0;
        for (std::size_t t : list) total += (scores.scores(t, i) + 1.0) / 2.0;
        std::size_t prefix = 0;
        double cum = 0.0;
        while (prefix < list.size() && cum < theta * total) {
            cum += (scores.scores(list[prefix], i) + 1.0) / 2.0;
            ++prefix;
        }
        prefix = std::min(prefix, capacity_max);
        for (std::size_t k = prefix; k < list.size(); ++k) plan.dropped.emplace_back(list[k], i);
        list.resize(prefix);
        std::sort(list.begin(), list.end());  // canonical arrival order, like TCR
    }
    sort_dropped(plan);
    fill_ell_star(plan);
    return plan;
}

CapacityEstimate capacity_lower_bound(std::size_t d, std::size_t n, double delta_max) {
    if (d == 0 || n == 0) {
        throw std::invalid_argument("capacity_lower_bound: d and n must be positive");
    }
    if (!(delta_max >= 0.0 && delta_max < 1.0)) {
        throw std::invalid_argument("capacity_lower_bound: delta_max must be in [0, 1)");
    }
    const double d2 = delta_max * delta_max;
    CapacityEstimate est;
    est.c_min_real = std::exp(static_cast<double>(d) * d2 / (2.0 - d2)) / static_cast<double>(n);
    est.c_effective = static_cast<std::size_t>(std::max(1.0, std::ceil(est.c_min_real)));
    est.delta_max = delta_max;
    est.initialized = true;
    return est;
}

CapacityEstimate adaptive_capacity(const ScoreMatrix& scores, std::size_t d, double theta,
                                   const CapacityEstimate& prev, double ema_alpha) {
    if (!(ema_alpha > 0.0 && ema_alpha <= 1.0)) {
        throw std::invalid_argument("adaptive_capacity: ema_alpha must be in (0, 1]");
    }
    double batch_max = -1.0;
    for (double v : scores.scores.data) batch_max = std::max(batch_max, v);
    batch_max = std::clamp(batch_max, 0.0, 1.0 - 1e-6);

    const double delta = prev.initialized
                             ? ema_alpha * batch_max + (1.0 - ema_alpha) * prev.delta_max
                             : batch_max;
    CapacityEstimate est = capacity_lower_bound(d, scores.expert_count(),
                                                std::clamp(delta, 0.0, 1.0 - 1e-6));

    const DispatchPlan probe = route_hybrid(scores, std::max<std::size_t>(scores.token_count(), 1),
                                            theta);
    std::size_t max_ell = 0;
    for (std::size_t e : probe.ell_star) max_ell = std::max(max_ell, e);
    est.c_effective = std::max<std::size_t>(1, std::min(est.c_effective, max_ell));
    return est;
}

}  // namespace moelab
