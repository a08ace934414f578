#include "moelab/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace moelab {

LoadStats load_stats(const Matrix& gate_probs, const DispatchPlan& plan) {
    const std::size_t s = gate_probs.rows;
    const std::size_t n = gate_probs.cols;
    if (plan.expert_count() != n) {
        throw std::invalid_argument("load_stats: plan has " + std::to_string(plan.expert_count()) +
                                    " experts, gate matrix has " + std::to_string(n));
    }
    if (plan.token_count != s) {
        throw std::invalid_argument("load_stats: plan token count mismatch");
    }
    if (s == 0) throw std::invalid_argument("load_stats: empty batch");

    LoadStats st;
    st.token_count = s;
    st.dispatch_fraction.assign(n, 0.0);
    st.mean_gate_prob.assign(n, 0.0);
    for (std::size_t t = 0; t < s; ++t) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (gate_probs(t, i) > gate_probs(t, best)) best = i;
        }
        st.dispatch_fraction[best] += 1.0;
        for (std::size_t i = 0; i < n; ++i) st.mean_gate_prob[i] += gate_probs(t, i);
    }
    for (std::size_t i = 0; i < n; ++i) {
        st.dispatch_fraction[i] /= static_cast<double>(s);
        st.mean_gate_prob[i] /= static_cast<double>(s);
    }
    return st;
}

double aux_loss(const LoadStats& stats, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("aux_loss: alpha must be nonnegative");
    const std::size_t n = stats.dispatch_fraction.size();
    if (stats.mean_gate_prob.size() != n) {
        throw std::invalid_argument("aux_loss: f and P length mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += stats.dispatch_fraction[i] * stats.mean_gate_prob[i];
    return alpha * static_cast<double>(n) * s;
}

NodeDistribution node_distribution(const DispatchPlan& plan,
                                   const std::vector<std::size_t>& expert_to_node,
                                   std::size_t node_count, std::size_t local_node) {
    if (expert_to_node.size() != plan.expert_count()) {
        throw std::invalid_argument("node_distribution: expert_to_node length mismatch");
    }
    if (local_node >= node_count) {
        throw std::invalid_argument("node_distribution: local_node out of range");
    }
    NodeDistribution nd;
    nd.current.assign(node_count, 0.0);
    nd.localized.assign(node_count, 0.0);
    nd.localized[local_node] = 1.0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < plan.expert_count(); ++i) {
        const std::size_t node = expert_to_node[i];
        if (node >= node_count) {
            throw std::invalid_argument("node_distribution: expert " + std::to_string(i) +
                                        " mapped to node " + std::to_string(node) +
                                        " >= node count " + std::to_string(node_count));
        }
        nd.current[node] += static_cast<double>(plan.per_expert[i].size());
        total += plan.per_expert[i].size();
    }
    if (total == 0) {
        throw std::invalid_argument("node_distribution: plan dispatched no tokens");
    }
    for (double& v : nd.current) v /= static_cast<double>(total);
    return nd;
}

std::vector<std::size_t> contiguous_expert_to_node(std::size_t n, std::size_t node_count) {
    if (n == 0 || node_count == 0) {
        throw std::invalid_argument("contiguous_expert_to_node: empty layout");
    }
    std::vector<std::size_t> map(n);
    for (std::size_t i = 0; i < n; ++i) map[i] = i * node_count / n;
    return map;
}

double locality_loss(const NodeDistribution& nd, double mu, double eps) {
    if (mu < 0.0) throw std::invalid_argument("locality_loss: mu must be nonnegative");
    if (!(eps > 0.0)) throw std::invalid_argument("locality_loss: eps must be positive");
    if (nd.current.size() != nd.localized.size()) {
        throw std::invalid_argument("locality_loss: distribution length mismatch");
    }
    double kl = 0.0;
    for (std::size_t j = 0; j < nd.current.size(); ++j) {
        const double c = nd.current[j];
        if (c > 0.0) kl += c * std::log(c / std::max(nd.localized[j], eps));
    }
    return mu * kl;
}

}  // namespace moelab
