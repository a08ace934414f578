// losses.hpp - Load-balancing auxiliary loss and node-locality loss.

#pragma once

#include <cstddef>
#include <vector>

#include "moelab/matrix.hpp"
#include "moelab/routing.hpp"

namespace moelab {

struct LoadStats {
    std::vector<double> dispatch_fraction;  // f_i: fraction of tokens argmaxing expert i
    std::vector<double> mean_gate_prob;     // P_i: mean gate probability on expert i
    std::size_t token_count = 0;
};

// f from row argmax counts (ties to lower index), P from column means.
LoadStats load_stats(const Matrix& gate_probs, const DispatchPlan& plan);

// alpha * n * sum_i f_i * P_i.
double aux_loss(const LoadStats& stats, double alpha);

struct NodeDistribution {
    std::vector<double> current;    // D_c: realized traffic share per node
    std::vector<double> localized;  // D_l: target (fully local) share per node
};

// D_c from dispatched token counts per node; D_l is one-hot on local_node.
// expert_to_node[i] gives the node hosting expert i.
NodeDistribution node_distribution(const DispatchPlan& plan,
                                   const std::vector<std::size_t>& expert_to_node,
                                   std::size_t node_count, std::size_t local_node);

// Experts assigned to nodes in contiguous blocks: expert i -> node i*m/n.
std::vector<std::size_t> contiguous_expert_to_node(std::size_t n, std::size_t node_count);

// mu * KL(D_c || D_l) with 0*ln(0/x) := 0 and D_l floored at eps.
double locality_loss(const NodeDistribution& nd, double mu, double eps = 1e-8);

}  // namespace moelab
