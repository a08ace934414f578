// gating.hpp - Grouped-average-pooling gate weights and token-expert affinity.
//
// Expert i owns the contiguous feature slice [i*p, (i+1)*p) of the d-dim token
// feature, p = d/n. Its gating row averages that slice, so rows of different
// experts have disjoint support and are exactly orthogonal. The affinity of a
// token and an expert is the cosine between the token feature and the gating
// row; gate probabilities are a row-wise softmax over affinities.

#pragma once

#include <cstdint>
#include "moelab/matrix.hpp"

namespace moelab {

struct TokenBatch {
    Matrix tokens;  // s x d

    std::size_t token_count() const { return tokens.rows; }
    std::size_t dim() const { return tokens.cols; }
};

struct GatingWeights {
    Matrix weights;          // n x d, row i is 1/p on its slice, 0 elsewhere
    std::size_t group_width = 0;  // p = d/n

    std::size_t expert_count() const { return weights.rows; }
    std::size_t dim() const { return weights.cols; }
};

struct ScoreMatrix {
    Matrix scores;  // s x n, entries in [-1, 1]

    std::size_t token_count() const { return scores.rows; }
    std::size_t expert_count() const { return scores.cols; }
};

// Group-average-pooling weights: row i = 1/p on slice i. Requires n | d.
GatingWeights grap_weights(std::size_t d, std::size_t n);

// Cosine affinity between every token row and every weight row.
// Throws on a zero-norm token row, naming its index.
ScoreMatrix affinity_scores(const TokenBatch& batch, const Matrix& weights);
ScoreMatrix affinity_scores(const TokenBatch& batch, const GatingWeights& gw);

// Row-wise softmax of (scores + N(0, noise_std^2) noise). noise_std = 0 is
// deterministic and seed-independent.
Matrix gate_probabilities(const ScoreMatrix& scores, double noise_std, std::uint64_t seed);

}  // namespace moelab
