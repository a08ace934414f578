#include "moelab/gating.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "moelab/rng.hpp"

namespace moelab {

GatingWeights grap_weights(std::size_t d, std::size_t n) {
    if (d == 0 || n == 0) throw std::invalid_argument("grap_weights: d and n must be positive");
    if (d % n != 0) {
        throw std::invalid_argument("grap_weights: expert count " + std::to_string(n) +
                                    " does not divide feature dim " + std::to_string(d));
    }
    const std::size_t p = d / n;
    GatingWeights gw;
    gw.group_width = p;
    gw.weights = Matrix(n, d, 0.0);
    const double v = 1.0 / static_cast<double>(p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) gw.weights(i, i * p + j) = v;
    }
    return gw;
}

ScoreMatrix affinity_scores(const TokenBatch& batch, const Matrix& weights) {
    const std::size_t s = batch.token_count();
    const std::size_t d = batch.dim();
    const std::size_t n = weights.rows;
    if (weights.cols != d) {
        throw std::invalid_argument("affinity_scores: weight dim " + std::to_string(weights.cols) +
                                    " != token dim " + std::to_string(d));
    }
    std::vector<double> wnorm(n);
    for (std::size_t i = 0; i < n; ++i) {
        wnorm[i] = norm(weights.row(i), d);
        if (wnorm[i] == 0.0) {
            throw std::invalid_argument("affinity_scores: zero-norm weight row at index " +
                                        std::to_string(i));
        }
    }
    ScoreMatrix out;
    out.scores = Matrix(s, n);
    for (std::size_t t = 0; t < s; ++t) {
        const double tn = norm(batch.tokens.row(t), d);
        if (tn == 0.0) {
            throw std::invalid_argument("affinity_scores: zero-norm token at index " +
                                        std::to_string(t));
        }
        for (std::size_t i = 0; i < n; ++i) {
            double c = dot(batch.tokens.row(t), weights.row(i), d) / (tn * wnorm[i]);
            out.scores(t, i) = std::clamp(c, -1.0, 1.0);
        }
    }
    return out;
}

ScoreMatrix affinity_scores(const TokenBatch& batch, const GatingWeights& gw) {
    return affinity_scores(batch, gw.weights);
}

Matrix gate_probabilities(const ScoreMatrix& scores, double noise_std, std::uint64_t seed) {
    if (noise_std < 0.0) throw std::invalid_argument("gate_probabilities: negative noise_std");
    const std::size_t s = scores.token_count();
    const std::size_t n = scores.expert_count();
    Matrix probs(s, n);
    CounterRng rng(seed);
    for (std::size_t t = 0; t < s; ++t) {
        double maxv = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            double logit = scores.scores(t, i);
            if (noise_std > 0.0) logit += noise_std * rng.gaussian();
            probs(t, i) = logit;
            maxv = std::max(maxv, logit);
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            probs(t, i) = std::exp(probs(t, i) - maxv);
            sum += probs(t, i);
        }
        for (std::size_t i = 0; i < n; ++i) probs(t, i) /= sum;
    }
    return probs;
}

}  // namespace moelab
