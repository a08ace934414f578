// synthetic.hpp - Token-feature generators and the labeled patch data model.
//
// Two noise families: uniform on the unit sphere (normalized Gaussian), and
// clustered around the per-expert slice directions with a concentration knob
// (0 degenerates to the sphere). A labeled sample plants one discriminative
// pattern at a uniform position; the rest is noise. estimate_fp_rate measures
// how often a noise token outscores the pattern for its expert.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moelab/gating.hpp"

namespace moelab {

enum class NoiseKind { IsotropicSphere, Clustered };

const char* noise_kind_name(NoiseKind kind);
NoiseKind noise_kind_from_name(const std::string& name);

struct PatternBank {
    Matrix patterns;  // n x d, unit rows; row i is the class-i pattern
    NoiseKind noise_kind = NoiseKind::IsotropicSphere;
    double concentration = 0.0;  // cluster alignment strength (clustered noise)

    std::size_t class_count() const { return patterns.rows; }
    std::size_t dim() const { return patterns.cols; }

    // Unit-norm rows, and pattern i argmaxes expert i under GrAP weights.
    void validate() const;
};

// Patterns supported on their expert's slice with cos(o_i, w_i) = alignment.
// alignment = 1 gives the exact slice directions.
PatternBank aligned_pattern_bank(std::size_t d, std::size_t n, NoiseKind noise_kind,
                                 double concentration, double alignment = 1.0);

// s rows drawn uniformly from the unit sphere S^{d-1}.
TokenBatch sample_isotropic(std::size_t s, std::size_t d, std::uint64_t seed);

// Token t = normalize(concentration * center_g + sphere_noise), where g is
// t's contiguous block (block size ~ s/n) and center_g is the unit vector
// along expert g's slice direction.
TokenBatch sample_clustered(std::size_t s, std::size_t d, std::size_t n, double concentration,
                            std::uint64_t seed);

// Pearson correlation between token rows: s x s, symmetric, unit diagonal.
// Throws on a zero-variance row.
Matrix correlation_matrix(const TokenBatch& batch);

struct LabeledSample {
    TokenBatch batch;
    std::size_t label = 0;          // class / expert index y
    std::size_t disc_position = 0;  // row holding the discriminative pattern
};

// Position ~ Unif[s], label ~ Unif[n]; that row is o_label, the rest noise.
LabeledSample make_sample(std::size_t s, std::size_t d, const PatternBank& bank,
                          std::uint64_t seed);

struct FpEstimate {
    std::vector<double> q_hat;      // per-expert false-positive rate
    std::vector<double> std_error;
};

// q_hat[i] = fraction of noise draws whose affinity with row i of `weights`
// exceeds the pattern's own affinity cos(o_i, w_i).
FpEstimate estimate_fp_rate(const PatternBank& bank, const Matrix& weights,
                            std::uint64_t trials, std::uint64_t seed);
FpEstimate estimate_fp_rate(const PatternBank& bank, const GatingWeights& gw,
                            std::uint64_t trials, std::uint64_t seed);

}  // namespace moelab
