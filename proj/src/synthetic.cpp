#include "moelab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "moelab/rng.hpp"

namespace moelab {

const char* noise_kind_name(NoiseKind kind) {
    return kind == NoiseKind::IsotropicSphere ? "isotropic" : "clustered";
}

NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "isotropic") return NoiseKind::IsotropicSphere;
    if (name == "clustered") return NoiseKind::Clustered;
    throw std::invalid_argument("unknown noise kind: " + name);
}

void PatternBank::validate() const {
    const std::size_t n = class_count();
    const std::size_t d = dim();
    if (n == 0 || d == 0) throw std::invalid_argument("pattern bank: empty");
    if (d % n != 0) throw std::invalid_argument("pattern bank: n must divide d");
    if (concentration < 0.0) {
        throw std::invalid_argument("pattern bank: concentration must be nonnegative");
    }
    const GatingWeights gw = grap_weights(d, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double nrm = norm(patterns.row(i), d);
        if (std::fabs(nrm - 1.0) > 1e-9) {
            throw std::invalid_argument("pattern bank: row " + std::to_string(i) +
                                        " is not unit norm");
        }
        TokenBatch one;
        one.tokens = Matrix(1, d);
        std::copy(patterns.row(i), patterns.row(i) + d, one.tokens.row(0));
        const ScoreMatrix sc = affinity_scores(one, gw);
        std::size_t best = 0;
        for (std::size_t j = 1; j < n; ++j) {
            if (sc.scores(0, j) > sc.scores(0, best)) best = j;
        }
        if (best != i) {
            throw std::invalid_argument("pattern bank: row " + std::to_string(i) +
                                        " argmaxes expert " + std::to_string(best));
        }
    }
}

namespace {

// Unit vector along expert g's slice: 1/sqrt(p) on coordinates [g*p, (g+1)*p).
void slice_direction(double* out, std::size_t d, std::size_t p, std::size_t g) {
    std::fill(out, out + d, 0.0);
    const double v = 1.0 / std::sqrt(static_cast<double>(p));
    for (std::size_t j = 0; j < p; ++j) out[g * p + j] = v;
}

void normalize_row(double* row, std::size_t d, const char* what, std::size_t index) {
    const double nrm = norm(row, d);
    if (nrm == 0.0) {
        throw std::runtime_error(std::string(what) + ": zero-norm row at index " +
                                 std::to_string(index));
    }
    for (std::size_t j = 0; j < d; ++j) row[j] /= nrm;
}

void sphere_point(CounterRng& rng, double* out, std::size_t d) {
    double nrm2;
    do {
        nrm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            out[j] = rng.gaussian();
            nrm2 += out[j] * out[j];
        }
    } while (nrm2 == 0.0);
    const double inv = 1.0 / std::sqrt(nrm2);
    for (std::size_t j = 0; j < d; ++j) out[j] *= inv;
}

}  // namespace

PatternBank aligned_pattern_bank(std::size_t d, std::size_t n, NoiseKind noise_kind,
                                 double concentration, double alignment) {
    if (n == 0 || d == 0 || d % n != 0) {
        throw std::invalid_argument("aligned_pattern_bank: need n >= 1 dividing d");
    }
    if (!(alignment > 0.0 && alignment <= 1.0)) {
        throw std::invalid_argument("aligned_pattern_bank: alignment must be in (0, 1]");
    }
    const std::size_t p = d / n;
    if (alignment < 1.0 && p < 2) {
        throw std::invalid_argument(
            "aligned_pattern_bank: partial alignment needs group width >= 2");
    }
    PatternBank bank;
    bank.noise_kind = noise_kind;
    bank.concentration = concentration;
    bank.patterns = Matrix(n, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = bank.patterns.row(i);
        slice_direction(row, d, p, i);
        if (alignment < 1.0) {
            // In-slice direction orthogonal to the slice mean: alternating signs
            // over an even number of coordinates.
            std::vector<double> ortho(d, 0.0);
            const std::size_t pairs = p / 2;
            const double v = 1.0 / std::sqrt(static_cast<double>(2 * pairs));
            for (std::size_t j = 0; j < 2 * pairs; ++j) {
                ortho[i * p + j] = (j % 2 == 0) ? v : -v;
            }
            const double residual = std::sqrt(1.0 - alignment * alignment);
            for (std::size_t j = 0; j < d; ++j) {
                row[j] = alignment * row[j] + residual * ortho[j];
            }
            normalize_row(row, d, "aligned_pattern_bank", i);
        }
    }
    return bank;
}

TokenBatch sample_isotropic(std::size_t s, std::size_t d, std::uint64_t seed) {
    if (s == 0 || d == 0) throw std::invalid_argument("sample_isotropic: s, d must be >= 1");
    TokenBatch batch;
    batch.tokens = Matrix(s, d);
    const CounterRng root(seed);
    for (std::size_t t = 0; t < s; ++t) {
        CounterRng rng = root.child(t);
        sphere_point(rng, batch.tokens.row(t), d);
    }
    return batch;
}

TokenBatch sample_clustered(std::size_t s, std::size_t d, std::size_t n, double concentration,
                            std::uint64_t seed) {
    if (s == 0 || d == 0) throw std::invalid_argument("sample_clustered: s, d must be >= 1");
    if (n == 0 || d % n != 0) throw std::invalid_argument("sample_clustered: need n dividing d");
    if (concentration < 0.0) {
        throw std::invalid_argument("sample_clustered: concentration must be nonnegative");
    }
    const std::size_t p = d / n;
    const std::size_t block = std::max<std::size_t>(1, (s + n - 1) / n);
    TokenBatch batch;
    batch.tokens = Matrix(s, d);
    std::vector<double> center(d);
    const CounterRng root(seed);
    for (std::size_t t = 0; t < s; ++t) {
        const std::size_t g = std::min(t / block, n - 1);
        slice_direction(center.data(), d, p, g);
        CounterRng rng = root.child(t);
        double* row = batch.tokens.row(t);
        sphere_point(rng, row, d);
        for (std::size_t j = 0; j < d; ++j) row[j] += concentration * center[j];
        normalize_row(row, d, "sample_clustered", t);
    }
    return batch;
}

Matrix correlation_matrix(const TokenBatch& batch) {
    const std::size_t s = batch.token_count();
    const std::size_t d = batch.dim();
    if (s < 2) throw std::invalid_argument("correlation_matrix: need at least 2 tokens");

    // Center and scale each row once, then correlations are plain dots.
    Matrix centered(s, d);
    for (std::size_t t = 0; t < s; ++t) {
        const double* src = batch.tokens.row(t);
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += src[j];
        mean /= static_cast<double>(d);
        double* dst = centered.row(t);
        double nrm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dst[j] = src[j] - mean;
            nrm2 += dst[j] * dst[j];
        }
        if (nrm2 == 0.0) {
            throw std::invalid_argument("correlation_matrix: zero-variance token at index " +
                                        std::to_string(t));
        }
        const double inv = 1.0 / std::sqrt(nrm2);
        for (std::size_t j = 0; j < d; ++j) dst[j] *= inv;
    }
    Matrix corr(s, s);
    for (std::size_t a = 0; a < s; ++a) {
        corr(a, a) = 1.0;
        for (std::size_t b = a + 1; b < s; ++b) {
            const double c = std::clamp(dot(centered.row(a), centered.row(b), d), -1.0, 1.0);
            corr(a, b) = c;
            corr(b, a) = c;
        }
    }
    return corr;
}

LabeledSample make_sample(std::size_t s, std::size_t d, const PatternBank& bank,
                          std::uint64_t seed) {
    if (bank.dim() != d) {
        throw std::invalid_argument("make_sample: bank dim " + std::to_string(bank.dim()) +
                                    " != requested dim " + std::to_string(d));
    }
    const std::size_t n = bank.class_count();
    const CounterRng root(seed);
    CounterRng meta = root.child(~0ull);

    LabeledSample sample;
    sample.disc_position = meta.below(s);
    sample.label = meta.below(n);
    sample.batch = bank.noise_kind == NoiseKind::IsotropicSphere
                       ? sample_isotropic(s, d, splitmix64(seed))
                       : sample_clustered(s, d, n, bank.concentration, splitmix64(seed));
    std::copy(bank.patterns.row(sample.label), bank.patterns.row(sample.label) + d,
              sample.batch.tokens.row(sample.disc_position));
    return sample;
}

FpEstimate estimate_fp_rate(const PatternBank& bank, const Matrix& weights,
                            std::uint64_t trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("estimate_fp_rate: trials must be >= 1");
    const std::size_t n = weights.rows;
    const std::size_t d = weights.cols;
    if (bank.dim() != d || bank.class_count() != n) {
        throw std::invalid_argument("estimate_fp_rate: bank/weights shape mismatch");
    }

    TokenBatch pattern_batch;
    pattern_batch.tokens = bank.patterns;
    const ScoreMatrix pattern_scores = affinity_scores(pattern_batch, weights);

    // Noise batch shares the generators above so q_hat measures the same
    // distribution make_sample draws from.
    const TokenBatch noise =
        bank.noise_kind == NoiseKind::IsotropicSphere
            ? sample_isotropic(trials, d, seed)
            : sample_clustered(trials, d, n, bank.concentration, seed);
    const ScoreMatrix noise_scores = affinity_scores(noise, weights);

    FpEstimate est;
    est.q_hat.assign(n, 0.0);
    est.std_error.assign(n, 0.0);
    for (std::uint64_t t = 0; t < trials; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            if (noise_scores.scores(t, i) > pattern_scores.scores(i, i)) est.q_hat[i] += 1.0;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        est.q_hat[i] /= static_cast<double>(trials);
        est.std_error[i] =
            std::sqrt(est.q_hat[i] * (1.0 - est.q_hat[i]) / static_cast<double>(trials));
    }
    return est;
}

FpEstimate estimate_fp_rate(const PatternBank& bank, const GatingWeights& gw,
                            std::uint64_t trials, std::uint64_t seed) {
    return estimate_fp_rate(bank, gw.weights, trials, seed);
}

}  // namespace moelab
