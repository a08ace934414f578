// training.hpp - Toy end-to-end MoE training on the labeled patch model.
//
// The model is deliberately small: a cosine router (initialized to the
// grouped-pooling weights, optionally learnable) in front of n linear
// classifiers. Dispatch is hard top-1 per the configured mode; gradients
// treat the discrete dispatch (and the argmax load fractions) as fixed and
// flow through gate values and expert parameters only. Dropped tokens
// contribute nothing.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "moelab/gating.hpp"
#include "moelab/losses.hpp"
#include "moelab/routing.hpp"
#include "moelab/synthetic.hpp"

namespace moelab {

struct RouterMode {
    RouteMode kind = RouteMode::Tcr;
    std::size_t capacity = 1;
    double theta = 0.7;  // hybrid only

    bool operator==(const RouterMode&) const = default;
};

struct ToyMoE {
    Matrix router_weights;                        // n x d
    std::vector<Matrix> expert_weights;           // per expert: n_classes x d
    std::vector<std::vector<double>> expert_bias; // per expert: n_classes
    bool router_learnable = false;
    RouterMode mode;

    std::size_t expert_count() const { return router_weights.rows; }
    std::size_t dim() const { return router_weights.cols; }
};

// Router rows = grouped-pooling weights, experts zero-initialized.
ToyMoE make_toy_moe(std::size_t d, std::size_t n, RouterMode mode, bool router_learnable);

// Class probabilities for one sample plus the dispatch plan used.
std::pair<std::vector<double>, DispatchPlan> forward(const ToyMoE& model,
                                                     const LabeledSample& sample);

enum class CapacityPolicyKind { Fixed, Adaptive };

struct CapacityPolicy {
    CapacityPolicyKind kind = CapacityPolicyKind::Fixed;
    double theta = 0.7;      // hybrid threshold for the adaptive probe
    double ema_alpha = 1.0;  // delta_max smoothing
};

struct AutoSwitch {
    bool enabled = false;
    double c_star = 0.0;
    std::size_t check_every = 10;
};

struct TrainConfig {
    std::size_t tokens_per_sample = 16;  // s
    std::size_t dim = 64;                // d
    std::size_t experts = 4;             // n
    std::size_t steps = 100;
    std::size_t batch_size = 8;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    // (step, mode) entries, steps strictly increasing, first entry at step 0.
    std::vector<std::pair<std::size_t, RouterMode>> mode_schedule;
    double alpha = 0.01;  // aux loss coefficient
    double mu = 0.0;      // locality loss coefficient
    CapacityPolicy capacity_policy;
    AutoSwitch auto_switch;
    bool router_learnable = false;
    NoiseKind noise_kind = NoiseKind::IsotropicSphere;
    double concentration = 0.0;
    double pattern_alignment = 1.0;
    std::uint64_t qhat_trials = 256;
    std::size_t node_count = 1;
    std::size_t local_node = 0;
    double divergence_limit = 1e6;

    void validate() const;
};

struct StepMetrics {
    std::size_t step = 0;
    double task_loss = 0.0;
    double aux_loss = 0.0;
    double loc_loss = 0.0;
    double dispatch_success = 0.0;
    std::size_t capacity = 0;
    std::string mode;
    double q_hat_max = 0.0;
};

struct MetricsLog {
    std::vector<StepMetrics> rows;

    void write_csv(std::ostream& out) const;
    bool operator==(const MetricsLog&) const = default;
};

bool operator==(const StepMetrics&, const StepMetrics&);

// Raised when the training loss exceeds the divergence limit or goes
// non-finite; carries whatever metrics were collected.
struct DivergenceError : std::runtime_error {
    DivergenceError(std::string msg, MetricsLog partial_log)
        : std::runtime_error(std::move(msg)), partial(std::move(partial_log)) {}
    MetricsLog partial;
};

MetricsLog train(const TrainConfig& cfg, ToyMoE* final_model = nullptr);

// Max relative error between analytic gradients and central finite
// differences, with dispatch and load fractions frozen at the base point.
double grad_check(const ToyMoE& model, const LabeledSample& sample, double h,
                  double alpha = 0.01);

// ECR with capacity 2*C* once every expert satisfies s * q_hat_i <= C*
// (inclusive); TCR at full capacity otherwise.
RouterMode switch_policy(const std::vector<double>& q_hat, std::size_t s, double c_star);

}  // namespace moelab
