#include "moelab/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "moelab/rng.hpp"

namespace moelab {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) + b);
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double maxv = -std::numeric_limits<double>::infinity();
    for (double v : logits) maxv = std::max(maxv, v);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - maxv);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

DispatchPlan route_by_mode(const ScoreMatrix& scores, const RouterMode& mode) {
    switch (mode.kind) {
        case RouteMode::Tcr: return route_tcr(scores, 1, mode.capacity);
        case RouteMode::Ecr: return route_ecr(scores, mode.capacity);
        case RouteMode::Hybrid: return route_hybrid(scores, mode.capacity, mode.theta);
    }
    throw std::logic_error("route_by_mode: unreachable");
}

struct ForwardTrace {
    ScoreMatrix scores;
    Matrix gates;
    DispatchPlan plan;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // dispatched (token, expert)
    std::vector<double> logits;
    std::vector<double> probs;
};

ForwardTrace compute_trace(const ToyMoE& model, const LabeledSample& sample,
                           const RouterMode& mode, const DispatchPlan* fixed_plan) {
    const std::size_t n = model.expert_count();
    const std::size_t d = model.dim();

    ForwardTrace tr;
    tr.scores = affinity_scores(sample.batch, model.router_weights);
    tr.gates = gate_probabilities(tr.scores, 0.0, 0);
    tr.plan = fixed_plan ? *fixed_plan : route_by_mode(tr.scores, mode);
    for (std::size_t i = 0; i < tr.plan.expert_count(); ++i) {
        for (std::size_t t : tr.plan.per_expert[i]) tr.pairs.emplace_back(t, i);
    }

    tr.logits.assign(n, 0.0);
    if (!tr.pairs.empty()) {
        for (const auto& [t, i] : tr.pairs) {
            const double g = tr.gates(t, i);
            const double* x = sample.batch.tokens.row(t);
            const Matrix& w = model.expert_weights[i];
            for (std::size_t c = 0; c < n; ++c) {
                tr.logits[c] += g * (dot(w.row(c), x, d) + model.expert_bias[i][c]);
            }
        }
        const double inv = 1.0 / static_cast<double>(tr.pairs.size());
        for (double& v : tr.logits) v *= inv;
    }
    tr.probs = softmax(tr.logits);
    return tr;
}

struct Gradients {
    Matrix router;                       // n x d
    std::vector<Matrix> expert_weights;  // per expert
    std::vector<std::vector<double>> expert_bias;

    explicit Gradients(const ToyMoE& model)
        : router(model.expert_count(), model.dim()) {
        for (std::size_t i = 0; i < model.expert_count(); ++i) {
            expert_weights.emplace_back(model.expert_count(), model.dim());
            expert_bias.emplace_back(model.expert_count(), 0.0);
        }
    }

    void scale(double c) {
        for (double& v : router.data) v *= c;
        for (auto& m : expert_weights)
            for (double& v : m.data) v *= c;
        for (auto& b : expert_bias)
            for (double& v : b) v *= c;
    }

    void add(const Gradients& other) {
        for (std::size_t k = 0; k < router.data.size(); ++k) router.data[k] += other.router.data[k];
        for (std::size_t i = 0; i < expert_weights.size(); ++i) {
            for (std::size_t k = 0; k < expert_weights[i].data.size(); ++k) {
                expert_weights[i].data[k] += other.expert_weights[i].data[k];
            }
            for (std::size_t k = 0; k < expert_bias[i].size(); ++k) {
                expert_bias[i][k] += other.expert_bias[i][k];
            }
        }
    }
};

// Cross-entropy + alpha * aux with the dispatch plan and the argmax load
// fractions frozen. Locality is count-based and constant under a frozen plan,
// so it is excluded here and added by the caller for reporting.
double frozen_loss(const ToyMoE& model, const LabeledSample& sample, const DispatchPlan& plan,
                   const std::vector<double>& f_fixed, double alpha) {
    const ForwardTrace tr = compute_trace(model, sample, model.mode, &plan);
    double loss = -std::log(std::max(tr.probs[sample.label], 1e-300));
    const std::size_t n = model.expert_count();
    const std::size_t s = sample.batch.token_count();
    double fp = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double col = 0.0;
        for (std::size_t t = 0; t < s; ++t) col += tr.gates(t, j);
        fp += f_fixed[j] * (col / static_cast<double>(s));
    }
    return loss + alpha * static_cast<double>(n) * fp;
}

// Analytic gradients of frozen_loss. CE flows through expert parameters and
// gate values; aux flows through the mean gate probability path.
Gradients backward(const ToyMoE& model, const LabeledSample& sample, const ForwardTrace& tr,
                   const std::vector<double>& f_fixed, double alpha) {
    const std::size_t n = model.expert_count();
    const std::size_t d = model.dim();
    const std::size_t s = sample.batch.token_count();
    Gradients g(model);

    std::vector<double> dz(tr.probs);
    dz[sample.label] -= 1.0;

    Matrix dgate(s, n);  // dL/d gates
    const double aux_coeff = alpha * static_cast<double>(n) / static_cast<double>(s);
    for (std::size_t t = 0; t < s; ++t) {
        for (std::size_t j = 0; j < n; ++j) dgate(t, j) = aux_coeff * f_fixed[j];
    }

    if (!tr.pairs.empty()) {
        const double inv = 1.0 / static_cast<double>(tr.pairs.size());
        for (const auto& [t, i] : tr.pairs) {
            const double* x = sample.batch.tokens.row(t);
            const double gate = tr.gates(t, i);
            double dot_dz_e = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                const double de = inv * gate * dz[c];
                for (std::size_t j = 0; j < d; ++j) {
                    g.expert_weights[i](c, j) += de * x[j];
                }
                g.expert_bias[i][c] += de;
                dot_dz_e +=
                    dz[c] * (dot(model.expert_weights[i].row(c), x, d) + model.expert_bias[i][c]);
            }
            dgate(t, i) += inv * dot_dz_e;
        }
    }

    if (model.router_learnable) {
        for (std::size_t t = 0; t < s; ++t) {
            // softmax backward on row t
            double weighted = 0.0;
            for (std::size_t k = 0; k < n; ++k) weighted += dgate(t, k) * tr.gates(t, k);
            const double* x = sample.batch.tokens.row(t);
            const double xn = norm(x, d);
            for (std::size_t j = 0; j < n; ++j) {
                const double dscore = tr.gates(t, j) * (dgate(t, j) - weighted);
                if (dscore == 0.0) continue;
                const double* w = model.router_weights.row(j);
                const double wn = norm(w, d);
                const double delta = tr.scores.scores(t, j);
                const double a = 1.0 / (xn * wn);
                const double b = delta / (wn * wn);
                for (std::size_t k = 0; k < d; ++k) {
                    g.router(j, k) += dscore * (a * x[k] - b * w[k]);
                }
            }
        }
    }
    return g;
}

std::vector<double> fixed_dispatch_fractions(const Matrix& gates) {
    const std::size_t s = gates.rows;
    const std::size_t n = gates.cols;
    std::vector<double> f(n, 0.0);
    for (std::size_t t = 0; t < s; ++t) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (gates(t, i) > gates(t, best)) best = i;
        }
        f[best] += 1.0;
    }
    for (double& v : f) v /= static_cast<double>(s);
    return f;
}

}  // namespace

ToyMoE make_toy_moe(std::size_t d, std::size_t n, RouterMode mode, bool router_learnable) {
    ToyMoE model;
    model.router_weights = grap_weights(d, n).weights;
    model.router_learnable = router_learnable;
    model.mode = mode;
    for (std::size_t i = 0; i < n; ++i) {
        model.expert_weights.emplace_back(n, d, 0.0);
        model.expert_bias.emplace_back(n, 0.0);
    }
    return model;
}

std::pair<std::vector<double>, DispatchPlan> forward(const ToyMoE& model,
                                                     const LabeledSample& sample) {
    ForwardTrace tr = compute_trace(model, sample, model.mode, nullptr);
    return {std::move(tr.probs), std::move(tr.plan)};
}

void TrainConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (tokens_per_sample < 1 || dim < 1 || experts < 1) {
        throw std::invalid_argument("train config: s, d, n must be >= 1");
    }
    if (dim % experts != 0) throw std::invalid_argument("train config: n must divide d");
    if (learning_rate < 0.0) throw std::invalid_argument("train config: negative learning rate");
    if (alpha < 0.0 || mu < 0.0) {
        throw std::invalid_argument("train config: loss coefficients must be nonnegative");
    }
    if (mode_schedule.empty()) throw std::invalid_argument("train config: empty mode schedule");
    if (mode_schedule.front().first != 0) {
        throw std::invalid_argument("train config: mode schedule must start at step 0");
    }
    for (std::size_t k = 1; k < mode_schedule.size(); ++k) {
        if (mode_schedule[k].first <= mode_schedule[k - 1].first) {
            throw std::invalid_argument("train config: schedule steps must be strictly increasing");
        }
    }
    if (node_count < 1 || local_node >= node_count) {
        throw std::invalid_argument("train config: bad node layout");
    }
    if (qhat_trials < 1) throw std::invalid_argument("train config: qhat_trials must be >= 1");
}

MetricsLog train(const TrainConfig& cfg, ToyMoE* final_model) {
    cfg.validate();
    const std::size_t s = cfg.tokens_per_sample;
    const std::size_t n = cfg.experts;
    const std::size_t d = cfg.dim;

    const PatternBank bank = aligned_pattern_bank(d, n, cfg.noise_kind, cfg.concentration,
                                                  cfg.pattern_alignment);
    const std::vector<std::size_t> expert_to_node = contiguous_expert_to_node(n, cfg.node_count);

    ToyMoE model = make_toy_moe(d, n, cfg.mode_schedule.front().second, cfg.router_learnable);
    CapacityEstimate cap_est;  // used by the adaptive policy, EMA across samples
    MetricsLog log;
    std::size_t schedule_pos = 0;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        while (schedule_pos < cfg.mode_schedule.size() &&
               cfg.mode_schedule[schedule_pos].first == step) {
            model.mode = cfg.mode_schedule[schedule_pos].second;
            ++schedule_pos;
        }

        FpEstimate q = estimate_fp_rate(bank, model.router_weights, cfg.qhat_trials,
                                        derive_seed(cfg.seed, 0x9E57ull, step));
        if (cfg.auto_switch.enabled && step > 0 && step % cfg.auto_switch.check_every == 0) {
            model.mode = switch_policy(q.q_hat, s, cfg.auto_switch.c_star);
        }

        Gradients total(model);
        double task_loss = 0.0, aux_total = 0.0, loc_total = 0.0, success = 0.0;
        std::size_t capacity_used = 0;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const LabeledSample sample =
                make_sample(s, d, bank, derive_seed(cfg.seed, step + 1, b));

            RouterMode mode = model.mode;
            if (cfg.capacity_policy.kind == CapacityPolicyKind::Adaptive) {
                const ScoreMatrix pre = affinity_scores(sample.batch, model.router_weights);
                cap_est = adaptive_capacity(pre, d, cfg.capacity_policy.theta, cap_est,
                                            cfg.capacity_policy.ema_alpha);
                mode.capacity = cap_est.c_effective;
            }
            const ForwardTrace tr = compute_trace(model, sample, mode, nullptr);
            capacity_used = mode.capacity;

            task_loss += -std::log(std::max(tr.probs[sample.label], 1e-300));
            const std::vector<double> f = fixed_dispatch_fractions(tr.gates);
            const LoadStats stats = load_stats(tr.gates, tr.plan);
            aux_total += aux_loss(stats, cfg.alpha);
            if (cfg.mu > 0.0 && tr.plan.assigned_total() > 0) {
                loc_total += locality_loss(
                    node_distribution(tr.plan, expert_to_node, cfg.node_count, cfg.local_node),
                    cfg.mu);
            }
            const auto& kept = tr.plan.per_expert[sample.label];
            if (std::find(kept.begin(), kept.end(), sample.disc_position) != kept.end()) {
                success += 1.0;
            }
            Gradients g = backward(model, sample, tr, f, cfg.alpha);
            total.add(g);
        }
        const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
        task_loss *= inv_b;
        aux_total *= inv_b;
        loc_total *= inv_b;
        success *= inv_b;
        total.scale(inv_b);

        double q_max = 0.0;
        for (double v : q.q_hat) q_max = std::max(q_max, v);

        StepMetrics m;
        m.step = step;
        m.task_loss = task_loss;
        m.aux_loss = aux_total;
        m.loc_loss = loc_total;
        m.dispatch_success = success;
        m.capacity = capacity_used;
        m.mode = route_mode_name(model.mode.kind);
        m.q_hat_max = q_max;
        log.rows.push_back(m);

        const double full = task_loss + aux_total + loc_total;
        if (!std::isfinite(full) || full > cfg.divergence_limit) {
            throw DivergenceError("training diverged at step " + std::to_string(step) +
                                      ": loss = " + std::to_string(full),
                                  log);
        }

        const double lr = cfg.learning_rate;
        if (model.router_learnable) {
            for (std::size_t k = 0; k < model.router_weights.data.size(); ++k) {
                model.router_weights.data[k] -= lr * total.router.data[k];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < model.expert_weights[i].data.size(); ++k) {
                model.expert_weights[i].data[k] -= lr * total.expert_weights[i].data[k];
            }
            for (std::size_t k = 0; k < n; ++k) {
                model.expert_bias[i][k] -= lr * total.expert_bias[i][k];
            }
        }
    }
    if (final_model) *final_model = std::move(model);
    return log;
}

double grad_check(const ToyMoE& model, const LabeledSample& sample, double h, double alpha) {
    if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");
    const ForwardTrace tr = compute_trace(model, sample, model.mode, nullptr);
    const std::vector<double> f = fixed_dispatch_fractions(tr.gates);
    const Gradients analytic = backward(model, sample, tr, f, alpha);

    ToyMoE probe = model;
    double max_err = 0.0;
    auto check_param = [&](double* value, double grad) {
        const double saved = *value;
        *value = saved + h;
        const double up = frozen_loss(probe, sample, tr.plan, f, alpha);
        *value = saved - h;
        const double down = frozen_loss(probe, sample, tr.plan, f, alpha);
        *value = saved;
        const double numeric = (up - down) / (2.0 * h);
        if (std::fabs(grad) < 1e-8 && std::fabs(numeric) < 1e-8) return;
        const double err = std::fabs(grad - numeric) /
                           std::max(std::max(std::fabs(grad), std::fabs(numeric)), 1e-6);
        max_err = std::max(max_err, err);
    };

    if (model.router_learnable) {
        for (std::size_t k = 0; k < probe.router_weights.data.size(); ++k) {
            check_param(&probe.router_weights.data[k], analytic.router.data[k]);
        }
    }
    for (std::size_t i = 0; i < model.expert_count(); ++i) {
        for (std::size_t k = 0; k < probe.expert_weights[i].data.size(); ++k) {
            check_param(&probe.expert_weights[i].data[k], analytic.expert_weights[i].data[k]);
        }
        for (std::size_t k = 0; k < probe.expert_bias[i].size(); ++k) {
            check_param(&probe.expert_bias[i][k], analytic.expert_bias[i][k]);
        }
    }
    return max_err;
}

RouterMode switch_policy(const std::vector<double>& q_hat, std::size_t s, double c_star) {
    if (!(c_star > 0.0)) throw std::invalid_argument("switch_policy: C* must be positive");
    for (double q : q_hat) {
        if (!(q >= 0.0 && q <= 1.0)) {
            throw std::invalid_argument("switch_policy: q_hat entries must be in [0, 1]");
        }
    }
    bool all_low = true;
    for (double q : q_hat) {
        if (static_cast<double>(s) * q > c_star) {
            all_low = false;
            break;
        }
    }
    RouterMode mode;
    if (all_low) {
        mode.kind = RouteMode::Ecr;
        mode.capacity = static_cast<std::size_t>(std::max(1.0, std::ceil(2.0 * c_star)));
    } else {
        mode.kind = RouteMode::Tcr;
        mode.capacity = s;
    }
    return mode;
}

bool operator==(const StepMetrics& a, const StepMetrics& b) {
    return a.step == b.step && a.task_loss == b.task_loss && a.aux_loss == b.aux_loss &&
           a.loc_loss == b.loc_loss && a.dispatch_success == b.dispatch_success &&
           a.capacity == b.capacity && a.mode == b.mode && a.q_hat_max == b.q_hat_max;
}

void MetricsLog::write_csv(std::ostream& out) const {
    out << "step,task_loss,aux_loss,loc_loss,dispatch_success,capacity,mode,q_hat_max\n";
    char buf[512];
    for (const StepMetrics& m : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%zu,%s,%.17g\n", m.step,
                      m.task_loss, m.aux_loss, m.loc_loss, m.dispatch_success, m.capacity,
                      m.mode.c_str(), m.q_hat_max);
        out << buf;
    }
}

}  // namespace moelab
