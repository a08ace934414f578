#include "moelab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "moelab/io.hpp"
#include "moelab/losses.hpp"
#include "moelab/rng.hpp"
#include "moelab/training.hpp"

namespace moelab {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitDivergence = 4;

// Everything needed to reproduce a run, echoed as canonical key=value pairs.
using ConfigEcho = std::map<std::string, std::string>;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> parse_prob_list(const std::string& text, std::size_t n,
                                    const std::string& what) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            vals.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw std::invalid_argument(what + ": cannot parse '" + cell + "'");
        }
    }
    if (vals.size() == 1) vals.assign(n, vals[0]);
    if (vals.size() != n) {
        throw std::invalid_argument(what + ": expected 1 or " + std::to_string(n) +
                                    " comma-separated values");
    }
    return vals;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
    std::vector<std::size_t> vals;
    if (text.empty()) return vals;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            const double v = std::stod(cell);
            if (v < 0 || v != std::floor(v)) throw std::invalid_argument("not an index");
            vals.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw std::invalid_argument(what + ": cannot parse '" + cell + "'");
        }
    }
    return vals;
}

// "0:tcr:64;300:ecr:8;400:hybrid:16:0.7" -> mode schedule entries.
std::vector<std::pair<std::size_t, RouterMode>> parse_schedule(const std::string& text) {
    std::vector<std::pair<std::size_t, RouterMode>> sched;
    std::stringstream ss(text);
    std::string entry;
    while (std::getline(ss, entry, ';')) {
        std::vector<std::string> parts;
        std::stringstream es(entry);
        std::string p;
        while (std::getline(es, p, ':')) parts.push_back(p);
        if (parts.size() < 3 || parts.size() > 4) {
            throw std::invalid_argument("schedule: entry '" + entry +
                                        "' must be step:mode:capacity[:theta]");
        }
        RouterMode mode;
        mode.kind = route_mode_from_name(parts[1]);
        const std::size_t step = static_cast<std::size_t>(std::stoull(parts[0]));
        mode.capacity = static_cast<std::size_t>(std::stoull(parts[2]));
        if (parts.size() == 4) mode.theta = std::stod(parts[3]);
        sched.emplace_back(step, mode);
    }
    return sched;
}

std::string hash_params_hex(const ToyMoE& model) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over parameter bytes
    auto feed = [&h](const double* p, std::size_t count) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < count * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    };
    feed(model.router_weights.data.data(), model.router_weights.data.size());
    for (const auto& w : model.expert_weights) feed(w.data.data(), w.data.size());
    for (const auto& b : model.expert_bias) feed(b.data(), b.size());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void emit_report(const std::string& command, const ConfigEcho& echo, std::uint64_t seed,
                 const json& payload, const json& measurements, double wall_s,
                 const std::string& out_path, std::ostream& out) {
    json report;
    report["command"] = command;
    report["version"] = kArtifactVersion;
    report["seed"] = seed;
    report["config"] = echo;
    report["payload"] = payload;
    if (!measurements.is_null()) report["measurements"] = measurements;
    report["wall_time_s"] = wall_s;
    if (out_path.empty()) {
        out << report.dump(2) << "\n";
    } else {
        std::ofstream f(out_path);
        if (!f) throw InputError(out_path + ": cannot open for writing");
        f << report.dump(2) << "\n";
    }
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string router;
    bool exact = false, mc = false, bounds = false;
    std::size_t s = 2, n = 2, c = 1;
    std::string p_text, q_text;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 0;
    std::string out_path;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    Timer timer;
    if (a.router != "tcr" && a.router != "ecr") {
        throw std::invalid_argument("simulate: router must be tcr or ecr");
    }
    if (!a.exact && !a.mc && !a.bounds) {
        throw std::invalid_argument("simulate: request at least one of --exact, --mc, --bounds");
    }
    SimSpec spec;
    spec.tokens = a.s;
    spec.experts = a.n;
    spec.capacity = a.c;
    spec.trials = a.trials;
    spec.seed = a.seed;
    spec.true_positive = a.p_text.empty()
                             ? std::vector<double>(a.n, 1.0 / static_cast<double>(a.n))
                             : parse_prob_list(a.p_text, a.n, "simulate --p");
    spec.false_positive = a.q_text.empty() ? std::vector<double>(a.n, 0.0)
                                           : parse_prob_list(a.q_text, a.n, "simulate --q");
    if (a.mc && spec.trials < 1) throw std::invalid_argument("simulate: trials must be >= 1");
    spec.validate();

    json payload;
    payload["router"] = a.router;
    payload["spec"] = spec_to_json(spec);
    if (a.exact) {
        payload["exact"] = a.router == "tcr" ? tcr_success_exact(spec) : ecr_success_exact(spec);
    }
    if (a.mc) {
        const SuccessEstimate est =
            a.router == "tcr" ? tcr_success_mc(spec) : ecr_success_mc(spec);
        payload["mc"] = {{"estimate", est.estimate}, {"std_error", est.std_error}};
    }
    if (a.bounds) payload["bounds"] = bounds_to_json(theorem_bounds(spec));

    ConfigEcho echo{{"router", a.router},
                    {"exact", a.exact ? "true" : "false"},
                    {"mc", a.mc ? "true" : "false"},
                    {"bounds", a.bounds ? "true" : "false"},
                    {"s", std::to_string(a.s)},
                    {"n", std::to_string(a.n)},
                    {"c", std::to_string(a.c)},
                    {"trials", std::to_string(a.trials)},
                    {"seed", std::to_string(a.seed)}};
    if (!a.p_text.empty()) echo["p"] = a.p_text;
    if (!a.q_text.empty()) echo["q"] = a.q_text;
    emit_report("simulate", echo, a.seed, payload, json(), timer.seconds(), a.out_path, out);
    return kExitOk;
}

// ------------------------------------------------------------------- route

struct RouteArgs {
    std::string input;
    std::size_t experts = 4;
    std::string mode = "tcr";
    std::size_t ell = 1;
    double capacity = 0;      // 0 -> defaults to token count
    double capacity_max = 0;  // hybrid cap, 0 -> token count
    double theta = 0.7;
    double noise_std = 0.0;
    double alpha = 0.01;
    double mu = 1.0;
    std::size_t nodes = 1;
    std::size_t local_node = 0;
    std::uint64_t seed = 0;
    std::string out_path;
};

std::size_t to_capacity(double v, std::size_t fallback, const char* what) {
    if (v == 0) return fallback;
    if (!(v >= 1.0)) throw std::invalid_argument(std::string(what) + " must be >= 1");
    return v >= 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(std::ceil(v));
}

int cmd_route(const RouteArgs& a, std::ostream& out) {
    Timer timer;
    const TokenBatch batch = load_token_file(a.input);
    const GatingWeights gw = grap_weights(batch.dim(), a.experts);
    const ScoreMatrix scores = affinity_scores(batch, gw);
    const Matrix gates = gate_probabilities(scores, a.noise_std, a.seed);

    const std::size_t s = batch.token_count();
    DispatchPlan plan;
    const RouteMode kind = route_mode_from_name(a.mode);
    if (kind == RouteMode::Tcr) {
        plan = route_tcr(scores, a.ell, to_capacity(a.capacity, s, "--c"));
    } else if (kind == RouteMode::Ecr) {
        plan = route_ecr(scores, to_capacity(a.capacity, s, "--c"));
    } else {
        plan = route_hybrid(scores, to_capacity(a.capacity_max, s, "--cmax"), a.theta);
    }

    const LoadStats stats = load_stats(gates, plan);
    double loc = 0.0;
    if (plan.assigned_total() > 0) {
        loc = locality_loss(node_distribution(plan, contiguous_expert_to_node(a.experts, a.nodes),
                                              a.nodes, a.local_node),
                            a.mu);
    }

    json payload;
    payload["plan"] = plan_to_json(plan);
    payload["load_stats"] = {{"f", stats.dispatch_fraction}, {"P", stats.mean_gate_prob}};
    payload["aux_loss"] = aux_loss(stats, a.alpha);
    payload["locality_loss"] = loc;

    ConfigEcho echo{{"input", a.input},
                    {"experts", std::to_string(a.experts)},
                    {"mode", a.mode},
                    {"ell", std::to_string(a.ell)},
                    {"c", fmt_double(a.capacity)},
                    {"cmax", fmt_double(a.capacity_max)},
                    {"theta", fmt_double(a.theta)},
                    {"noise-std", fmt_double(a.noise_std)},
                    {"alpha", fmt_double(a.alpha)},
                    {"mu", fmt_double(a.mu)},
                    {"nodes", std::to_string(a.nodes)},
                    {"local-node", std::to_string(a.local_node)},
                    {"seed", std::to_string(a.seed)}};
    emit_report("route", echo, a.seed, payload, json(), timer.seconds(), a.out_path, out);
    return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::size_t s = 16, d = 64, n = 4;
    std::size_t steps = 50, batch_size = 8;
    double lr = 0.1;
    std::uint64_t seed = 0;
    std::string mode = "tcr";
    std::size_t capacity = 0;  // 0 -> s
    double theta = 0.7;
    std::string schedule;  // overrides mode/capacity when present
    double alpha = 0.01, mu = 0.0;
    std::string capacity_policy = "fixed";
    double policy_theta = 0.7, ema_alpha = 1.0;
    bool auto_switch = false;
    double c_star = 4.0;
    std::size_t check_every = 10;
    bool router_learnable = false;
    std::string noise = "isotropic";
    double concentration = 0.0;
    double alignment = 1.0;
    std::uint64_t qhat_trials = 256;
    std::size_t nodes = 1, local_node = 0;
    std::string metrics_out;
    std::string out_path;
};

TrainConfig to_train_config(const TrainArgs& a) {
    TrainConfig cfg;
    cfg.tokens_per_sample = a.s;
    cfg.dim = a.d;
    cfg.experts = a.n;
    cfg.steps = a.steps;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.seed = a.seed;
    cfg.alpha = a.alpha;
    cfg.mu = a.mu;
    cfg.router_learnable = a.router_learnable;
    cfg.noise_kind = noise_kind_from_name(a.noise);
    cfg.concentration = a.concentration;
    cfg.pattern_alignment = a.alignment;
    cfg.qhat_trials = a.qhat_trials;
    cfg.node_count = a.nodes;
    cfg.local_node = a.local_node;
    if (a.capacity_policy == "fixed") {
        cfg.capacity_policy.kind = CapacityPolicyKind::Fixed;
    } else if (a.capacity_policy == "adaptive") {
        cfg.capacity_policy.kind = CapacityPolicyKind::Adaptive;
    } else {
        throw std::invalid_argument("train: capacity-policy must be fixed or adaptive");
    }
    cfg.capacity_policy.theta = a.policy_theta;
    cfg.capacity_policy.ema_alpha = a.ema_alpha;
    cfg.auto_switch.enabled = a.auto_switch;
    cfg.auto_switch.c_star = a.c_star;
    cfg.auto_switch.check_every = a.check_every;
    if (!a.schedule.empty()) {
        cfg.mode_schedule = parse_schedule(a.schedule);
    } else {
        RouterMode mode;
        mode.kind = route_mode_from_name(a.mode);
        mode.capacity = a.capacity == 0 ? a.s : a.capacity;
        mode.theta = a.theta;
        cfg.mode_schedule = {{0, mode}};
    }
    return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    Timer timer;
    const TrainConfig cfg = to_train_config(a);
    cfg.validate();

    ToyMoE model = make_toy_moe(cfg.dim, cfg.experts, cfg.mode_schedule.front().second,
                                cfg.router_learnable);
    const std::string initial_hash = hash_params_hex(model);

    MetricsLog log;
    bool diverged = false;
    std::string divergence_msg;
    try {
        log = train(cfg, &model);
    } catch (const DivergenceError& e) {
        log = e.partial;
        diverged = true;
        divergence_msg = e.what();
    }
    if (!a.metrics_out.empty()) {
        std::ofstream f(a.metrics_out);
        if (!f) throw InputError(a.metrics_out + ": cannot open for writing");
        log.write_csv(f);
    }

    json payload;
    payload["steps_completed"] = log.rows.size();
    payload["initial_params_hash"] = initial_hash;
    payload["final_params_hash"] = hash_params_hex(model);
    if (!log.rows.empty()) {
        const StepMetrics& last = log.rows.back();
        payload["final"] = {{"task_loss", last.task_loss},
                            {"aux_loss", last.aux_loss},
                            {"loc_loss", last.loc_loss},
                            {"dispatch_success", last.dispatch_success},
                            {"capacity", last.capacity},
                            {"mode", last.mode},
                            {"q_hat_max", last.q_hat_max}};
    }
    if (diverged) payload["diverged"] = divergence_msg;

    ConfigEcho echo{{"s", std::to_string(a.s)},
                    {"d", std::to_string(a.d)},
                    {"n", std::to_string(a.n)},
                    {"steps", std::to_string(a.steps)},
                    {"batch-size", std::to_string(a.batch_size)},
                    {"lr", fmt_double(a.lr)},
                    {"seed", std::to_string(a.seed)},
                    {"mode", a.mode},
                    {"capacity", std::to_string(a.capacity)},
                    {"theta", fmt_double(a.theta)},
                    {"alpha", fmt_double(a.alpha)},
                    {"mu", fmt_double(a.mu)},
                    {"capacity-policy", a.capacity_policy},
                    {"policy-theta", fmt_double(a.policy_theta)},
                    {"ema-alpha", fmt_double(a.ema_alpha)},
                    {"auto-switch", a.auto_switch ? "true" : "false"},
                    {"c-star", fmt_double(a.c_star)},
                    {"check-every", std::to_string(a.check_every)},
                    {"router-learnable", a.router_learnable ? "true" : "false"},
                    {"noise", a.noise},
                    {"concentration", fmt_double(a.concentration)},
                    {"alignment", fmt_double(a.alignment)},
                    {"qhat-trials", std::to_string(a.qhat_trials)},
                    {"nodes", std::to_string(a.nodes)},
                    {"local-node", std::to_string(a.local_node)}};
    if (!a.schedule.empty()) echo["schedule"] = a.schedule;
    emit_report("train", echo, a.seed, payload, json(), timer.seconds(), a.out_path, out);
    return diverged ? kExitDivergence : kExitOk;
}

// ---------------------------------------------------------------- features

struct FeaturesArgs {
    std::string kind = "isotropic";
    std::size_t s = 64, d = 512, n = 4;
    double concentration = 0.0;
    std::uint64_t seed = 0;
    std::string csv_out;
    std::string out_path;
};

int cmd_features(const FeaturesArgs& a, std::ostream& out) {
    Timer timer;
    const NoiseKind kind = noise_kind_from_name(a.kind);
    const TokenBatch batch = kind == NoiseKind::IsotropicSphere
                                 ? sample_isotropic(a.s, a.d, a.seed)
                                 : sample_clustered(a.s, a.d, a.n, a.concentration, a.seed);
    const Matrix corr = correlation_matrix(batch);
    if (!a.csv_out.empty()) {
        std::ofstream f(a.csv_out);
        if (!f) throw InputError(a.csv_out + ": cannot open for writing");
        save_matrix_csv(corr, f);
    }
    double abs_sum = 0.0;
    for (std::size_t r = 0; r < corr.rows; ++r) {
        for (std::size_t c = 0; c < corr.cols; ++c) {
            if (r != c) abs_sum += std::fabs(corr(r, c));
        }
    }
    const double denom = static_cast<double>(corr.rows) * (corr.rows - 1);

    json payload;
    payload["kind"] = a.kind;
    payload["s"] = a.s;
    payload["d"] = a.d;
    payload["n"] = a.n;
    payload["concentration"] = a.concentration;
    payload["mean_abs_offdiag_correlation"] = denom > 0 ? abs_sum / denom : 0.0;

    ConfigEcho echo{{"kind", a.kind},
                    {"s", std::to_string(a.s)},
                    {"d", std::to_string(a.d)},
                    {"n", std::to_string(a.n)},
                    {"concentration", fmt_double(a.concentration)},
                    {"seed", std::to_string(a.seed)}};
    emit_report("features", echo, a.seed, payload, json(), timer.seconds(), a.out_path, out);
    return kExitOk;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
    std::string s_list = "256,1024";
    std::string n_list = "4,8";
    std::string c_list = "16";
    std::size_t reps = 5;
    double theta = 0.7;
    std::uint64_t seed = 0;
    std::string out_path;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    Timer timer;
    if (a.reps < 1) throw std::invalid_argument("bench: --reps must be >= 1");
    const auto s_vals = parse_size_list(a.s_list, "bench --s-list");
    const auto n_vals = parse_size_list(a.n_list, "bench --n-list");
    const auto c_vals = parse_size_list(a.c_list, "bench --c-list");

    json cells = json::array();
    json timings = json::array();
    for (std::size_t s : s_vals) {
        for (std::size_t n : n_vals) {
            for (std::size_t c : c_vals) {
                if (s == 0 || n == 0 || c == 0) {
                    throw std::invalid_argument("bench: grid values must be >= 1");
                }
                ScoreMatrix scores;
                scores.scores = Matrix(s, n);
                CounterRng rng(splitmix64(a.seed) ^ splitmix64(s * 1315423911u + n * 2654435761u +
                                                               c));
                for (double& v : scores.scores.data) v = 2.0 * rng.uniform01() - 1.0;

                for (const char* mode : {"tcr", "ecr", "hybrid"}) {
                    DispatchPlan plan;
                    std::vector<double> times;
                    for (std::size_t r = 0; r < a.reps; ++r) {
                        Timer t;
                        if (std::string(mode) == "tcr") {
                            plan = route_tcr(scores, 1, c);
                        } else if (std::string(mode) == "ecr") {
                            plan = route_ecr(scores, c);
                        } else {
                            plan = route_hybrid(scores, c, a.theta);
                        }
                        times.push_back(t.seconds());
                    }
                    std::sort(times.begin(), times.end());
                    const double median = times[times.size() / 2];
                    cells.push_back({{"s", s},
                                     {"n", n},
                                     {"c", c},
                                     {"mode", mode},
                                     {"kept", plan.assigned_total()},
                                     {"dropped", plan.dropped.size()}});
                    timings.push_back({{"s", s},
                                       {"n", n},
                                       {"c", c},
                                       {"mode", mode},
                                       {"median_seconds", median},
                                       {"tokens_per_second",
                                        median > 0 ? static_cast<double>(s) / median : 0.0}});
                }
            }
        }
    }

    json payload;
    payload["reps"] = a.reps;
    payload["cells"] = cells;
    json measurements;
    measurements["timings"] = timings;

    ConfigEcho echo{{"s-list", a.s_list}, {"n-list", a.n_list},   {"c-list", a.c_list},
                    {"reps", std::to_string(a.reps)}, {"theta", fmt_double(a.theta)},
                    {"seed", std::to_string(a.seed)}};
    emit_report("bench", echo, a.seed, payload, measurements, timer.seconds(), a.out_path, out);
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mixture-of-Experts routing laboratory"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Dispatch-success probabilities and bounds");
    simulate->add_option("router", sim.router, "tcr or ecr")->required();
    simulate->add_flag("--exact", sim.exact, "compute the exact success probability");
    simulate->add_flag("--mc", sim.mc, "run the Monte-Carlo estimator");
    simulate->add_flag("--bounds", sim.bounds, "evaluate the closed-form bounds");
    simulate->add_option("--s", sim.s, "tokens per sample");
    simulate->add_option("--n", sim.n, "experts");
    simulate->add_option("--c", sim.c, "expert capacity");
    simulate->add_option("--p", sim.p_text, "true-positive probabilities (scalar or n values)");
    simulate->add_option("--q", sim.q_text, "false-positive probabilities (scalar or n values)");
    simulate->add_option("--trials", sim.trials, "Monte-Carlo trials");
    simulate->add_option("--seed", sim.seed, "root seed");
    simulate->add_option("--out", sim.out_path, "write the JSON report here");
    simulate->set_config("--config");

    RouteArgs rt;
    auto* route = app.add_subcommand("route", "Dispatch a token file");
    route->add_option("--input", rt.input, "token CSV or .bin file")->required();
    route->add_option("--experts", rt.experts, "expert count (must divide token dim)");
    route->add_option("--mode", rt.mode, "tcr, ecr, or hybrid");
    route->add_option("--ell", rt.ell, "TCR top-ell");
    route->add_option("--c", rt.capacity, "capacity (0 = token count)");
    route->add_option("--cmax", rt.capacity_max, "hybrid capacity cap (0 = token count)");
    route->add_option("--theta", rt.theta, "hybrid score-sum threshold");
    route->add_option("--noise-std", rt.noise_std, "gate noise std");
    route->add_option("--alpha", rt.alpha, "aux loss coefficient");
    route->add_option("--mu", rt.mu, "locality loss coefficient");
    route->add_option("--nodes", rt.nodes, "node count");
    route->add_option("--local-node", rt.local_node, "local node id");
    route->add_option("--seed", rt.seed, "root seed");
    route->add_option("--out", rt.out_path, "write the JSON report here");
    route->set_config("--config");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Toy MoE training run");
    train_cmd->add_option("--s", tr.s, "tokens per sample");
    train_cmd->add_option("--d", tr.d, "feature dim");
    train_cmd->add_option("--n", tr.n, "experts");
    train_cmd->add_option("--steps", tr.steps, "training steps");
    train_cmd->add_option("--batch-size", tr.batch_size, "samples per step");
    train_cmd->add_option("--lr", tr.lr, "learning rate");
    train_cmd->add_option("--seed", tr.seed, "root seed");
    train_cmd->add_option("--mode", tr.mode, "initial router mode");
    train_cmd->add_option("--capacity", tr.capacity, "capacity (0 = s)");
    train_cmd->add_option("--theta", tr.theta, "hybrid threshold");
    train_cmd->add_option("--schedule", tr.schedule,
                          "mode schedule step:mode:capacity[:theta];...");
    train_cmd->add_option("--alpha", tr.alpha, "aux loss coefficient");
    train_cmd->add_option("--mu", tr.mu, "locality loss coefficient");
    train_cmd->add_option("--capacity-policy", tr.capacity_policy, "fixed or adaptive");
    train_cmd->add_option("--policy-theta", tr.policy_theta, "adaptive hybrid threshold");
    train_cmd->add_option("--ema-alpha", tr.ema_alpha, "adaptive delta EMA weight");
    train_cmd->add_flag("--auto-switch", tr.auto_switch, "enable the TCR->ECR switch policy");
    train_cmd->add_option("--c-star", tr.c_star, "switch policy C*");
    train_cmd->add_option("--check-every", tr.check_every, "switch policy check interval");
    train_cmd->add_flag("--router-learnable", tr.router_learnable, "train the router weights");
    train_cmd->add_option("--noise", tr.noise, "isotropic or clustered");
    train_cmd->add_option("--concentration", tr.concentration, "cluster concentration");
    train_cmd->add_option("--alignment", tr.alignment, "pattern alignment in (0,1]");
    train_cmd->add_option("--qhat-trials", tr.qhat_trials, "q-hat estimation draws per step");
    train_cmd->add_option("--nodes", tr.nodes, "node count");
    train_cmd->add_option("--local-node", tr.local_node, "local node id");
    train_cmd->add_option("--metrics-out", tr.metrics_out, "write per-step metrics CSV here");
    train_cmd->add_option("--out", tr.out_path, "write the JSON report here");
    train_cmd->set_config("--config");

    FeaturesArgs ft;
    auto* features = app.add_subcommand("features", "Generate tokens and correlation CSV");
    features->add_option("--kind", ft.kind, "isotropic or clustered");
    features->add_option("--s", ft.s, "token count");
    features->add_option("--d", ft.d, "feature dim");
    features->add_option("--n", ft.n, "experts (clustered)");
    features->add_option("--concentration", ft.concentration, "cluster concentration");
    features->add_option("--seed", ft.seed, "root seed");
    features->add_option("--csv-out", ft.csv_out, "write the correlation matrix CSV here");
    features->add_option("--out", ft.out_path, "write the JSON report here");
    features->set_config("--config");

    BenchArgs bn;
    auto* bench = app.add_subcommand("bench", "Dispatch throughput across a grid");
    bench->add_option("--s-list", bn.s_list, "token counts, comma separated (empty = no cells)");
    bench->add_option("--n-list", bn.n_list, "expert counts");
    bench->add_option("--c-list", bn.c_list, "capacities");
    bench->add_option("--reps", bn.reps, "measurements per cell (median reported)");
    bench->add_option("--theta", bn.theta, "hybrid threshold");
    bench->add_option("--seed", bn.seed, "root seed");
    bench->add_option("--out", bn.out_path, "write the JSON report here");
    bench->set_config("--config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, out);
        if (route->parsed()) return cmd_route(rt, out);
        if (train_cmd->parsed()) return cmd_train(tr, out);
        if (features->parsed()) return cmd_features(ft, out);
        if (bench->parsed()) return cmd_bench(bn, out);
        err << "error: no subcommand\n";
        return kExitUsage;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
}

}  // namespace moelab
