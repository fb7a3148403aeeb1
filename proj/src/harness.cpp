#include "sigmafilt/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace sigmafilt {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
    if (!obj.is_object()) {
        throw ConfigError(path + " must be an object");
    }
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError("unknown key '" + path + "." + item.key() + "'");
        }
    }
}

template <typename T>
T require_type(const json& obj, const std::string& path);

template <>
double require_type<double>(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path + " must be a number");
    return v.get<double>();
}

template <>
int require_type<int>(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path + " must be an integer");
    return v.get<int>();
}

template <>
std::uint64_t require_type<std::uint64_t>(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !v.is_number_integer()) {
        throw ConfigError(path + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

template <>
std::string require_type<std::string>(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path + " must be a string");
    return v.get<std::string>();
}

RkhsScenarioSettings parse_rkhs(const json& obj, const RkhsScenarioSettings& base,
                                const std::string& path) {
    reject_unknown_keys(obj,
                        {"kappa", "kernel_sigma2", "window", "ald_nu", "init_fill",
                         "init_noise_scale", "a_bar", "b_bar"},
                        path);
    RkhsScenarioSettings out = base;
    if (obj.contains("kappa")) out.kappa = require_type<double>(obj["kappa"], path + ".kappa");
    if (obj.contains("kernel_sigma2")) {
        out.kernel_sigma2 = require_type<double>(obj["kernel_sigma2"], path + ".kernel_sigma2");
    }
    if (obj.contains("window")) out.window = require_type<int>(obj["window"], path + ".window");
    if (obj.contains("ald_nu")) out.ald_nu = require_type<double>(obj["ald_nu"], path + ".ald_nu");
    if (obj.contains("init_fill")) {
        out.init_fill = require_type<double>(obj["init_fill"], path + ".init_fill");
    }
    if (obj.contains("init_noise_scale")) {
        out.init_noise_scale =
            require_type<double>(obj["init_noise_scale"], path + ".init_noise_scale");
    }
    if (obj.contains("a_bar")) out.a_bar = require_type<double>(obj["a_bar"], path + ".a_bar");
    if (obj.contains("b_bar")) out.b_bar = require_type<double>(obj["b_bar"], path + ".b_bar");
    return out;
}

std::string format_cell(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown_keys(root,
                        {"scenario", "horizon", "runs", "seed", "filters", "overrides", "linear",
                         "output"},
                        "config");
    if (!root.contains("scenario")) throw ConfigError("config.scenario is required");

    ExperimentConfig cfg;
    cfg.scenario_id = require_type<std::string>(root["scenario"], "config.scenario");
    if (root.contains("horizon")) {
        cfg.horizon = require_type<int>(root["horizon"], "config.horizon");
        if (*cfg.horizon < 1) throw ConfigError("config.horizon must be >= 1");
    }
    if (root.contains("runs")) {
        cfg.runs = require_type<int>(root["runs"], "config.runs");
        if (*cfg.runs < 1) throw ConfigError("config.runs must be >= 1");
    }
    if (root.contains("seed")) {
        cfg.seed = require_type<std::uint64_t>(root["seed"], "config.seed");
    }

    if (root.contains("filters")) {
        const json& filters = root["filters"];
        reject_unknown_keys(filters, {"forward", "inverse"}, "config.filters");
        if (filters.contains("forward")) {
            const std::string kind =
                require_type<std::string>(filters["forward"], "config.filters.forward");
            if (kind == "ukf") {
                cfg.forward = ForwardFilterKind::Ukf;
            } else if (kind == "rkhs_ukf") {
                cfg.forward = ForwardFilterKind::RkhsUkf;
            } else {
                throw ConfigError("config.filters.forward must be 'ukf' or 'rkhs_ukf'");
            }
        }
        if (filters.contains("inverse")) {
            const std::string kind =
                require_type<std::string>(filters["inverse"], "config.filters.inverse");
            if (kind == "iukf") {
                cfg.inverse = InverseFilterKind::Iukf;
            } else if (kind == "rkhs_ukf") {
                cfg.inverse = InverseFilterKind::RkhsUkf;
            } else if (kind == "none") {
                cfg.inverse = InverseFilterKind::None;
            } else {
                throw ConfigError("config.filters.inverse must be 'iukf', 'rkhs_ukf' or 'none'");
            }
        }
    }

    if (root.contains("overrides")) {
        const json& ov = root["overrides"];
        reject_unknown_keys(
            ov, {"forward_kappa", "inverse_kappa", "assumed_forward_kappa", "sigma_bar0_scale",
                 "rkhs"},
            "config.overrides");
        if (ov.contains("forward_kappa")) {
            cfg.forward_kappa =
                require_type<double>(ov["forward_kappa"], "config.overrides.forward_kappa");
        }
        if (ov.contains("inverse_kappa")) {
            cfg.inverse_kappa =
                require_type<double>(ov["inverse_kappa"], "config.overrides.inverse_kappa");
        }
        if (ov.contains("assumed_forward_kappa")) {
            cfg.assumed_forward_kappa = require_type<double>(
                ov["assumed_forward_kappa"], "config.overrides.assumed_forward_kappa");
        }
        if (ov.contains("sigma_bar0_scale")) {
            cfg.sigma_bar0_scale =
                require_type<double>(ov["sigma_bar0_scale"], "config.overrides.sigma_bar0_scale");
            if (*cfg.sigma_bar0_scale <= 0.0) {
                throw ConfigError("config.overrides.sigma_bar0_scale must be positive");
            }
        }
        if (ov.contains("rkhs")) {
            cfg.rkhs = parse_rkhs(ov["rkhs"], RkhsScenarioSettings{}, "config.overrides.rkhs");
        }
    }

    if (root.contains("linear")) {
        const json& lin = root["linear"];
        reject_unknown_keys(lin, {"n_x", "n_y", "n_a", "system_seed"}, "config.linear");
        if (lin.contains("n_x")) cfg.n_x = require_type<int>(lin["n_x"], "config.linear.n_x");
        if (lin.contains("n_y")) cfg.n_y = require_type<int>(lin["n_y"], "config.linear.n_y");
        if (lin.contains("n_a")) cfg.n_a = require_type<int>(lin["n_a"], "config.linear.n_a");
        if (lin.contains("system_seed")) {
            cfg.system_seed =
                require_type<std::uint64_t>(lin["system_seed"], "config.linear.system_seed");
        }
    }

    if (root.contains("output")) {
        const json& out = root["output"];
        reject_unknown_keys(out, {"directory", "formats"}, "config.output");
        if (out.contains("directory")) {
            cfg.out_dir = require_type<std::string>(out["directory"], "config.output.directory");
        }
        if (out.contains("formats")) {
            if (!out["formats"].is_array()) {
                throw ConfigError("config.output.formats must be an array");
            }
            cfg.formats.clear();
            for (const auto& f : out["formats"]) {
                const std::string name = require_type<std::string>(f, "config.output.formats[]");
                if (name != "csv" && name != "json") {
                    throw ConfigError("config.output.formats entries must be 'csv' or 'json'");
                }
                cfg.formats.push_back(name);
            }
            if (cfg.formats.empty()) {
                throw ConfigError("config.output.formats must not be empty");
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open config file '" + path + "'");
    std::ostringstream oss;
    oss << in.rdbuf();
    return parse_config(oss.str());
}

ResolvedExperiment resolve_experiment(const ExperimentConfig& config) {
    ResolvedExperiment resolved;
    resolved.config = config;
    if (config.scenario_id == "fm_demodulator") {
        resolved.bundle = build_fm_demodulator();
    } else if (config.scenario_id == "vehicle_reentry") {
        resolved.bundle = build_vehicle_reentry();
    } else if (config.scenario_id == "lorenz") {
        resolved.bundle = build_lorenz();
    } else if (config.scenario_id == "linear_oracle") {
        LinearScenario ls =
            build_linear_oracle(config.n_x, config.n_y, config.n_a, config.system_seed);
        resolved.bundle = {"linear_oracle", std::move(ls.scenario), std::move(ls.defaults)};
    } else {
        throw ConfigError("unknown scenario '" + config.scenario_id + "'");
    }

    resolved.bundle.scenario.validate();

    ScenarioDefaults& d = resolved.bundle.defaults;
    if (config.forward_kappa) d.forward_kappa = *config.forward_kappa;
    if (config.inverse_kappa) d.inverse_kappa = *config.inverse_kappa;
    if (config.assumed_forward_kappa) d.assumed_forward_kappa = *config.assumed_forward_kappa;
    if (config.sigma_bar0_scale) d.defender_prior.cov *= *config.sigma_bar0_scale;
    if (config.rkhs) d.rkhs = *config.rkhs;

    resolved.horizon = config.horizon.value_or(d.horizon);
    resolved.runs = config.runs.value_or(d.runs);
    resolved.seed = config.seed.value_or(d.seed);
    return resolved;
}

std::string canonical_config_json(const ResolvedExperiment& e) {
    json root;
    root["scenario"] = e.bundle.id;
    root["horizon"] = e.horizon;
    root["runs"] = e.runs;
    root["seed"] = e.seed;
    root["filters"]["forward"] =
        e.config.forward == ForwardFilterKind::Ukf ? "ukf" : "rkhs_ukf";
    root["filters"]["inverse"] = e.config.inverse == InverseFilterKind::Iukf      ? "iukf"
                                 : e.config.inverse == InverseFilterKind::RkhsUkf ? "rkhs_ukf"
                                                                                  : "none";
    const ScenarioDefaults& d = e.bundle.defaults;
    json ov;
    ov["forward_kappa"] = d.forward_kappa;
    ov["inverse_kappa"] = d.inverse_kappa;
    ov["assumed_forward_kappa"] = d.assumed_forward_kappa;
    ov["sigma_bar0_scale"] = e.config.sigma_bar0_scale.value_or(1.0);
    json rk;
    rk["kappa"] = d.rkhs.kappa;
    rk["kernel_sigma2"] = d.rkhs.kernel_sigma2;
    rk["window"] = d.rkhs.window;
    rk["ald_nu"] = d.rkhs.ald_nu;
    rk["init_fill"] = d.rkhs.init_fill;
    rk["init_noise_scale"] = d.rkhs.init_noise_scale;
    rk["a_bar"] = d.rkhs.a_bar;
    rk["b_bar"] = d.rkhs.b_bar;
    ov["rkhs"] = rk;
    root["overrides"] = ov;
    if (e.bundle.id == "linear_oracle") {
        root["linear"]["n_x"] = e.config.n_x;
        root["linear"]["n_y"] = e.config.n_y;
        root["linear"]["n_a"] = e.config.n_a;
        root["linear"]["system_seed"] = e.config.system_seed;
    }
    root["output"]["directory"] = e.config.out_dir;
    root["output"]["formats"] = e.config.formats;
    return root.dump();
}

std::uint64_t config_hash(const ResolvedExperiment& e) {
    const std::string text = canonical_config_json(e);
    std::uint64_t hash = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

namespace {

struct RunOutput {
    ExperimentRecord record;
};

RunOutput execute_run(const ResolvedExperiment& e, int run_id, std::uint64_t hash) {
    const AdversarialScenario& scenario = e.bundle.scenario;
    const ScenarioDefaults& d = e.bundle.defaults;
    const int horizon = e.horizon;
    const std::uint64_t run_seed = derive_seed(e.seed, static_cast<std::uint64_t>(run_id));
    const double nan = std::numeric_limits<double>::quiet_NaN();

    RunOutput out;
    out.record.run_id = run_id;
    out.record.seed = run_seed;
    out.record.config_hash = hash;

    // Initial conditions.
    Vector attacker_x0 = d.attacker_prior.mean;
    if (d.draw_attacker_init) {
        GaussianStream init_stream(derive_seed(run_seed, 0));
        // The draw uses the scenario's base defender prior, not any inflated
        // belief configured for a conservativeness study.
        attacker_x0 = init_stream.next_multivariate(d.defender_prior.mean,
                                                    d.defender_prior.cov /
                                                        e.config.sigma_bar0_scale.value_or(1.0));
    }
    Vector true_x0 = d.draw_true_init ? Vector() : d.true_x0;
    if (d.draw_true_init) {
        GaussianStream truth_stream(derive_seed(run_seed, 1));
        true_x0 = truth_stream.next_multivariate(attacker_x0, d.attacker_prior.cov);
    }

    const TruthSim truth = simulate_truth(scenario, true_x0, horizon, run_seed);

    // Forward filter.
    std::vector<Vector> fwd_mean(static_cast<std::size_t>(horizon));
    std::vector<Matrix> fwd_cov(static_cast<std::size_t>(horizon));
    std::vector<Matrix> fwd_gain(static_cast<std::size_t>(horizon));
    std::vector<bool> fwd_ok(static_cast<std::size_t>(horizon), false);

    if (e.config.forward == ForwardFilterKind::Ukf) {
        UkfState state{{attacker_x0, d.attacker_prior.cov}, d.forward_kappa, 0};
        for (int k = 1; k <= horizon; ++k) {
            try {
                auto [next, trace] = ukf_step(state, truth.attacker_obs[k - 1], scenario);
                if (divergence_flag(next.belief.mean, next.belief.cov)) break;
                state = std::move(next);
                fwd_gain[k - 1] = std::move(trace.gain);  // for the inverse-bound proxy
            } catch (const FilterError&) {
                break;
            }
            fwd_mean[k - 1] = state.belief.mean;
            fwd_cov[k - 1] = state.belief.cov;
            fwd_ok[k - 1] = true;
        }
    } else {
        const RkhsScenarioSettings& rs = d.rkhs;
        const DictionaryPolicy policy =
            rs.window > 0 ? DictionaryPolicy(SlidingWindowPolicy{rs.window})
                          : DictionaryPolicy(AldPolicy{rs.ald_nu});
        RkhsUkfState state = rkhs_init(
            {attacker_x0, d.attacker_prior.cov}, rs.kappa,
            rs.init_noise_scale * Matrix::Identity(scenario.n_x, scenario.n_x),
            rs.init_noise_scale * Matrix::Identity(scenario.n_y, scenario.n_y),
            {rs.kernel_sigma2}, policy, {rs.a_bar, rs.b_bar}, rs.init_fill);
        for (int k = 1; k <= horizon; ++k) {
            try {
                auto [next, x_hat] = rkhs_step(state, truth.attacker_obs[k - 1]);
                const Matrix cov =
                    next.z_belief.cov.topLeftCorner(scenario.n_x, scenario.n_x);
                if (divergence_flag(x_hat, cov)) break;
                state = std::move(next);
                fwd_mean[k - 1] = x_hat;
                fwd_cov[k - 1] = symmetrized(cov);
                fwd_ok[k - 1] = true;
            } catch (const FilterError&) {
                break;
            }
        }
    }

    // Defender observations against the attacker's actual estimates.
    std::vector<Vector> defender_obs(static_cast<std::size_t>(horizon));
    for (int k = 1; k <= horizon; ++k) {
        if (!fwd_ok[k - 1]) break;
        defender_obs[k - 1] = scenario.g(fwd_mean[k - 1]) + truth.defender_noise[k - 1];
    }

    // Inverse filter.
    std::vector<Vector> inv_mean(static_cast<std::size_t>(horizon));
    std::vector<Matrix> inv_cov(static_cast<std::size_t>(horizon));
    std::vector<bool> inv_ok(static_cast<std::size_t>(horizon), false);

    if (e.config.inverse == InverseFilterKind::Iukf) {
        IukfState state{{d.defender_prior.mean, d.defender_prior.cov},
                        d.defender_prior.cov,
                        d.inverse_kappa,
                        d.assumed_forward_kappa,
                        0};
        for (int k = 1; k <= horizon && fwd_ok[k - 1]; ++k) {
            try {
                auto [next, trace] =
                    iukf_step(state, defender_obs[k - 1], truth.states[k], scenario);
                if (divergence_flag(next.belief.mean, next.belief.cov)) break;
                state = std::move(next);
            } catch (const FilterError&) {
                break;
            }
            inv_mean[k - 1] = state.belief.mean;
            inv_cov[k - 1] = state.belief.cov;
            inv_ok[k - 1] = true;
        }
    } else if (e.config.inverse == InverseFilterKind::RkhsUkf) {
        const RkhsScenarioSettings& rs = d.rkhs;
        const DictionaryPolicy policy =
            rs.window > 0 ? DictionaryPolicy(SlidingWindowPolicy{rs.window})
                          : DictionaryPolicy(AldPolicy{rs.ald_nu});
        RkhsUkfState state = rkhs_init(
            {d.defender_prior.mean, d.defender_prior.cov}, rs.kappa,
            rs.init_noise_scale * Matrix::Identity(scenario.n_x, scenario.n_x),
            rs.init_noise_scale * Matrix::Identity(scenario.n_a, scenario.n_a),
            {rs.kernel_sigma2}, policy, {rs.a_bar, rs.b_bar}, rs.init_fill);
        for (int k = 1; k <= horizon && fwd_ok[k - 1]; ++k) {
            try {
                auto [next, x_hat] = rkhs_step(state, defender_obs[k - 1]);
                const Matrix cov =
                    next.z_belief.cov.topLeftCorner(scenario.n_x, scenario.n_x);
                if (divergence_flag(x_hat, cov)) break;
                state = std::move(next);
                inv_mean[k - 1] = x_hat;
                inv_cov[k - 1] = symmetrized(cov);
                inv_ok[k - 1] = true;
            } catch (const FilterError&) {
                break;
            }
        }
    }

    // Information recursions along the realized trajectories.
    std::vector<double> rcrlb_fwd(static_cast<std::size_t>(horizon), nan);
    try {
        FisherInfo info{Eigen::LDLT<Matrix>(d.attacker_prior.cov)
                            .solve(Matrix::Identity(scenario.n_x, scenario.n_x))};
        for (int k = 1; k <= horizon; ++k) {
            const Matrix F = numeric_jacobian(scenario.f, truth.states[k - 1]);
            const Matrix H = numeric_jacobian(scenario.h, truth.states[k]);
            info = rcrlb_step(info, F, H, scenario.noise.Q, scenario.noise.R);
            rcrlb_fwd[k - 1] = rcrlb_bound(info);
        }
    } catch (const FilterError&) {
        // leave the remaining entries empty
    }

    std::vector<double> rcrlb_inv(static_cast<std::size_t>(horizon), nan);
    if (e.config.forward == ForwardFilterKind::Ukf &&
        e.config.inverse == InverseFilterKind::Iukf) {
        try {
            FisherInfo info{Eigen::LDLT<Matrix>(d.defender_prior.cov)
                                .solve(Matrix::Identity(scenario.n_x, scenario.n_x))};
            for (int k = 1; k <= horizon && fwd_ok[k - 1]; ++k) {
                // Transition Jacobian of the inverse recursion at the previous
                // attacker estimate, with the attacker's actual covariance
                // standing in for the surrogate.
                const Vector& anchor = k == 1 ? attacker_x0 : fwd_mean[k - 2];
                const Matrix& anchor_cov = k == 1 ? d.attacker_prior.cov : fwd_cov[k - 2];
                const Vector& x_next = truth.states[k];
                const double kappa = d.assumed_forward_kappa;
                const VectorMap transition = [&](const Vector& xh) {
                    Vector z = Vector::Zero(scenario.n_x + scenario.n_y);
                    z.head(scenario.n_x) = xh;
                    return iukf_transition(z, anchor_cov, x_next, scenario, kappa).x_hat_next;
                };
                const Matrix f_tilde = numeric_jacobian(transition, anchor);
                const Matrix g_jac = numeric_jacobian(scenario.g, fwd_mean[k - 1]);
                const Matrix q_bar =
                    fwd_gain[k - 1] * scenario.noise.R * fwd_gain[k - 1].transpose();
                info = rcrlb_for_inverse(info, f_tilde, g_jac, q_bar, scenario.noise.Sigma_eps);
                rcrlb_inv[k - 1] = rcrlb_bound(info);
            }
        } catch (const FilterError&) {
        }
    }

    // Assemble per-step records.
    out.record.steps.resize(static_cast<std::size_t>(horizon));
    for (int k = 1; k <= horizon; ++k) {
        StepRecord& step = out.record.steps[static_cast<std::size_t>(k - 1)];
        step.x_true = truth.states[k];
        step.forward_divergent = !fwd_ok[k - 1];
        step.inverse_divergent = !inv_ok[k - 1];
        if (fwd_ok[k - 1]) {
            step.forward_estimate = fwd_mean[k - 1];
            step.forward_cov = fwd_cov[k - 1];
        }
        if (inv_ok[k - 1]) {
            step.inverse_estimate = inv_mean[k - 1];
            step.inverse_cov = inv_cov[k - 1];
        }
        step.rcrlb_forward = rcrlb_fwd[k - 1];
        step.rcrlb_inverse = rcrlb_inv[k - 1];
        out.record.forward_diverged |= step.forward_divergent;
        out.record.inverse_diverged |= step.inverse_divergent;
    }
    return out;
}

double mean_of_finite(const std::vector<double>& values) {
    double sum = 0.0;
    int count = 0;
    for (double v : values) {
        if (std::isfinite(v)) {
            sum += v;
            ++count;
        }
    }
    return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

Vector subset_of(const Vector& v, const std::vector<int>& components) {
    Vector out(static_cast<Eigen::Index>(components.size()));
    for (std::size_t i = 0; i < components.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(components[i]);
    return out;
}

Matrix subset_of(const Matrix& m, const std::vector<int>& components) {
    const Eigen::Index n = static_cast<Eigen::Index>(components.size());
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out(i, j) = m(components[static_cast<std::size_t>(i)],
                          components[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ResolvedExperiment& experiment, int workers) {
    const auto start = std::chrono::steady_clock::now();
    const int runs = experiment.runs;
    const int horizon = experiment.horizon;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    ExperimentResult result;
    result.experiment = experiment;
    result.records.resize(static_cast<std::size_t>(runs));

    const std::uint64_t hash = config_hash(experiment);
    std::atomic<int> next_run{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const int thread_count = std::max(1, std::min(workers, runs));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) {
        pool.emplace_back([&]() {
            while (true) {
                const int run_id = next_run.fetch_add(1);
                if (run_id >= runs) return;
                try {
                    result.records[static_cast<std::size_t>(run_id)] =
                        execute_run(experiment, run_id, hash).record;
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    // Deterministic fold over run order.
    const std::vector<int>& position = experiment.bundle.defaults.position_components;
    result.rmse_forward_k.assign(static_cast<std::size_t>(horizon), nan);
    result.rmse_inverse_k.assign(static_cast<std::size_t>(horizon), nan);
    result.nci_forward_k.assign(static_cast<std::size_t>(horizon), nan);
    result.nci_inverse_k.assign(static_cast<std::size_t>(horizon), nan);
    result.rcrlb_forward_k.assign(static_cast<std::size_t>(horizon), nan);
    result.rcrlb_inverse_k.assign(static_cast<std::size_t>(horizon), nan);

    std::vector<double> nci_fwd_pos(static_cast<std::size_t>(horizon), nan);
    std::vector<double> nci_inv_pos(static_cast<std::size_t>(horizon), nan);
    std::vector<double> rmse_fwd_pos(static_cast<std::size_t>(horizon), nan);
    std::vector<double> rmse_inv_pos(static_cast<std::size_t>(horizon), nan);

    for (int k = 1; k <= horizon; ++k) {
        const std::size_t idx = static_cast<std::size_t>(k - 1);
        CredibilityInputs fwd_inputs, inv_inputs;
        double fwd_sq = 0.0, inv_sq = 0.0, fwd_pos_sq = 0.0, inv_pos_sq = 0.0;
        int fwd_count = 0, inv_count = 0;
        double rcrlb_fwd_sum = 0.0, rcrlb_inv_sum = 0.0;
        int rcrlb_fwd_count = 0, rcrlb_inv_count = 0;
        for (const ExperimentRecord& record : result.records) {
            const StepRecord& step = record.steps[idx];
            if (!step.forward_divergent) {
                const Vector err = step.x_true - step.forward_estimate;
                fwd_sq += err.squaredNorm();
                if (!position.empty()) fwd_pos_sq += subset_of(err, position).squaredNorm();
                fwd_inputs.errors.push_back(err);
                fwd_inputs.covariances.push_back(step.forward_cov);
                ++fwd_count;
                if (!step.inverse_divergent) {
                    const Vector ierr = step.forward_estimate - step.inverse_estimate;
                    inv_sq += ierr.squaredNorm();
                    if (!position.empty()) inv_pos_sq += subset_of(ierr, position).squaredNorm();
                    inv_inputs.errors.push_back(ierr);
                    inv_inputs.covariances.push_back(step.inverse_cov);
                    ++inv_count;
                }
            }
            if (std::isfinite(step.rcrlb_forward)) {
                rcrlb_fwd_sum += step.rcrlb_forward;
                ++rcrlb_fwd_count;
            }
            if (std::isfinite(step.rcrlb_inverse)) {
                rcrlb_inv_sum += step.rcrlb_inverse;
                ++rcrlb_inv_count;
            }
        }
        if (fwd_count > 0) {
            result.rmse_forward_k[idx] = std::sqrt(fwd_sq / fwd_count);
            if (!position.empty()) rmse_fwd_pos[idx] = std::sqrt(fwd_pos_sq / fwd_count);
        }
        if (inv_count > 0) {
            result.rmse_inverse_k[idx] = std::sqrt(inv_sq / inv_count);
            if (!position.empty()) rmse_inv_pos[idx] = std::sqrt(inv_pos_sq / inv_count);
        }
        if (rcrlb_fwd_count > 0) result.rcrlb_forward_k[idx] = rcrlb_fwd_sum / rcrlb_fwd_count;
        if (rcrlb_inv_count > 0) result.rcrlb_inverse_k[idx] = rcrlb_inv_sum / rcrlb_inv_count;

        const auto try_nci = [&result](const CredibilityInputs& inputs, double& slot) {
            if (inputs.errors.size() < 2) return;
            try {
                slot = nci(inputs).nci_db;
            } catch (const FilterError&) {
                ++result.nci_skipped_runs;
            }
        };
        try_nci(fwd_inputs, result.nci_forward_k[idx]);
        try_nci(inv_inputs, result.nci_inverse_k[idx]);
        if (!position.empty()) {
            CredibilityInputs fwd_sub, inv_sub;
            for (std::size_t i = 0; i < fwd_inputs.errors.size(); ++i) {
                fwd_sub.errors.push_back(subset_of(fwd_inputs.errors[i], position));
                fwd_sub.covariances.push_back(subset_of(fwd_inputs.covariances[i], position));
            }
            for (std::size_t i = 0; i < inv_inputs.errors.size(); ++i) {
                inv_sub.errors.push_back(subset_of(inv_inputs.errors[i], position));
                inv_sub.covariances.push_back(subset_of(inv_inputs.covariances[i], position));
            }
            try_nci(fwd_sub, nci_fwd_pos[idx]);
            try_nci(inv_sub, nci_inv_pos[idx]);
        }
    }

    result.forward.rmse_time_avg = mean_of_finite(result.rmse_forward_k);
    result.forward.nci_time_avg = mean_of_finite(result.nci_forward_k);
    result.forward.rcrlb_time_avg = mean_of_finite(result.rcrlb_forward_k);
    result.inverse.rmse_time_avg = mean_of_finite(result.rmse_inverse_k);
    result.inverse.nci_time_avg = mean_of_finite(result.nci_inverse_k);
    result.inverse.rcrlb_time_avg = mean_of_finite(result.rcrlb_inverse_k);
    if (!position.empty()) {
        result.forward.rmse_position_avg = mean_of_finite(rmse_fwd_pos);
        result.forward.nci_position_avg = mean_of_finite(nci_fwd_pos);
        result.inverse.rmse_position_avg = mean_of_finite(rmse_inv_pos);
        result.inverse.nci_position_avg = mean_of_finite(nci_inv_pos);
    }
    int fwd_div = 0, inv_div = 0;
    for (const ExperimentRecord& record : result.records) {
        fwd_div += record.forward_diverged ? 1 : 0;
        inv_div += record.inverse_diverged ? 1 : 0;
    }
    result.forward.divergence_rate = static_cast<double>(fwd_div) / runs;
    result.inverse.divergence_rate = static_cast<double>(inv_div) / runs;

    result.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, int workers) {
    return run_experiment(resolve_experiment(config), workers);
}

std::string csv_header(int n_x) {
    std::ostringstream oss;
    oss << "run_id,k";
    for (int i = 0; i < n_x; ++i) oss << ",x_true_" << i;
    for (int i = 0; i < n_x; ++i) oss << ",xhat_fwd_" << i;
    for (int i = 0; i < n_x; ++i) oss << ",xhat_inv_" << i;
    oss << ",fwd_cov_trace,inv_cov_trace,rcrlb_fwd_k,rcrlb_inv_k"
        << ",rmse_fwd_k,rmse_inv_k,nci_fwd_k,nci_inv_k,fwd_divergent,inv_divergent";
    return oss.str();
}

void emit_results(const ExperimentResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoFailure("cannot create output directory '" + out_dir + "'");

    const auto wants = [&result](const char* format) {
        for (const std::string& f : result.experiment.config.formats) {
            if (f == format) return true;
        }
        return false;
    };

    if (wants("csv")) {
        const fs::path path = fs::path(out_dir) / "records.csv";
        std::ofstream out(path);
        if (!out) throw IoFailure("cannot open '" + path.string() + "' for writing");
        const int n_x = result.experiment.bundle.scenario.n_x;
        out << csv_header(n_x) << "\n";
        for (const ExperimentRecord& record : result.records) {
            for (std::size_t idx = 0; idx < record.steps.size(); ++idx) {
                const StepRecord& step = record.steps[idx];
                out << record.run_id << ',' << (idx + 1);
                for (int i = 0; i < n_x; ++i) out << ',' << format_cell(step.x_true(i));
                for (int i = 0; i < n_x; ++i) {
                    out << ','
                        << (step.forward_divergent ? "" : format_cell(step.forward_estimate(i)));
                }
                for (int i = 0; i < n_x; ++i) {
                    out << ','
                        << (step.inverse_divergent ? "" : format_cell(step.inverse_estimate(i)));
                }
                out << ',' << (step.forward_divergent ? "" : format_cell(step.forward_cov.trace()));
                out << ',' << (step.inverse_divergent ? "" : format_cell(step.inverse_cov.trace()));
                out << ',' << format_cell(step.rcrlb_forward);
                out << ',' << format_cell(step.rcrlb_inverse);
                out << ',' << format_cell(result.rmse_forward_k[idx]);
                out << ',' << format_cell(result.rmse_inverse_k[idx]);
                out << ',' << format_cell(result.nci_forward_k[idx]);
                out << ',' << format_cell(result.nci_inverse_k[idx]);
                out << ',' << (step.forward_divergent ? 1 : 0);
                out << ',' << (step.inverse_divergent ? 1 : 0) << "\n";
            }
        }
    }

    if (wants("json")) {
        const fs::path path = fs::path(out_dir) / "summary.json";
        std::ofstream out(path);
        if (!out) throw IoFailure("cannot open '" + path.string() + "' for writing");
        out << summary_json(result) << "\n";
    }
}

std::string summary_json(const ExperimentResult& result) {
    json root;
    root["config"] = json::parse(canonical_config_json(result.experiment));
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(config_hash(result.experiment)));
        root["config_hash"] = buf;
    }
    const auto filter_json = [](const FilterSummary& s) {
        json j;
        const auto set = [&j](const char* key, double v) {
            if (std::isfinite(v)) {
                j[key] = v;
            } else {
                j[key] = nullptr;
            }
        };
        set("rmse_time_avg", s.rmse_time_avg);
        set("nci_time_avg", s.nci_time_avg);
        set("rcrlb_time_avg", s.rcrlb_time_avg);
        set("rmse_position_avg", s.rmse_position_avg);
        set("nci_position_avg", s.nci_position_avg);
        j["divergence_rate"] = s.divergence_rate;
        return j;
    };
    root["summary"]["forward"] = filter_json(result.forward);
    root["summary"]["inverse"] = filter_json(result.inverse);
    root["runs"] = result.experiment.runs;
    root["horizon"] = result.experiment.horizon;
    root["wall_clock_seconds"] = result.wall_clock_seconds;
    return root.dump(2);
}

}  // namespace sigmafilt
