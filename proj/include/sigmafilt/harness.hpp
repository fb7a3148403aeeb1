#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sigmafilt/iukf.hpp"
#include "sigmafilt/metrics.hpp"
#include "sigmafilt/rkhs_ukf.hpp"
#include "sigmafilt/scenarios.hpp"

namespace sigmafilt {

enum class ForwardFilterKind { Ukf, RkhsUkf };
enum class InverseFilterKind { None, Iukf, RkhsUkf };

/// Parsed experiment configuration. Optional fields fall back to the chosen
/// scenario's defaults when the experiment is resolved.
struct ExperimentConfig {
    std::string scenario_id;
    std::optional<int> horizon;
    std::optional<int> runs;
    std::optional<std::uint64_t> seed;
    ForwardFilterKind forward = ForwardFilterKind::Ukf;
    InverseFilterKind inverse = InverseFilterKind::Iukf;

    std::optional<double> forward_kappa;
    std::optional<double> inverse_kappa;
    std::optional<double> assumed_forward_kappa;
    std::optional<double> sigma_bar0_scale;
    std::optional<RkhsScenarioSettings> rkhs;

    // linear_oracle only
    int n_x = 2, n_y = 2, n_a = 2;
    std::uint64_t system_seed = 1;

    std::string out_dir;
    std::vector<std::string> formats = {"csv", "json"};
};

/// Parses the JSON configuration. Unknown keys anywhere are hard errors so
/// typos cannot silently change an experiment.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Fully resolved experiment: scenario bundle with every override applied.
struct ResolvedExperiment {
    ExperimentConfig config;
    ScenarioBundle bundle;
    int horizon = 0;
    int runs = 0;
    std::uint64_t seed = 0;
};

ResolvedExperiment resolve_experiment(const ExperimentConfig& config);

/// Canonical JSON echo of a resolved experiment (every field explicit); the
/// config hash is FNV-1a over this string.
std::string canonical_config_json(const ResolvedExperiment& experiment);
std::uint64_t config_hash(const ResolvedExperiment& experiment);

struct StepRecord {
    Vector x_true;
    Vector forward_estimate;
    Matrix forward_cov;
    Vector inverse_estimate;
    Matrix inverse_cov;
    double rcrlb_forward = std::numeric_limits<double>::quiet_NaN();
    double rcrlb_inverse = std::numeric_limits<double>::quiet_NaN();
    bool forward_divergent = false;
    bool inverse_divergent = false;
};

struct ExperimentRecord {
    int run_id = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;  ///< hash of the resolved configuration
    std::vector<StepRecord> steps;  ///< k = 1..horizon at [k-1]
    bool forward_diverged = false;
    bool inverse_diverged = false;
};

struct FilterSummary {
    double rmse_time_avg = std::numeric_limits<double>::quiet_NaN();
    double nci_time_avg = std::numeric_limits<double>::quiet_NaN();
    double rcrlb_time_avg = std::numeric_limits<double>::quiet_NaN();
    double divergence_rate = 0.0;
    double rmse_position_avg = std::numeric_limits<double>::quiet_NaN();
    double nci_position_avg = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentResult {
    ResolvedExperiment experiment;
    std::vector<ExperimentRecord> records;
    std::vector<double> rmse_forward_k, rmse_inverse_k;
    std::vector<double> nci_forward_k, nci_inverse_k;
    std::vector<double> rcrlb_forward_k, rcrlb_inverse_k;
    FilterSummary forward, inverse;
    double wall_clock_seconds = 0.0;
    int nci_skipped_runs = 0;
};

/// Runs the seeded Monte-Carlo battery. Per-run seeds derive from the master
/// seed and the run index, so results do not depend on the worker count and
/// identical configs reproduce bitwise-identical artifacts.
ExperimentResult run_experiment(const ResolvedExperiment& experiment, int workers = 1);
ExperimentResult run_experiment(const ExperimentConfig& config, int workers = 1);

/// Fixed CSV header for a scenario of the given state dimension.
std::string csv_header(int n_x);

/// Writes records.csv and/or summary.json into out_dir per the configured
/// formats. Non-finite values serialize as empty cells, never as NaN text.
void emit_results(const ExperimentResult& result, const std::string& out_dir);

std::string summary_json(const ExperimentResult& result);

}  // namespace sigmafilt
