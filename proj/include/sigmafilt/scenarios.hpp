#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigmafilt/random.hpp"
#include "sigmafilt/scenario.hpp"

namespace sigmafilt {

/// Settings shared by the joint state-and-model filters of a scenario.
struct RkhsScenarioSettings {
    double kappa = 3.0;
    double kernel_sigma2 = 20.0;
    int window = 15;      ///< sliding-window length; <= 0 selects ALD instead
    double ald_nu = 1e-2; ///< ALD admission threshold when window <= 0
    double init_fill = 1.0;
    double init_noise_scale = 1.0;  ///< Q0 = scale * I, R0 = scale * I
    double a_bar = 1e3;
    double b_bar = 1e3;
};

/// Per-scenario experiment configuration. These are defaults of the bundled
/// experiments, not ground truth.
struct ScenarioDefaults {
    GaussianBelief attacker_prior;  ///< forward filter initial belief
    GaussianBelief defender_prior;  ///< inverse filter initial belief
    double forward_kappa = 1.0;
    double inverse_kappa = 1.0;
    double assumed_forward_kappa = 1.0;  ///< defender's assumption about the attacker
    bool draw_attacker_init = false;     ///< attacker estimate ~ N(defender prior)
    bool draw_true_init = false;         ///< true state ~ N(attacker prior); else true_x0
    Vector true_x0;
    std::vector<int> position_components;  ///< metric subset, when the figure uses one
    int horizon = 100;
    int runs = 100;
    std::uint64_t seed = 1;
    RkhsScenarioSettings rkhs;
};

struct ScenarioBundle {
    std::string id;
    AdversarialScenario scenario;
    ScenarioDefaults defaults;
};

/// Two-state frequency demodulation system: exponentially correlated message
/// driving an integrated phase, observed through a unit-energy quadrature pair.
ScenarioBundle build_fm_demodulator();

/// Five-state ballistic reentry tracking with range/bearing radar measurements
/// and a defender that observes the attacker's position estimate.
ScenarioBundle build_vehicle_reentry();

/// Euler-discretized Lorenz system with scalar range-style observations on
/// both sides; the bundled model-learning experiment.
ScenarioBundle build_lorenz();

struct LinearScenario {
    AdversarialScenario scenario;
    Matrix F, H, G;
    ScenarioDefaults defaults;
};

/// Fully linear scenario from explicit matrices (all priors default to 0, I).
LinearScenario make_linear_scenario(const Matrix& F, const Matrix& H, const Matrix& G,
                                    const Matrix& Q, const Matrix& R, const Matrix& Sigma_eps);

/// Random stable linear system for exact-filter equivalence tests. The state
/// matrix is scaled to spectral radius at most 0.95; identical seeds produce
/// bitwise-identical scenarios.
LinearScenario build_linear_oracle(int n_x, int n_y, int n_a, std::uint64_t seed);

struct TruthSim {
    std::vector<Vector> states;          ///< x_0 .. x_K
    std::vector<Vector> attacker_obs;    ///< y_k at [k-1], k = 1..K
    std::vector<Vector> defender_noise;  ///< eps_k at [k-1]; a_k = g(attacker estimate) + eps_k
};

/// Seeded trajectory draw. Process, measurement, and defender noises come from
/// independent substreams of run_seed, so the defender observations can be
/// formed lazily against whichever filter plays the attacker.
TruthSim simulate_truth(const AdversarialScenario& scenario, const Vector& x0, int horizon,
                        std::uint64_t run_seed);

}  // namespace sigmafilt
