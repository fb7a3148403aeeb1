#pragma once

#include <utility>
#include <vector>

#include "sigmafilt/ukf.hpp"

namespace sigmafilt {

/// The defender's filter state: belief over the attacker's estimate, plus the
/// recursive surrogate sigma_star for the attacker's error covariance.
struct IukfState {
    GaussianBelief belief;          ///< over the attacker's estimate (n_x)
    Matrix sigma_star;              ///< defender's surrogate for the attacker's covariance
    double kappa_bar = 1.0;         ///< inverse filter's own spread
    double assumed_forward_kappa = 1.0;
    int step_index = 0;
};

/// Augmented state [estimate; attacker measurement noise] with block-diagonal
/// covariance diag(cov, R). The noise enters the recursion through this
/// augmentation, not through an additive term.
struct AugmentedBelief {
    Vector z_mean;
    Matrix z_cov;
};

AugmentedBelief make_augmented_belief(const GaussianBelief& belief, const Matrix& R);

struct IukfTransitionResult {
    Vector x_hat_next;   ///< the attacker's next estimate for this augmented point
    Matrix sigma_tilde;  ///< the forward covariance update obtained along the way
};

/// State transition of the inverse filter: one full forward-UKF step seeded at
/// (first n_x entries of z_point, sigma_star) with synthetic observation
/// h(x_next) + (last n_y entries of z_point). The forward gain is recomputed
/// for every call.
IukfTransitionResult iukf_transition(const Vector& z_point, const Matrix& sigma_star,
                                     const Vector& x_next, const AdversarialScenario& model,
                                     double assumed_forward_kappa);

/// How the per-sigma-point forward covariance updates are combined into the
/// next sigma_star. Uniform is the default; Weighted uses the sigma weights.
enum class SigmaStarAveraging { Uniform, Weighted };

struct IukfStepTrace {
    GaussianBelief predicted;
    Vector predicted_obs_mean;
    Matrix innovation_cov;
    Matrix cross_cov;
    Matrix gain;
    Matrix sigma_star_next;
};

/// One inverse recursion: augment, generate a single sigma set (the only
/// generation in the step), propagate every point through iukf_transition,
/// form the time update without an additive noise term, then push the
/// propagated points through g for the measurement update.
std::pair<IukfState, IukfStepTrace> iukf_step(
    const IukfState& state, const Vector& a_next, const Vector& x_next,
    const AdversarialScenario& model,
    SigmaStarAveraging averaging = SigmaStarAveraging::Uniform);

/// Divergence flag used by the experiment harness: estimates past 1e6 in norm
/// or covariance traces past 1e9 mark the run divergent instead of crashing.
bool divergence_flag(const Vector& mean, const Matrix& cov);

/// One Monte-Carlo run of (target sequence, estimate sequence, covariance
/// sequence), aligned per step.
struct EstimateTrack {
    std::vector<Vector> truth;
    std::vector<Vector> estimate;
    std::vector<Matrix> covariance;
};

/// Per-step gap between the average reported covariance and the sample error
/// covariance across runs. PASS means min-eig(mean cov - sample cov) >= -tau
/// at every step with tau = 0.05 * trace(mean cov) / n.
struct ConservativenessReport {
    std::vector<double> min_eig_gap;
    std::vector<double> tau;
    bool pass = false;
};

/// Requires at least 100 runs (InsufficientRuns otherwise).
ConservativenessReport conservativeness_probe(const std::vector<EstimateTrack>& runs);

}  // namespace sigmafilt
