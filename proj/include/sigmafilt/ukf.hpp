#pragma once

#include <utility>

#include "sigmafilt/scenario.hpp"

namespace sigmafilt {

/// The attacker's filter state: belief over the defender's state.
struct UkfState {
    GaussianBelief belief;
    double kappa = 1.0;
    int step_index = 0;
};

/// Intermediate quantities of one measurement update, retained for metrics
/// and for the inverse filter's covariance surrogate machinery.
struct UkfStepTrace {
    GaussianBelief predicted;
    Vector predicted_obs_mean;
    Matrix innovation_cov;
    Matrix cross_cov;
    Matrix gain;
};

/// Sigma generation at the current belief, propagation through f, weighted
/// moments plus the filter-assumed process noise.
GaussianBelief ukf_time_update(const UkfState& state, const AdversarialScenario& model);

/// Regenerates a fresh sigma set from the predicted belief (the classical
/// recursion; propagating the time-update set through h is not supported),
/// then applies the gain update. Throws SingularInnovation when the predicted
/// observation covariance is not positive definite beyond the jitter policy.
std::pair<UkfState, UkfStepTrace> ukf_measurement_update(const GaussianBelief& predicted,
                                                         const Vector& y,
                                                         const AdversarialScenario& model,
                                                         double kappa, int step_index = 0);

/// Full recursion: time update then measurement update. Exactly two sigma-set
/// generations per call.
std::pair<UkfState, UkfStepTrace> ukf_step(const UkfState& state, const Vector& y,
                                           const AdversarialScenario& model);

}  // namespace sigmafilt
