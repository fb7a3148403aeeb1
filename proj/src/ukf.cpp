#include "sigmafilt/ukf.hpp"

namespace sigmafilt {

GaussianBelief ukf_time_update(const UkfState& state, const AdversarialScenario& model) {
    const SigmaSet sigma = generate_sigma_points(state.belief, state.kappa);
    const UnscentedMoments m = unscented_transform(sigma, model.f, model.filter_noise.Q);
    return {m.mean, m.cov};
}

std::pair<UkfState, UkfStepTrace> ukf_measurement_update(const GaussianBelief& predicted,
                                                         const Vector& y,
                                                         const AdversarialScenario& model,
                                                         double kappa, int step_index) {
    if (y.size() != model.n_y) {
        throw DimensionMismatch("observation has dimension " + std::to_string(y.size()) +
                                ", expected " + std::to_string(model.n_y));
    }
    const SigmaSet sigma = generate_sigma_points(predicted, kappa);
    const UnscentedMoments m = unscented_transform(sigma, model.h, model.filter_noise.R);

    // Gain via a factorization-based solve of the innovation covariance;
    // the safeguarded Cholesky supplies the escalation policy.
    Matrix gain;
    try {
        const Matrix lower = cholesky_psd(m.cov).lower;
        gain = lower.transpose()
                   .triangularView<Eigen::Upper>()
                   .solve(lower.triangularView<Eigen::Lower>().solve(m.cross_cov.transpose()))
                   .transpose();
    } catch (const FactorizationFailure& e) {
        throw SingularInnovation(std::string("innovation covariance not positive definite: ") +
                                 e.what());
    }

    UkfState next;
    next.belief.mean = predicted.mean + gain * (y - m.mean);
    next.belief.cov = symmetrized(predicted.cov - gain * m.cov * gain.transpose());
    next.kappa = kappa;
    next.step_index = step_index;

    UkfStepTrace trace{predicted, m.mean, m.cov, m.cross_cov, gain};
    return {std::move(next), std::move(trace)};
}

std::pair<UkfState, UkfStepTrace> ukf_step(const UkfState& state, const Vector& y,
                                           const AdversarialScenario& model) {
    const GaussianBelief predicted = ukf_time_update(state, model);
    return ukf_measurement_update(predicted, y, model, state.kappa, state.step_index + 1);
}

}  // namespace sigmafilt
