#include "sigmafilt/iukf.hpp"

#include <string>

namespace sigmafilt {

AugmentedBelief make_augmented_belief(const GaussianBelief& belief, const Matrix& R) {
    const Eigen::Index n_x = belief.dim();
    const Eigen::Index n_y = R.rows();
    AugmentedBelief aug;
    aug.z_mean = Vector::Zero(n_x + n_y);
    aug.z_mean.head(n_x) = belief.mean;
    aug.z_cov = Matrix::Zero(n_x + n_y, n_x + n_y);
    aug.z_cov.topLeftCorner(n_x, n_x) = belief.cov;
    aug.z_cov.bottomRightCorner(n_y, n_y) = R;
    return aug;
}

IukfTransitionResult iukf_transition(const Vector& z_point, const Matrix& sigma_star,
                                     const Vector& x_next, const AdversarialScenario& model,
                                     double assumed_forward_kappa) {
    const Eigen::Index n_x = model.n_x;
    const Eigen::Index n_y = model.n_y;
    if (z_point.size() != n_x + n_y) {
        throw DimensionMismatch("augmented point has dimension " +
                                std::to_string(z_point.size()) + ", expected " +
                                std::to_string(n_x + n_y));
    }

    UkfState seeded;
    seeded.belief = {z_point.head(n_x), sigma_star};
    seeded.kappa = assumed_forward_kappa;

    const Vector y_synthetic = model.h(x_next) + z_point.tail(n_y);
    auto [next, trace] = ukf_step(seeded, y_synthetic, model);
    return {next.belief.mean, next.belief.cov};
}

std::pair<IukfState, IukfStepTrace> iukf_step(const IukfState& state, const Vector& a_next,
                                              const Vector& x_next,
                                              const AdversarialScenario& model,
                                              SigmaStarAveraging averaging) {
    if (a_next.size() != model.n_a) {
        throw DimensionMismatch("defender observation has dimension " +
                                std::to_string(a_next.size()) + ", expected " +
                                std::to_string(model.n_a));
    }
    const Eigen::Index n_x = model.n_x;

    // The augmentation carries the attacker's actual measurement noise; the
    // nested forward steps use whatever the attacker's filter assumes.
    const AugmentedBelief aug = make_augmented_belief(state.belief, model.noise.R);
    const SigmaSet sigma = generate_sigma_points({aug.z_mean, aug.z_cov}, state.kappa_bar);

    const std::size_t count = sigma.count();
    std::vector<Vector> propagated(count);
    Matrix sigma_star_next = Matrix::Zero(n_x, n_x);
    for (std::size_t j = 0; j < count; ++j) {
        try {
            IukfTransitionResult r = iukf_transition(sigma.points[j], state.sigma_star, x_next,
                                                     model, state.assumed_forward_kappa);
            propagated[j] = std::move(r.x_hat_next);
            const double w = averaging == SigmaStarAveraging::Uniform
                                 ? 1.0 / static_cast<double>(count)
                                 : sigma.weights(static_cast<Eigen::Index>(j));
            sigma_star_next += w * r.sigma_tilde;
        } catch (const FilterError& e) {
            throw SingularInnovation("forward step for sigma point " + std::to_string(j) +
                                     " failed: " + e.what());
        }
    }
    sigma_star_next = symmetrized(sigma_star_next);

    // Time update: weighted moments of the propagated points, no additive
    // noise term (the noise entered through the augmentation).
    Vector x_pred = Vector::Zero(n_x);
    for (std::size_t j = 0; j < count; ++j) {
        x_pred += sigma.weights(static_cast<Eigen::Index>(j)) * propagated[j];
    }
    Matrix cov_pred = Matrix::Zero(n_x, n_x);
    for (std::size_t j = 0; j < count; ++j) {
        const Vector d = propagated[j] - x_pred;
        cov_pred.noalias() += sigma.weights(static_cast<Eigen::Index>(j)) * d * d.transpose();
    }
    cov_pred = symmetrized(cov_pred);

    // Measurement update: the propagated points go through g directly; the
    // recursion generates sigma points only once.
    std::vector<Vector> actions(count);
    for (std::size_t j = 0; j < count; ++j) {
        actions[j] = model.g_with_cov ? model.g_with_cov(propagated[j], sigma_star_next)
                                      : model.g(propagated[j]);
        if (actions[j].size() != model.n_a) {
            throw DimensionMismatch("g output dimension varies across sigma points");
        }
    }
    Vector a_pred = Vector::Zero(model.n_a);
    for (std::size_t j = 0; j < count; ++j) {
        a_pred += sigma.weights(static_cast<Eigen::Index>(j)) * actions[j];
    }
    Matrix innovation = Matrix::Zero(model.n_a, model.n_a);
    Matrix cross = Matrix::Zero(n_x, model.n_a);
    for (std::size_t j = 0; j < count; ++j) {
        const double w = sigma.weights(static_cast<Eigen::Index>(j));
        const Vector da = actions[j] - a_pred;
        innovation.noalias() += w * da * da.transpose();
        cross.noalias() += w * (propagated[j] - x_pred) * da.transpose();
    }
    innovation = symmetrized(innovation + model.noise.Sigma_eps);

    Matrix gain;
    try {
        const Matrix lower = cholesky_psd(innovation).lower;
        gain = lower.transpose()
                   .triangularView<Eigen::Upper>()
                   .solve(lower.triangularView<Eigen::Lower>().solve(cross.transpose()))
                   .transpose();
    } catch (const FactorizationFailure& e) {
        throw SingularInnovation(std::string("defender innovation covariance singular: ") +
                                 e.what());
    }

    IukfState next;
    next.belief.mean = x_pred + gain * (a_next - a_pred);
    next.belief.cov = symmetrized(cov_pred - gain * innovation * gain.transpose());
    next.sigma_star = sigma_star_next;
    next.kappa_bar = state.kappa_bar;
    next.assumed_forward_kappa = state.assumed_forward_kappa;
    next.step_index = state.step_index + 1;

    IukfStepTrace trace{{x_pred, cov_pred}, a_pred, innovation, cross, gain, sigma_star_next};
    return {std::move(next), std::move(trace)};
}

bool divergence_flag(const Vector& mean, const Matrix& cov) {
    if (!mean.allFinite() || !cov.allFinite()) return true;
    return mean.norm() > 1e6 || cov.trace() > 1e9;
}

ConservativenessReport conservativeness_probe(const std::vector<EstimateTrack>& runs) {
    if (runs.size() < 100) {
        throw InsufficientRuns("conservativeness probe needs at least 100 runs, got " +
                               std::to_string(runs.size()));
    }
    const std::size_t horizon = runs.front().truth.size();
    for (const EstimateTrack& run : runs) {
        if (run.truth.size() != horizon || run.estimate.size() != horizon ||
            run.covariance.size() != horizon) {
            throw DimensionMismatch("all probe runs must share the same horizon");
        }
    }
    const Eigen::Index n = runs.front().truth.front().size();
    const double m = static_cast<double>(runs.size());

    ConservativenessReport report;
    report.min_eig_gap.reserve(horizon);
    report.tau.reserve(horizon);
    report.pass = true;
    for (std::size_t k = 0; k < horizon; ++k) {
        Matrix mean_cov = Matrix::Zero(n, n);
        Matrix sample = Matrix::Zero(n, n);
        for (const EstimateTrack& run : runs) {
            mean_cov += run.covariance[k];
            const Vector err = run.truth[k] - run.estimate[k];
            sample.noalias() += err * err.transpose();
        }
        mean_cov /= m;
        sample /= m;
        const double gap = min_eigenvalue(mean_cov - sample);
        const double tau = 0.05 * mean_cov.trace() / static_cast<double>(n);
        report.min_eig_gap.push_back(gap);
        report.tau.push_back(tau);
        if (gap < -tau) report.pass = false;
    }
    return report;
}

}  // namespace sigmafilt
