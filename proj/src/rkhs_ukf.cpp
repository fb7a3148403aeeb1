#include "sigmafilt/rkhs_ukf.hpp"

#include <cmath>
#include <string>

namespace sigmafilt {

namespace {

/// Solve X * S = T for X given symmetric psd S, with ridge 1e-8 * trace / L.
Matrix solve_gram(const Matrix& numerator, const Matrix& gram, const char* which) {
    const Eigen::Index l = gram.rows();
    const double ridge = 1e-8 * gram.trace() / static_cast<double>(l);
    const Matrix regularized = symmetrized(gram) + ridge * Matrix::Identity(l, l);
    Eigen::LDLT<Matrix> ldlt(regularized);
    if (ldlt.info() != Eigen::Success) {
        throw SingularGram(std::string(which) + " Gram sum is singular after ridge");
    }
    Matrix solution = ldlt.solve(numerator.transpose()).transpose();
    if (!solution.allFinite()) {
        throw SingularGram(std::string(which) + " Gram solve produced non-finite values");
    }
    return solution;
}

double spectral_norm(const Matrix& m) {
    return m.jacobiSvd().singularValues()(0);
}

Matrix clip_spectral(const Matrix& m, double bound, long* clipped) {
    const double norm = spectral_norm(m);
    if (norm <= bound || norm == 0.0) return m;
    if (clipped) ++(*clipped);
    return m * (bound / norm);
}

Matrix zero_padded_cov(const Matrix& q_hat) {
    const Eigen::Index n = q_hat.rows();
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    out.topLeftCorner(n, n) = q_hat;
    return out;
}

RkhsUkfState init_common(const GaussianBelief& x0_belief, double kappa, const Matrix& q0,
                         const Matrix& r0, const KernelSpec& kernel,
                         const DictionaryPolicy& policy, const std::vector<Vector>& atoms,
                         const RkhsBounds& bounds, double init_fill, double gram_seed) {
    const Eigen::Index n_x = x0_belief.dim();
    const Eigen::Index n_y = r0.rows();
    if (q0.rows() != n_x || q0.cols() != n_x) {
        throw DimensionMismatch("q0 must be n_x x n_x");
    }

    RkhsUkfState state;
    state.z_belief.mean = Vector::Zero(2 * n_x);
    state.z_belief.mean.head(n_x) = x0_belief.mean;
    state.z_belief.mean.tail(n_x) = x0_belief.mean;
    state.z_belief.cov = Matrix::Zero(2 * n_x, 2 * n_x);
    state.z_belief.cov.topLeftCorner(n_x, n_x) = x0_belief.cov;
    state.z_belief.cov.bottomRightCorner(n_x, n_x) = x0_belief.cov;

    state.dict.atoms = atoms;
    state.dict.policy = policy;
    state.kernel = kernel;
    state.kappa = kappa;
    state.step_index = 0;

    const Eigen::Index l = static_cast<Eigen::Index>(atoms.size());
    state.params.A_hat = Matrix::Constant(n_x, l, init_fill);
    state.params.B_hat = Matrix::Constant(n_y, l, init_fill);
    state.params.Q_hat = q0;
    state.params.R_hat = r0;
    state.params.S_xphi = Matrix::Zero(n_x, l);
    state.params.S_phi1 = gram_seed * Matrix::Identity(l, l);
    state.params.S_yphi = Matrix::Zero(n_y, l);
    state.params.S_phi = gram_seed * Matrix::Identity(l, l);
    state.params.bounds = bounds;

    state.cached_sigma = generate_sigma_points(state.z_belief, kappa);
    return state;
}

}  // namespace

Vector feature_map(const Vector& x, const Dictionary& dict, const KernelSpec& kernel) {
    if (dict.atoms.empty()) throw EmptyInput("feature_map needs a nonempty dictionary");
    Vector phi(dict.size());
    for (int l = 0; l < dict.size(); ++l) {
        phi(l) = std::exp(-(dict.atoms[static_cast<std::size_t>(l)] - x).squaredNorm() /
                          kernel.sigma2);
    }
    return phi;
}

double ald_residual(const Vector& x, const Dictionary& dict, const KernelSpec& kernel) {
    const int l = dict.size();
    Matrix gram(l, l);
    for (int i = 0; i < l; ++i) {
        for (int j = 0; j < l; ++j) {
            gram(i, j) = std::exp(
                -(dict.atoms[static_cast<std::size_t>(i)] - dict.atoms[static_cast<std::size_t>(j)])
                     .squaredNorm() /
                kernel.sigma2);
        }
    }
    const Vector k_vec = feature_map(x, dict, kernel);
    const Matrix regularized = gram + 1e-12 * Matrix::Identity(l, l);
    const Vector coeffs = Eigen::LDLT<Matrix>(regularized).solve(k_vec);
    // K(x, x) = 1 for the Gaussian kernel.
    return 1.0 - k_vec.dot(coeffs);
}

RkhsUkfState rkhs_init(const GaussianBelief& x0_belief, double kappa, const Matrix& q0,
                       const Matrix& r0, const KernelSpec& kernel,
                       const DictionaryPolicy& policy, const RkhsBounds& bounds,
                       double init_fill) {
    return init_common(x0_belief, kappa, q0, r0, kernel, policy, {x0_belief.mean}, bounds,
                       init_fill, 0.0);
}

RkhsUkfState rkhs_init_with_dictionary(const GaussianBelief& x0_belief, double kappa,
                                       const Matrix& q0, const Matrix& r0,
                                       const KernelSpec& kernel, const DictionaryPolicy& policy,
                                       const std::vector<Vector>& atoms, const RkhsBounds& bounds,
                                       double init_fill, double gram_seed) {
    if (atoms.empty()) throw EmptyInput("initial dictionary must be nonempty");
    return init_common(x0_belief, kappa, q0, r0, kernel, policy, atoms, bounds, init_fill,
                       gram_seed);
}

std::pair<GaussianBelief, SigmaSet> rkhs_predict(const RkhsUkfState& state) {
    const Eigen::Index n_x = state.state_dim();
    SigmaSet sigma = state.cached_sigma;
    if (sigma.points.empty()) {
        sigma = generate_sigma_points(state.z_belief, state.kappa);
    }

    const Matrix& a = state.params.A_hat;
    const Dictionary& dict = state.dict;
    const KernelSpec& kernel = state.kernel;
    const VectorMap f_aug = [&a, &dict, &kernel, n_x](const Vector& z) {
        Vector out(2 * n_x);
        out.head(n_x) = a * feature_map(z.head(n_x), dict, kernel);
        out.tail(n_x) = z.head(n_x);
        return out;
    };
    const UnscentedMoments m =
        unscented_transform(sigma, f_aug, zero_padded_cov(state.params.Q_hat));
    return {{m.mean, m.cov}, std::move(sigma)};
}

RkhsUkfState rkhs_update(const RkhsUkfState& state, const GaussianBelief& z_pred,
                         const Vector& y) {
    const Eigen::Index n_x = state.state_dim();
    if (y.size() != state.params.R_hat.rows()) {
        throw DimensionMismatch("observation dimension does not match R_hat");
    }

    const SigmaSet sigma = generate_sigma_points(z_pred, state.kappa);
    const Matrix& b = state.params.B_hat;
    const Dictionary& dict = state.dict;
    const KernelSpec& kernel = state.kernel;
    const VectorMap h_aug = [&b, &dict, &kernel, n_x](const Vector& z) {
        return Vector(b * feature_map(z.head(n_x), dict, kernel));
    };
    const UnscentedMoments m = unscented_transform(sigma, h_aug, state.params.R_hat);

    Matrix gain;
    try {
        const Matrix lower = cholesky_psd(m.cov).lower;
        gain = lower.transpose()
                   .triangularView<Eigen::Upper>()
                   .solve(lower.triangularView<Eigen::Lower>().solve(m.cross_cov.transpose()))
                   .transpose();
    } catch (const FactorizationFailure& e) {
        throw SingularInnovation(std::string("learned innovation covariance singular: ") +
                                 e.what());
    }

    RkhsUkfState next = state;
    next.z_belief.mean = z_pred.mean + gain * (y - m.mean);
    next.z_belief.cov = symmetrized(z_pred.cov - gain * m.cov * gain.transpose());
    next.cached_sigma = SigmaSet{};  // stale; the expectations step regenerates
    return next;
}

std::pair<RkhsExpectations, SigmaSet> rkhs_expectations(const RkhsUkfState& state) {
    const Eigen::Index n_x = state.state_dim();
    const int l = state.dict.size();

    SigmaSet sigma = generate_sigma_points(state.z_belief, state.kappa);
    const std::size_t count = sigma.count();

    RkhsExpectations e;
    e.xx = symmetrized(state.z_belief.cov.topLeftCorner(n_x, n_x) +
                       state.z_belief.mean.head(n_x) * state.z_belief.mean.head(n_x).transpose());
    e.phi1_phi1 = Matrix::Zero(l, l);
    e.x_phi1 = Matrix::Zero(n_x, l);
    e.phi_phi = Matrix::Zero(l, l);
    e.phi_mean = Vector::Zero(l);
    for (std::size_t i = 0; i < count; ++i) {
        const double w = sigma.weights(static_cast<Eigen::Index>(i));
        const Vector current = sigma.points[i].head(n_x);
        const Vector previous = sigma.points[i].tail(n_x);
        const Vector phi_current = feature_map(current, state.dict, state.kernel);
        const Vector phi_previous = feature_map(previous, state.dict, state.kernel);
        e.phi1_phi1.noalias() += w * phi_previous * phi_previous.transpose();
        e.x_phi1.noalias() += w * current * phi_previous.transpose();
        e.phi_phi.noalias() += w * phi_current * phi_current.transpose();
        e.phi_mean += w * phi_current;
    }
    e.phi1_phi1 = symmetrized(e.phi1_phi1);
    e.phi_phi = symmetrized(e.phi_phi);
    return {std::move(e), std::move(sigma)};
}

RkhsParameterEstimate rkhs_param_update(const RkhsParameterEstimate& params,
                                        const RkhsExpectations& e, const Vector& y, int k) {
    if (k < 1) throw FilterError("parameter update needs step index k >= 1");
    if (y.size() != params.B_hat.rows()) {
        throw DimensionMismatch("observation dimension does not match B_hat");
    }
    const double inv_k = 1.0 / static_cast<double>(k);

    RkhsParameterEstimate next = params;

    next.S_xphi += e.x_phi1;
    next.S_phi1 += e.phi1_phi1;
    next.A_hat = clip_spectral(solve_gram(next.S_xphi, next.S_phi1, "state-feature"),
                               params.bounds.a_bar, &next.clip_count_a);

    const Matrix q_innovation = e.xx - next.A_hat * e.x_phi1.transpose() -
                                e.x_phi1 * next.A_hat.transpose() +
                                next.A_hat * e.phi1_phi1 * next.A_hat.transpose();
    next.Q_hat = floor_eigenvalues((1.0 - inv_k) * params.Q_hat + inv_k * q_innovation, 1e-10,
                                   &next.floor_count);

    // Observation side: the observed y is known exactly given the data, so
    // its moments factor through the expected features.
    const Matrix e_yphi = y * e.phi_mean.transpose();
    next.S_yphi += e_yphi;
    next.S_phi += e.phi_phi;
    next.B_hat = clip_spectral(solve_gram(next.S_yphi, next.S_phi, "observation-feature"),
                               params.bounds.b_bar, &next.clip_count_b);

    const Matrix r_innovation = y * y.transpose() - next.B_hat * e_yphi.transpose() -
                                e_yphi * next.B_hat.transpose() +
                                next.B_hat * e.phi_phi * next.B_hat.transpose();
    next.R_hat = floor_eigenvalues((1.0 - inv_k) * params.R_hat + inv_k * r_innovation, 1e-10,
                                   &next.floor_count);
    return next;
}

void dictionary_update(Dictionary& dict, RkhsParameterEstimate& params,
                       const Vector& new_estimate, const KernelSpec& kernel) {
    const auto append_atom = [&]() {
        dict.atoms.push_back(new_estimate);
        const Eigen::Index l = dict.size();
        params.A_hat.conservativeResize(Eigen::NoChange, l);
        params.A_hat.col(l - 1).setZero();
        params.B_hat.conservativeResize(Eigen::NoChange, l);
        params.B_hat.col(l - 1).setZero();
        params.S_xphi.conservativeResize(Eigen::NoChange, l);
        params.S_xphi.col(l - 1).setZero();
        params.S_yphi.conservativeResize(Eigen::NoChange, l);
        params.S_yphi.col(l - 1).setZero();

        const auto grow_gram = [l](Matrix& s) {
            s.conservativeResize(l, l);
            s.row(l - 1).setZero();
            s.col(l - 1).setZero();
            s(l - 1, l - 1) = 1e-8;  // keeps the Gram solvable until data arrives
        };
        grow_gram(params.S_phi1);
        grow_gram(params.S_phi);
    };

    const auto drop_oldest = [&]() {
        dict.atoms.erase(dict.atoms.begin());
        const Eigen::Index l = dict.size();
        const auto drop_col = [l](Matrix& m) {
            Matrix out(m.rows(), l);
            out = m.rightCols(l);
            m = std::move(out);
        };
        drop_col(params.A_hat);
        drop_col(params.B_hat);
        drop_col(params.S_xphi);
        drop_col(params.S_yphi);
        const auto drop_row_col = [l](Matrix& s) {
            Matrix out(l, l);
            out = s.bottomRightCorner(l, l);
            s = std::move(out);
        };
        drop_row_col(params.S_phi1);
        drop_row_col(params.S_phi);
    };

    if (const auto* sliding = std::get_if<SlidingWindowPolicy>(&dict.policy)) {
        append_atom();
        while (dict.size() > sliding->window) drop_oldest();
    } else {
        const auto& ald = std::get<AldPolicy>(dict.policy);
        if (ald_residual(new_estimate, dict, kernel) > ald.nu) append_atom();
    }
}

std::pair<RkhsUkfState, Vector> rkhs_step(const RkhsUkfState& state, const Vector& y) {
    auto [z_pred, used] = rkhs_predict(state);
    RkhsUkfState next = rkhs_update(state, z_pred, y);
    next.step_index = state.step_index + 1;

    auto [expect, fresh] = rkhs_expectations(next);
    next.cached_sigma = std::move(fresh);
    next.params = rkhs_param_update(next.params, expect, y, next.step_index);

    const Vector x_hat = next.z_belief.mean.head(next.state_dim());
    dictionary_update(next.dict, next.params, x_hat, next.kernel);
    return {std::move(next), x_hat};
}

}  // namespace sigmafilt
