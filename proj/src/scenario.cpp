#include "sigmafilt/scenario.hpp"

namespace sigmafilt {

namespace {

void require_sym_psd(const Matrix& m, const char* name, bool strictly_pd) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch(std::string(name) + " must be square");
    }
    const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
    const double asym = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9 * (1.0 + scale)) {
        throw FilterError(std::string(name) + " is not symmetric");
    }
    const double lam = m.size() == 0 ? 0.0 : min_eigenvalue(m);
    if (strictly_pd ? (lam <= 0.0) : (lam < -1e-9 * (1.0 + scale))) {
        throw FilterError(std::string(name) + " fails its definiteness requirement (min eig " +
                          std::to_string(lam) + ")");
    }
}

}  // namespace

void NoiseSpec::validate() const {
    require_sym_psd(Q, "Q", false);
    require_sym_psd(R, "R", true);
    require_sym_psd(Sigma_eps, "Sigma_eps", true);
}

void AdversarialScenario::validate() const {
    if (n_x <= 0 || n_y <= 0 || n_a <= 0) {
        throw DimensionMismatch("scenario dimensions must be positive");
    }
    noise.validate();
    filter_noise.validate();
    if (noise.Q.rows() != n_x || noise.R.rows() != n_y || noise.Sigma_eps.rows() != n_a) {
        throw DimensionMismatch("noise covariance dimensions do not match scenario dims");
    }
    if (!f || !h || (!g && !g_with_cov)) {
        throw FilterError("scenario maps f, h, g must all be set");
    }
    const Vector probe = Vector::Zero(n_x);
    if (f(probe).size() != n_x) throw DimensionMismatch("f output dimension != n_x");
    if (h(probe).size() != n_y) throw DimensionMismatch("h output dimension != n_y");
    if (g && g(probe).size() != n_a) throw DimensionMismatch("g output dimension != n_a");
    if (g_with_cov && g_with_cov(probe, Matrix::Identity(n_x, n_x)).size() != n_a) {
        throw DimensionMismatch("g_with_cov output dimension != n_a");
    }
}

}  // namespace sigmafilt
