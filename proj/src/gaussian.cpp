#include "sigmafilt/gaussian.hpp"

#include <cmath>
#include <sstream>

namespace sigmafilt {

namespace {
thread_local long g_cholesky_escalations = 0;
}

Matrix symmetrized(const Matrix& m) {
    return 0.5 * (m + m.transpose());
}

double min_eigenvalue(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sym), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void GaussianBelief::validate() const {
    if (cov.rows() != dim() || cov.cols() != dim()) {
        std::ostringstream oss;
        oss << "covariance is " << cov.rows() << "x" << cov.cols()
            << " for a mean of dimension " << dim();
        throw DimensionMismatch(oss.str());
    }
    const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) {
        throw FilterError("covariance asymmetry " + std::to_string(asym) + " exceeds 1e-9");
    }
    const double floor = -1e-9 * (1.0 + cov.norm());
    const double lam = min_eigenvalue(cov);
    if (lam < floor) {
        throw FilterError("covariance min eigenvalue " + std::to_string(lam) +
                          " below psd tolerance " + std::to_string(floor));
    }
}

CholeskyResult cholesky_psd(const Matrix& m, const JitterPolicy& policy) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch("cholesky_psd needs a square matrix");
    }
    const double asym = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
    const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
    if (asym > 1e-6 * (1.0 + scale)) {
        throw FactorizationFailure("input is not symmetric (max asymmetry " +
                                   std::to_string(asym) + ")");
    }
    const Matrix sym = symmetrized(m);
    const Eigen::Index n = sym.rows();

    // Exact zero spread is a legitimate degenerate belief.
    if (scale == 0.0) {
        return {Matrix::Zero(n, n), 0.0, 0};
    }

    double jitter = 0.0;
    for (int attempt = 0; attempt <= policy.max_tries; ++attempt) {
        Eigen::LLT<Matrix> llt(sym + jitter * Matrix::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            Matrix lower = llt.matrixL();
            if (lower.allFinite()) {
                if (jitter > 0.0) ++g_cholesky_escalations;
                return {std::move(lower), jitter, attempt};
            }
        }
        jitter = (attempt == 0) ? policy.initial : jitter * policy.growth;
    }
    throw FactorizationFailure("Cholesky failed after " + std::to_string(policy.max_tries) +
                               " jitter escalations (last jitter " + std::to_string(jitter) + ")");
}

long cholesky_escalation_count() { return g_cholesky_escalations; }
void reset_cholesky_escalation_count() { g_cholesky_escalations = 0; }

Matrix floor_eigenvalues(const Matrix& sym, double min_value, long* floored) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sym));
    Vector lam = es.eigenvalues();
    bool touched = false;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < min_value) {
            lam(i) = min_value;
            touched = true;
            if (floored) ++(*floored);
        }
    }
    if (!touched) return symmetrized(sym);
    return symmetrized(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

}  // namespace sigmafilt
