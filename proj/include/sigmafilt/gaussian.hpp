#pragma once

#include <Eigen/Dense>

#include "sigmafilt/errors.hpp"

namespace sigmafilt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// (M + M^T) / 2. Applied to every covariance before it leaves an operation,
/// since floating-point drift otherwise violates symmetry over long horizons.
Matrix symmetrized(const Matrix& m);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& sym);

/// Mean and covariance pair; the universal carrier of filter state.
struct GaussianBelief {
    Vector mean;
    Matrix cov;

    Eigen::Index dim() const { return mean.size(); }

    /// Checks symmetry (1e-9 per entry) and positive semidefiniteness
    /// (min eigenvalue >= -1e-9 * (1 + ||cov||_F)). Throws FilterError.
    void validate() const;
};

/// Escalation schedule for the safeguarded Cholesky factorization.
struct JitterPolicy {
    double initial = 1e-12;
    double growth = 10.0;
    int max_tries = 8;
};

struct CholeskyResult {
    Matrix lower;        ///< L with L L^T = M + jitter I
    double jitter = 0.0; ///< 0 on healthy inputs
    int tries = 0;       ///< escalation steps taken
};

/// Lower-triangular Cholesky factor of a symmetric psd matrix. Tries the bare
/// factorization first, then adds diagonal jitter per the policy. Throws
/// FactorizationFailure once the schedule is exhausted.
CholeskyResult cholesky_psd(const Matrix& m, const JitterPolicy& policy = {});

/// Number of factorizations (since the last reset) that needed jitter > 0.
long cholesky_escalation_count();
void reset_cholesky_escalation_count();

/// Clamps eigenvalues of a symmetric matrix at min_value from below.
/// Increments *floored for every clamped eigenvalue when provided.
Matrix floor_eigenvalues(const Matrix& sym, double min_value, long* floored = nullptr);

}  // namespace sigmafilt
