#pragma once

#include <vector>

#include "sigmafilt/sigma_points.hpp"

namespace sigmafilt {

/// Fisher information carrier for the recursive Cramer-Rao lower bound.
struct FisherInfo {
    Matrix J;
};

/// Central finite-difference Jacobian, step 1e-5 * (1 + ||x||) per coordinate.
Matrix numeric_jacobian(const VectorMap& map, const Vector& x, double rel_step = 1e-5);

/// Information recursion with the Jacobians of the transition and of the next
/// observation taken at the true trajectory. Computed through the
/// matrix-inversion-lemma form J' = H^T R^-1 H + (F J^-1 F^T + Q)^-1, which is
/// algebraically identical to the textbook expression but also admits psd
/// (rank-deficient) process noise. Seed with J_0 = Sigma_0^-1.
FisherInfo rcrlb_step(const FisherInfo& info, const Matrix& F, const Matrix& H_next,
                      const Matrix& Q, const Matrix& R);

/// Same recursion on the inverse system: transition Jacobian from the inverse
/// filter's state transition (finite differences), observation Jacobian of g,
/// process noise proxy K R K^T, measurement noise Sigma_eps.
FisherInfo rcrlb_for_inverse(const FisherInfo& info, const Matrix& F_tilde,
                             const Matrix& G_next, const Matrix& Q_bar,
                             const Matrix& Sigma_eps);

/// sqrt(trace(J^-1)) — the scalar bound plotted against RMSE.
double rcrlb_bound(const FisherInfo& info);

/// sqrt(sum of selected diagonal entries of J^-1), e.g. position components.
double rcrlb_bound(const FisherInfo& info, const std::vector<int>& components);

/// One time step across Monte-Carlo runs: per-run error vectors and the
/// covariances each run's filter reported. The sample MSE matrix is formed
/// internally and eigenvalue-floored at 1e-12 (flag counts exposed).
struct CredibilityInputs {
    std::vector<Vector> errors;
    std::vector<Matrix> covariances;
};

struct NciResult {
    double nci_db = 0.0;      ///< 0 credible, positive optimistic, negative pessimistic
    int skipped = 0;          ///< zero-error runs excluded
    long floor_warnings = 0;  ///< eigenvalue floors applied before inversion
};

NciResult nci(const CredibilityInputs& inputs);

struct RmseReport {
    std::vector<double> per_step;
    double time_averaged = 0.0;
};

/// RMSE_k = sqrt(mean over runs of ||error||^2), then averaged over steps.
/// A nonempty component list restricts the norm to those entries.
RmseReport rmse_trace(const std::vector<std::vector<Vector>>& errors_per_run,
                      const std::vector<int>& components = {});

/// Least-squares style fit of the empirical mean-squared error to an
/// eta * E||e_0||^2 * lambda^k + nu envelope. The plateau level nu comes from
/// the third quarter of the horizon, the decaying term from the first half;
/// PASS means the envelope dominates the curve at every step with 5% slack.
/// An empirical diagnostic, not a proof of the stability conditions.
struct BoundednessFit {
    double eta = 0.0;
    double lambda = 0.0;
    double nu = 0.0;
    bool pass = false;
    std::vector<double> mean_squared;
};

BoundednessFit boundedness_probe(const std::vector<std::vector<Vector>>& errors_per_run);

}  // namespace sigmafilt
