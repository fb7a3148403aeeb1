#include "sigmafilt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sigmafilt {

Matrix numeric_jacobian(const VectorMap& map, const Vector& x, double rel_step) {
    const double h = rel_step * (1.0 + x.norm());
    const Eigen::Index n = x.size();
    Vector probe = x;
    probe(0) += h;
    const Eigen::Index m = map(probe).size();
    Matrix jac(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector hi = x;
        Vector lo = x;
        hi(j) += h;
        lo(j) -= h;
        jac.col(j) = (map(hi) - map(lo)) / (2.0 * h);
    }
    return jac;
}

FisherInfo rcrlb_step(const FisherInfo& info, const Matrix& F, const Matrix& H_next,
                      const Matrix& Q, const Matrix& R) {
    const Eigen::Index n = info.J.rows();
    Eigen::LDLT<Matrix> j_solver(symmetrized(info.J));
    if (j_solver.info() != Eigen::Success) {
        throw SingularInformation("information matrix is singular");
    }
    const Matrix j_inv = j_solver.solve(Matrix::Identity(n, n));
    if (!j_inv.allFinite()) {
        throw SingularInformation("information matrix inverse is non-finite");
    }
    const Matrix predictive = symmetrized(F * j_inv * F.transpose() + Q);
    Eigen::LDLT<Matrix> p_solver(predictive);
    if (p_solver.info() != Eigen::Success) {
        throw SingularInformation("predictive covariance in the information recursion is singular");
    }
    const Matrix predictive_info = p_solver.solve(Matrix::Identity(n, n));
    if (!predictive_info.allFinite()) {
        throw SingularInformation("predictive information is non-finite");
    }

    Eigen::LLT<Matrix> r_solver(symmetrized(R));
    if (r_solver.info() != Eigen::Success) {
        throw SingularInformation("measurement noise covariance is not positive definite");
    }
    const Matrix obs_info = H_next.transpose() * r_solver.solve(H_next);
    return {symmetrized(obs_info + predictive_info)};
}

FisherInfo rcrlb_for_inverse(const FisherInfo& info, const Matrix& F_tilde,
                             const Matrix& G_next, const Matrix& Q_bar,
                             const Matrix& Sigma_eps) {
    return rcrlb_step(info, F_tilde, G_next, symmetrized(Q_bar), Sigma_eps);
}

double rcrlb_bound(const FisherInfo& info) {
    const Eigen::Index n = info.J.rows();
    const Matrix j_inv = Eigen::LDLT<Matrix>(symmetrized(info.J)).solve(Matrix::Identity(n, n));
    return std::sqrt(std::max(0.0, j_inv.trace()));
}

double rcrlb_bound(const FisherInfo& info, const std::vector<int>& components) {
    const Eigen::Index n = info.J.rows();
    const Matrix j_inv = Eigen::LDLT<Matrix>(symmetrized(info.J)).solve(Matrix::Identity(n, n));
    double sum = 0.0;
    for (int c : components) sum += j_inv(c, c);
    return std::sqrt(std::max(0.0, sum));
}

NciResult nci(const CredibilityInputs& inputs) {
    const std::size_t m = inputs.errors.size();
    if (m < 2) throw InsufficientRuns("NCI needs at least two runs");
    if (inputs.covariances.size() != m) {
        throw DimensionMismatch("errors and covariances must align per run");
    }
    const Eigen::Index n = inputs.errors.front().size();

    NciResult result;
    Matrix sample = Matrix::Zero(n, n);
    for (const Vector& err : inputs.errors) {
        sample.noalias() += err * err.transpose();
    }
    sample /= static_cast<double>(m);
    sample = floor_eigenvalues(sample, 1e-12, &result.floor_warnings);
    Eigen::LDLT<Matrix> sample_solver(sample);

    double sum = 0.0;
    int included = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const Vector& err = inputs.errors[i];
        if (err.norm() == 0.0) {
            ++result.skipped;
            continue;
        }
        const Matrix cov = floor_eigenvalues(inputs.covariances[i], 1e-12,
                                             &result.floor_warnings);
        const double eps_reported = err.dot(Eigen::LDLT<Matrix>(cov).solve(err));
        const double eps_actual = err.dot(sample_solver.solve(err));
        if (eps_reported <= 0.0 || eps_actual <= 0.0) {
            ++result.skipped;
            continue;
        }
        sum += std::log10(eps_reported / eps_actual);
        ++included;
    }
    if (included == 0) throw DegenerateInputs("every run was skipped in the NCI computation");
    result.nci_db = 10.0 * sum / static_cast<double>(included);
    return result;
}

RmseReport rmse_trace(const std::vector<std::vector<Vector>>& errors_per_run,
                      const std::vector<int>& components) {
    if (errors_per_run.empty() || errors_per_run.front().empty()) {
        throw EmptyInput("rmse_trace needs at least one run with at least one step");
    }
    const std::size_t horizon = errors_per_run.front().size();
    for (const auto& run : errors_per_run) {
        if (run.size() != horizon) throw DimensionMismatch("run lengths are not aligned");
    }

    const auto squared = [&components](const Vector& err) {
        if (components.empty()) return err.squaredNorm();
        double s = 0.0;
        for (int c : components) s += err(c) * err(c);
        return s;
    };

    RmseReport report;
    report.per_step.reserve(horizon);
    double total = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        double acc = 0.0;
        for (const auto& run : errors_per_run) acc += squared(run[k]);
        const double rmse = std::sqrt(acc / static_cast<double>(errors_per_run.size()));
        report.per_step.push_back(rmse);
        total += rmse;
    }
    report.time_averaged = total / static_cast<double>(horizon);
    return report;
}

BoundednessFit boundedness_probe(const std::vector<std::vector<Vector>>& errors_per_run) {
    if (errors_per_run.empty() || errors_per_run.front().empty()) {
        throw EmptyInput("boundedness_probe needs error sequences");
    }
    const std::size_t horizon = errors_per_run.front().size();

    BoundednessFit fit;
    fit.mean_squared.resize(horizon, 0.0);
    for (const auto& run : errors_per_run) {
        if (run.size() != horizon) throw DimensionMismatch("run lengths are not aligned");
        for (std::size_t k = 0; k < horizon; ++k) {
            fit.mean_squared[k] += run[k].squaredNorm();
        }
    }
    for (double& v : fit.mean_squared) v /= static_cast<double>(errors_per_run.size());

    // Plateau level: the largest value in the third quarter of the horizon.
    // The last quarter stays out so a diverging tail cannot inflate nu.
    const std::size_t q2 = horizon / 2;
    const std::size_t q3 = std::max(q2 + 1, (3 * horizon) / 4);
    fit.nu = 0.0;
    for (std::size_t k = q2; k < q3; ++k) fit.nu = std::max(fit.nu, fit.mean_squared[k]);

    // Decaying term: for each candidate rate, take the smallest amplitude
    // that dominates the plateau residual over the first half, then keep the
    // rate whose envelope hugs that residual tightest.
    const double m0 = fit.mean_squared.front();
    double best_sse = std::numeric_limits<double>::infinity();
    double best_lambda = 0.9;
    double best_amp = 0.0;
    for (double lambda = 0.05; lambda <= 0.9951; lambda += 0.005) {
        double amp = 0.0;
        double power = 1.0;
        for (std::size_t k = 0; k < q2; ++k) {
            const double target = std::max(0.0, fit.mean_squared[k] - fit.nu);
            if (target > 0.0) amp = std::max(amp, target / power);
            power *= lambda;
            if (power < 1e-300) break;
        }
        double sse = 0.0;
        power = 1.0;
        for (std::size_t k = 0; k < q2; ++k) {
            const double target = std::max(0.0, fit.mean_squared[k] - fit.nu);
            const double r = amp * power - target;
            sse += r * r;
            power *= lambda;
        }
        if (sse < best_sse) {
            best_sse = sse;
            best_lambda = lambda;
            best_amp = amp;
        }
    }
    fit.lambda = best_lambda;
    fit.eta = m0 > 0.0 ? best_amp / m0 : 0.0;

    const double slack = 1.05;
    fit.pass = true;
    double power = 1.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        const double envelope = best_amp * power + fit.nu;
        if (slack * envelope < fit.mean_squared[k]) {
            fit.pass = false;
            break;
        }
        power *= best_lambda;
    }
    return fit;
}

}  // namespace sigmafilt
