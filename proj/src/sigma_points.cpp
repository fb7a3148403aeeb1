#include "sigmafilt/sigma_points.hpp"

#include <cmath>
#include <string>

namespace sigmafilt {

namespace {
thread_local long g_sigma_gen_calls = 0;
}

SigmaSet generate_sigma_points(const GaussianBelief& belief, double kappa) {
    const Eigen::Index n = belief.dim();
    const double scale = static_cast<double>(n) + kappa;
    if (scale <= 0.0) {
        throw NonPositiveScaling("n + kappa = " + std::to_string(scale) + " must be positive");
    }
    ++g_sigma_gen_calls;

    const Matrix root = cholesky_psd(scale * belief.cov).lower;

    SigmaSet set;
    set.kappa = kappa;
    set.points.resize(2 * static_cast<std::size_t>(n) + 1);
    set.points[0] = belief.mean;
    for (Eigen::Index i = 0; i < n; ++i) {
        set.points[1 + i] = belief.mean + root.col(i);
        set.points[1 + n + i] = belief.mean - root.col(i);
    }
    set.weights.resize(2 * n + 1);
    set.weights(0) = kappa / scale;
    set.weights.tail(2 * n).setConstant(1.0 / (2.0 * scale));
    return set;
}

long sigma_gen_count() { return g_sigma_gen_calls; }
void reset_sigma_gen_count() { g_sigma_gen_calls = 0; }

UnscentedMoments unscented_transform(const std::vector<Vector>& points, const Vector& weights,
                                     const VectorMap& map,
                                     const std::optional<Matrix>& additive_cov) {
    if (points.empty()) throw EmptyInput("unscented_transform needs at least one point");
    if (static_cast<Eigen::Index>(points.size()) != weights.size()) {
        throw DimensionMismatch("point count does not match weight count");
    }

    std::vector<Vector> outputs(points.size());
    outputs[0] = map(points[0]);
    const Eigen::Index out_dim = outputs[0].size();
    for (std::size_t i = 1; i < points.size(); ++i) {
        outputs[i] = map(points[i]);
        if (outputs[i].size() != out_dim) {
            throw DimensionMismatch("map output dimension varies across sigma points (" +
                                    std::to_string(outputs[i].size()) + " vs " +
                                    std::to_string(out_dim) + ")");
        }
    }
    if (additive_cov &&
        (additive_cov->rows() != out_dim || additive_cov->cols() != out_dim)) {
        throw DimensionMismatch("additive covariance does not match map output dimension");
    }

    const Eigen::Index in_dim = points[0].size();
    Vector in_mean = Vector::Zero(in_dim);
    Vector out_mean = Vector::Zero(out_dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
        in_mean += weights(static_cast<Eigen::Index>(i)) * points[i];
        out_mean += weights(static_cast<Eigen::Index>(i)) * outputs[i];
    }

    Matrix cov = Matrix::Zero(out_dim, out_dim);
    Matrix cross = Matrix::Zero(in_dim, out_dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double w = weights(static_cast<Eigen::Index>(i));
        const Vector dy = outputs[i] - out_mean;
        cov.noalias() += w * dy * dy.transpose();
        cross.noalias() += w * (points[i] - in_mean) * dy.transpose();
    }
    if (additive_cov) cov += *additive_cov;

    return {std::move(out_mean), symmetrized(cov), std::move(cross)};
}

UnscentedMoments unscented_transform(const SigmaSet& sigma, const VectorMap& map,
                                     const std::optional<Matrix>& additive_cov) {
    return unscented_transform(sigma.points, sigma.weights, map, additive_cov);
}

}  // namespace sigmafilt
