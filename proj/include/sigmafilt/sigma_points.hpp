#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sigmafilt/gaussian.hpp"

namespace sigmafilt {

using VectorMap = std::function<Vector(const Vector&)>;

/// Deterministic sample set produced by the unscented transform's generator:
/// point 0 at the mean, points i and i+n at mean +/- column i of the Cholesky
/// factor of (n + kappa) * cov.
struct SigmaSet {
    std::vector<Vector> points;  ///< 2n+1 points
    Vector weights;              ///< sums to 1
    double kappa = 0.0;

    Eigen::Index dim() const { return points.empty() ? 0 : points.front().size(); }
    std::size_t count() const { return points.size(); }
};

/// Requires n + kappa > 0 (throws NonPositiveScaling otherwise). Weight of the
/// central point is kappa / (n + kappa); all others are 1 / (2 (n + kappa)).
SigmaSet generate_sigma_points(const GaussianBelief& belief, double kappa);

/// Number of sigma-set generations since the last reset (thread-local).
/// Lets tests pin the per-recursion generation economy of each filter.
long sigma_gen_count();
void reset_sigma_gen_count();

struct UnscentedMoments {
    Vector mean;
    Matrix cov;        ///< symmetrized, plus additive_cov when given
    Matrix cross_cov;  ///< input (rows) x output (cols)
};

/// Weighted statistics of a point set propagated through a map. The covariance
/// sums centered outer products, which is algebraically identical to the raw
/// outer-product form but does not cancel catastrophically for large means.
UnscentedMoments unscented_transform(const std::vector<Vector>& points, const Vector& weights,
                                     const VectorMap& map,
                                     const std::optional<Matrix>& additive_cov = std::nullopt);

UnscentedMoments unscented_transform(const SigmaSet& sigma, const VectorMap& map,
                                     const std::optional<Matrix>& additive_cov = std::nullopt);

}  // namespace sigmafilt
