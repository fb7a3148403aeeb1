#pragma once

#include <functional>

#include "sigmafilt/sigma_points.hpp"

namespace sigmafilt {

/// Process, attacker-measurement and defender-measurement noise covariances.
/// R and Sigma_eps must be strictly positive definite since their inverses
/// appear in gain computations; Q only needs to be symmetric psd.
struct NoiseSpec {
    Matrix Q;          ///< n_x x n_x
    Matrix R;          ///< n_y x n_y
    Matrix Sigma_eps;  ///< n_a x n_a

    void validate() const;
};

/// The attacker-defender system: the defender's state evolves through f with
/// process noise Q, the attacker observes it through h with noise R, and the
/// defender observes the attacker's actions through g with noise Sigma_eps.
struct AdversarialScenario {
    int n_x = 0;
    int n_y = 0;
    int n_a = 0;

    VectorMap f;
    VectorMap h;
    VectorMap g;

    /// Optional variant of g that also consumes the attacker's covariance
    /// estimate. When set it takes precedence over g in the inverse filter.
    std::function<Vector(const Vector&, const Matrix&)> g_with_cov;

    NoiseSpec noise;         ///< ground truth, drives the simulator
    NoiseSpec filter_noise;  ///< what the attacker's filter assumes

    /// Noise shaping used by the simulator: w = q_factor * eta with eta iid
    /// standard normal, so rank-deficient process noise (a scalar source
    /// entering through a column) is sampled exactly.
    Matrix q_factor;
    Matrix r_factor;
    Matrix eps_factor;

    void validate() const;
};

}  // namespace sigmafilt
