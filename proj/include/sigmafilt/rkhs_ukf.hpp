#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "sigmafilt/scenario.hpp"

namespace sigmafilt {

/// Gaussian kernel width. Note the convention: K(a, b) = exp(-||a-b||^2 / sigma2),
/// dividing by sigma^2 rather than 2 sigma^2.
struct KernelSpec {
    double sigma2 = 1.0;
};

/// Keep the last `window` state estimates as atoms.
struct SlidingWindowPolicy {
    int window = 15;
};

/// Admit an atom only when its kernel least-squares residual against the
/// current dictionary exceeds nu.
struct AldPolicy {
    double nu = 1e-2;
};

using DictionaryPolicy = std::variant<SlidingWindowPolicy, AldPolicy>;

struct Dictionary {
    std::vector<Vector> atoms;
    DictionaryPolicy policy = SlidingWindowPolicy{};

    int size() const { return static_cast<int>(atoms.size()); }
};

/// Feature vector [K(atom_1, x), ..., K(atom_L, x)]; every component in (0, 1].
Vector feature_map(const Vector& x, const Dictionary& dict, const KernelSpec& kernel);

/// Kernel least-squares residual of representing x with the current atoms.
double ald_residual(const Vector& x, const Dictionary& dict, const KernelSpec& kernel);

/// Spectral-norm caps applied to the learned coefficient matrices. Generous
/// defaults keep the projections inert unless a study configures them.
struct RkhsBounds {
    double a_bar = 1e3;
    double b_bar = 1e3;
};

/// Learned system model: coefficient matrices over the dictionary features,
/// noise covariance estimates, and the online-EM partial sums.
struct RkhsParameterEstimate {
    Matrix A_hat;   ///< n_x x L
    Matrix B_hat;   ///< n_y x L
    Matrix Q_hat;   ///< n_x x n_x
    Matrix R_hat;   ///< n_y x n_y
    Matrix S_xphi;  ///< n_x x L
    Matrix S_phi1;  ///< L x L
    Matrix S_yphi;  ///< n_y x L
    Matrix S_phi;   ///< L x L
    RkhsBounds bounds;

    long clip_count_a = 0;  ///< times the A projection was active
    long clip_count_b = 0;
    long floor_count = 0;   ///< eigenvalues floored in Q_hat / R_hat
};

/// Expectations of the joint state under the current augmented belief,
/// computed from one sigma set. phi_mean carries E[Phi(x_k)], needed when
/// accumulating the observation feature sum.
struct RkhsExpectations {
    Matrix xx;         ///< E[x_k x_k^T]
    Matrix phi1_phi1;  ///< E[Phi(x_{k-1}) Phi(x_{k-1})^T]
    Matrix x_phi1;     ///< E[x_k Phi(x_{k-1})^T]
    Matrix phi_phi;    ///< E[Phi(x_k) Phi(x_k)^T]
    Vector phi_mean;   ///< E[Phi(x_k)]
};

/// Joint state-and-model filter over the augmented state [x_k; x_{k-1}].
/// cached_sigma holds the set generated at the end of the previous recursion
/// (or at initialization); the next prediction reuses it, which keeps the
/// recursion at two sigma-set generations per step.
struct RkhsUkfState {
    GaussianBelief z_belief;  ///< dimension 2 n_x
    RkhsParameterEstimate params;
    Dictionary dict;
    KernelSpec kernel;
    double kappa = 3.0;
    int step_index = 0;
    SigmaSet cached_sigma;

    Eigen::Index state_dim() const { return z_belief.dim() / 2; }
};

/// Initialization: z0 = [x0; x0], block-diagonal covariance, dictionary of the
/// single atom x0, coefficient matrices filled with init_fill, zero sums.
RkhsUkfState rkhs_init(const GaussianBelief& x0_belief, double kappa, const Matrix& q0,
                       const Matrix& r0, const KernelSpec& kernel,
                       const DictionaryPolicy& policy, const RkhsBounds& bounds = {},
                       double init_fill = 1.0);

/// Variant with a caller-supplied initial dictionary (for identification
/// studies on a frozen dictionary). Coefficients are init_fill in every entry.
/// gram_seed puts a pseudo-count on the feature Gram sums; without it an
/// L-atom dictionary is rank-deficient until L steps have accumulated.
RkhsUkfState rkhs_init_with_dictionary(const GaussianBelief& x0_belief, double kappa,
                                       const Matrix& q0, const Matrix& r0,
                                       const KernelSpec& kernel, const DictionaryPolicy& policy,
                                       const std::vector<Vector>& atoms,
                                       const RkhsBounds& bounds = {}, double init_fill = 1.0,
                                       double gram_seed = 0.0);

/// Propagates the cached sigma set through [A Phi(x-part); x-part] and adds
/// blockdiag(Q_hat, 0). Falls back to a fresh generation if no set is cached.
std::pair<GaussianBelief, SigmaSet> rkhs_predict(const RkhsUkfState& state);

/// Second sigma set from the predicted belief, propagated through
/// B Phi(x-part); innovation covariance includes R_hat.
RkhsUkfState rkhs_update(const RkhsUkfState& state, const GaussianBelief& z_pred,
                         const Vector& y);

/// Fresh sigma set from the updated belief plus the expectations computed from
/// it. The caller must install the returned set as the state's cache so the
/// next prediction can reuse it.
std::pair<RkhsExpectations, SigmaSet> rkhs_expectations(const RkhsUkfState& state_after_update);

/// Online-EM parameter update for step k >= 1. The observation noise moments
/// are the model-implied values (previous coefficient estimate) rather than
/// raw outer products of y; the feature sum accumulates y * E[Phi(x_k)]^T.
RkhsParameterEstimate rkhs_param_update(const RkhsParameterEstimate& params,
                                        const RkhsExpectations& e, const Vector& y, int k);

/// Applies the dictionary policy with the new estimate and augments or prunes
/// every coefficient column and partial-sum row/column accordingly. New Gram
/// rows/columns get a 1e-8 diagonal seed so the sums stay solvable.
void dictionary_update(Dictionary& dict, RkhsParameterEstimate& params,
                       const Vector& new_estimate, const KernelSpec& kernel);

/// Full recursion in order: predict, update, expectations, parameter update,
/// dictionary update. Exactly two sigma-set generations. Returns the new state
/// and the state estimate x_hat_{k|k}.
std::pair<RkhsUkfState, Vector> rkhs_step(const RkhsUkfState& state, const Vector& y);

}  // namespace sigmafilt
