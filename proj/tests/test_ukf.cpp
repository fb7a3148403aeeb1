#include <doctest.h>

#include <cmath>

#include "oracle_kf.hpp"
#include "sigmafilt/scenarios.hpp"
#include "sigmafilt/ukf.hpp"

using namespace sigmafilt;

namespace {

AdversarialScenario identity_scenario(int n, const Matrix& q) {
    Matrix f_mat = Matrix::Identity(n, n);
    LinearScenario ls = make_linear_scenario(f_mat, Matrix::Identity(n, n),
                                             Matrix::Identity(n, n), q,
                                             Matrix::Identity(n, n), Matrix::Identity(n, n));
    return ls.scenario;
}

}  // namespace

TEST_CASE("identity dynamics with zero process noise keep the prior") {
    const AdversarialScenario model = identity_scenario(3, Matrix::Zero(3, 3));
    Vector mean(3);
    mean << 0.3, -1.2, 2.0;
    Matrix cov(3, 3);
    cov << 1.0, 0.2, 0.0, 0.2, 2.0, -0.1, 0.0, -0.1, 0.5;
    const UkfState state{{mean, cov}, 1.0, 0};
    const GaussianBelief predicted = ukf_time_update(state, model);
    CHECK((predicted.mean - mean).norm() <= 1e-10);
    CHECK((predicted.cov - cov).norm() <= 1e-10);
}

TEST_CASE("linear dynamics predict the affine push-forward") {
    Matrix f_mat(2, 2);
    f_mat << 0.9, 0.2, -0.1, 0.8;
    Matrix q(2, 2);
    q << 0.3, 0.1, 0.1, 0.4;
    const LinearScenario ls =
        make_linear_scenario(f_mat, Matrix::Identity(2, 2), Matrix::Identity(2, 2), q,
                             Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    Vector mean(2);
    mean << 1.0, -0.5;
    Matrix cov(2, 2);
    cov << 2.0, 0.3, 0.3, 1.0;
    const GaussianBelief predicted = ukf_time_update({{mean, cov}, 1.3, 0}, ls.scenario);
    CHECK((predicted.mean - f_mat * mean).norm() <= 1e-10);
    CHECK((predicted.cov - (f_mat * cov * f_mat.transpose() + q)).norm() <= 1e-10);
}

TEST_CASE("demodulator time update matches a straight-line sigma sum") {
    const ScenarioBundle bundle = build_fm_demodulator();
    Vector mean(2);
    mean << 1.0, 1.0;
    const Matrix cov = Matrix::Identity(2, 2);
    const double kappa = 1.0;

    // Straight-line recomputation: spelled-out factor, points, and sums.
    const int n = 2;
    const Matrix root = Matrix(((n + kappa) * cov).llt().matrixL());
    std::vector<Vector> pts{mean, mean + root.col(0), mean + root.col(1), mean - root.col(0),
                            mean - root.col(1)};
    std::vector<double> w{kappa / (n + kappa), 0.5 / (n + kappa), 0.5 / (n + kappa),
                          0.5 / (n + kappa), 0.5 / (n + kappa)};
    Vector expect_mean = Vector::Zero(2);
    for (int i = 0; i < 5; ++i) expect_mean += w[i] * bundle.scenario.f(pts[i]);
    Matrix expect_cov = bundle.scenario.noise.Q;
    for (int i = 0; i < 5; ++i) {
        const Vector p = bundle.scenario.f(pts[i]);
        expect_cov += w[i] * p * p.transpose();
    }
    expect_cov -= expect_mean * expect_mean.transpose();

    const GaussianBelief predicted =
        ukf_time_update({{mean, cov}, kappa, 0}, bundle.scenario);
    CHECK((predicted.mean - expect_mean).norm() <= 1e-12);
    CHECK((predicted.cov - expect_cov).norm() <= 1e-10);
}

TEST_CASE("uninformative measurements leave the prediction untouched") {
    Matrix f_mat(2, 2);
    f_mat << 0.9, 0.1, 0.0, 0.8;
    const LinearScenario ls = make_linear_scenario(
        f_mat, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0.1 * Matrix::Identity(2, 2),
        1e12 * Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    Vector mean(2);
    mean << 2.0, -1.0;
    const GaussianBelief predicted{mean, Matrix::Identity(2, 2)};
    Vector y(2);
    y << 100.0, -50.0;
    const auto [state, trace] = ukf_measurement_update(predicted, y, ls.scenario, 1.0);
    CHECK((state.belief.mean - mean).norm() <= 1e-4 * mean.norm());
}

TEST_CASE("scalar random-walk step reproduces the hand result") {
    const LinearScenario ls = make_linear_scenario(
        Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1),
        Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1));
    const UkfState state{{Vector::Zero(1), Matrix::Identity(1, 1)}, 2.0, 0};
    const auto [next, trace] = ukf_step(state, Vector::Constant(1, 1.0), ls.scenario);
    CHECK(next.belief.mean(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(next.belief.cov(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(next.step_index == 1);
}

TEST_CASE("linear systems match the exact Kalman filter over long runs") {
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL, 14ULL, 15ULL, 16ULL, 17ULL, 18ULL}) {
        const int n_x = 1 + static_cast<int>(seed % 5);
        const int n_y = 1 + static_cast<int>((seed / 2) % 3);
        const LinearScenario ls = build_linear_oracle(n_x, n_y, 1, seed);
        const TruthSim truth =
            simulate_truth(ls.scenario, Vector::Zero(n_x), 50, derive_seed(seed, 9));

        UkfState state{{Vector::Zero(n_x), Matrix::Identity(n_x, n_x)}, 1.0, 0};
        oracle::KalmanFilter kf{Vector::Zero(n_x), Matrix::Identity(n_x, n_x)};
        for (int k = 1; k <= 50; ++k) {
            const auto stepped = ukf_step(state, truth.attacker_obs[k - 1], ls.scenario);
            state = stepped.first;
            kf.predict(ls.F, ls.scenario.noise.Q);
            kf.update(ls.H, ls.scenario.noise.R, truth.attacker_obs[k - 1]);
            CHECK((state.belief.mean - kf.mean).norm() <= 1e-8);
            CHECK((state.belief.cov - kf.cov).norm() <= 1e-8);

            // Gain consistency: K * innovation == cross covariance.
            const Matrix residual =
                stepped.second.gain * stepped.second.innovation_cov - stepped.second.cross_cov;
            CHECK(residual.cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("demodulator covariance stays well-behaved over 10000 steps") {
    const ScenarioBundle bundle = build_fm_demodulator();
    const TruthSim truth =
        simulate_truth(bundle.scenario, Vector::Constant(2, 1.0), 10000, 424242);

    reset_cholesky_escalation_count();
    UkfState state{bundle.defaults.attacker_prior, bundle.defaults.forward_kappa, 0};
    for (int k = 1; k <= 10000; ++k) {
        state = ukf_step(state, truth.attacker_obs[k - 1], bundle.scenario).first;
        if (k % 500 == 0) {
            CHECK_NOTHROW(state.belief.validate());
        }
    }
    CHECK(cholesky_escalation_count() == 0);
}

TEST_CASE("measurement update never inflates the predicted covariance") {
    GaussianStream stream(5150);
    const ScenarioBundle bundle = build_fm_demodulator();
    for (int trial = 0; trial < 25; ++trial) {
        Matrix a(2, 2);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) a(i, j) = stream.next();
        }
        const GaussianBelief predicted{stream.next_vector(2),
                                       Matrix(a * a.transpose() + 0.3 * Matrix::Identity(2, 2))};
        const auto [state, trace] = ukf_measurement_update(predicted, stream.next_vector(2),
                                                           bundle.scenario, 1.0);
        const double lam =
            min_eigenvalue(predicted.cov + 1e-9 * Matrix::Identity(2, 2) - state.belief.cov);
        CHECK(lam >= -1e-12);
    }
}

TEST_CASE("a full step generates exactly two sigma sets") {
    const ScenarioBundle bundle = build_fm_demodulator();
    UkfState state{bundle.defaults.attacker_prior, 1.0, 0};
    reset_sigma_gen_count();
    state = ukf_step(state, Vector::Zero(2), bundle.scenario).first;
    CHECK(sigma_gen_count() == 2);
    CHECK(state.step_index == 1);
    state = ukf_step(state, Vector::Zero(2), bundle.scenario).first;
    CHECK(sigma_gen_count() == 4);
    CHECK(state.step_index == 2);
}
