#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sigmafilt/scenarios.hpp"
#include "sigmafilt/sigma_points.hpp"

using namespace sigmafilt;

TEST_CASE("demodulator constants") {
    const ScenarioBundle bundle = build_fm_demodulator();
    const AdversarialScenario& s = bundle.scenario;
    CHECK(s.n_x == 2);
    CHECK(s.n_y == 2);
    CHECK(s.n_a == 1);

    const double T = 2.0 * std::numbers::pi / 16.0;
    const double beta = 100.0;
    Vector e1(2), e2(2);
    e1 << 1.0, 0.0;
    e2 << 0.0, 1.0;
    const Vector col1 = s.f(e1);
    const Vector col2 = s.f(e2);
    CHECK(col1(0) == doctest::Approx(std::exp(-T / beta)).epsilon(1e-15));
    CHECK(col1(1) == doctest::Approx(-beta * (std::exp(-T / beta) - 1.0)).epsilon(1e-12));
    CHECK(col2(0) == 0.0);
    CHECK(col2(1) == 1.0);

    // Rank-one process noise from the scalar message shock.
    CHECK(s.noise.Q.rows() == 2);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s.noise.Q);
    CHECK(es.eigenvalues()(0) <= 1e-12);
    CHECK(s.noise.Q(0, 0) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK((s.q_factor * s.q_factor.transpose() - s.noise.Q).cwiseAbs().maxCoeff() <= 1e-12);

    CHECK(s.noise.Sigma_eps(0, 0) == doctest::Approx(5.0));

    Vector x(2);
    x << 0.3, 1.1;
    const Vector y = s.h(x);
    CHECK(y(0) == doctest::Approx(std::numbers::sqrt2 * std::sin(1.1)).epsilon(1e-12));
    CHECK(y(1) == doctest::Approx(std::numbers::sqrt2 * std::cos(1.1)).epsilon(1e-12));
    CHECK(s.g(x)(0) == doctest::Approx(0.09).epsilon(1e-12));

    CHECK(bundle.defaults.forward_kappa == 1.0);
    CHECK(bundle.defaults.inverse_kappa == 1.0);
    CHECK(bundle.defaults.assumed_forward_kappa == 2.0);
    CHECK(bundle.defaults.runs == 500);
    CHECK(bundle.defaults.horizon == 100);
}

TEST_CASE("reentry constants") {
    const ScenarioBundle bundle = build_vehicle_reentry();
    const AdversarialScenario& s = bundle.scenario;
    CHECK(s.n_x == 5);

    Vector expected_x0(5);
    expected_x0 << 6500.4, 349.14, -1.8093, -6.7967, 0.6932;
    CHECK((bundle.defaults.true_x0 - expected_x0).norm() == 0.0);
    CHECK((bundle.defaults.defender_prior.mean - expected_x0).norm() == 0.0);

    Vector sigma_bar_diag(5);
    sigma_bar_diag << 1e-5, 1e-5, 1e-5, 1e-5, 1.0;
    CHECK((bundle.defaults.defender_prior.cov.diagonal() - sigma_bar_diag).norm() == 0.0);

    CHECK(bundle.defaults.forward_kappa == 2.5);
    CHECK(bundle.defaults.inverse_kappa == 3.5);
    // Weight 1/3 on the central sigma point for the five-state filter.
    const SigmaSet set = generate_sigma_points(
        {Vector::Zero(5), Matrix::Identity(5, 5)}, bundle.defaults.forward_kappa);
    CHECK(set.weights(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // Defender observes the position estimate directly under 3 I noise.
    Vector xh(5);
    xh << 6500.0, 350.0, -1.0, -6.0, 0.5;
    CHECK((s.g(xh) - xh.head(2)).norm() == 0.0);
    CHECK((s.noise.Sigma_eps - 3.0 * Matrix::Identity(2, 2)).norm() == 0.0);

    // Euler step at 0.1 s: positions advance by dt * velocity.
    const Vector next = s.f(expected_x0);
    CHECK(next(0) == doctest::Approx(6500.4 + 0.1 * (-1.8093)).epsilon(1e-12));
    CHECK(next(1) == doctest::Approx(349.14 + 0.1 * (-6.7967)).epsilon(1e-12));
    CHECK(next(4) == doctest::Approx(0.6932).epsilon(1e-15));

    CHECK(bundle.defaults.position_components == std::vector<int>{0, 1});
    CHECK(bundle.defaults.runs == 100);
}

TEST_CASE("lorenz constants") {
    const ScenarioBundle bundle = build_lorenz();
    const AdversarialScenario& s = bundle.scenario;
    const double dt = 0.01;

    Vector x(3);
    x << 1.0, 2.0, 3.0;
    const Vector next = s.f(x);
    CHECK(next(0) == doctest::Approx(1.0 + dt * 10.0 * (2.0 - 1.0)).epsilon(1e-15));
    CHECK(next(1) == doctest::Approx(2.0 + dt * (28.0 * 1.0 - 2.0 - 3.0)).epsilon(1e-15));
    CHECK(next(2) == doctest::Approx(3.0 + dt * (-(8.0 / 3.0) * 3.0 + 2.0)).epsilon(1e-15));

    CHECK(s.h(x)(0) ==
          doctest::Approx(dt * std::sqrt(0.25 + 4.0 + 9.0)).epsilon(1e-12));
    CHECK(s.g(x)(0) ==
          doctest::Approx(dt * std::sqrt(1.0 + 2.25 + 9.0)).epsilon(1e-12));

    CHECK(s.noise.Q(2, 2) == doctest::Approx(0.25 * dt).epsilon(1e-15));
    CHECK(s.noise.Q.topLeftCorner(2, 2).norm() == 0.0);
    CHECK(s.noise.R(0, 0) == doctest::Approx(0.065 * 0.065 * dt).epsilon(1e-15));
    CHECK(s.noise.Sigma_eps(0, 0) == doctest::Approx(0.01 * dt).epsilon(1e-15));

    CHECK(bundle.defaults.rkhs.kappa == 3.0);
    CHECK(bundle.defaults.rkhs.kernel_sigma2 == 20.0);
    CHECK(bundle.defaults.rkhs.window == 15);
    CHECK(bundle.defaults.forward_kappa == 1.5);
    CHECK(bundle.defaults.inverse_kappa == 2.0);

    Vector x0(3), xhat0(3);
    x0 << -0.2, -0.3, -0.5;
    xhat0 << 1.35, -3.0, 6.0;
    CHECK((bundle.defaults.true_x0 - x0).norm() == 0.0);
    CHECK((bundle.defaults.defender_prior.mean - x0).norm() == 0.0);
    CHECK((bundle.defaults.attacker_prior.mean - xhat0).norm() == 0.0);
    CHECK((bundle.defaults.attacker_prior.cov - 0.35 * Matrix::Identity(3, 3)).norm() == 0.0);
    CHECK(bundle.defaults.runs == 50);
}

TEST_CASE("random linear systems are stable and reproducible") {
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        const LinearScenario ls = build_linear_oracle(1 + seed % 5, 1 + seed % 3,
                                                      1 + seed % 2, seed);
        CHECK(ls.F.eigenvalues().cwiseAbs().maxCoeff() <= 0.95 + 1e-12);
    }

    const LinearScenario a = build_linear_oracle(3, 2, 2, 42);
    const LinearScenario b = build_linear_oracle(3, 2, 2, 42);
    CHECK((a.F - b.F).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.H - b.H).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.scenario.noise.Q - b.scenario.noise.Q).cwiseAbs().maxCoeff() == 0.0);
    CHECK_NOTHROW(a.scenario.validate());
}

TEST_CASE("scalar linear construction reproduces the hand case") {
    const LinearScenario ls = make_linear_scenario(
        Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1),
        Matrix::Identity(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1));
    CHECK(ls.scenario.f(Vector::Constant(1, 3.0))(0) == 3.0);
    CHECK(ls.scenario.h(Vector::Constant(1, -2.0))(0) == -2.0);
    CHECK(ls.scenario.noise.Q(0, 0) == 1.0);
}

TEST_CASE("truth simulation determinism and degenerate noise") {
    const ScenarioBundle bundle = build_lorenz();

    // Zero covariances reduce the simulation to the iterated map exactly.
    AdversarialScenario silent = bundle.scenario;
    silent.q_factor.setZero();
    silent.r_factor.setZero();
    silent.eps_factor.setZero();
    const TruthSim quiet = simulate_truth(silent, bundle.defaults.true_x0, 20, 5);
    Vector x = bundle.defaults.true_x0;
    for (int k = 1; k <= 20; ++k) {
        x = silent.f(x);
        CHECK((quiet.states[static_cast<std::size_t>(k)] - x).cwiseAbs().maxCoeff() == 0.0);
        CHECK((quiet.attacker_obs[static_cast<std::size_t>(k - 1)] - silent.h(x)).norm() == 0.0);
    }

    const TruthSim one = simulate_truth(bundle.scenario, bundle.defaults.true_x0, 50, 99);
    const TruthSim two = simulate_truth(bundle.scenario, bundle.defaults.true_x0, 50, 99);
    for (std::size_t k = 0; k < one.states.size(); ++k) {
        CHECK((one.states[k] - two.states[k]).cwiseAbs().maxCoeff() == 0.0);
    }
    const TruthSim other = simulate_truth(bundle.scenario, bundle.defaults.true_x0, 50, 100);
    CHECK((one.states[10] - other.states[10]).cwiseAbs().maxCoeff() > 0.0);

    CHECK_THROWS_AS(simulate_truth(bundle.scenario, bundle.defaults.true_x0, 0, 1), EmptyInput);
}

TEST_CASE("gaussian stream moments match the declared distribution") {
    GaussianStream stream(2718);
    const int draws = 100000;
    double mean = 0.0, second = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double z = stream.next();
        mean += z / draws;
        second += z * z / draws;
    }
    // Standard errors: sqrt(1/n) for the mean, sqrt(2/n) for the variance.
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(double(draws)));
    CHECK(std::abs(second - 1.0) <= 3.0 * std::sqrt(2.0 / double(draws)));

    // Correlated multivariate draws reproduce the requested covariance.
    Matrix cov(2, 2);
    cov << 2.0, 0.8, 0.8, 1.0;
    GaussianStream mv(314);
    Matrix sample = Matrix::Zero(2, 2);
    for (int i = 0; i < draws; ++i) {
        const Vector z = mv.next_multivariate(Vector::Zero(2), cov);
        sample += z * z.transpose() / draws;
    }
    CHECK((sample - cov).cwiseAbs().maxCoeff() <= 3.0 * 2.0 * std::sqrt(2.0 / double(draws)));
}

TEST_CASE("lorenz trajectories stay on the attractor") {
    const ScenarioBundle bundle = build_lorenz();
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        const TruthSim truth = simulate_truth(bundle.scenario, bundle.defaults.true_x0, 2000, seed);
        for (const Vector& state : truth.states) {
            CHECK(state.norm() <= 100.0);
        }
    }
}
