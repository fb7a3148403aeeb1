#include <doctest.h>

#include <cmath>

#include "oracle_kf.hpp"
#include "sigmafilt/metrics.hpp"
#include "sigmafilt/random.hpp"
#include "sigmafilt/scenarios.hpp"

using namespace sigmafilt;

namespace {

Matrix random_spd(GaussianStream& stream, int n, double base) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a(i, j) = stream.next();
    }
    return base * Matrix::Identity(n, n) + a * a.transpose() / n;
}

// The textbook information recursion, written with explicit inverses. Used as
// the second algebraic route against the solve-based implementation.
Matrix literal_information_step(const Matrix& j, const Matrix& f, const Matrix& h,
                                const Matrix& q, const Matrix& r) {
    const Matrix q_inv = q.inverse();
    const Matrix mid = (j + f.transpose() * q_inv * f).inverse();
    return h.transpose() * r.inverse() * h - q_inv * f * mid * f.transpose() * q_inv + q_inv;
}

}  // namespace

TEST_CASE("scalar information step by hand") {
    const FisherInfo j0{Matrix::Identity(1, 1)};
    const FisherInfo j1 = rcrlb_step(j0, Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                                     Matrix::Identity(1, 1), Matrix::Identity(1, 1));
    CHECK(j1.J(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("solve form equals the literal inverse form on random instances") {
    GaussianStream stream(1234);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 4;
        const int m = 1 + (trial / 3) % 3;
        const Matrix j = random_spd(stream, n, 0.3);
        const Matrix q = random_spd(stream, n, 0.2);
        const Matrix r = random_spd(stream, m, 0.2);
        Matrix f(n, n), h(m, n);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < n; ++k) f(i, k) = stream.next();
        }
        for (int i = 0; i < m; ++i) {
            for (int k = 0; k < n; ++k) h(i, k) = stream.next();
        }
        const FisherInfo got = rcrlb_step({j}, f, h, q, r);
        const Matrix expected = literal_information_step(j, f, h, q, r);
        CHECK((got.J - expected).norm() <= 1e-9 * (1.0 + expected.norm()));
    }
}

TEST_CASE("linear-Gaussian information inverse equals the exact posterior covariance") {
    for (std::uint64_t seed : {70ULL, 71ULL, 72ULL}) {
        const int n_x = 2 + static_cast<int>(seed % 3);
        const LinearScenario ls = build_linear_oracle(n_x, 2, 1, seed);
        const Matrix cov0 = Matrix::Identity(n_x, n_x);
        const oracle::RiccatiSequence seq = oracle::riccati_sequence(
            ls.F, ls.H, ls.scenario.noise.Q, ls.scenario.noise.R, cov0, 50);

        FisherInfo info{cov0.inverse()};
        for (int k = 0; k < 50; ++k) {
            info = rcrlb_step(info, ls.F, ls.H, ls.scenario.noise.Q, ls.scenario.noise.R);
            const Matrix j_inv = info.J.inverse();
            CHECK((j_inv - seq.posterior_covs[static_cast<std::size_t>(k)]).norm() <= 1e-8);
        }
    }
}

TEST_CASE("information stays symmetric psd across long random recursions") {
    GaussianStream stream(90);
    FisherInfo info{Matrix::Identity(3, 3)};
    for (int k = 0; k < 1000; ++k) {
        Matrix f(3, 3), h(2, 3);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) f(i, j) = 0.4 * stream.next();
        }
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 3; ++j) h(i, j) = stream.next();
        }
        info = rcrlb_step(info, f, h, Matrix(0.3 * Matrix::Identity(3, 3)),
                          Matrix(0.5 * Matrix::Identity(2, 2)));
        if (k % 100 == 0) {
            CHECK((info.J - info.J.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
            CHECK(min_eigenvalue(info.J) >= -1e-9);
        }
    }
}

TEST_CASE("rank-deficient process noise is handled by the solve form") {
    // The bundled demodulator has a rank-one process covariance.
    const ScenarioBundle bundle = build_fm_demodulator();
    FisherInfo info{Matrix::Identity(2, 2)};
    Matrix f(2, 2);
    f << 0.99, 0.0, 0.39, 1.0;
    CHECK_NOTHROW(info = rcrlb_step(info, f, Matrix::Identity(2, 2), bundle.scenario.noise.Q,
                                    bundle.scenario.noise.R));
    CHECK(std::isfinite(rcrlb_bound(info)));
}

TEST_CASE("inverse-system recursion on a fully linear scenario") {
    const LinearScenario ls = build_linear_oracle(3, 2, 2, 55);
    const Matrix cov0 = Matrix::Identity(3, 3);
    const oracle::RiccatiSequence seq = oracle::riccati_sequence(
        ls.F, ls.H, ls.scenario.noise.Q, ls.scenario.noise.R, cov0, 20);

    FisherInfo lhs{cov0.inverse()};
    FisherInfo rhs{cov0.inverse()};
    for (int k = 0; k < 20; ++k) {
        const Matrix& gain = seq.gains[static_cast<std::size_t>(k)];
        const Matrix f_bar = (Matrix::Identity(3, 3) - gain * ls.H) * ls.F;
        const Matrix q_bar = gain * ls.scenario.noise.R * gain.transpose();
        lhs = rcrlb_for_inverse(lhs, f_bar, ls.G, q_bar, ls.scenario.noise.Sigma_eps);
        rhs = rcrlb_step(rhs, f_bar, ls.G, q_bar, ls.scenario.noise.Sigma_eps);
        CHECK((lhs.J - rhs.J).norm() <= 1e-6 * (1.0 + rhs.J.norm()));
    }
    CHECK(rcrlb_bound(lhs) > 0.0);
    CHECK(rcrlb_bound(lhs, {0, 1}) <= rcrlb_bound(lhs) + 1e-12);
}

TEST_CASE("finite differences match the analytic Jacobian of a quadratic map") {
    const VectorMap quadratic = [](const Vector& x) {
        Vector out(2);
        out << x(0) * x(0) + 2.0 * x(1), x(0) * x(1);
        return out;
    };
    Vector at(2);
    at << 0.7, -1.3;
    Matrix analytic(2, 2);
    analytic << 2.0 * at(0), 2.0, at(1), at(0);
    const Matrix numeric = numeric_jacobian(quadratic, at);
    CHECK((numeric - analytic).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("credibility index fixtures") {
    GaussianStream stream(606);
    const int m = 50;
    std::vector<Vector> errors(m);
    for (auto& e : errors) e = stream.next_vector(2);
    Matrix sample = Matrix::Zero(2, 2);
    for (const auto& e : errors) sample += e * e.transpose() / m;

    for (double scale : {1.0, 10.0, 0.1}) {
        CredibilityInputs inputs;
        inputs.errors = errors;
        inputs.covariances.assign(m, scale * sample);
        const NciResult result = nci(inputs);
        CHECK(result.nci_db == doctest::Approx(-10.0 * std::log10(scale)).epsilon(1e-9));
        CHECK(result.skipped == 0);
    }
}

TEST_CASE("credibility sign convention holds for random ratio pairs") {
    GaussianStream stream(607);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 40;
        std::vector<Vector> errors(m);
        for (auto& e : errors) e = stream.next_vector(3);
        Matrix sample = Matrix::Zero(3, 3);
        for (const auto& e : errors) sample += e * e.transpose() / m;
        const double scale = std::exp(stream.next());
        CredibilityInputs inputs{errors, std::vector<Matrix>(m, scale * sample)};
        const double got = nci(inputs).nci_db;
        CHECK(got == doctest::Approx(-10.0 * std::log10(scale)).epsilon(1e-9));
    }
}

TEST_CASE("credibility edge cases") {
    CredibilityInputs one_run;
    one_run.errors = {Vector::Ones(2)};
    one_run.covariances = {Matrix::Identity(2, 2)};
    CHECK_THROWS_AS(nci(one_run), InsufficientRuns);

    CredibilityInputs all_zero;
    all_zero.errors = {Vector::Zero(2), Vector::Zero(2)};
    all_zero.covariances = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
    CHECK_THROWS_AS(nci(all_zero), DegenerateInputs);

    // Zero-error runs are skipped and counted, the rest still contribute.
    GaussianStream stream(11);
    CredibilityInputs mixed;
    for (int i = 0; i < 6; ++i) {
        mixed.errors.push_back(i < 2 ? Vector(Vector::Zero(2)) : Vector(stream.next_vector(2)));
        mixed.covariances.push_back(Matrix::Identity(2, 2));
    }
    CHECK(nci(mixed).skipped == 2);
}

TEST_CASE("error trace aggregation fixtures") {
    CHECK_THROWS_AS(rmse_trace({}), EmptyInput);

    std::vector<std::vector<Vector>> zero_runs(3, std::vector<Vector>(4, Vector::Zero(2)));
    const RmseReport zeros = rmse_trace(zero_runs);
    CHECK(zeros.time_averaged == 0.0);

    Vector pythagorean(2);
    pythagorean << 3.0, 4.0;
    const RmseReport single = rmse_trace({{pythagorean}});
    CHECK(single.per_step[0] == doctest::Approx(5.0).epsilon(1e-15));

    const RmseReport pair = rmse_trace({{Vector::Constant(1, 1.0)}, {Vector::Constant(1, 7.0)}});
    CHECK(pair.per_step[0] == doctest::Approx(5.0).epsilon(1e-15));

    // Component subsets restrict the norm.
    Vector mixed(3);
    mixed << 3.0, 4.0, 100.0;
    const RmseReport subset = rmse_trace({{mixed}}, {0, 1});
    CHECK(subset.per_step[0] == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("boundedness probe fixtures") {
    // Constant error level: the plateau term covers everything.
    std::vector<std::vector<Vector>> constant(
        5, std::vector<Vector>(80, Vector::Constant(1, 2.0)));
    const BoundednessFit flat = boundedness_probe(constant);
    CHECK(flat.pass);
    CHECK(flat.nu == doctest::Approx(4.0).epsilon(1e-12));

    // Geometric growth cannot be dominated by a decaying envelope.
    std::vector<Vector> growing;
    double value = 1.0;
    for (int k = 0; k < 80; ++k) {
        growing.push_back(Vector::Constant(1, std::sqrt(value)));
        value *= 1.1;
    }
    const BoundednessFit grow = boundedness_probe({growing});
    CHECK_FALSE(grow.pass);

    // Decaying transient over a plateau fits the envelope.
    std::vector<Vector> decaying;
    for (int k = 0; k < 80; ++k) {
        decaying.push_back(Vector::Constant(1, std::sqrt(0.5 + 8.0 * std::pow(0.8, k))));
    }
    const BoundednessFit decay = boundedness_probe({decaying});
    CHECK(decay.pass);
    CHECK(decay.lambda < 1.0);
    CHECK(decay.eta > 0.0);
}
