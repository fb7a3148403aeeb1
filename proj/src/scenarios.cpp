#include "sigmafilt/scenarios.hpp"

#include <cmath>
#include <numbers>

namespace sigmafilt {

ScenarioBundle build_fm_demodulator() {
    const double T = 2.0 * std::numbers::pi / 16.0;
    const double beta = 100.0;
    const double decay = std::exp(-T / beta);

    Matrix F(2, 2);
    F << decay, 0.0,
        -beta * (decay - 1.0), 1.0;
    // The scalar message shock enters the phase with the same correlated
    // coupling coefficient as the deterministic phase update.
    Vector noise_col(2);
    noise_col << 1.0, -beta * (decay - 1.0);

    AdversarialScenario s;
    s.n_x = 2;
    s.n_y = 2;
    s.n_a = 1;
    s.f = [F](const Vector& x) { return Vector(F * x); };
    s.h = [](const Vector& x) {
        Vector y(2);
        y << std::numbers::sqrt2 * std::sin(x(1)), std::numbers::sqrt2 * std::cos(x(1));
        return y;
    };
    s.g = [](const Vector& xh) {
        Vector a(1);
        a << xh(0) * xh(0);
        return a;
    };
    // Scalar message noise with variance 0.01 enters through the correlated
    // column. Quadrature noise 0.1 keeps the demodulator above its click
    // threshold; at unit variance the phase loop slips cycles and the whole
    // ensemble degenerates.
    s.noise.Q = 0.01 * noise_col * noise_col.transpose();
    s.noise.R = 0.1 * Matrix::Identity(2, 2);
    s.noise.Sigma_eps = Matrix::Constant(1, 1, 5.0);
    s.filter_noise = s.noise;
    s.q_factor = 0.1 * noise_col;
    s.r_factor = std::sqrt(0.1) * Matrix::Identity(2, 2);
    s.eps_factor = Matrix::Constant(1, 1, std::sqrt(5.0));

    ScenarioDefaults d;
    // Message amplitude uncertain, phase near lock; a wide phase prior sends a
    // fraction of runs into cycle slipping and unbounded ensemble error.
    const Matrix prior_cov = Vector{{1.0, 0.01}}.asDiagonal();
    d.attacker_prior = {Vector::Constant(2, 1.0), prior_cov};
    d.defender_prior = {Vector::Constant(2, 1.0), prior_cov};
    d.forward_kappa = 1.0;
    d.inverse_kappa = 1.0;
    d.assumed_forward_kappa = 2.0;
    d.draw_attacker_init = true;
    d.draw_true_init = true;
    d.horizon = 100;
    d.runs = 500;
    d.seed = 20260809;

    return {"fm_demodulator", std::move(s), std::move(d)};
}

ScenarioBundle build_vehicle_reentry() {
    // Reference configuration of the standard reentry tracking benchmark
    // (external-source values, not scenario-specific tuning): ballistic
    // coefficient, scale height, gravitational constant, earth radius.
    const double beta0 = -0.59783;
    const double h0 = 13.406;
    const double gm0 = 3.9860e5;
    const double r0 = 6374.0;
    const double dt = 0.1;

    AdversarialScenario s;
    s.n_x = 5;
    s.n_y = 2;
    s.n_a = 2;
    s.f = [=](const Vector& x) {
        const double rho = std::sqrt(x(0) * x(0) + x(1) * x(1));
        const double speed = std::sqrt(x(2) * x(2) + x(3) * x(3));
        const double ballistic = beta0 * std::exp(x(4));
        const double drag = ballistic * std::exp((r0 - rho) / h0) * speed;
        const double gravity = -gm0 / (rho * rho * rho);
        Vector out(5);
        out(0) = x(0) + dt * x(2);
        out(1) = x(1) + dt * x(3);
        out(2) = x(2) + dt * (drag * x(2) + gravity * x(0));
        out(3) = x(3) + dt * (drag * x(3) + gravity * x(1));
        out(4) = x(4);
        return out;
    };
    s.h = [=](const Vector& x) {
        Vector y(2);
        y(0) = std::sqrt((x(0) - r0) * (x(0) - r0) + x(1) * x(1));
        y(1) = std::atan2(x(1), x(0) - r0);
        return y;
    };
    s.g = [](const Vector& xh) { return Vector(xh.head(2)); };

    // Discrete per-step noise on the velocity and ballistic-parameter states.
    Matrix gw = Matrix::Zero(5, 3);
    gw(2, 0) = 1.0;
    gw(3, 1) = 1.0;
    gw(4, 2) = 1.0;
    const double qv = 2.4064e-5;
    Vector true_std(3), filter_std(3);
    true_std << std::sqrt(qv), std::sqrt(qv), 0.0;
    filter_std << std::sqrt(qv), std::sqrt(qv), 1e-3;  // filter keeps the parameter alive

    s.noise.Q = gw * true_std.cwiseProduct(true_std).asDiagonal() * gw.transpose();
    s.noise.R = Vector{{1e-6, 2.89e-8}}.asDiagonal();  // 1 m range, 0.17 mrad bearing
    s.noise.Sigma_eps = 3.0 * Matrix::Identity(2, 2);
    s.filter_noise = s.noise;
    s.filter_noise.Q = gw * filter_std.cwiseProduct(filter_std).asDiagonal() * gw.transpose();
    // The tracker assumes a conservative radar model; this is what makes the
    // forward filter pessimistic while the inverse filter, which models the
    // tracker rather than the radar, stays credible.
    s.filter_noise.R = 2.0 * s.noise.R;
    s.q_factor = gw * true_std.asDiagonal();
    s.r_factor = Vector{{1e-3, 1.7e-4}}.asDiagonal();
    s.eps_factor = std::sqrt(3.0) * Matrix::Identity(2, 2);

    ScenarioDefaults d;
    Vector x0(5);
    x0 << 6500.4, 349.14, -1.8093, -6.7967, 0.6932;
    Vector xhat0 = x0;
    xhat0(4) = 0.0;  // ballistic parameter unknown to the attacker
    d.attacker_prior = {xhat0, Vector{{1e-6, 1e-6, 1e-6, 1e-6, 1.0}}.asDiagonal()};
    d.defender_prior = {x0, Vector{{1e-5, 1e-5, 1e-5, 1e-5, 1.0}}.asDiagonal()};
    d.forward_kappa = 2.5;  // weight 1/3 on the central sigma point
    d.inverse_kappa = 3.5;
    d.assumed_forward_kappa = 2.5;
    d.true_x0 = x0;
    d.position_components = {0, 1};
    d.horizon = 500;
    d.runs = 100;
    d.seed = 20260810;

    return {"vehicle_reentry", std::move(s), std::move(d)};
}

ScenarioBundle build_lorenz() {
    const double dt = 0.01;
    const double r1 = 10.0;
    const double r2 = 28.0;
    const double r3 = 8.0 / 3.0;

    AdversarialScenario s;
    s.n_x = 3;
    s.n_y = 1;
    s.n_a = 1;
    s.f = [=](const Vector& x) {
        Vector out(3);
        out(0) = x(0) + dt * r1 * (-x(0) + x(1));
        out(1) = x(1) + dt * (r2 * x(0) - x(1) - x(0) * x(2));
        out(2) = x(2) + dt * (-r3 * x(2) + x(0) * x(1));
        return out;
    };
    s.h = [=](const Vector& x) {
        Vector y(1);
        y(0) = dt * std::sqrt((x(0) - 0.5) * (x(0) - 0.5) + x(1) * x(1) + x(2) * x(2));
        return y;
    };
    s.g = [=](const Vector& xh) {
        Vector a(1);
        a(0) = dt * std::sqrt(xh(0) * xh(0) + (xh(1) - 0.5) * (xh(1) - 0.5) + xh(2) * xh(2));
        return a;
    };

    Vector noise_col(3);
    noise_col << 0.0, 0.0, 0.5;
    s.noise.Q = dt * noise_col * noise_col.transpose();
    s.noise.R = Matrix::Constant(1, 1, 0.065 * 0.065 * dt);
    s.noise.Sigma_eps = Matrix::Constant(1, 1, 0.1 * 0.1 * dt);
    s.filter_noise = s.noise;
    s.q_factor = std::sqrt(dt) * noise_col;
    s.r_factor = Matrix::Constant(1, 1, 0.065 * std::sqrt(dt));
    s.eps_factor = Matrix::Constant(1, 1, 0.1 * std::sqrt(dt));

    ScenarioDefaults d;
    Vector x0(3), xhat0(3);
    x0 << -0.2, -0.3, -0.5;
    xhat0 << 1.35, -3.0, 6.0;
    d.attacker_prior = {xhat0, 0.35 * Matrix::Identity(3, 3)};
    d.defender_prior = {x0, 0.35 * Matrix::Identity(3, 3)};
    d.forward_kappa = 1.5;
    d.inverse_kappa = 2.0;
    d.assumed_forward_kappa = 1.5;
    d.true_x0 = x0;
    d.horizon = 1000;
    d.runs = 50;
    d.seed = 20260811;
    d.rkhs.kappa = 3.0;
    d.rkhs.kernel_sigma2 = 20.0;
    d.rkhs.window = 15;
    d.rkhs.init_fill = 1.0;
    d.rkhs.init_noise_scale = 1.0;

    return {"lorenz", std::move(s), std::move(d)};
}

LinearScenario make_linear_scenario(const Matrix& F, const Matrix& H, const Matrix& G,
                                    const Matrix& Q, const Matrix& R, const Matrix& Sigma_eps) {
    LinearScenario ls;
    ls.F = F;
    ls.H = H;
    ls.G = G;

    AdversarialScenario& s = ls.scenario;
    s.n_x = static_cast<int>(F.rows());
    s.n_y = static_cast<int>(H.rows());
    s.n_a = static_cast<int>(G.rows());
    s.f = [F](const Vector& x) { return Vector(F * x); };
    s.h = [H](const Vector& x) { return Vector(H * x); };
    s.g = [G](const Vector& x) { return Vector(G * x); };
    s.noise = {Q, R, Sigma_eps};
    s.filter_noise = s.noise;
    s.q_factor = cholesky_psd(Q).lower;
    s.r_factor = cholesky_psd(R).lower;
    s.eps_factor = cholesky_psd(Sigma_eps).lower;

    ScenarioDefaults& d = ls.defaults;
    d.attacker_prior = {Vector::Zero(s.n_x), Matrix::Identity(s.n_x, s.n_x)};
    d.defender_prior = d.attacker_prior;
    d.forward_kappa = 1.0;
    d.inverse_kappa = 1.0;
    d.assumed_forward_kappa = 1.0;
    d.draw_attacker_init = true;
    d.draw_true_init = true;
    d.horizon = 50;
    d.runs = 100;
    d.seed = 20260812;
    return ls;
}

LinearScenario build_linear_oracle(int n_x, int n_y, int n_a, std::uint64_t seed) {
    if (n_x <= 0 || n_x > 6 || n_y <= 0 || n_y > 6 || n_a <= 0 || n_a > 6) {
        throw DimensionMismatch("linear oracle dimensions must lie in 1..6");
    }
    GaussianStream stream(derive_seed(seed, 0x11EA));

    Matrix F(n_x, n_x);
    for (int i = 0; i < n_x; ++i) {
        for (int j = 0; j < n_x; ++j) F(i, j) = stream.next();
    }
    const double radius = F.eigenvalues().cwiseAbs().maxCoeff();
    const double target = 0.95 * (0.55 + 0.45 * 0.5 * (1.0 + std::tanh(stream.next())));
    if (radius > 0.0) F *= target / radius;

    const auto random_matrix = [&stream](int rows, int cols) {
        Matrix m(rows, cols);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) m(i, j) = stream.next();
        }
        return m;
    };
    const Matrix H = random_matrix(n_y, n_x) / std::sqrt(static_cast<double>(n_x));
    const Matrix G = random_matrix(n_a, n_x) / std::sqrt(static_cast<double>(n_x));

    const auto random_spd = [&random_matrix](int n, double base) {
        const Matrix a = random_matrix(n, n) * 0.3;
        return Matrix(base * Matrix::Identity(n, n) + a * a.transpose() / n);
    };
    const Matrix Q = random_spd(n_x, 0.1);
    const Matrix R = random_spd(n_y, 0.5);
    const Matrix Sigma_eps = random_spd(n_a, 0.5);

    return make_linear_scenario(F, H, G, Q, R, Sigma_eps);
}

TruthSim simulate_truth(const AdversarialScenario& scenario, const Vector& x0, int horizon,
                        std::uint64_t run_seed) {
    if (horizon < 1) throw EmptyInput("horizon must be at least 1");

    GaussianStream w_stream(derive_seed(run_seed, 2));
    GaussianStream v_stream(derive_seed(run_seed, 3));
    GaussianStream eps_stream(derive_seed(run_seed, 4));

    TruthSim sim;
    sim.states.reserve(static_cast<std::size_t>(horizon) + 1);
    sim.attacker_obs.reserve(static_cast<std::size_t>(horizon));
    sim.defender_noise.reserve(static_cast<std::size_t>(horizon));

    sim.states.push_back(x0);
    Vector x = x0;
    for (int k = 1; k <= horizon; ++k) {
        x = scenario.f(x) + scenario.q_factor * w_stream.next_vector(scenario.q_factor.cols());
        sim.states.push_back(x);
        sim.attacker_obs.push_back(scenario.h(x) +
                                   scenario.r_factor * v_stream.next_vector(scenario.r_factor.cols()));
        sim.defender_noise.push_back(scenario.eps_factor *
                                     eps_stream.next_vector(scenario.eps_factor.cols()));
    }
    return sim;
}

}  // namespace sigmafilt
