#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lqgalloc/models.hpp"
#include "lqgalloc/solvers.hpp"
#include "lqgalloc/state_space.hpp"
#include "test_util.hpp"

using namespace lqgalloc;
using test_util::max_abs_diff;

TEST_CASE("validate: example model is clean") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    CHECK(validate(ss).empty());
}

TEST_CASE("validate: broken symmetry and dimensions are reported by field") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());

    SUBCASE("asymmetric sigma_x") {
        ss.sigma_x(1, 2) += 1e-6;
        const auto v = validate(ss);
        REQUIRE(v.size() == 1);
        CHECK(v[0].field == "sigma_x");
    }
    SUBCASE("wrong B row count") {
        ss.B = Eigen::MatrixXd::Zero(4, 1);
        const auto v = validate(ss);
        REQUIRE(v.size() == 1);
        CHECK(v[0].field == "B");
    }
    SUBCASE("negative definite sigma_y") {
        ss.sigma_y(0, 0) = -1.0;
        const auto v = validate(ss);
        REQUIRE(v.size() == 1);
        CHECK(v[0].field == "sigma_y");
    }
}

TEST_CASE("impulse response: trade impulse reproduces the impact profile") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    const Trajectory tr = impulse_response(ss, "q", 200);
    const Eigen::VectorXd r_dec = tr.channel("y.r_dec");
    const Eigen::VectorXd cum = tr.channel("cum.r_dec");

    // Instantaneous impact at t = 1, then relaxation shrinking by (1 - om_i).
    CHECK(r_dec[0] == doctest::Approx(0.06).epsilon(1e-14));
    for (int t = 2; t < 20; ++t)
        CHECK(r_dec[t] == doctest::Approx(0.8 * r_dec[t - 1]).epsilon(1e-12));

    // Geometric series: cumulative price change converges to gamma_i + beta_i.
    CHECK(cum[199] == doctest::Approx(0.06 - 0.048).epsilon(1e-9));
}

TEST_CASE("impulse response: predictor-noise impulse accumulates beta_p / omega_p") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    const Trajectory tr = impulse_response(ss, "x_p", 400, 1.8e-3);
    CHECK(tr.channel("cum.r_dec")[399] == doctest::Approx(1.8e-2).epsilon(1e-10));
}

TEST_CASE("impulse response: zero coupling column gives a zero trajectory") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    ss.B.setZero();
    const Trajectory tr = impulse_response(ss, "q", 50);
    CHECK(tr.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("impulse response: errors") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    CHECK_THROWS_AS(impulse_response(ss, "nope", 10), std::invalid_argument);
    CHECK_THROWS_AS(impulse_response(ss, "q", 0), std::invalid_argument);
}

TEST_CASE("simulate: zero everything stays zero") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    const auto res = simulate(ss, Eigen::MatrixXd::Zero(50, 1), NoiseSource::none());
    CHECK(res.states.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.observations.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate: control impulse matches impulse_response") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    Eigen::MatrixXd controls = Eigen::MatrixXd::Zero(60, 1);
    controls(0, 0) = 1.0;
    const auto res = simulate(ss, controls, NoiseSource::none());
    const Trajectory tr = impulse_response(ss, "q", 60);
    for (int t = 1; t <= 60; ++t)
        for (int k = 0; k < 4; ++k)
            CHECK(res.observations(t, k) == doctest::Approx(tr.values(t - 1, k)).epsilon(1e-14));
}

TEST_CASE("simulate: deterministic for a fixed seed") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    const auto a = simulate(ss, Eigen::MatrixXd::Zero(100, 1), NoiseSource::gaussian(42));
    const auto b = simulate(ss, Eigen::MatrixXd::Zero(100, 1), NoiseSource::gaussian(42));
    CHECK(max_abs_diff(a.states, b.states) == 0.0);
    const auto c = simulate(ss, Eigen::MatrixXd::Zero(100, 1), NoiseSource::gaussian(43));
    CHECK(max_abs_diff(a.states, c.states) > 0.0);
}

TEST_CASE("simulate: linearity and noise/control superposition") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    GaussianRng rng(7);
    const Eigen::Index T = 80;
    const Eigen::MatrixXd u = test_util::random_matrix(rng, T, 1);
    const Eigen::MatrixXd v = test_util::random_matrix(rng, T, 1);
    const double alpha = 0.7, beta = -1.3;

    const auto ru = simulate(ss, u, NoiseSource::none());
    const auto rv = simulate(ss, v, NoiseSource::none());
    const auto rc = simulate(ss, alpha * u + beta * v, NoiseSource::none());
    CHECK(max_abs_diff(rc.observations, alpha * ru.observations + beta * rv.observations) <
          1e-12 * std::max(1.0, rc.observations.cwiseAbs().maxCoeff()));

    // Replay the noise of a stochastic zero-control run, then add controls.
    const auto rn = simulate(ss, Eigen::MatrixXd::Zero(T, 1), NoiseSource::gaussian(11));
    const auto rboth = simulate(ss, u, NoiseSource::replay(rn.eps_x, rn.eps_y));
    CHECK(max_abs_diff(rboth.observations, ru.observations + rn.observations) <
          1e-12 * std::max(1.0, rboth.observations.cwiseAbs().maxCoeff()));
}

TEST_CASE("simulate: impulse response of a stable A decays geometrically") {
    GaussianRng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        LinearStateSpace ss;
        const Eigen::Index n = 4;
        ss.A = test_util::random_stable_matrix(rng, n, 0.8);
        ss.B = test_util::random_matrix(rng, n, 1);
        ss.C = Eigen::MatrixXd::Identity(n, n);
        ss.sigma_x = Eigen::MatrixXd::Zero(n, n);
        ss.sigma_y = Eigen::MatrixXd::Zero(n, n);
        ss.input_labels = {"u"};
        const double rho = spectral_radius(ss.A);

        const Trajectory tr = impulse_response(ss, "u", 200);
        double prev = tr.values.row(99).head(n).norm();
        for (int t = 100; t < 200; ++t) {
            const double cur = tr.values.row(t).head(n).norm();
            if (prev > 1e-280) CHECK(cur <= (rho + 1e-6) * prev * 1.0001);
            prev = cur;
        }
    }
}

TEST_CASE("simulate: non-PSD covariance is a factorization failure") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    ss.sigma_x(4, 4) = -1e-3;
    CHECK_THROWS_AS(simulate(ss, Eigen::MatrixXd::Zero(10, 1), NoiseSource::gaussian(1)),
                    SolverError);
}

TEST_CASE("trajectory CSV carries 17 significant digits") {
    Trajectory tr;
    tr.times = {0, 1};
    tr.channel_names = {"a"};
    tr.values.resize(2, 1);
    tr.values << 0.1, 1.0 / 3.0;
    const std::string csv = tr.to_csv();
    CHECK(csv.find("time,a\n") == 0);
    CHECK(csv.find("1.0000000000000001e-01") != std::string::npos);
    CHECK(csv.find("3.3333333333333331e-01") != std::string::npos);
}
