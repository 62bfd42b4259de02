#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lqgalloc/models.hpp"
#include "lqgalloc/portfolio.hpp"
#include "lqgalloc/sim.hpp"
#include "test_util.hpp"

using namespace lqgalloc;
using test_util::max_abs_diff;

namespace {

struct Solved {
    LinearStateSpace ss;
    OutputSelectors sel;
    KalmanSolution kal;
    CostMatrices cost;
    DareSolution lqr;
    ClosedLoopSystem cl;
};

Solved solve_full(double lambda, SeparableModelParams params = test_util::paper_params()) {
    Solved s;
    std::tie(s.ss, s.sel) = build_separable_model(params);
    s.kal = solve_kalman(s.ss);
    s.cost = build_cost_matrices(s.ss, s.sel, lambda, s.kal.omega);
    s.lqr = solve_lqr(s.ss, s.cost);
    s.cl = build_closed_loop(s.ss, s.kal, s.lqr);
    return s;
}

// Direct evaluation of lambda*V(PnL|F_t) - E(PnL|F_t) from the conditional
// moment formulas, independent of the matrix construction.
double cost_direct(const LinearStateSpace& ss, const OutputSelectors& sel, double lambda,
                   const Eigen::MatrixXd& omega, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& q) {
    Eigen::MatrixXd W(2 * sel.n_assets(), ss.n_outputs());
    W.topRows(sel.n_assets()) = sel.pi_dec;
    W.bottomRows(sel.n_assets()) = sel.pi_exe;
    const Eigen::MatrixXd Sigma =
        ss.sigma_y +
        ss.C * (ss.sigma_x + ss.A * omega * ss.A.transpose()) * ss.C.transpose();
    Eigen::VectorXd z(2 * sel.n_assets());
    z.head(sel.n_assets()) = sel.pi_q * ss.C * x;
    z.tail(sel.n_assets()) = q;
    const double e_pnl = z.dot(W * ss.C * (ss.A * x + ss.B * q));
    const double v_pnl = z.dot(W * Sigma * W.transpose() * z);
    return lambda * v_pnl - e_pnl;
}

} // namespace

TEST_CASE("pnl_step") {
    Eigen::VectorXd Q(2), q(2), rd(2), re(2);
    Q << 1, 2;
    q << 0.5, -1;
    rd << 0.01, 0.02;
    re << 0.001, -0.002;
    CHECK(pnl_step(Q, q, rd, re) == doctest::Approx(0.0525).epsilon(1e-15));

    CHECK(pnl_step(Q, Eigen::VectorXd::Zero(2), rd, re) ==
          doctest::Approx(Q.dot(rd)).epsilon(1e-15));
    CHECK(pnl_step(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), rd, re) == 0.0);
    CHECK_THROWS_AS(pnl_step(Q, Eigen::VectorXd::Zero(3), rd, re), std::invalid_argument);
}

TEST_CASE("round_trip_identity_check") {
    SUBCASE("zero trades") {
        const auto [lhs, rhs] = round_trip_identity_check(
            Eigen::MatrixXd::Zero(5, 1), Eigen::MatrixXd::Zero(6, 1), Eigen::MatrixXd::Zero(5, 1));
        CHECK(lhs == 0.0);
        CHECK(rhs == 0.0);
    }
    SUBCASE("random round trip on the example model") {
        auto [ss, sel] = build_separable_model(test_util::paper_params());
        GaussianRng rng(2);
        const Eigen::VectorXd trades = test_util::random_round_trip(rng, 40);
        const RoundTripResult rt = round_trip(ss, sel, trades);
        CHECK(std::abs(rt.identity_lhs - rt.identity_rhs) < 1e-12);
    }
    SUBCASE("not a round trip") {
        Eigen::MatrixXd trades = Eigen::MatrixXd::Ones(3, 1);
        CHECK_THROWS_AS(round_trip_identity_check(trades, Eigen::MatrixXd::Zero(4, 1),
                                                  Eigen::MatrixXd::Zero(3, 1)),
                        std::invalid_argument);
    }
}

TEST_CASE("cost matrices: closed forms of the separable model") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    const double lambda = 1.0, eta = 0.5, sigma = 0.02, gamma_i = 0.06;
    const auto cost = build_cost_matrices(ss, sel, lambda, Eigen::MatrixXd::Zero(5, 5));

    CHECK(cost.R(0, 0) ==
          doctest::Approx(lambda * eta * eta * sigma * sigma - gamma_i * (eta - 1.0))
              .epsilon(1e-14)); // 0.0301
    CHECK(cost.N(0, 0) ==
          doctest::Approx(lambda * eta * sigma * sigma - 0.5 * gamma_i).epsilon(1e-14)); // -0.0298
    CHECK(cost.Q(0, 0) == doctest::Approx(lambda * sigma * sigma).epsilon(1e-14));
    CHECK(cost.Q(0, 3) == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(cost.Q(0, 4) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("cost matrices: block symmetry for random selector-consistent inputs") {
    GaussianRng rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        LinearStateSpace ss;
        const Eigen::Index n = 4, d = 3, p = 1;
        ss.A = test_util::random_matrix(rng, n, n);
        ss.B = test_util::random_matrix(rng, n, p);
        ss.C = test_util::random_matrix(rng, d, n);
        const Eigen::MatrixXd M = test_util::random_matrix(rng, n, n);
        ss.sigma_x = M * M.transpose();
        const Eigen::MatrixXd My = test_util::random_matrix(rng, d, d);
        ss.sigma_y = My * My.transpose();
        OutputSelectors sel;
        sel.pi_q = test_util::random_matrix(rng, p, d);
        sel.pi_dec = test_util::random_matrix(rng, p, d);
        sel.pi_exe = test_util::random_matrix(rng, p, d);

        const auto cost = build_cost_matrices(ss, sel, 0.5 + rng.uniform(),
                                              Eigen::MatrixXd::Zero(n, n));
        Eigen::MatrixXd block(n + p, n + p);
        block.topLeftCorner(n, n) = cost.Q;
        block.topRightCorner(n, p) = cost.N;
        block.bottomLeftCorner(p, n) = cost.N.transpose();
        block.bottomRightCorner(p, p) = cost.R;
        CHECK(max_abs_diff(block, block.transpose()) < 1e-15 * std::max(1.0, block.norm()));
    }
}

TEST_CASE("cost matrices: oracle equivalence on random state/trade pairs") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    const double lambda = 1.0;
    const Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(5, 5);
    const auto cost = build_cost_matrices(ss, sel, lambda, omega);

    GaussianRng rng(100);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Eigen::VectorXd x = rng.normal_vector(5);
        const Eigen::VectorXd q = rng.normal_vector(1);
        const double form =
            x.dot(cost.Q * x) + 2.0 * x.dot(cost.N * q) + q.dot(cost.R * q);
        const double direct = cost_direct(ss, sel, lambda, omega, x, q);
        worst = std::max(worst, std::abs(form - direct) / std::max(1.0, std::abs(direct)));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("cost matrices: degenerate R is rejected downstream") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    auto cost = build_cost_matrices(ss, sel, 1.0, Eigen::MatrixXd::Zero(5, 5));
    cost.R.setZero(); // the lambda -> 0, gamma_i = 0 limit
    CHECK_THROWS_AS(solve_dare(ss.A, ss.B, cost.Q, cost.N, cost.R), SolverError);
    CHECK_THROWS_AS(build_cost_matrices(ss, sel, 0.0, Eigen::MatrixXd::Zero(5, 5)),
                    std::invalid_argument);
}

TEST_CASE("no-arbitrage: paper example passes both checks") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    const ArbitrageReport rep = check_no_arbitrage(ss, sel, 1.0);
    CHECK(rep.stabilizable);
    CHECK(rep.stabilizing_solution_exists);
    CHECK(rep.popov_min_eig > 1e-10);
    CHECK(rep.verdict == ArbitrageVerdict::NoArbitrage);
}

TEST_CASE("no-arbitrage: favorable impact is detected, with a profitable round trip") {
    auto params = test_util::paper_params();
    params.gamma_i = -0.06;
    params.beta_i = 0.048;
    auto [ss, sel] = build_separable_model(params);

    const ArbitrageReport rep = check_no_arbitrage(ss, sel, 1.0);
    CHECK_FALSE(rep.stabilizing_solution_exists);
    CHECK(rep.popov_min_eig < -1e-10);
    CHECK(rep.verdict == ArbitrageVerdict::ArbitrageDetected);

    // Oracle: buy then sell one unit; deterministic PnL must be positive.
    Eigen::VectorXd trades(2);
    trades << 1.0, -1.0;
    const RoundTripResult rt = round_trip(ss, sel, trades);
    CHECK(rt.total_pnl > 0.0);
}

TEST_CASE("no-arbitrage: zero-impact zero-noise model sits on the boundary") {
    // B only moves the inventory; all returns are identically zero, so every
    // round trip has exactly zero PnL.
    LinearStateSpace ss;
    ss.A = Eigen::MatrixXd::Zero(2, 2);
    ss.A(0, 0) = 1.0;
    ss.A(1, 1) = 0.5;
    ss.B = Eigen::MatrixXd::Zero(2, 1);
    ss.B(0, 0) = 1.0;
    ss.C = Eigen::MatrixXd::Zero(3, 2);
    ss.C(0, 0) = 1.0;
    ss.sigma_x = Eigen::MatrixXd::Zero(2, 2);
    ss.sigma_y = Eigen::MatrixXd::Zero(3, 3);
    OutputSelectors sel;
    sel.pi_q = Eigen::MatrixXd::Zero(1, 3);
    sel.pi_q(0, 0) = 1.0;
    sel.pi_dec = Eigen::MatrixXd::Zero(1, 3);
    sel.pi_dec(0, 1) = 1.0;
    sel.pi_exe = Eigen::MatrixXd::Zero(1, 3);
    sel.pi_exe(0, 2) = 1.0;

    const ArbitrageReport rep = check_no_arbitrage(ss, sel, 1.0);
    CHECK(std::abs(rep.popov_min_eig) <= 1e-10);
    CHECK(rep.verdict == ArbitrageVerdict::Boundary);
}

TEST_CASE("no-arbitrage: grid size is validated") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    CHECK_THROWS_AS(check_no_arbitrage(ss, sel, 1.0, SolverConfig{}, 32), std::invalid_argument);
}

TEST_CASE("no-arbitrage: stabilizing-solution and Popov verdicts never disagree") {
    GaussianRng rng(2024);
    int arbitrage_cases = 0;
    for (int trial = 0; trial < 20; ++trial) {
        SeparableModelParams p;
        p.omega_p = 0.05 + 0.45 * rng.uniform();
        p.beta_p = 5e-4 + 4.5e-3 * rng.uniform();
        p.sigma = 0.005 + 0.045 * rng.uniform();
        p.omega_i = 0.05 + 0.45 * rng.uniform();
        const double mag = 0.01 + 0.09 * rng.uniform();
        p.gamma_i = rng.uniform() < 0.3 ? -mag : mag;
        p.beta_i = -0.8 * p.gamma_i;
        p.eta = rng.uniform();
        const double lambda = 0.05 + 20.0 * rng.uniform();

        auto [ss, sel] = build_separable_model(p);
        const ArbitrageReport rep = check_no_arbitrage(ss, sel, lambda, SolverConfig{}, 512);
        if (std::abs(rep.popov_min_eig) <= 1e-10) continue; // boundary, no claim
        CHECK(rep.stabilizing_solution_exists == (rep.popov_min_eig > 1e-10));
        if (!rep.stabilizing_solution_exists) ++arbitrage_cases;
    }
    CHECK(arbitrage_cases > 0); // the draw must exercise both branches
}

TEST_CASE("round trips are never profitable on a no-arbitrage model") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    GaussianRng rng(606);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index T = 10 + static_cast<Eigen::Index>(rng.uniform() * 50);
        const Eigen::VectorXd trades = test_util::random_round_trip(rng, T);
        const RoundTripResult rt = round_trip(ss, sel, trades);
        CHECK(rt.total_pnl <= 1e-12);
    }
}

TEST_CASE("analytic performance: zero noise flags zero risk") {
    auto params = test_util::paper_params();
    auto [ss, sel] = build_separable_model(params);
    ss.sigma_x.setZero();
    const KalmanSolution kal = solve_kalman(ss);
    auto [ss2, sel2] = build_separable_model(params);
    const CostMatrices cost = build_cost_matrices(ss2, sel2, 1.0, kal.omega);
    const DareSolution lqr = solve_lqr(ss, cost);
    const ClosedLoopSystem cl = build_closed_loop(ss, kal, lqr);
    const PerformanceMetrics m = analytic_performance(cl, ss, sel, kal, lqr, 1.0);
    CHECK(m.avg_pnl == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(m.avg_risk == 0.0);
    CHECK(m.zero_risk);
}

TEST_CASE("analytic performance: matches Monte Carlo on the example model") {
    const Solved s = solve_full(1.0);
    const PerformanceMetrics an = analytic_performance(s.cl, s.ss, s.sel, s.kal, s.lqr, 1.0);

    MonteCarloSettings mc;
    mc.T = 5000;
    mc.n_paths = 50;
    mc.seed = 91;
    const MonteCarloMetrics est =
        monte_carlo_metrics(s.cl, s.ss, s.sel, s.lqr, s.kal, 1.0, mc);
    CHECK(std::abs(est.metrics.avg_pnl - an.avg_pnl) < 3.0 * est.pnl_se);
    CHECK(std::abs(est.metrics.avg_risk - an.avg_risk) < 3.0 * est.risk_se);
}

TEST_CASE("analytic performance: validated on a noisy-observation variant") {
    // Nonzero sigma_y exercises the L*sigma_y correction terms; the Monte
    // Carlo estimator arbitrates the block-matrix layout.
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    ss.sigma_y = Eigen::MatrixXd::Zero(4, 4);
    ss.sigma_y(0, 0) = 1e-6;
    ss.sigma_y(1, 1) = 1e-7;
    ss.sigma_y(2, 2) = 1e-7;
    ss.sigma_y(3, 3) = 1e-7;
    const KalmanSolution kal = solve_kalman(ss);
    const CostMatrices cost = build_cost_matrices(ss, sel, 1.0, kal.omega);
    const DareSolution lqr = solve_lqr(ss, cost);
    const ClosedLoopSystem cl = build_closed_loop(ss, kal, lqr);
    const PerformanceMetrics an = analytic_performance(cl, ss, sel, kal, lqr, 1.0);

    MonteCarloSettings mc;
    mc.T = 4000;
    mc.n_paths = 60;
    mc.seed = 92;
    const MonteCarloMetrics est = monte_carlo_metrics(cl, ss, sel, lqr, kal, 1.0, mc);
    CHECK(std::abs(est.metrics.avg_pnl - an.avg_pnl) < 4.0 * est.pnl_se);
    CHECK(std::abs(est.metrics.avg_risk - an.avg_risk) < 4.0 * est.risk_se);
}

TEST_CASE("gain invariance under noise scaling") {
    const Solved s = solve_full(1.0);

    // Same cost, scaled plant noise: the Riccati never sees sigma_x.
    LinearStateSpace scaled = s.ss;
    scaled.sigma_x *= 10.0;
    const DareSolution same_cost = solve_lqr(scaled, s.cost);
    CHECK(max_abs_diff(same_cost.K, s.lqr.K) < 1e-10);

    // Rebuilt cost: only the lambda-weighted variance part moves, and the
    // stabilizing verdict is unchanged.
    const CostMatrices rebuilt =
        build_cost_matrices(scaled, s.sel, 1.0, Eigen::MatrixXd::Zero(5, 5));
    const Eigen::MatrixXd dQ = rebuilt.Q - s.cost.Q;
    const Eigen::MatrixXd expected_dQ =
        (10.0 - 1.0) * (s.cost.Q - (-0.5) * Eigen::MatrixXd::Zero(5, 5));
    // Expectation part cancels in the difference: dQ must equal 9x the
    // variance part, which is lambda * sigma^2 on the (0,0) cell only.
    CHECK(dQ(0, 0) == doctest::Approx(9.0 * 4e-4).epsilon(1e-12));
    CHECK(std::abs(dQ(0, 3)) < 1e-15);
    CHECK(std::abs(dQ(0, 4)) < 1e-15);
    const ArbitrageReport rep = check_no_arbitrage(scaled, s.sel, 1.0);
    CHECK(rep.verdict == ArbitrageVerdict::NoArbitrage);
}
