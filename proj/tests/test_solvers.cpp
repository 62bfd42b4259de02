#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "lqgalloc/lqg.hpp"
#include "lqgalloc/portfolio.hpp"
#include "lqgalloc/solvers.hpp"
#include "test_util.hpp"

using namespace lqgalloc;
using test_util::max_abs_diff;

namespace {

Eigen::MatrixXd scalar(double v) {
    Eigen::MatrixXd M(1, 1);
    M(0, 0) = v;
    return M;
}

// Independent oracle: naive fixed-point iteration of the Riccati map from
// P0 = Q until the update stalls.
Eigen::MatrixXd dare_fixed_point(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                 const Eigen::MatrixXd& Q, const Eigen::MatrixXd& N,
                                 const Eigen::MatrixXd& R, int iters = 100000) {
    Eigen::MatrixXd P = Q;
    for (int i = 0; i < iters; ++i) {
        const Eigen::MatrixXd G = R + B.transpose() * P * B;
        const Eigen::MatrixXd M = A.transpose() * P * B + N;
        const Eigen::MatrixXd next =
            Q + A.transpose() * P * A - M * G.ldlt().solve(M.transpose());
        if ((next - P).cwiseAbs().maxCoeff() < 1e-14) return next;
        P = next;
    }
    return P;
}

// Independent oracle: direct Kronecker-vectorization solve of X = A X A' + E.
Eigen::MatrixXd lyapunov_kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& E) {
    const Eigen::Index n = A.rows();
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k)
                for (Eigen::Index l = 0; l < n; ++l)
                    M(i * n + j, k * n + l) -= A(i, k) * A(j, l);
    Eigen::VectorXd e(n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) e[i * n + j] = E(i, j);
    const Eigen::VectorXd x = M.fullPivLu().solve(e);
    Eigen::MatrixXd X(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) X(i, j) = x[i * n + j];
    return X;
}

} // namespace

TEST_CASE("spectral radius") {
    CHECK(spectral_radius(Eigen::MatrixXd::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-10));
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
    D(0, 0) = 0.3;
    D(1, 1) = -0.8;
    CHECK(spectral_radius(D) == doctest::Approx(0.8).epsilon(1e-10));

    // Example model A is block upper-triangular; eigenvalues read off the
    // diagonal: {1, 0, 0, 0.9, 0.8}.
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    CHECK(spectral_radius(ss.A) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dare: A = 0 collapses to P = Q") {
    const auto sol = solve_dare(scalar(0.0), scalar(1.0), scalar(2.0), scalar(0.0), scalar(1.0));
    CHECK(sol.P(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(sol.K(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("dare: scalar case against the fixed-point oracle") {
    const Eigen::MatrixXd A = scalar(0.5), B = scalar(1.0), Q = scalar(1.0), N = scalar(0.0),
                          R = scalar(1.0);
    const Eigen::MatrixXd P_oracle = dare_fixed_point(A, B, Q, N, R);
    // Positive root of P^2 - 0.25 P - 1 = 0.
    const double root = 0.125 + std::sqrt(0.125 * 0.125 + 1.0);
    CHECK(P_oracle(0, 0) == doctest::Approx(root).epsilon(1e-12));

    const auto sol = solve_dare(A, B, Q, N, R);
    CHECK(sol.P(0, 0) == doctest::Approx(P_oracle(0, 0)).epsilon(1e-12));
    CHECK(sol.P(0, 0) == doctest::Approx(1.1327822185373186).epsilon(1e-12));
    CHECK(sol.K(0, 0) == doctest::Approx(-0.2655644370746374).epsilon(1e-10));
    CHECK(sol.residual < 1e-12);
    CHECK(sol.closed_loop_radius < 1.0);
}

TEST_CASE("dare: example-model cost problem at lambda = 1") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    const auto cost = build_cost_matrices(ss, sel, 1.0, Eigen::MatrixXd::Zero(5, 5));
    const auto sol = solve_dare(ss.A, ss.B, cost.Q, cost.N, cost.R);
    CHECK(sol.residual < 1e-10);
    CHECK(sol.closed_loop_radius < 1.0);
    // Return states never feed the dynamics, so the optimal gain ignores them.
    CHECK(std::abs(sol.K(0, 1)) < 1e-12);
    CHECK(std::abs(sol.K(0, 2)) < 1e-12);
}

TEST_CASE("dare: doubling matches the fixed-point oracle on random systems") {
    GaussianRng rng(777);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 3); // 2..4
        const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.uniform() * 2); // 1..2
        const Eigen::MatrixXd A = test_util::random_stable_matrix(rng, n, 0.95);
        const Eigen::MatrixXd B = test_util::random_matrix(rng, n, p);
        const Eigen::MatrixXd M = test_util::random_matrix(rng, n, n);
        const Eigen::MatrixXd Q =
            M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
        const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(p, p);
        const Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n, p);

        const auto sol = solve_dare(A, B, Q, N, R);
        const Eigen::MatrixXd P_oracle = dare_fixed_point(A, B, Q, N, R);
        CHECK(max_abs_diff(sol.P, P_oracle) < 1e-8 * std::max(1.0, P_oracle.norm()));
        CHECK(sol.closed_loop_radius < 1.0);
    }
}

TEST_CASE("dare: error taxonomy") {
    CHECK_THROWS_WITH_AS(solve_dare(scalar(2.0), scalar(0.0), scalar(1.0), scalar(0.0), scalar(1.0)),
                         doctest::Contains("not stabilizable"), SolverError);
    CHECK_THROWS_AS(solve_dare(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0), scalar(0.0)),
                    SolverError);
    try {
        solve_dare(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0), scalar(0.0));
    } catch (const SolverError& e) {
        CHECK(e.code() == SolverError::Code::RNotInvertible);
    }

    // Favorable impact flips the sign of the trading cost; no stabilizing
    // solution exists and the solver must refuse rather than return one.
    auto params = test_util::paper_params();
    params.gamma_i = -0.06;
    params.beta_i = 0.048;
    auto [ss, sel] = build_separable_model(params);
    const auto cost = build_cost_matrices(ss, sel, 1.0, Eigen::MatrixXd::Zero(5, 5));
    try {
        solve_dare(ss.A, ss.B, cost.Q, cost.N, cost.R);
        CHECK(false);
    } catch (const SolverError& e) {
        const bool expected = e.code() == SolverError::Code::NoStabilizingSolution ||
                              e.code() == SolverError::Code::MaxIterExceeded;
        CHECK(expected);
    }
}

TEST_CASE("lyapunov: closed forms") {
    const Eigen::MatrixXd E3 =
        (Eigen::MatrixXd(3, 3) << 2, 1, 0, 1, 3, 0.5, 0, 0.5, 1).finished();
    CHECK(max_abs_diff(solve_lyapunov(Eigen::MatrixXd::Zero(3, 3), E3), E3) < 1e-14);

    CHECK(solve_lyapunov(scalar(0.5), scalar(1.0))(0, 0) ==
          doctest::Approx(4.0 / 3.0).epsilon(1e-13));

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    A(0, 0) = 0.9;
    A(1, 1) = 0.5;
    const Eigen::MatrixXd X = solve_lyapunov(A, Eigen::MatrixXd::Identity(2, 2));
    CHECK(X(0, 0) == doctest::Approx(1.0 / 0.19).epsilon(1e-12));
    CHECK(X(1, 1) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(std::abs(X(0, 1)) < 1e-14);
}

TEST_CASE("lyapunov: unstable A is rejected") {
    CHECK_THROWS_AS(solve_lyapunov(scalar(1.0), scalar(1.0)), SolverError);
    try {
        solve_lyapunov(scalar(1.5), scalar(1.0));
    } catch (const SolverError& e) {
        CHECK(e.code() == SolverError::Code::UnstableA);
    }
}

TEST_CASE("lyapunov: matches the Kronecker oracle and keeps PSD signature") {
    GaussianRng rng(4242);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 4);
        const Eigen::MatrixXd A = test_util::random_stable_matrix(rng, n, 0.9);
        const Eigen::MatrixXd M = test_util::random_matrix(rng, n, n);
        const Eigen::MatrixXd E = M * M.transpose();
        const Eigen::MatrixXd X = solve_lyapunov(A, E);
        CHECK(max_abs_diff(X, lyapunov_kron(A, E)) < 1e-10 * std::max(1.0, X.norm()));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() > -1e-10 * std::max(1.0, X.norm()));
    }
}

TEST_CASE("lyapunov: uniqueness under permutation similarity") {
    GaussianRng rng(99);
    const Eigen::Index n = 4;
    const Eigen::MatrixXd A = test_util::random_stable_matrix(rng, n, 0.85);
    const Eigen::MatrixXd M = test_util::random_matrix(rng, n, n);
    const Eigen::MatrixXd E = M * M.transpose();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n); // permutation (0 1 2 3) -> (2 0 3 1)
    T(0, 2) = T(1, 0) = T(2, 3) = T(3, 1) = 1.0;

    const Eigen::MatrixXd X = solve_lyapunov(A, E);
    const Eigen::MatrixXd Xp =
        solve_lyapunov(T * A * T.transpose(), T * E * T.transpose());
    CHECK(max_abs_diff(Xp, T * X * T.transpose()) < 1e-10);
}

TEST_CASE("stabilizability and detectability") {
    auto [ss, sel] = build_separable_model(test_util::paper_params());
    CHECK(is_stabilizable(ss.A, ss.B));
    // Hand-written stabilizing policy: trade away half the inventory.
    Eigen::MatrixXd K(1, 5);
    K << -0.5, 0, 0, 0, 0;
    CHECK(spectral_radius(ss.A + ss.B * K) < 1.0);

    CHECK_FALSE(is_stabilizable(scalar(2.0), scalar(0.0)));

    GaussianRng rng(5);
    const Eigen::MatrixXd A = test_util::random_stable_matrix(rng, 3, 0.7);
    CHECK(is_stabilizable(A, Eigen::MatrixXd::Zero(3, 1)));

    const auto witness = stabilizing_gain(ss.A, ss.B);
    REQUIRE(witness.stabilizable);
    CHECK(spectral_radius(ss.A + ss.B * *witness.K) < 1.0);

    CHECK(is_detectable(ss.C, ss.A));
    CHECK_FALSE(is_detectable(scalar(0.0), scalar(2.0)));
    CHECK(is_detectable(Eigen::MatrixXd::Identity(3, 3),
                        test_util::random_matrix(rng, 3, 3) * 5.0));
}

TEST_CASE("semistable lyapunov: deflates the unexcited marginal mode") {
    // Integrator + stable mode; noise only touches the stable one.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    A(0, 0) = 1.0;
    A(1, 1) = 0.5;
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(2, 2);
    E(1, 1) = 1.0;
    const auto res = detail::solve_lyapunov_semistable(A, E);
    CHECK(res.rho_full == doctest::Approx(1.0));
    CHECK(res.rho_effective == doctest::Approx(0.5));
    CHECK(res.n_deflated == 1);
    CHECK(res.X(1, 1) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(std::abs(res.X(0, 0)) < 1e-12);

    // Excite the marginal mode and the solve must refuse.
    E(0, 0) = 1.0;
    CHECK_THROWS_AS(detail::solve_lyapunov_semistable(A, E), SolverError);
}
