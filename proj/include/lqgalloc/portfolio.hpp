#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "lqgalloc/lqg.hpp"
#include "lqgalloc/state_space.hpp"

namespace lqgalloc {

// Row selectors extracting positions and returns from the observation vector:
// Q_t = pi_q y_t, r_t^dec = pi_dec y_t, r_t^exe = pi_exe y_t.
struct OutputSelectors {
    Eigen::MatrixXd pi_q;   // N_assets x d
    Eigen::MatrixXd pi_dec; // N_assets x d
    Eigen::MatrixXd pi_exe; // N_assets x d

    Eigen::Index n_assets() const { return pi_q.rows(); }
};

// Quadratic cost lambda*V(PnL|F_t) - E(PnL|F_t) written as
// [x' q'] [[Q, N], [N', R]] [x; q].
struct CostMatrices {
    Eigen::MatrixXd Q; // n x n
    Eigen::MatrixXd N; // n x p
    Eigen::MatrixXd R; // p x p
    double lambda = 1.0;
    Eigen::MatrixXd sigma_cond; // conditional observation covariance Sigma
};

struct PerformanceMetrics {
    double avg_pnl = 0.0;       // E(PnL) per step
    double avg_risk = 0.0;      // sqrt(E V(PnL|F_t)) per step
    double sharpe_yearly = 0.0; // sqrt(250) * avg_pnl / avg_risk
    bool zero_risk = false;     // Sharpe undefined when avg_risk == 0
    double lambda = 0.0;
};

enum class ArbitrageVerdict { NoArbitrage, ArbitrageDetected, Boundary };

const char* to_string(ArbitrageVerdict v);

struct ArbitrageReport {
    bool stabilizable = false;               // (A, B)
    bool stabilizing_solution_exists = false;
    double popov_min_eig = 0.0; // min over the unit-circle grid of the
                                // smallest eigenvalue of herm(Phi_K(z))
    long grid_size = 0;
    ArbitrageVerdict verdict = ArbitrageVerdict::Boundary;
    std::string solver_status; // diagnostic from the Riccati attempt
};

// Single-period accounting PnL: Q_t' r_dec + q_t' r_exe.
double pnl_step(const Eigen::VectorXd& Q_t, const Eigen::VectorXd& q_t,
                const Eigen::VectorXd& r_dec, const Eigen::VectorXd& r_exe);

// Cumulative PnL of a round trip computed two ways: telescoped step PnL (lhs)
// and execution-price-only form -sum_t q_t' pbar_{t+1} (rhs). trades is T x N,
// prices_dec is (T+1) x N decision prices p_0..p_T, prices_exe is T x N
// average execution prices pbar_1..pbar_T.
std::pair<double, double> round_trip_identity_check(const Eigen::MatrixXd& trades,
                                                    const Eigen::MatrixXd& prices_dec,
                                                    const Eigen::MatrixXd& prices_exe);

// Builds (Q, N, R) by expanding the conditional moments of the one-step PnL:
//
//   E(PnL|F_t) = [Q_t' q_t'] W C (A x_t + B q_t),   W = [pi_dec; pi_exe]
//   V(PnL|F_t) = [Q_t' q_t'] W Sigma W' [Q_t; q_t]
//   Sigma      = sigma_y + C (sigma_x + A omega_x A') C'
//
// with Q_t = pi_q C x_t, then symmetrizing lambda*V - E term by term.
// omega_x is the filtered covariance from solve_kalman (zero for fully
// observed models).
CostMatrices build_cost_matrices(const LinearStateSpace& ss, const OutputSelectors& sel,
                                 double lambda, const Eigen::MatrixXd& omega_x);

// Existence of the stabilizing Riccati solution, cross-checked against the
// Popov frequency criterion: Phi_K(z) > 0 on |z| = 1 for a stabilizing K.
// Phi_K is evaluated in closed-loop form T(z)^H M T(z) with
// T(z) = [(zI - A - BK)^{-1} B; I + K (zI - A - BK)^{-1} B] and
// M = [[Q, N], [N', R]], which is finite on the whole circle even when A has
// unit-circle poles (the open-loop form of the same function is not).
ArbitrageReport check_no_arbitrage(const LinearStateSpace& ss, const OutputSelectors& sel,
                                   double lambda, const SolverConfig& cfg = {},
                                   long grid_size = 1024);

// Steady-state performance of the closed loop from the Lyapunov covariances:
//
//   E(PnL)        = tr(M1 V_hat) + tr(pi_q' pi_dec C (A+BK) L sigma_y)
//   E(V(PnL|F_t)) = tr(M2' M3 M2 [[C V C' + sigma_y, C V_hat + sigma_y L'],
//                                  [V_hat C' + L sigma_y, V_hat]])
//
// with M1 = [C' pi_q' pi_dec + K' pi_exe] C (A+BK), M2 = blockdiag(pi_q, K),
// M3 = [pi_dec; pi_exe] Sigma [pi_dec' pi_exe']. The sigma_y terms vanish for
// the in-scope models; both variants are validated against the Monte Carlo
// estimator in the test suite.
PerformanceMetrics analytic_performance(const ClosedLoopSystem& cl, const LinearStateSpace& ss,
                                        const OutputSelectors& sel, const KalmanSolution& kal,
                                        const DareSolution& lqr, double lambda);

} // namespace lqgalloc
