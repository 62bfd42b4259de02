#pragma once

#include <Eigen/Dense>

#include "lqgalloc/solvers.hpp"
#include "lqgalloc/state_space.hpp"

namespace lqgalloc {

struct CostMatrices; // portfolio.hpp

// Steady-state Kalman filter
//
//   x~_{t+1} = A (I - LC) x~_t + B q_t + A L y_t
//   x^_t     = (I - LC) x~_t + L y_t
//
// omega_tilde = V(x_t | F_{t-1}) solves the filter Riccati equation,
// L = omega_tilde C' (sigma_y + C omega_tilde C')^+, and
// omega = V(x_t | F_t) = omega_tilde - L C omega_tilde.
struct KalmanSolution {
    Eigen::MatrixXd L;           // n x d gain
    Eigen::MatrixXd omega_tilde; // predicted-state covariance
    Eigen::MatrixXd omega;       // filtered covariance
    double residual = 0.0;       // filter Riccati residual (relative)
    double filter_radius = 0.0;  // rho(A (I - LC)); may equal 1 for exactly
                                 // reconstructed noise-free states
    int iterations = 0;
};

struct KalmanFilterState {
    Eigen::VectorXd x_tilde; // predicted state x~_t
    Eigen::VectorXd x_hat;   // filtered state x^_t
};

// Solves the filter Riccati equation by fixed-point iteration with a
// pseudo-inverse innovation covariance (threshold 1e-12 * sigma_max; the
// flagship models have sigma_y = 0 and a singular C omega_tilde C').
//
// When the innovation covariance is singular the optimal gain is not unique;
// all members of the family agree almost surely on observed data. The solver
// then prefers the structured representative that copies every directly and
// noiselessly observed state with positive innovation variance, when that
// candidate solves the gain equation exactly. This is the form in which such
// filters are usually written down, and it keeps LC a 0/1 projector.
//
// Feasibility check, per unit-circle eigenvalue of A: the mode must be either
// reachable from the state noise or observable through C. (The strict PBH
// stabilizability of (A, sigma_x) fails on inventory-style integrators that
// carry no noise yet are perfectly measured; those are fine for filtering.)
KalmanSolution solve_kalman(const LinearStateSpace& ss, const SolverConfig& cfg = {});

// One filter step: consumes (y_t, q_t), returns x^_t computed from the
// incoming x~_t and the new prediction x~_{t+1}.
KalmanFilterState kalman_step(const KalmanSolution& sol, const LinearStateSpace& ss,
                              const KalmanFilterState& state, const Eigen::VectorXd& y_t,
                              const Eigen::VectorXd& q_t);

// LQR gain for the quadratic cost; q_t = K x^_t by the separation principle.
DareSolution solve_lqr(const LinearStateSpace& ss, const CostMatrices& cost,
                       const SolverConfig& cfg = {});

// Augmented closed loop over X_t = (x_t, x^_t):
//
//   X_{t+1} = Acl X_t + Bcl E_{t+1},  E = (eps_x, eps_y)
//   Acl = [[A, BK], [LCA, A + BK - LCA]],  Bcl = [[I, 0], [LC, L]]
//
// V_aug is the steady-state covariance of X_t; V and V_hat are its diagonal
// blocks. rho_full is the exact spectral radius of Acl; rho_effective excludes
// marginal modes that the noise provably cannot excite (see
// solve_lyapunov_semistable). A reachable or genuinely unstable mode raises
// SolverError(UnstableClosedLoop).
struct ClosedLoopSystem {
    Eigen::MatrixXd A_aug;     // 2n x 2n
    Eigen::MatrixXd B_aug;     // 2n x (n+d)
    Eigen::MatrixXd C_aug;     // d x 2n, [C 0]
    Eigen::MatrixXd noise_cov; // (n+d) x (n+d), blockdiag(sigma_x, sigma_y)
    Eigen::MatrixXd V_aug;     // 2n x 2n
    Eigen::MatrixXd V;         // V(x_t)
    Eigen::MatrixXd V_hat;     // V(x^_t)
    double rho_full = 0.0;
    double rho_effective = 0.0;
    double lyapunov_residual = 0.0;

    Eigen::Index n_states() const { return V.rows(); }
};

ClosedLoopSystem build_closed_loop(const LinearStateSpace& ss, const KalmanSolution& kal,
                                   const DareSolution& lqr);

} // namespace lqgalloc
