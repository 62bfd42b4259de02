#pragma once

#include <optional>

#include <Eigen/Dense>

#include "lqgalloc/errors.hpp"

namespace lqgalloc {

struct SolverConfig {
    double tol_residual = 1e-12; // relative Riccati residual
    int max_iter = 200;
    // Numerical cushion reported alongside the strict radius < 1 check.
    double stability_margin = 1e-9;
};

struct DareSolution {
    Eigen::MatrixXd P; // symmetric Riccati solution
    Eigen::MatrixXd K; // gain, q = K x
    double residual = 0.0;
    double closed_loop_radius = 0.0; // rho(A + BK)
    int iterations = 0;
};

// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Eigen::MatrixXd& M);

// PBH test: (A, B) is stabilizable iff [A - lambda*I | B] has full row rank
// for every eigenvalue with |lambda| >= 1 - 1e-9. Marginal eigenvalues count
// as unstable; rank via complex SVD with threshold 1e-10 * sigma_max.
bool is_stabilizable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Stabilizability check plus a stabilizing gain from an auxiliary DARE with
// Q = I, R = I, N = 0. Gain is absent when the pair is not stabilizable.
struct StabilizabilityWitness {
    bool stabilizable = false;
    std::optional<Eigen::MatrixXd> K;
};
StabilizabilityWitness stabilizing_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// (C, A) detectable iff (A^T, C^T) stabilizable.
bool is_detectable(const Eigen::MatrixXd& C, const Eigen::MatrixXd& A);

// Stabilizing solution of the discrete algebraic Riccati equation with cross
// term,
//
//   P = Q + A'PA - (A'PB + N)(R + B'PB)^{-1}(B'PA + N'),
//   K = -(R + B'PB)^{-1}(B'PA + N'),
//
// by structure-preserving doubling after eliminating N through
// A_hat = A - B R^{-1} N', Q_hat = Q - N R^{-1} N' (R must be invertible).
// The returned solution always satisfies rho(A + BK) < 1; a converged P that
// fails to stabilize is reported as SolverError(NoStabilizingSolution), which
// is the numerical signature of a profitable round trip in the portfolio
// problem.
DareSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& N,
                        const Eigen::MatrixXd& R, const SolverConfig& cfg = {});

// X = A X A' + E for rho(A) < 1 and E symmetric PSD, by Smith squaring:
// X_{k+1} = X_k + A_k X_k A_k', A_{k+1} = A_k^2.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& E);

namespace detail {

// Lyapunov fixed point for a semistable A: eigenvalues strictly inside the
// unit circle, except marginal ones (|lambda| within 1e-9 of 1) that must be
// provably unexcited by E (left eigenvector w with ||w^H E|| ~ 0). Those modes
// are deflated exactly -- w^H E = 0 implies A^k E = A_defl^k E -- and the
// natural solution sum_k A^k E A'^k is computed on the deflated matrix.
// Returns the solution and the effective radius over the non-marginal modes.
struct SemistableLyapunov {
    Eigen::MatrixXd X;
    double rho_full = 0.0;
    double rho_effective = 0.0;
    int n_deflated = 0;
};
SemistableLyapunov solve_lyapunov_semistable(const Eigen::MatrixXd& A,
                                             const Eigen::MatrixXd& E,
                                             double marginal_tol = 1e-9);

} // namespace detail

} // namespace lqgalloc
