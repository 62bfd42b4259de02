#include "lqgalloc/lqg.hpp"

#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lqgalloc/portfolio.hpp"

namespace lqgalloc {

namespace {

constexpr double kMarginalBand = 1e-9;
constexpr double kPinvThreshold = 1e-12; // relative singular-value cutoff

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

Eigen::MatrixXd pinv(const Eigen::MatrixXd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double cutoff = s.size() ? kPinvThreshold * s(0) : 0.0;
    Eigen::VectorXd inv = s;
    for (Eigen::Index i = 0; i < s.size(); ++i) inv[i] = s[i] > cutoff ? 1.0 / s[i] : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Every unit-circle mode of A must be either reachable from the state noise or
// visible through C; otherwise no filter can keep its error bounded.
bool kalman_feasible(const Eigen::MatrixXd& A, const Eigen::MatrixXd& noise_factor,
                     const Eigen::MatrixXd& C) {
    const Eigen::Index n = A.rows();
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    if (es.info() != Eigen::Success)
        throw SolverError(SolverError::Code::ConvergenceFailure, "eigenvalue iteration failed");
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::complex<double> lam = es.eigenvalues()(i);
        if (std::abs(lam) < 1.0 - kMarginalBand) continue;
        Eigen::MatrixXcd reach(n, n + noise_factor.cols());
        reach.leftCols(n) =
            A.cast<std::complex<double>>() - lam * Eigen::MatrixXcd::Identity(n, n);
        reach.rightCols(noise_factor.cols()) = noise_factor.cast<std::complex<double>>();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd_r(reach);
        const auto& sr = svd_r.singularValues();
        if (sr(sr.size() - 1) > 1e-10 * sr(0)) continue; // noise-reachable

        Eigen::MatrixXcd obs(n + C.rows(), n);
        obs.topRows(n) = A.cast<std::complex<double>>() - lam * Eigen::MatrixXcd::Identity(n, n);
        obs.bottomRows(C.rows()) = C.cast<std::complex<double>>();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd_o(obs);
        const auto& so = svd_o.singularValues();
        if (so(so.size() - 1) > 1e-10 * so(0)) continue; // observable

        return false;
    }
    return true;
}

// When the innovation covariance is singular the gain L is only determined up
// to null(S) rows. Prefer the representative that copies every directly,
// noiselessly observed state whose innovation actually carries information,
// if that candidate solves L S = omega_tilde C' exactly.
std::optional<Eigen::MatrixXd> structural_gain(const LinearStateSpace& ss,
                                               const Eigen::MatrixXd& S,
                                               const Eigen::MatrixXd& omega_tilde) {
    const Eigen::Index n = ss.n_states();
    const Eigen::Index d = ss.n_outputs();
    const double s_scale = std::max(S.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, d);
    bool any = false;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (ss.sigma_y.row(i).cwiseAbs().maxCoeff() != 0.0) return std::nullopt;
        Eigen::Index state = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (ss.C(i, j) != 0.0) {
                if (state >= 0 || ss.C(i, j) != 1.0) return std::nullopt;
                state = j;
            }
        }
        if (state < 0) continue;
        if (S(i, i) <= kPinvThreshold * s_scale) continue; // exactly predicted channel
        L(state, i) = 1.0;
        any = true;
    }
    if (!any) return std::nullopt;
    const double resid = (L * S - omega_tilde * ss.C.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max({s_scale, omega_tilde.cwiseAbs().maxCoeff(), 1.0});
    if (resid > 1e-12 * scale) return std::nullopt;
    return L;
}

} // namespace

KalmanSolution solve_kalman(const LinearStateSpace& ss, const SolverConfig& cfg) {
    const Eigen::Index n = ss.n_states();
    const Eigen::MatrixXd& A = ss.A;
    const Eigen::MatrixXd& C = ss.C;
    const Eigen::MatrixXd& Sx = ss.sigma_x;
    const Eigen::MatrixXd& Sy = ss.sigma_y;

    if (!is_detectable(C, A))
        throw SolverError(SolverError::Code::NotDetectable, "(C, A) is not detectable");
    const Eigen::MatrixXd noise_factor = covariance_sqrt(Sx);
    if (!kalman_feasible(A, noise_factor, C))
        throw SolverError(SolverError::Code::NotStabilizable,
                          "a unit-circle mode of A is neither noise-reachable nor observable");

    // Fixed-point iteration of the filter Riccati equation with pseudo-inverse
    // innovation covariance. Linear convergence at the squared filter radius;
    // the loop bound is correspondingly larger than the doubling bound.
    const int max_iter = std::max(cfg.max_iter, 20000);
    Eigen::MatrixXd omt = symmetrize(Sx);
    KalmanSolution sol;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd S = symmetrize(Sy + C * omt * C.transpose());
        const Eigen::MatrixXd L = omt * C.transpose() * pinv(S);
        const Eigen::MatrixXd om = symmetrize(omt - L * C * omt);
        const Eigen::MatrixXd next = symmetrize(Sx + A * om * A.transpose());
        const double delta = (next - omt).cwiseAbs().maxCoeff();
        omt = next;
        sol.iterations = it + 1;
        if (delta < 1e-15 * std::max(1.0, omt.cwiseAbs().maxCoeff())) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolverError(SolverError::Code::ConvergenceFailure,
                          "filter Riccati iteration did not converge");

    const Eigen::MatrixXd S = symmetrize(Sy + C * omt * C.transpose());
    Eigen::MatrixXd L = omt * C.transpose() * pinv(S);
    if (const auto Ls = structural_gain(ss, S, omt)) L = *Ls;

    sol.omega_tilde = omt;
    sol.L = L;
    sol.omega = symmetrize(omt - L * C * omt);
    const Eigen::MatrixXd resid =
        omt - Sx - A * (omt - omt * C.transpose() * pinv(S) * C * omt) * A.transpose();
    sol.residual = resid.norm() / std::max(1.0, omt.norm());
    sol.filter_radius =
        spectral_radius(A * (Eigen::MatrixXd::Identity(n, n) - L * C));
    if (sol.residual >= 1e-10)
        throw SolverError(SolverError::Code::ConvergenceFailure,
                          "filter Riccati residual above tolerance");
    return sol;
}

KalmanFilterState kalman_step(const KalmanSolution& sol, const LinearStateSpace& ss,
                              const KalmanFilterState& state, const Eigen::VectorXd& y_t,
                              const Eigen::VectorXd& q_t) {
    const Eigen::Index n = ss.n_states();
    const Eigen::MatrixXd ILC = Eigen::MatrixXd::Identity(n, n) - sol.L * ss.C;
    KalmanFilterState next;
    next.x_hat = ILC * state.x_tilde + sol.L * y_t;
    next.x_tilde = ss.A * next.x_hat + ss.B * q_t;
    return next;
}

DareSolution solve_lqr(const LinearStateSpace& ss, const CostMatrices& cost,
                       const SolverConfig& cfg) {
    return solve_dare(ss.A, ss.B, cost.Q, cost.N, cost.R, cfg);
}

ClosedLoopSystem build_closed_loop(const LinearStateSpace& ss, const KalmanSolution& kal,
                                   const DareSolution& lqr) {
    const Eigen::Index n = ss.n_states();
    const Eigen::Index d = ss.n_outputs();
    if (kal.L.rows() != n || lqr.K.cols() != n)
        throw std::invalid_argument("build_closed_loop: dimension mismatch");

    const Eigen::MatrixXd BK = ss.B * lqr.K;
    const Eigen::MatrixXd LCA = kal.L * ss.C * ss.A;

    ClosedLoopSystem cl;
    cl.A_aug.setZero(2 * n, 2 * n);
    cl.A_aug.topLeftCorner(n, n) = ss.A;
    cl.A_aug.topRightCorner(n, n) = BK;
    cl.A_aug.bottomLeftCorner(n, n) = LCA;
    cl.A_aug.bottomRightCorner(n, n) = ss.A + BK - LCA;

    cl.B_aug.setZero(2 * n, n + d);
    cl.B_aug.topLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    cl.B_aug.bottomLeftCorner(n, n) = kal.L * ss.C;
    cl.B_aug.bottomRightCorner(n, d) = kal.L;

    cl.C_aug.setZero(d, 2 * n);
    cl.C_aug.leftCols(n) = ss.C;

    cl.noise_cov.setZero(n + d, n + d);
    cl.noise_cov.topLeftCorner(n, n) = ss.sigma_x;
    cl.noise_cov.bottomRightCorner(d, d) = ss.sigma_y;

    const Eigen::MatrixXd E = cl.B_aug * cl.noise_cov * cl.B_aug.transpose();
    const auto lyap = detail::solve_lyapunov_semistable(cl.A_aug, E);
    cl.V_aug = lyap.X;
    cl.V = lyap.X.topLeftCorner(n, n);
    cl.V_hat = lyap.X.bottomRightCorner(n, n);
    cl.rho_full = lyap.rho_full;
    cl.rho_effective = lyap.rho_effective;
    cl.lyapunov_residual = (cl.V_aug - cl.A_aug * cl.V_aug * cl.A_aug.transpose() - E).norm() /
                           std::max(1.0, cl.V_aug.norm());
    if (cl.lyapunov_residual >= 1e-10)
        throw SolverError(SolverError::Code::UnstableClosedLoop,
                          "closed-loop Lyapunov residual above tolerance");
    return cl;
}

} // namespace lqgalloc
