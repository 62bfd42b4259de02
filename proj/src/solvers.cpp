#include "lqgalloc/solvers.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace lqgalloc {

namespace {

constexpr double kMarginalBand = 1e-9;  // |lambda| within this of 1 counts as unstable
constexpr double kRankThreshold = 1e-10;

bool pbh_full_rank(const Eigen::MatrixXcd& M) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return false;
    return s(s.size() - 1) > kRankThreshold * s(0);
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

double relative_dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const Eigen::MatrixXd& Q, const Eigen::MatrixXd& N,
                              const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
    const Eigen::MatrixXd G = R + B.transpose() * P * B;
    const Eigen::MatrixXd M = A.transpose() * P * B + N;
    const Eigen::MatrixXd res =
        P - Q - A.transpose() * P * A + M * G.ldlt().solve(M.transpose());
    return res.norm() / std::max(1.0, P.norm());
}

} // namespace

double spectral_radius(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
    if (M.rows() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw SolverError(SolverError::Code::ConvergenceFailure,
                          "eigenvalue iteration failed in spectral_radius");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_stabilizable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != A.cols() || B.rows() != A.rows())
        throw std::invalid_argument("is_stabilizable: dimension mismatch");
    const Eigen::Index n = A.rows();
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    if (es.info() != Eigen::Success)
        throw SolverError(SolverError::Code::ConvergenceFailure, "eigenvalue iteration failed");
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::complex<double> lam = es.eigenvalues()(i);
        if (std::abs(lam) < 1.0 - kMarginalBand) continue;
        Eigen::MatrixXcd M(n, n + B.cols());
        M.leftCols(n) = A.cast<std::complex<double>>() -
                        lam * Eigen::MatrixXcd::Identity(n, n);
        M.rightCols(B.cols()) = B.cast<std::complex<double>>();
        if (!pbh_full_rank(M)) return false;
    }
    return true;
}

StabilizabilityWitness stabilizing_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    StabilizabilityWitness w;
    w.stabilizable = is_stabilizable(A, B);
    if (!w.stabilizable) return w;
    const Eigen::Index n = A.rows();
    const Eigen::Index p = B.cols();
    const DareSolution aux =
        solve_dare(A, B, Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Zero(n, p),
                   Eigen::MatrixXd::Identity(p, p));
    w.K = aux.K;
    return w;
}

bool is_detectable(const Eigen::MatrixXd& C, const Eigen::MatrixXd& A) {
    return is_stabilizable(A.transpose(), C.transpose());
}

DareSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& N,
                        const Eigen::MatrixXd& R, const SolverConfig& cfg) {
    const Eigen::Index n = A.rows();
    const Eigen::Index p = B.cols();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || N.rows() != n ||
        N.cols() != p || R.rows() != p || R.cols() != p)
        throw std::invalid_argument("solve_dare: dimension mismatch");

    if (!is_stabilizable(A, B))
        throw SolverError(SolverError::Code::NotStabilizable, "(A, B) is not stabilizable");

    // Cross-term elimination needs an invertible R.
    Eigen::JacobiSVD<Eigen::MatrixXd> rsvd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = rsvd.singularValues().size() ? rsvd.singularValues()(0) : 0.0;
    const double smin = rsvd.singularValues().size() ? rsvd.singularValues()(p - 1) : 0.0;
    if (smax <= 0.0 || smin <= 1e-14 * smax)
        throw SolverError(SolverError::Code::RNotInvertible,
                          "R is singular; cross-term elimination impossible");
    const Eigen::MatrixXd Rinv = rsvd.solve(Eigen::MatrixXd::Identity(p, p));

    const Eigen::MatrixXd A_hat = A - B * Rinv * N.transpose();
    const Eigen::MatrixXd Q_hat = symmetrize(Q - N * Rinv * N.transpose());

    // Structure-preserving doubling on the reduced equation.
    Eigen::MatrixXd Ak = A_hat;
    Eigen::MatrixXd Gk = symmetrize(B * Rinv * B.transpose());
    Eigen::MatrixXd Hk = Q_hat;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

    DareSolution sol;
    bool converged = false;
    for (int it = 0; it < cfg.max_iter; ++it) {
        const Eigen::MatrixXd W = I + Gk * Hk;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(W);
        if (!lu.isInvertible())
            throw SolverError(SolverError::Code::NoStabilizingSolution,
                              "doubling iteration breakdown (I + GH singular)");
        const Eigen::MatrixXd Winv = lu.inverse();
        const Eigen::MatrixXd A_next = Ak * Winv * Ak;
        const Eigen::MatrixXd G_next = symmetrize(Gk + Ak * Winv * Gk * Ak.transpose());
        const Eigen::MatrixXd H_next =
            symmetrize(Hk + Ak.transpose() * Hk * Winv * Ak);
        const double dh =
            (H_next - Hk).cwiseAbs().maxCoeff() / std::max(1.0, H_next.cwiseAbs().maxCoeff());
        Ak = A_next;
        Gk = G_next;
        Hk = H_next;
        sol.iterations = it + 1;
        if (!Hk.allFinite() || !Ak.allFinite())
            throw SolverError(SolverError::Code::NoStabilizingSolution,
                              "doubling iteration diverged");
        if (dh < 1e-14) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolverError(SolverError::Code::MaxIterExceeded,
                          "doubling iteration did not converge within max_iter");

    sol.P = symmetrize(Hk);
    const Eigen::MatrixXd G = R + B.transpose() * sol.P * B;
    sol.K = -G.ldlt().solve(B.transpose() * sol.P * A + N.transpose());
    sol.residual = relative_dare_residual(A, B, Q, N, R, sol.P);
    sol.closed_loop_radius = spectral_radius(A + B * sol.K);

    if (sol.residual >= cfg.tol_residual) {
        std::ostringstream os;
        os << "Riccati residual " << sol.residual << " above tolerance " << cfg.tol_residual;
        throw SolverError(SolverError::Code::NoStabilizingSolution, os.str());
    }
    if (!(sol.closed_loop_radius < 1.0)) {
        std::ostringstream os;
        os << "converged solution is not stabilizing: rho(A+BK) = " << sol.closed_loop_radius;
        throw SolverError(SolverError::Code::NoStabilizingSolution, os.str());
    }
    return sol;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& E) {
    if (A.rows() != A.cols() || E.rows() != E.cols() || A.rows() != E.rows())
        throw std::invalid_argument("solve_lyapunov: dimension mismatch");
    const double rho = spectral_radius(A);
    if (!(rho < 1.0)) {
        std::ostringstream os;
        os << "solve_lyapunov requires rho(A) < 1, got " << rho;
        throw SolverError(SolverError::Code::UnstableA, os.str());
    }

    Eigen::MatrixXd X = symmetrize(E);
    Eigen::MatrixXd Ak = A;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        const Eigen::MatrixXd upd = Ak * X * Ak.transpose();
        X = symmetrize(X + upd);
        Ak = Ak * Ak;
        if (upd.cwiseAbs().maxCoeff() < 1e-14 * std::max(1.0, X.cwiseAbs().maxCoeff())) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolverError(SolverError::Code::ConvergenceFailure,
                          "Smith iteration did not converge");
    const double resid =
        (X - A * X * A.transpose() - E).norm() / std::max(1.0, X.norm());
    if (resid >= 1e-12) {
        std::ostringstream os;
        os << "Lyapunov residual " << resid << " above tolerance";
        throw SolverError(SolverError::Code::ConvergenceFailure, os.str());
    }
    return X;
}

namespace detail {

SemistableLyapunov solve_lyapunov_semistable(const Eigen::MatrixXd& A, const Eigen::MatrixXd& E,
                                             double marginal_tol) {
    const Eigen::Index n = A.rows();
    SemistableLyapunov out;

    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    Eigen::EigenSolver<Eigen::MatrixXd> esT(A.transpose());
    if (es.info() != Eigen::Success || esT.info() != Eigen::Success)
        throw SolverError(SolverError::Code::ConvergenceFailure,
                          "eigen decomposition failed for closed-loop matrix");

    out.rho_full = es.eigenvalues().cwiseAbs().maxCoeff();

    const double e_scale = std::max(E.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::MatrixXcd A_defl = A.cast<std::complex<double>>();
    std::vector<bool> used(n, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::complex<double> lam = es.eigenvalues()(i);
        const double mag = std::abs(lam);
        if (mag > 1.0 + marginal_tol)
            throw SolverError(SolverError::Code::UnstableClosedLoop,
                              "closed-loop matrix has an eigenvalue outside the unit disc");
        if (mag < 1.0 - marginal_tol) {
            out.rho_effective = std::max(out.rho_effective, mag);
            continue;
        }
        // Marginal mode: admissible only if the noise cannot excite it.
        Eigen::Index j = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < n; ++k) {
            if (used[k]) continue;
            const double d = std::abs(esT.eigenvalues()(k) - lam);
            if (d < best) {
                best = d;
                j = k;
            }
        }
        if (j < 0 || best > 1e-6)
            throw SolverError(SolverError::Code::UnstableClosedLoop,
                              "could not pair a marginal eigenvalue with its left eigenvector");
        used[static_cast<std::size_t>(j)] = true;
        const Eigen::VectorXcd w = esT.eigenvectors().col(j);
        const Eigen::VectorXcd v = es.eigenvectors().col(i);
        const double excitation = (w.adjoint() * E.cast<std::complex<double>>()).norm() /
                                  (e_scale * w.norm());
        if (excitation > 1e-8)
            throw SolverError(SolverError::Code::UnstableClosedLoop,
                              "marginal closed-loop mode is excited by the noise");
        const std::complex<double> wv = (w.adjoint() * v)(0, 0);
        if (std::abs(wv) < 1e-12)
            throw SolverError(SolverError::Code::UnstableClosedLoop,
                              "defective marginal mode in closed-loop matrix");
        // w^H E = 0 makes A^k E = A_defl^k E exactly, so the deflated solve
        // yields the natural covariance sum_k A^k E A'^k.
        A_defl -= (lam / wv) * (v * w.adjoint());
        out.n_deflated += 1;
    }

    if (out.n_deflated == 0) {
        out.X = solve_lyapunov(A, E);
        out.rho_effective = out.rho_full;
        return out;
    }

    const Eigen::MatrixXd Ad = A_defl.real();
    if (A_defl.imag().cwiseAbs().maxCoeff() > 1e-10)
        throw SolverError(SolverError::Code::UnstableClosedLoop,
                          "complex marginal pair deflation left a non-real matrix");
    Eigen::MatrixXd X = symmetrize(E);
    Eigen::MatrixXd Ak = Ad;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
        const Eigen::MatrixXd upd = Ak * X * Ak.transpose();
        X = symmetrize(X + upd);
        Ak = Ak * Ak;
        if (upd.cwiseAbs().maxCoeff() < 1e-14 * std::max(1.0, X.cwiseAbs().maxCoeff())) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolverError(SolverError::Code::ConvergenceFailure,
                          "Smith iteration did not converge on deflated system");
    out.X = X;
    return out;
}

} // namespace detail

} // namespace lqgalloc
