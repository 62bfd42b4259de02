#include "lqgalloc/portfolio.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace lqgalloc {

namespace {

constexpr double kAnnualization = 250.0;
constexpr double kPopovTol = 1e-10;

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

} // namespace

const char* to_string(ArbitrageVerdict v) {
    switch (v) {
        case ArbitrageVerdict::NoArbitrage: return "NoArbitrage";
        case ArbitrageVerdict::ArbitrageDetected: return "ArbitrageDetected";
        case ArbitrageVerdict::Boundary: return "Boundary";
    }
    return "Unknown";
}

double pnl_step(const Eigen::VectorXd& Q_t, const Eigen::VectorXd& q_t,
                const Eigen::VectorXd& r_dec, const Eigen::VectorXd& r_exe) {
    if (Q_t.size() != r_dec.size() || q_t.size() != r_exe.size() || Q_t.size() != q_t.size())
        throw std::invalid_argument("pnl_step: length mismatch");
    return Q_t.dot(r_dec) + q_t.dot(r_exe);
}

std::pair<double, double> round_trip_identity_check(const Eigen::MatrixXd& trades,
                                                    const Eigen::MatrixXd& prices_dec,
                                                    const Eigen::MatrixXd& prices_exe) {
    const Eigen::Index T = trades.rows();
    const Eigen::Index N = trades.cols();
    if (prices_dec.rows() != T + 1 || prices_dec.cols() != N || prices_exe.rows() != T ||
        prices_exe.cols() != N)
        throw std::invalid_argument("round_trip_identity_check: dimension mismatch");

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(T + 1, N);
    for (Eigen::Index t = 0; t < T; ++t) Q.row(t + 1) = Q.row(t) + trades.row(t);
    if (Q.row(T).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("not a round trip: final position is nonzero");

    double lhs = 0.0;
    double rhs = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::VectorXd r_dec = (prices_dec.row(t + 1) - prices_dec.row(t)).transpose();
        const Eigen::VectorXd r_exe = (prices_dec.row(t + 1) - prices_exe.row(t)).transpose();
        lhs += pnl_step(Q.row(t).transpose(), trades.row(t).transpose(), r_dec, r_exe);
        rhs -= trades.row(t).dot(prices_exe.row(t));
    }
    return {lhs, rhs};
}

CostMatrices build_cost_matrices(const LinearStateSpace& ss, const OutputSelectors& sel,
                                 double lambda, const Eigen::MatrixXd& omega_x) {
    if (lambda <= 0.0) throw std::invalid_argument("lambda must be positive");
    const Eigen::Index n = ss.n_states();
    const Eigen::Index p = ss.n_inputs();
    const Eigen::Index d = ss.n_outputs();
    if (sel.pi_q.cols() != d || sel.pi_dec.cols() != d || sel.pi_exe.cols() != d)
        throw std::invalid_argument("selectors must have d columns");
    if (sel.n_assets() != p)
        throw std::invalid_argument("selector rows must match the trade dimension");
    Eigen::MatrixXd om = omega_x;
    if (om.size() == 0) om = Eigen::MatrixXd::Zero(n, n);
    if (om.rows() != n || om.cols() != n)
        throw std::invalid_argument("omega_x must be n x n (or empty for zero)");

    // Conditional one-step observation covariance.
    const Eigen::MatrixXd Sigma = symmetrize(
        ss.sigma_y + ss.C * (ss.sigma_x + ss.A * om * ss.A.transpose()) * ss.C.transpose());

    // PnL = [Q_t' q_t'] [pi_dec; pi_exe] y_{t+1} with Q_t = pi_q C x_t. The
    // quadratic form below is lambda*V(PnL|F_t) - E(PnL|F_t), expanded and
    // symmetrized term by term.
    const Eigen::MatrixXd X = sel.pi_q * ss.C;    // p x n
    const Eigen::MatrixXd Dd = sel.pi_dec * ss.C; // p x n
    const Eigen::MatrixXd De = sel.pi_exe * ss.C; // p x n

    const Eigen::MatrixXd v_dd = sel.pi_dec * Sigma * sel.pi_dec.transpose();
    const Eigen::MatrixXd v_de = sel.pi_dec * Sigma * sel.pi_exe.transpose();
    const Eigen::MatrixXd v_ee = sel.pi_exe * Sigma * sel.pi_exe.transpose();

    CostMatrices cost;
    cost.lambda = lambda;
    cost.sigma_cond = Sigma;
    const Eigen::MatrixXd e_xx = X.transpose() * Dd * ss.A; // x'X' pi_dec C A x
    cost.Q = lambda * X.transpose() * v_dd * X - 0.5 * (e_xx + e_xx.transpose());
    cost.N = lambda * X.transpose() * v_de -
             0.5 * (X.transpose() * Dd * ss.B + (De * ss.A).transpose());
    const Eigen::MatrixXd e_qq = De * ss.B;
    cost.R = lambda * v_ee - 0.5 * (e_qq + e_qq.transpose());
    return cost;
}

ArbitrageReport check_no_arbitrage(const LinearStateSpace& ss, const OutputSelectors& sel,
                                   double lambda, const SolverConfig& cfg, long grid_size) {
    if (grid_size < 64) throw std::invalid_argument("popov grid_size must be >= 64");
    const Eigen::Index n = ss.n_states();
    const Eigen::Index p = ss.n_inputs();

    ArbitrageReport rep;
    rep.grid_size = grid_size;
    rep.stabilizable = is_stabilizable(ss.A, ss.B);
    if (!rep.stabilizable)
        throw SolverError(SolverError::Code::NotStabilizable,
                          "(A, B) not stabilizable; no stabilizing policy exists");

    // The Kalman filtered covariance feeds the cost build; for the noiseless
    // observation models in scope it is exactly zero.
    Eigen::MatrixXd omega_x = Eigen::MatrixXd::Zero(n, n);
    try {
        omega_x = solve_kalman(ss, cfg).omega;
    } catch (const SolverError&) {
        // Cost build falls back to the fully-observed covariance.
    }
    const CostMatrices cost = build_cost_matrices(ss, sel, lambda, omega_x);

    Eigen::MatrixXd K;
    try {
        const DareSolution dare = solve_dare(ss.A, ss.B, cost.Q, cost.N, cost.R, cfg);
        rep.stabilizing_solution_exists = true;
        rep.solver_status = "ok";
        K = dare.K;
    } catch (const SolverError& e) {
        rep.stabilizing_solution_exists = false;
        rep.solver_status = SolverError::code_name(e.code());
        const auto witness = stabilizing_gain(ss.A, ss.B);
        K = *witness.K;
    }

    // Popov sweep of Phi_K over the unit circle, in the closed-loop form
    // T(z)^H M T(z); finite everywhere on |z| = 1 because A + BK is stable.
    Eigen::MatrixXd M(n + p, n + p);
    M.topLeftCorner(n, n) = cost.Q;
    M.topRightCorner(n, p) = cost.N;
    M.bottomLeftCorner(p, n) = cost.N.transpose();
    M.bottomRightCorner(p, p) = cost.R;

    const Eigen::MatrixXcd AK = (ss.A + ss.B * K).cast<std::complex<double>>();
    const Eigen::MatrixXcd Bc = ss.B.cast<std::complex<double>>();
    const Eigen::MatrixXcd Kc = K.cast<std::complex<double>>();
    const Eigen::MatrixXcd Mc = M.cast<std::complex<double>>();
    const Eigen::MatrixXcd I_n = Eigen::MatrixXcd::Identity(n, n);
    const Eigen::MatrixXcd I_p = Eigen::MatrixXcd::Identity(p, p);

    double min_eig = std::numeric_limits<double>::infinity();
    for (long k = 0; k < grid_size; ++k) {
        const double theta = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(grid_size);
        const std::complex<double> z(std::cos(theta), std::sin(theta));
        const Eigen::MatrixXcd H = (z * I_n - AK).partialPivLu().solve(Bc);
        Eigen::MatrixXcd T(n + p, p);
        T.topRows(n) = H;
        T.bottomRows(p) = I_p + Kc * H;
        Eigen::MatrixXcd Phi = T.adjoint() * Mc * T;
        Phi = 0.5 * (Phi + Phi.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Phi, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    rep.popov_min_eig = min_eig;

    if (std::abs(min_eig) <= kPopovTol)
        rep.verdict = ArbitrageVerdict::Boundary;
    else if (rep.stabilizing_solution_exists && min_eig > kPopovTol)
        rep.verdict = ArbitrageVerdict::NoArbitrage;
    else
        rep.verdict = ArbitrageVerdict::ArbitrageDetected;
    return rep;
}

PerformanceMetrics analytic_performance(const ClosedLoopSystem& cl, const LinearStateSpace& ss,
                                        const OutputSelectors& sel, const KalmanSolution& kal,
                                        const DareSolution& lqr, double lambda) {
    const Eigen::Index n = ss.n_states();
    const Eigen::Index d = ss.n_outputs();
    const Eigen::Index p = ss.n_inputs();
    const Eigen::MatrixXd& K = lqr.K;
    const Eigen::MatrixXd& L = kal.L;
    const Eigen::MatrixXd& V = cl.V;
    const Eigen::MatrixXd& Vh = cl.V_hat;

    const Eigen::MatrixXd AK = ss.A + ss.B * K;
    const Eigen::MatrixXd Sigma = symmetrize(
        ss.sigma_y +
        ss.C * (ss.sigma_x + ss.A * kal.omega * ss.A.transpose()) * ss.C.transpose());

    const Eigen::MatrixXd M1 =
        (ss.C.transpose() * sel.pi_q.transpose() * sel.pi_dec * ss.C +
         K.transpose() * sel.pi_exe * ss.C) *
        AK;
    double avg_pnl = (M1 * Vh).trace();
    // Observation noise enters Q_t = pi_q y_t and correlates with x^_t through
    // the gain; zero for noiseless observations.
    avg_pnl +=
        (sel.pi_q.transpose() * sel.pi_dec * ss.C * AK * L * ss.sigma_y).trace();

    Eigen::MatrixXd W(2 * p, d);
    W.topRows(p) = sel.pi_dec;
    W.bottomRows(p) = sel.pi_exe;
    const Eigen::MatrixXd M3 = W * Sigma * W.transpose();

    Eigen::MatrixXd M2 = Eigen::MatrixXd::Zero(2 * p, d + n);
    M2.topLeftCorner(p, d) = sel.pi_q;
    M2.bottomRightCorner(p, n) = K;

    Eigen::MatrixXd moments(d + n, d + n);
    moments.topLeftCorner(d, d) = ss.C * V * ss.C.transpose() + ss.sigma_y;
    moments.topRightCorner(d, n) = ss.C * Vh + ss.sigma_y * L.transpose();
    moments.bottomLeftCorner(n, d) = Vh * ss.C.transpose() + L * ss.sigma_y;
    moments.bottomRightCorner(n, n) = Vh;

    const double e_var = (M2.transpose() * M3 * M2 * moments).trace();

    PerformanceMetrics m;
    m.lambda = lambda;
    m.avg_pnl = avg_pnl;
    m.avg_risk = std::sqrt(std::max(e_var, 0.0));
    m.zero_risk = !(m.avg_risk > 0.0);
    m.sharpe_yearly =
        m.zero_risk ? 0.0 : std::sqrt(kAnnualization) * m.avg_pnl / m.avg_risk;
    return m;
}

} // namespace lqgalloc
