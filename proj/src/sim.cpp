#include "lqgalloc/sim.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace lqgalloc {

namespace {

constexpr double kAnnualization = 250.0;

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

} // namespace

double RoundTripResult::hysteresis_area() const {
    // Shoelace over the closed execution-price polygon, oriented so the area
    // equals integral of price dQ; vertical price jumps at constant position
    // contribute nothing.
    const auto& pts = hysteresis_exe;
    if (pts.size() < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& [x0, y0] = pts[i];
        const auto& [x1, y1] = pts[(i + 1) % pts.size()];
        twice += (x1 - x0) * (y1 + y0);
    }
    return 0.5 * twice;
}

MonteCarloMetrics monte_carlo_metrics(const ClosedLoopSystem& cl, const LinearStateSpace& ss,
                                      const OutputSelectors& sel, const DareSolution& lqr,
                                      const KalmanSolution& kal, double lambda,
                                      const MonteCarloSettings& mc) {
    if (mc.T < 1000) throw std::invalid_argument("monte_carlo_metrics: T must be >= 1000");
    if (mc.n_paths < 1) throw std::invalid_argument("monte_carlo_metrics: n_paths must be >= 1");
    const Eigen::Index n = ss.n_states();
    const Eigen::Index d = ss.n_outputs();
    const Eigen::Index p = ss.n_inputs();

    const Eigen::MatrixXd Fx = covariance_sqrt(ss.sigma_x);
    const Eigen::MatrixXd Fy = covariance_sqrt(ss.sigma_y);
    const Eigen::MatrixXd Sigma = symmetrize(
        ss.sigma_y +
        ss.C * (ss.sigma_x + ss.A * kal.omega * ss.A.transpose()) * ss.C.transpose());
    Eigen::MatrixXd W(2 * p, d);
    W.topRows(p) = sel.pi_dec;
    W.bottomRows(p) = sel.pi_exe;
    const Eigen::MatrixXd G = W * Sigma * W.transpose();
    const Eigen::MatrixXd WC = W * ss.C;

    std::vector<double> path_pnl(static_cast<std::size_t>(mc.n_paths));
    std::vector<double> path_var(static_cast<std::size_t>(mc.n_paths));

    for (int path = 0; path < mc.n_paths; ++path) {
        GaussianRng rng(mc.seed, static_cast<std::uint64_t>(path));
        Eigen::VectorXd X = Eigen::VectorXd::Zero(2 * n);
        Eigen::VectorXd eps_y = Fy * rng.normal_vector(d);
        double sum_e = 0.0;
        double sum_v = 0.0;
        for (long t = 0; t < mc.burn_in + mc.T; ++t) {
            if (t >= mc.burn_in) {
                const Eigen::VectorXd y = ss.C * X.head(n) + eps_y;
                const Eigen::VectorXd x_hat = X.tail(n);
                const Eigen::VectorXd q = lqr.K * x_hat;
                Eigen::VectorXd z(2 * p);
                z.head(p) = sel.pi_q * y;
                z.tail(p) = q;
                sum_e += z.dot(WC * (ss.A * x_hat + ss.B * q));
                sum_v += z.dot(G * z);
            }
            Eigen::VectorXd eps(n + d);
            eps.head(n) = Fx * rng.normal_vector(n);
            eps.tail(d) = Fy * rng.normal_vector(d);
            X = cl.A_aug * X + cl.B_aug * eps;
            eps_y = eps.tail(d);
        }
        path_pnl[static_cast<std::size_t>(path)] = sum_e / static_cast<double>(mc.T);
        path_var[static_cast<std::size_t>(path)] = sum_v / static_cast<double>(mc.T);
    }

    const double inv_paths = 1.0 / static_cast<double>(mc.n_paths);
    const double pnl = std::accumulate(path_pnl.begin(), path_pnl.end(), 0.0) * inv_paths;
    const double evar = std::accumulate(path_var.begin(), path_var.end(), 0.0) * inv_paths;

    auto stderr_of = [&](const std::vector<double>& xs, double mean) {
        if (mc.n_paths < 2) return 0.0;
        double ss_ = 0.0;
        for (double x : xs) ss_ += (x - mean) * (x - mean);
        return std::sqrt(ss_ / (static_cast<double>(mc.n_paths) - 1.0)) /
               std::sqrt(static_cast<double>(mc.n_paths));
    };

    MonteCarloMetrics out;
    out.n_paths = mc.n_paths;
    out.T = mc.T;
    out.metrics.lambda = lambda;
    out.metrics.avg_pnl = pnl;
    out.metrics.avg_risk = std::sqrt(std::max(evar, 0.0));
    out.metrics.zero_risk = !(out.metrics.avg_risk > 0.0);
    out.metrics.sharpe_yearly =
        out.metrics.zero_risk ? 0.0
                              : std::sqrt(kAnnualization) * pnl / out.metrics.avg_risk;
    out.pnl_se = stderr_of(path_pnl, pnl);
    const double evar_se = stderr_of(path_var, evar);
    out.risk_se = out.metrics.zero_risk ? 0.0 : evar_se / (2.0 * out.metrics.avg_risk);
    return out;
}

RoundTripResult round_trip(const LinearStateSpace& ss, const OutputSelectors& sel,
                           const Eigen::VectorXd& trades, const NoiseSource& noise) {
    const Eigen::Index T = trades.size();
    if (T < 1) throw std::invalid_argument("round_trip: empty trade sequence");
    if (ss.n_inputs() != 1 || sel.n_assets() != 1)
        throw std::invalid_argument("round_trip: single-asset models only");
    if (std::abs(trades.sum()) > 1e-12)
        throw std::invalid_argument("not a round trip: trades do not sum to zero");

    const SimulationResult simres = simulate(ss, trades, noise);
    Eigen::VectorXd r_dec(T + 1), r_exe(T + 1), Q(T + 1);
    for (Eigen::Index t = 0; t <= T; ++t) {
        const Eigen::VectorXd y = simres.observations.row(t).transpose();
        Q[t] = (sel.pi_q * y)(0);
        r_dec[t] = (sel.pi_dec * y)(0);
        r_exe[t] = (sel.pi_exe * y)(0);
    }
    if (std::abs(Q[T]) > 1e-12)
        throw std::invalid_argument("not a round trip: final position is nonzero");

    // Decision prices from cumulative decision returns (base 0); execution
    // price pbar_{t+1} = p_{t+1} - r_exe_{t+1}.
    Eigen::VectorXd p(T + 1);
    p[0] = 0.0;
    for (Eigen::Index t = 1; t <= T; ++t) p[t] = p[t - 1] + r_dec[t];
    Eigen::VectorXd pbar(T);
    for (Eigen::Index t = 0; t < T; ++t) pbar[t] = p[t + 1] - r_exe[t + 1];

    RoundTripResult res;
    Eigen::VectorXd step_pnl(T), cum_pnl(T);
    double total = 0.0;
    double rhs = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        step_pnl[t] = Q[t] * r_dec[t + 1] + trades[t] * r_exe[t + 1];
        total += step_pnl[t];
        cum_pnl[t] = total;
        rhs -= trades[t] * pbar[t];
    }
    res.total_pnl = total;
    res.identity_lhs = total;
    res.identity_rhs = rhs;

    res.trajectory.meta = "round_trip";
    res.trajectory.channel_names = {"position", "price_dec", "price_exe",
                                    "trade",    "pnl_step",  "pnl_cum"};
    res.trajectory.values.setZero(T + 1, 6);
    res.trajectory.times.resize(static_cast<std::size_t>(T + 1));
    for (Eigen::Index t = 0; t <= T; ++t) {
        res.trajectory.times[static_cast<std::size_t>(t)] = t;
        res.trajectory.values(t, 0) = Q[t];
        res.trajectory.values(t, 1) = p[t];
        res.trajectory.values(t, 2) = t > 0 ? pbar[t - 1] : 0.0;
        res.trajectory.values(t, 3) = t < T ? trades[t] : 0.0;
        res.trajectory.values(t, 4) = t > 0 ? step_pnl[t - 1] : 0.0;
        res.trajectory.values(t, 5) = t > 0 ? cum_pnl[t - 1] : 0.0;
    }

    for (Eigen::Index t = 0; t <= T; ++t) res.hysteresis_dec.emplace_back(Q[t], p[t]);
    // Execution leg drawn piecewise constant: trade t moves the position at
    // the price pbar_{t+1}.
    for (Eigen::Index t = 0; t < T; ++t) {
        res.hysteresis_exe.emplace_back(Q[t], pbar[t]);
        res.hysteresis_exe.emplace_back(Q[t + 1], pbar[t]);
    }
    return res;
}

Trajectory closed_loop_impulse(const ClosedLoopSystem& cl, const LinearStateSpace& ss,
                               const OutputSelectors& sel, const DareSolution& lqr,
                               const std::string& noise_channel, long horizon,
                               double amplitude) {
    if (horizon < 1) throw std::invalid_argument("closed_loop_impulse: horizon must be >= 1");
    const Eigen::Index n = ss.n_states();
    const Eigen::Index d = ss.n_outputs();

    // E coordinates: state-noise part named by state label, observation-noise
    // part by "y:" + output label.
    Eigen::Index coord = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!ss.state_labels.empty() &&
            ss.state_labels[static_cast<std::size_t>(i)] == noise_channel)
            coord = i;
    }
    if (coord < 0 && noise_channel.rfind("y:", 0) == 0) {
        const std::string out_name = noise_channel.substr(2);
        for (Eigen::Index i = 0; i < d; ++i) {
            if (!ss.output_labels.empty() &&
                ss.output_labels[static_cast<std::size_t>(i)] == out_name)
                coord = n + i;
        }
    }
    if (coord < 0)
        throw std::invalid_argument("unknown noise channel: " + noise_channel);

    Eigen::VectorXd eps = Eigen::VectorXd::Zero(n + d);
    eps[coord] = amplitude;
    Eigen::VectorXd X = cl.B_aug * eps;

    Trajectory tr;
    tr.meta = "closed_loop_impulse channel=" + noise_channel;
    tr.channel_names = {"position", "price_dec", "price_exe", "trade"};
    tr.values.setZero(horizon, 4);
    tr.times.resize(static_cast<std::size_t>(horizon));
    double price = 0.0;
    for (long t = 0; t < horizon; ++t) {
        const Eigen::VectorXd y = ss.C * X.head(n);
        const Eigen::VectorXd q = lqr.K * X.tail(n);
        price += (sel.pi_dec * y)(0);
        tr.times[static_cast<std::size_t>(t)] = t + 1;
        tr.values(t, 0) = (sel.pi_q * y)(0);
        tr.values(t, 1) = price;
        tr.values(t, 2) = price - (sel.pi_exe * y)(0);
        tr.values(t, 3) = q(0);
        X = cl.A_aug * X;
    }
    return tr;
}

std::vector<CapacityPoint> capacity_curve(const SeparableModelParams& params,
                                          const std::vector<double>& lambdas,
                                          const std::optional<MonteCarloSettings>& mc,
                                          const SolverConfig& cfg) {
    for (double l : lambdas)
        if (!(l > 0.0)) throw std::invalid_argument("capacity_curve: lambdas must be positive");

    auto [ss, sel] = build_separable_model(params);
    const KalmanSolution kal = solve_kalman(ss, cfg);

    std::vector<CapacityPoint> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        CapacityPoint pt;
        pt.lambda = lambda;
        try {
            const CostMatrices cost = build_cost_matrices(ss, sel, lambda, kal.omega);
            const DareSolution lqr = solve_lqr(ss, cost, cfg);
            const ClosedLoopSystem cl = build_closed_loop(ss, kal, lqr);
            pt.metrics = analytic_performance(cl, ss, sel, kal, lqr, lambda);
            if (mc) pt.mc_metrics = monte_carlo_metrics(cl, ss, sel, lqr, kal, lambda, *mc);
        } catch (const SolverError& e) {
            pt.solver_status = SolverError::code_name(e.code());
        }
        out.push_back(std::move(pt));
    }
    return out;
}

std::vector<Trajectory> lambda_impulse_study(const SeparableModelParams& params,
                                             const std::vector<double>& lambdas, long horizon,
                                             bool keep_permanent_impact,
                                             const SolverConfig& cfg) {
    SeparableModelParams p = params;
    if (!keep_permanent_impact) p.beta_i = -p.gamma_i;
    auto [ss, sel] = build_separable_model(p);
    const KalmanSolution kal = solve_kalman(ss, cfg);

    std::vector<Trajectory> out;
    out.reserve(lambdas.size());
    for (double lambda : lambdas) {
        if (!(lambda > 0.0))
            throw std::invalid_argument("lambda_impulse_study: lambda must be positive");
        const CostMatrices cost = build_cost_matrices(ss, sel, lambda, kal.omega);
        const DareSolution lqr = solve_lqr(ss, cost, cfg);
        const ClosedLoopSystem cl = build_closed_loop(ss, kal, lqr);
        Trajectory tr = closed_loop_impulse(cl, ss, sel, lqr, "x_p", horizon, p.beta_p);
        std::ostringstream meta;
        meta << "lambda_impulse_study lambda=" << lambda;
        tr.meta = meta.str();
        out.push_back(std::move(tr));
    }
    return out;
}

} // namespace lqgalloc
