#include "lqgalloc/cli.hpp"

#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lqgalloc/io.hpp"

namespace lqgalloc {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& context) {
    for (const auto& [key, _] : obj.items()) {
        if (!known.count(key))
            throw ConfigError(context.empty() ? key : context + "." + key, "unknown key");
    }
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(field, "expected an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols)
            throw ConfigError(field, "ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) throw ConfigError(field, "non-numeric entry");
            M(i, k) = j[i][k].get<double>();
        }
    }
    return M;
}

std::vector<std::string> labels_from_json(const json& j, const std::string& field) {
    std::vector<std::string> out;
    if (!j.is_array()) throw ConfigError(field, "expected an array of strings");
    for (const auto& v : j) {
        if (!v.is_string()) throw ConfigError(field, "expected an array of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::pair<LinearStateSpace, OutputSelectors> matrices_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"A", "B", "C", "sigma_x", "sigma_y", "state_labels", "input_labels",
                         "output_labels", "selectors"},
                        "matrices");
    for (const char* req : {"A", "B", "C", "sigma_x", "sigma_y", "selectors"})
        if (!j.contains(req)) throw ConfigError(std::string("matrices.") + req, "missing");

    LinearStateSpace ss;
    ss.A = matrix_from_json(j["A"], "matrices.A");
    ss.B = matrix_from_json(j["B"], "matrices.B");
    ss.C = matrix_from_json(j["C"], "matrices.C");
    ss.sigma_x = matrix_from_json(j["sigma_x"], "matrices.sigma_x");
    ss.sigma_y = matrix_from_json(j["sigma_y"], "matrices.sigma_y");
    if (j.contains("state_labels"))
        ss.state_labels = labels_from_json(j["state_labels"], "matrices.state_labels");
    if (j.contains("input_labels"))
        ss.input_labels = labels_from_json(j["input_labels"], "matrices.input_labels");
    if (j.contains("output_labels"))
        ss.output_labels = labels_from_json(j["output_labels"], "matrices.output_labels");

    const json& s = j["selectors"];
    reject_unknown_keys(s, {"pi_q", "pi_dec", "pi_exe"}, "matrices.selectors");
    for (const char* req : {"pi_q", "pi_dec", "pi_exe"})
        if (!s.contains(req)) throw ConfigError(std::string("matrices.selectors.") + req, "missing");
    OutputSelectors sel;
    sel.pi_q = matrix_from_json(s["pi_q"], "matrices.selectors.pi_q");
    sel.pi_dec = matrix_from_json(s["pi_dec"], "matrices.selectors.pi_dec");
    sel.pi_exe = matrix_from_json(s["pi_exe"], "matrices.selectors.pi_exe");

    const auto violations = validate(ss);
    if (!violations.empty())
        throw ConfigError("matrices." + violations.front().field, violations.front().message);
    return {ss, sel};
}

std::vector<double> grid_from_json(const json& j, const std::string& field) {
    std::vector<double> grid;
    if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number()) throw ConfigError(field, "non-numeric entry");
            grid.push_back(v.get<double>());
        }
    } else if (j.is_object()) {
        reject_unknown_keys(j, {"min", "max", "count", "log"}, field);
        for (const char* req : {"min", "max", "count"})
            if (!j.contains(req)) throw ConfigError(field + "." + req, "missing");
        const double lo = j["min"].get<double>();
        const double hi = j["max"].get<double>();
        const long count = j["count"].get<long>();
        const bool log_spaced = j.value("log", true);
        if (count < 1) throw ConfigError(field + ".count", "must be >= 1");
        if (lo <= 0.0 || hi < lo) throw ConfigError(field, "need 0 < min <= max");
        for (long i = 0; i < count; ++i) {
            const double f = count == 1 ? 0.0
                                        : static_cast<double>(i) / static_cast<double>(count - 1);
            grid.push_back(log_spaced ? lo * std::pow(hi / lo, f) : lo + f * (hi - lo));
        }
    } else {
        throw ConfigError(field, "expected an array or a {min, max, count, log} object");
    }
    for (double l : grid)
        if (!(l > 0.0)) throw ConfigError(field, "grid values must be positive");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw ConfigError(field, "grid must be sorted ascending");
    return grid;
}

std::pair<LinearStateSpace, OutputSelectors> model_of(const RunConfig& cfg) {
    if (cfg.model) return build_separable_model(*cfg.model);
    return *cfg.matrices;
}

json metrics_to_json(const PerformanceMetrics& m) {
    return json{{"lambda", m.lambda},
                {"avg_pnl", m.avg_pnl},
                {"avg_risk", m.avg_risk},
                {"sharpe_yearly", m.sharpe_yearly},
                {"zero_risk", m.zero_risk}};
}

json run_metadata(const RunConfig& cfg) {
    json meta;
    meta["config_sha1"] = git_blob_sha1(cfg.config_text);
    meta["lambda"] = cfg.lambda;
    meta["seed"] = cfg.montecarlo.seed;
    if (cfg.model) {
        meta["model"] = {{"omega_p", cfg.model->omega_p}, {"beta_p", cfg.model->beta_p},
                         {"sigma", cfg.model->sigma},     {"omega_i", cfg.model->omega_i},
                         {"gamma_i", cfg.model->gamma_i}, {"beta_i", cfg.model->beta_i},
                         {"eta", cfg.model->eta},         {"y_ratio", cfg.model->y_ratio},
                         {"v_daily", cfg.model->v_daily}};
    }
    return meta;
}

std::filesystem::path ensure_outdir(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_text_file(path.string(), j.dump(2) + "\n");
}

struct AssumptionReport {
    double rho_A = 0.0;
    bool stabilizable_AB = false;
    bool detectable_CA = false;
    bool stabilizable_A_sigma_strict = false;
    bool kalman_feasible = false;
    std::string kalman_status = "ok";

    bool all_hold() const { return stabilizable_AB && detectable_CA && kalman_feasible; }
};

AssumptionReport run_assumption_checks(const LinearStateSpace& ss) {
    AssumptionReport rep;
    rep.rho_A = spectral_radius(ss.A);
    rep.stabilizable_AB = is_stabilizable(ss.A, ss.B);
    rep.detectable_CA = is_detectable(ss.C, ss.A);
    rep.stabilizable_A_sigma_strict = is_stabilizable(ss.A, covariance_sqrt(ss.sigma_x));
    try {
        solve_kalman(ss);
        rep.kalman_feasible = true;
    } catch (const SolverError& e) {
        rep.kalman_feasible = false;
        rep.kalman_status = SolverError::code_name(e.code());
    }
    return rep;
}

Eigen::VectorXd trades_of(const RunConfig& cfg) {
    if (!cfg.trades.empty()) {
        Eigen::VectorXd t(static_cast<Eigen::Index>(cfg.trades.size()));
        for (std::size_t i = 0; i < cfg.trades.size(); ++i)
            t[static_cast<Eigen::Index>(i)] = cfg.trades[i];
        return t;
    }
    const RoundTripSchedule s = cfg.schedule.value_or(RoundTripSchedule{});
    Eigen::VectorXd t = Eigen::VectorXd::Zero(s.buy_steps + s.hold_steps + s.sell_steps);
    for (long i = 0; i < s.buy_steps; ++i) t[i] = s.rate;
    const double sold = s.sell_steps > 0
                            ? s.rate * static_cast<double>(s.buy_steps) /
                                  static_cast<double>(s.sell_steps)
                            : 0.0;
    for (long i = 0; i < s.sell_steps; ++i) t[s.buy_steps + s.hold_steps + i] = -sold;
    return t;
}

struct Pipeline {
    LinearStateSpace ss;
    OutputSelectors sel;
    KalmanSolution kal;
    CostMatrices cost;
    DareSolution lqr;
    ClosedLoopSystem cl;
};

Pipeline solve_pipeline(const RunConfig& cfg, double lambda) {
    Pipeline p;
    std::tie(p.ss, p.sel) = model_of(cfg);
    p.kal = solve_kalman(p.ss);
    p.cost = build_cost_matrices(p.ss, p.sel, lambda, p.kal.omega);
    p.lqr = solve_lqr(p.ss, p.cost);
    p.cl = build_closed_loop(p.ss, p.kal, p.lqr);
    return p;
}

int exit_code_for(const SolverError& e) {
    switch (e.code()) {
        case SolverError::Code::NotStabilizable:
        case SolverError::Code::NotDetectable:
        case SolverError::Code::NoStabilizingSolution:
        case SolverError::Code::UnstableClosedLoop:
        case SolverError::Code::UnstableA:
            return kExitAssumptionFailure;
        default:
            return kExitNumericalFailure;
    }
}

} // namespace

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    cfg.config_text = read_text_file(path);

    json j;
    try {
        j = json::parse(cfg.config_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("JSON parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config", "top level must be an object");

    reject_unknown_keys(j,
                        {"model", "matrices", "lambda", "lambda_grid", "impulse", "roundtrip",
                         "montecarlo", "capacity_with_mc", "output_dir", "popov_grid_size"},
                        "");

    if (j.contains("model") == j.contains("matrices"))
        throw ConfigError("model", "exactly one of {model, matrices} must be present");
    if (j.contains("model")) cfg.model = params_from_json_text(j["model"].dump());
    if (j.contains("matrices")) cfg.matrices = matrices_from_json(j["matrices"]);

    if (j.contains("lambda")) {
        if (!j["lambda"].is_number()) throw ConfigError("lambda", "must be a number");
        cfg.lambda = j["lambda"].get<double>();
        if (!(cfg.lambda > 0.0)) throw ConfigError("lambda", "must be positive");
    }
    if (j.contains("lambda_grid")) cfg.lambda_grid = grid_from_json(j["lambda_grid"], "lambda_grid");

    if (j.contains("impulse")) {
        const json& imp = j["impulse"];
        reject_unknown_keys(
            imp, {"mode", "channel", "horizon", "amplitude", "lambdas", "keep_permanent_impact"},
            "impulse");
        cfg.impulse.mode = imp.value("mode", cfg.impulse.mode);
        if (cfg.impulse.mode != "open_loop" && cfg.impulse.mode != "closed_loop" &&
            cfg.impulse.mode != "lambda_study")
            throw ConfigError("impulse.mode", "must be open_loop, closed_loop or lambda_study");
        cfg.impulse.channel = imp.value("channel", cfg.impulse.channel);
        cfg.impulse.horizon = imp.value("horizon", cfg.impulse.horizon);
        if (cfg.impulse.horizon < 1) throw ConfigError("impulse.horizon", "must be >= 1");
        cfg.impulse.amplitude = imp.value("amplitude", cfg.impulse.amplitude);
        cfg.impulse.keep_permanent_impact =
            imp.value("keep_permanent_impact", cfg.impulse.keep_permanent_impact);
        if (imp.contains("lambdas"))
            cfg.impulse.lambdas = grid_from_json(imp["lambdas"], "impulse.lambdas");
    }

    if (j.contains("roundtrip")) {
        const json& rt = j["roundtrip"];
        reject_unknown_keys(rt, {"trades", "schedule"}, "roundtrip");
        if (rt.contains("trades") == rt.contains("schedule"))
            throw ConfigError("roundtrip", "exactly one of {trades, schedule} must be present");
        if (rt.contains("trades")) {
            if (!rt["trades"].is_array()) throw ConfigError("roundtrip.trades", "expected array");
            for (const auto& v : rt["trades"]) {
                if (!v.is_number()) throw ConfigError("roundtrip.trades", "non-numeric entry");
                cfg.trades.push_back(v.get<double>());
            }
        } else {
            const json& s = rt["schedule"];
            reject_unknown_keys(s, {"rate", "buy_steps", "hold_steps", "sell_steps"},
                                "roundtrip.schedule");
            RoundTripSchedule sched;
            sched.rate = s.value("rate", sched.rate);
            sched.buy_steps = s.value("buy_steps", sched.buy_steps);
            sched.hold_steps = s.value("hold_steps", sched.hold_steps);
            sched.sell_steps = s.value("sell_steps", sched.sell_steps);
            if (sched.buy_steps < 0 || sched.hold_steps < 0 || sched.sell_steps < 0)
                throw ConfigError("roundtrip.schedule", "step counts must be non-negative");
            cfg.schedule = sched;
        }
    }

    if (j.contains("montecarlo")) {
        const json& mc = j["montecarlo"];
        reject_unknown_keys(mc, {"T", "n_paths", "seed", "burn_in"}, "montecarlo");
        cfg.montecarlo.T = mc.value("T", cfg.montecarlo.T);
        cfg.montecarlo.n_paths = mc.value("n_paths", cfg.montecarlo.n_paths);
        cfg.montecarlo.seed = mc.value("seed", cfg.montecarlo.seed);
        cfg.montecarlo.burn_in = mc.value("burn_in", cfg.montecarlo.burn_in);
        if (cfg.montecarlo.T < 1000) throw ConfigError("montecarlo.T", "must be >= 1000");
        if (cfg.montecarlo.n_paths < 1) throw ConfigError("montecarlo.n_paths", "must be >= 1");
        if (cfg.montecarlo.burn_in < 0) throw ConfigError("montecarlo.burn_in", "must be >= 0");
    }

    if (j.contains("capacity_with_mc")) {
        if (!j["capacity_with_mc"].is_boolean())
            throw ConfigError("capacity_with_mc", "must be a boolean");
        cfg.capacity_with_mc = j["capacity_with_mc"].get<bool>();
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) throw ConfigError("output_dir", "must be a string");
        cfg.output_dir = j["output_dir"].get<std::string>();
    }
    if (j.contains("popov_grid_size")) {
        cfg.popov_grid_size = j["popov_grid_size"].get<long>();
        if (cfg.popov_grid_size < 64) throw ConfigError("popov_grid_size", "must be >= 64");
    }
    return cfg;
}

int cmd_check(const RunConfig& cfg, std::ostream& out) {
    auto [ss, sel] = model_of(cfg);
    const AssumptionReport rep = run_assumption_checks(ss);
    const ArbitrageReport arb =
        check_no_arbitrage(ss, sel, cfg.lambda, SolverConfig{}, cfg.popov_grid_size);

    out << "spectral radius of A:             " << rep.rho_A << "\n";
    out << "stabilizable (A, B):              " << (rep.stabilizable_AB ? "yes" : "no") << "\n";
    out << "detectable (C, A):                " << (rep.detectable_CA ? "yes" : "no") << "\n";
    out << "stabilizable (A, sigma_x), PBH:   "
        << (rep.stabilizable_A_sigma_strict ? "yes" : "no") << "\n";
    out << "kalman steady state feasible:     " << (rep.kalman_feasible ? "yes" : "no");
    if (!rep.kalman_feasible) out << " (" << rep.kalman_status << ")";
    out << "\n";
    out << "stabilizing Riccati solution:     "
        << (arb.stabilizing_solution_exists ? "yes" : "no") << " (" << arb.solver_status << ")\n";
    out << "popov min eigenvalue (grid " << arb.grid_size << "): " << arb.popov_min_eig << "\n";
    out << "verdict:                          " << to_string(arb.verdict) << "\n";

    const bool ok = rep.all_hold() && arb.verdict == ArbitrageVerdict::NoArbitrage;
    return ok ? kExitOk : kExitAssumptionFailure;
}

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    auto [ss, sel] = model_of(cfg);
    const AssumptionReport rep = run_assumption_checks(ss);
    if (!rep.all_hold() && !cfg.force) {
        out << "assumption checks failed (rerun with --force to override)\n";
        return kExitAssumptionFailure;
    }
    const Pipeline p = solve_pipeline(cfg, cfg.lambda);

    const auto dir = ensure_outdir(cfg);
    write_matrix_csv((dir / "K.csv").string(), p.lqr.K);
    write_matrix_csv((dir / "L.csv").string(), p.kal.L);
    write_matrix_csv((dir / "P.csv").string(), p.lqr.P);
    write_matrix_csv((dir / "omega_tilde.csv").string(), p.kal.omega_tilde);
    write_matrix_csv((dir / "omega.csv").string(), p.kal.omega);
    write_matrix_csv((dir / "A_aug.csv").string(), p.cl.A_aug);
    write_matrix_csv((dir / "B_aug.csv").string(), p.cl.B_aug);
    write_matrix_csv((dir / "V.csv").string(), p.cl.V);
    write_matrix_csv((dir / "V_hat.csv").string(), p.cl.V_hat);

    json summary = run_metadata(cfg);
    summary["dare_residual"] = p.lqr.residual;
    summary["dare_iterations"] = p.lqr.iterations;
    summary["rho_A_BK"] = p.lqr.closed_loop_radius;
    summary["kalman_residual"] = p.kal.residual;
    summary["kalman_filter_radius"] = p.kal.filter_radius;
    summary["rho_closed_loop_full"] = p.cl.rho_full;
    summary["rho_closed_loop_effective"] = p.cl.rho_effective;
    summary["lyapunov_residual"] = p.cl.lyapunov_residual;
    write_json(dir / "solve_summary.json", summary);

    out << "solution written to " << dir.string() << " (rho(A+BK) = "
        << p.lqr.closed_loop_radius << ", residual = " << p.lqr.residual << ")\n";
    return kExitOk;
}

int cmd_impulse(const RunConfig& cfg, std::ostream& out) {
    auto [ss, sel] = model_of(cfg);
    const auto dir = ensure_outdir(cfg);
    json summary = run_metadata(cfg);
    summary["mode"] = cfg.impulse.mode;

    if (cfg.impulse.mode == "open_loop") {
        const Trajectory tr =
            impulse_response(ss, cfg.impulse.channel, cfg.impulse.horizon, cfg.impulse.amplitude);
        tr.write_csv((dir / "impulse_open_loop.csv").string());
        summary["channel"] = cfg.impulse.channel;
        summary["amplitude"] = cfg.impulse.amplitude;
        write_json(dir / "impulse_summary.json", summary);
        out << "open-loop impulse written to " << (dir / "impulse_open_loop.csv").string() << "\n";
        return kExitOk;
    }

    if (cfg.impulse.mode == "closed_loop") {
        const Pipeline p = solve_pipeline(cfg, cfg.lambda);
        const Trajectory tr = closed_loop_impulse(p.cl, p.ss, p.sel, p.lqr, cfg.impulse.channel,
                                                  cfg.impulse.horizon, cfg.impulse.amplitude);
        tr.write_csv((dir / "impulse_closed_loop.csv").string());
        const Eigen::VectorXd pos = tr.channel("position");
        summary["channel"] = cfg.impulse.channel;
        summary["peak_position"] = pos.cwiseAbs().maxCoeff();
        write_json(dir / "impulse_summary.json", summary);
        out << "closed-loop impulse written to " << (dir / "impulse_closed_loop.csv").string()
            << "\n";
        return kExitOk;
    }

    // lambda_study
    if (!cfg.model)
        throw ConfigError("impulse.mode", "lambda_study requires separable model parameters");
    std::vector<double> lambdas = cfg.impulse.lambdas;
    if (lambdas.empty()) lambdas = {0.1, 1.0, 10.0};
    const auto trs = lambda_impulse_study(*cfg.model, lambdas, cfg.impulse.horizon,
                                          cfg.impulse.keep_permanent_impact);
    Trajectory combined;
    combined.meta = "lambda_impulse_study";
    combined.times = trs.front().times;
    combined.values.resize(trs.front().length(), static_cast<Eigen::Index>(2 * trs.size()));
    for (std::size_t i = 0; i < trs.size(); ++i) {
        std::ostringstream tag;
        tag << "[lambda=" << lambdas[i] << "]";
        combined.channel_names.push_back("position" + tag.str());
        combined.channel_names.push_back("price_dec" + tag.str());
        combined.values.col(static_cast<Eigen::Index>(2 * i)) = trs[i].channel("position");
        combined.values.col(static_cast<Eigen::Index>(2 * i + 1)) = trs[i].channel("price_dec");
    }
    combined.write_csv((dir / "impulse_lambda_study.csv").string());
    summary["lambdas"] = lambdas;
    write_json(dir / "impulse_summary.json", summary);
    out << "lambda study written to " << (dir / "impulse_lambda_study.csv").string() << "\n";
    return kExitOk;
}

int cmd_roundtrip(const RunConfig& cfg, std::ostream& out) {
    auto [ss, sel] = model_of(cfg);
    const Eigen::VectorXd trades = trades_of(cfg);
    const RoundTripResult res = round_trip(ss, sel, trades);

    const auto dir = ensure_outdir(cfg);
    res.trajectory.write_csv((dir / "roundtrip.csv").string());
    json summary = run_metadata(cfg);
    summary["total_pnl"] = res.total_pnl;
    summary["identity_lhs"] = res.identity_lhs;
    summary["identity_rhs"] = res.identity_rhs;
    summary["identity_gap"] = std::abs(res.identity_lhs - res.identity_rhs);
    summary["hysteresis_area"] = res.hysteresis_area();
    write_json(dir / "roundtrip_summary.json", summary);

    out << "round trip written to " << (dir / "roundtrip.csv").string()
        << " (total PnL = " << res.total_pnl << ")\n";
    return kExitOk;
}

int cmd_capacity(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.model)
        throw ConfigError("lambda_grid", "capacity sweeps require separable model parameters");
    if (cfg.lambda_grid.empty()) throw ConfigError("lambda_grid", "missing");
    std::optional<MonteCarloSettings> mc;
    if (cfg.capacity_with_mc) mc = cfg.montecarlo;

    const auto points = capacity_curve(*cfg.model, cfg.lambda_grid, mc);

    const auto dir = ensure_outdir(cfg);
    std::ostringstream csv;
    csv << "lambda,risk,pnl,sharpe,mc_risk,mc_pnl,mc_sharpe,solver_status\n";
    for (const auto& pt : points) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const auto& m = pt.metrics;
        csv << format_double(pt.lambda) << ","
            << format_double(m ? m->avg_risk : nan) << ","
            << format_double(m ? m->avg_pnl : nan) << ","
            << format_double(m ? m->sharpe_yearly : nan) << ","
            << format_double(pt.mc_metrics ? pt.mc_metrics->metrics.avg_risk : nan) << ","
            << format_double(pt.mc_metrics ? pt.mc_metrics->metrics.avg_pnl : nan) << ","
            << format_double(pt.mc_metrics ? pt.mc_metrics->metrics.sharpe_yearly : nan) << ","
            << pt.solver_status << "\n";
    }
    write_text_file((dir / "capacity.csv").string(), csv.str());

    json summary = run_metadata(cfg);
    summary["n_points"] = points.size();
    summary["with_mc"] = cfg.capacity_with_mc;
    write_json(dir / "capacity_summary.json", summary);

    out << "capacity curve (" << points.size() << " points) written to "
        << (dir / "capacity.csv").string() << "\n";
    return kExitOk;
}

int cmd_montecarlo(const RunConfig& cfg, std::ostream& out) {
    const Pipeline p = solve_pipeline(cfg, cfg.lambda);
    const PerformanceMetrics analytic =
        analytic_performance(p.cl, p.ss, p.sel, p.kal, p.lqr, cfg.lambda);
    const MonteCarloMetrics mc =
        monte_carlo_metrics(p.cl, p.ss, p.sel, p.lqr, p.kal, cfg.lambda, cfg.montecarlo);

    const auto dir = ensure_outdir(cfg);
    std::ostringstream csv;
    csv << "lambda,pnl,pnl_se,risk,risk_se,sharpe,analytic_pnl,analytic_risk,analytic_sharpe,"
           "T,n_paths,seed\n";
    csv << format_double(cfg.lambda) << "," << format_double(mc.metrics.avg_pnl) << ","
        << format_double(mc.pnl_se) << "," << format_double(mc.metrics.avg_risk) << ","
        << format_double(mc.risk_se) << "," << format_double(mc.metrics.sharpe_yearly) << ","
        << format_double(analytic.avg_pnl) << "," << format_double(analytic.avg_risk) << ","
        << format_double(analytic.sharpe_yearly) << "," << mc.T << "," << mc.n_paths << ","
        << cfg.montecarlo.seed << "\n";
    write_text_file((dir / "montecarlo.csv").string(), csv.str());

    json summary = run_metadata(cfg);
    summary["montecarlo"] = metrics_to_json(mc.metrics);
    summary["montecarlo"]["pnl_se"] = mc.pnl_se;
    summary["montecarlo"]["risk_se"] = mc.risk_se;
    summary["analytic"] = metrics_to_json(analytic);
    write_json(dir / "montecarlo_summary.json", summary);

    out << "monte carlo written to " << (dir / "montecarlo.csv").string()
        << " (pnl = " << mc.metrics.avg_pnl << " +- " << mc.pnl_se << ")\n";
    return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"LQG dynamic portfolio allocation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    long grid_size = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool force = false;

    app.add_option("--config", config_path, "run configuration file (JSON)")->required();
    app.add_option("--out", out_dir, "override output directory");
    app.add_option("--grid-size", grid_size, "override Popov grid size");
    auto* seed_opt = app.add_option("--seed", seed, "override Monte Carlo seed");
    app.add_flag("--force", force, "proceed even if assumption checks fail");

    auto* c_check = app.add_subcommand("check", "model assumptions and arbitrage report");
    auto* c_solve = app.add_subcommand("solve", "solve the controller and write matrices");
    auto* c_impulse = app.add_subcommand("impulse", "impulse-response studies");
    auto* c_roundtrip = app.add_subcommand("roundtrip", "open-loop round-trip analysis");
    auto* c_capacity = app.add_subcommand("capacity", "lambda sweep capacity curves");
    auto* c_montecarlo = app.add_subcommand("montecarlo", "Monte Carlo metric estimation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help goes to stdout with a success code.
            out << app.help();
            return kExitOk;
        }
        err << "argument error: " << e.what() << "\n";
        return kExitConfigError;
    }
    seed_set = seed_opt->count() > 0;

    try {
        RunConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (grid_size > 0) cfg.popov_grid_size = grid_size;
        if (seed_set) cfg.montecarlo.seed = seed;
        cfg.force = force;

        if (c_check->parsed()) return cmd_check(cfg, out);
        if (c_solve->parsed()) return cmd_solve(cfg, out);
        if (c_impulse->parsed()) return cmd_impulse(cfg, out);
        if (c_roundtrip->parsed()) return cmd_roundtrip(cfg, out);
        if (c_capacity->parsed()) return cmd_capacity(cfg, out);
        if (c_montecarlo->parsed()) return cmd_montecarlo(cfg, out);
        err << "no subcommand given\n";
        return kExitConfigError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const SolverError& e) {
        err << "solver error [" << SolverError::code_name(e.code()) << "]: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumericalFailure;
    }
}

} // namespace lqgalloc
