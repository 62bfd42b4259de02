#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lqgalloc/cli.hpp"
#include "lqgalloc/models.hpp"
#include "lqgalloc/sim.hpp"

namespace py = pybind11;
using namespace lqgalloc;

namespace {

// Exceptions cross the boundary as ValueError/RuntimeError with the code name
// prefixed, which is enough for the scripting use cases.
void translate_exceptions() {
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const SolverError& e) {
            const std::string msg =
                std::string(SolverError::code_name(e.code())) + ": " + e.what();
            PyErr_SetString(PyExc_RuntimeError, msg.c_str());
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });
}

} // namespace

PYBIND11_MODULE(_lqgalloc, m) {
    m.doc() = "LQG dynamic portfolio allocation: state-space model -> optimal "
              "policy -> closed-loop analysis";
    translate_exceptions();

    py::class_<LinearStateSpace>(m, "LinearStateSpace")
        .def(py::init<>())
        .def_readwrite("A", &LinearStateSpace::A)
        .def_readwrite("B", &LinearStateSpace::B)
        .def_readwrite("C", &LinearStateSpace::C)
        .def_readwrite("sigma_x", &LinearStateSpace::sigma_x)
        .def_readwrite("sigma_y", &LinearStateSpace::sigma_y)
        .def_readwrite("state_labels", &LinearStateSpace::state_labels)
        .def_readwrite("input_labels", &LinearStateSpace::input_labels)
        .def_readwrite("output_labels", &LinearStateSpace::output_labels);

    py::class_<OutputSelectors>(m, "OutputSelectors")
        .def(py::init<>())
        .def_readwrite("pi_q", &OutputSelectors::pi_q)
        .def_readwrite("pi_dec", &OutputSelectors::pi_dec)
        .def_readwrite("pi_exe", &OutputSelectors::pi_exe);

    py::class_<Violation>(m, "Violation")
        .def_readonly("field", &Violation::field)
        .def_readonly("message", &Violation::message)
        .def("__repr__", [](const Violation& v) { return v.field + ": " + v.message; });

    py::class_<SeparableModelParams>(m, "SeparableModelParams")
        .def(py::init<>())
        .def_readwrite("omega_p", &SeparableModelParams::omega_p)
        .def_readwrite("beta_p", &SeparableModelParams::beta_p)
        .def_readwrite("sigma", &SeparableModelParams::sigma)
        .def_readwrite("omega_i", &SeparableModelParams::omega_i)
        .def_readwrite("gamma_i", &SeparableModelParams::gamma_i)
        .def_readwrite("beta_i", &SeparableModelParams::beta_i)
        .def_readwrite("eta", &SeparableModelParams::eta)
        .def_readwrite("y_ratio", &SeparableModelParams::y_ratio)
        .def_readwrite("v_daily", &SeparableModelParams::v_daily)
        .def("permanent_fraction", &SeparableModelParams::permanent_fraction);

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("tol_residual", &SolverConfig::tol_residual)
        .def_readwrite("max_iter", &SolverConfig::max_iter)
        .def_readwrite("stability_margin", &SolverConfig::stability_margin);

    py::class_<DareSolution>(m, "DareSolution")
        .def_readonly("P", &DareSolution::P)
        .def_readonly("K", &DareSolution::K)
        .def_readonly("residual", &DareSolution::residual)
        .def_readonly("closed_loop_radius", &DareSolution::closed_loop_radius)
        .def_readonly("iterations", &DareSolution::iterations);

    py::class_<KalmanSolution>(m, "KalmanSolution")
        .def_readonly("L", &KalmanSolution::L)
        .def_readonly("omega_tilde", &KalmanSolution::omega_tilde)
        .def_readonly("omega", &KalmanSolution::omega)
        .def_readonly("residual", &KalmanSolution::residual)
        .def_readonly("filter_radius", &KalmanSolution::filter_radius);

    py::class_<ClosedLoopSystem>(m, "ClosedLoopSystem")
        .def_readonly("A_aug", &ClosedLoopSystem::A_aug)
        .def_readonly("B_aug", &ClosedLoopSystem::B_aug)
        .def_readonly("C_aug", &ClosedLoopSystem::C_aug)
        .def_readonly("noise_cov", &ClosedLoopSystem::noise_cov)
        .def_readonly("V_aug", &ClosedLoopSystem::V_aug)
        .def_readonly("V", &ClosedLoopSystem::V)
        .def_readonly("V_hat", &ClosedLoopSystem::V_hat)
        .def_readonly("rho_full", &ClosedLoopSystem::rho_full)
        .def_readonly("rho_effective", &ClosedLoopSystem::rho_effective);

    py::class_<CostMatrices>(m, "CostMatrices")
        .def_readonly("Q", &CostMatrices::Q)
        .def_readonly("N", &CostMatrices::N)
        .def_readonly("R", &CostMatrices::R)
        .def_readonly("lambda_", &CostMatrices::lambda)
        .def_readonly("sigma_cond", &CostMatrices::sigma_cond);

    py::class_<PerformanceMetrics>(m, "PerformanceMetrics")
        .def_readonly("avg_pnl", &PerformanceMetrics::avg_pnl)
        .def_readonly("avg_risk", &PerformanceMetrics::avg_risk)
        .def_readonly("sharpe_yearly", &PerformanceMetrics::sharpe_yearly)
        .def_readonly("zero_risk", &PerformanceMetrics::zero_risk)
        .def_readonly("lambda_", &PerformanceMetrics::lambda);

    py::enum_<ArbitrageVerdict>(m, "ArbitrageVerdict")
        .value("NoArbitrage", ArbitrageVerdict::NoArbitrage)
        .value("ArbitrageDetected", ArbitrageVerdict::ArbitrageDetected)
        .value("Boundary", ArbitrageVerdict::Boundary);

    py::class_<ArbitrageReport>(m, "ArbitrageReport")
        .def_readonly("stabilizable", &ArbitrageReport::stabilizable)
        .def_readonly("stabilizing_solution_exists",
                      &ArbitrageReport::stabilizing_solution_exists)
        .def_readonly("popov_min_eig", &ArbitrageReport::popov_min_eig)
        .def_readonly("grid_size", &ArbitrageReport::grid_size)
        .def_readonly("verdict", &ArbitrageReport::verdict)
        .def_readonly("solver_status", &ArbitrageReport::solver_status);

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("times", &Trajectory::times)
        .def_readonly("channel_names", &Trajectory::channel_names)
        .def_readonly("values", &Trajectory::values)
        .def_readonly("meta", &Trajectory::meta)
        .def("channel", &Trajectory::channel)
        .def("to_csv", &Trajectory::to_csv);

    py::class_<MonteCarloSettings>(m, "MonteCarloSettings")
        .def(py::init<>())
        .def_readwrite("T", &MonteCarloSettings::T)
        .def_readwrite("n_paths", &MonteCarloSettings::n_paths)
        .def_readwrite("seed", &MonteCarloSettings::seed)
        .def_readwrite("burn_in", &MonteCarloSettings::burn_in);

    py::class_<MonteCarloMetrics>(m, "MonteCarloMetrics")
        .def_readonly("metrics", &MonteCarloMetrics::metrics)
        .def_readonly("pnl_se", &MonteCarloMetrics::pnl_se)
        .def_readonly("risk_se", &MonteCarloMetrics::risk_se)
        .def_readonly("n_paths", &MonteCarloMetrics::n_paths)
        .def_readonly("T", &MonteCarloMetrics::T);

    py::class_<RoundTripResult>(m, "RoundTripResult")
        .def_readonly("trajectory", &RoundTripResult::trajectory)
        .def_readonly("total_pnl", &RoundTripResult::total_pnl)
        .def_readonly("identity_lhs", &RoundTripResult::identity_lhs)
        .def_readonly("identity_rhs", &RoundTripResult::identity_rhs)
        .def("hysteresis_area", &RoundTripResult::hysteresis_area);

    py::class_<CapacityPoint>(m, "CapacityPoint")
        .def_readonly("lambda_", &CapacityPoint::lambda)
        .def_readonly("metrics", &CapacityPoint::metrics)
        .def_readonly("mc_metrics", &CapacityPoint::mc_metrics)
        .def_readonly("solver_status", &CapacityPoint::solver_status);

    m.def("build_separable_model", &build_separable_model, py::arg("params"));
    m.def("validate", &validate, py::arg("ss"));
    m.def("validate_params", &validate_params, py::arg("params"));
    m.def("calibrate_predictor", &calibrate_predictor, py::arg("target_sharpe_yearly"),
          py::arg("sigma"), py::arg("omega_p"));
    m.def("calibrate_impact", &calibrate_impact, py::arg("y_ratio"), py::arg("sigma"),
          py::arg("v_daily"), py::arg("permanent_fraction"));

    m.def("spectral_radius", &spectral_radius, py::arg("M"));
    m.def("is_stabilizable", &is_stabilizable, py::arg("A"), py::arg("B"));
    m.def("is_detectable", &is_detectable, py::arg("C"), py::arg("A"));
    m.def("solve_dare", &solve_dare, py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("N"),
          py::arg("R"), py::arg("cfg") = SolverConfig{});
    m.def("solve_lyapunov", &solve_lyapunov, py::arg("A"), py::arg("E"));

    m.def("solve_kalman", &solve_kalman, py::arg("ss"), py::arg("cfg") = SolverConfig{});
    m.def("solve_lqr", &solve_lqr, py::arg("ss"), py::arg("cost"),
          py::arg("cfg") = SolverConfig{});
    m.def("build_cost_matrices", &build_cost_matrices, py::arg("ss"), py::arg("sel"),
          py::arg("lambda_"), py::arg("omega_x"));
    m.def("build_closed_loop", &build_closed_loop, py::arg("ss"), py::arg("kal"),
          py::arg("lqr"));
    m.def("check_no_arbitrage", &check_no_arbitrage, py::arg("ss"), py::arg("sel"),
          py::arg("lambda_"), py::arg("cfg") = SolverConfig{}, py::arg("grid_size") = 1024);
    m.def("analytic_performance", &analytic_performance, py::arg("cl"), py::arg("ss"),
          py::arg("sel"), py::arg("kal"), py::arg("lqr"), py::arg("lambda_"));

    m.def("impulse_response", &impulse_response, py::arg("ss"), py::arg("input_channel"),
          py::arg("horizon"), py::arg("amplitude") = 1.0);
    m.def(
        "simulate_gaussian",
        [](const LinearStateSpace& ss, const Eigen::MatrixXd& controls, std::uint64_t seed) {
            const auto res = simulate(ss, controls, NoiseSource::gaussian(seed));
            return py::make_tuple(res.states, res.observations);
        },
        py::arg("ss"), py::arg("controls"), py::arg("seed"));

    m.def("monte_carlo_metrics", &monte_carlo_metrics, py::arg("cl"), py::arg("ss"),
          py::arg("sel"), py::arg("lqr"), py::arg("kal"), py::arg("lambda_"), py::arg("mc"));
    m.def(
        "round_trip",
        [](const LinearStateSpace& ss, const OutputSelectors& sel, const Eigen::VectorXd& trades) {
            return round_trip(ss, sel, trades);
        },
        py::arg("ss"), py::arg("sel"), py::arg("trades"));
    m.def("closed_loop_impulse", &closed_loop_impulse, py::arg("cl"), py::arg("ss"),
          py::arg("sel"), py::arg("lqr"), py::arg("noise_channel"), py::arg("horizon"),
          py::arg("amplitude") = 1.0);
    m.def("capacity_curve", &capacity_curve, py::arg("params"), py::arg("lambdas"),
          py::arg("mc") = std::optional<MonteCarloSettings>{},
          py::arg("cfg") = SolverConfig{});
    m.def("lambda_impulse_study", &lambda_impulse_study, py::arg("params"), py::arg("lambdas"),
          py::arg("horizon"), py::arg("keep_permanent_impact") = false,
          py::arg("cfg") = SolverConfig{});
}
