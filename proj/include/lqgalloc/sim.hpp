#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lqgalloc/models.hpp"
#include "lqgalloc/portfolio.hpp"

namespace lqgalloc {

struct RoundTripResult {
    Trajectory trajectory;  // position, decision price, execution price,
                            // stepwise and cumulative PnL
    double total_pnl = 0.0;
    double identity_lhs = 0.0; // telescoped step PnL
    double identity_rhs = 0.0; // -sum q_t pbar_{t+1}
    // Hysteresis pairs: (position, decision price) sampled per step and the
    // piecewise-constant (position, execution price) loop.
    std::vector<std::pair<double, double>> hysteresis_dec;
    std::vector<std::pair<double, double>> hysteresis_exe;

    // Signed area enclosed by the execution-price loop (shoelace over the
    // closed polygon, execution leg piecewise constant); equals -total_pnl.
    double hysteresis_area() const;
};

struct MonteCarloSettings {
    long T = 5000;
    int n_paths = 50;
    std::uint64_t seed = 20240101;
    long burn_in = 1000;
};

struct MonteCarloMetrics {
    PerformanceMetrics metrics;
    double pnl_se = 0.0;  // path-level bootstrap standard error
    double risk_se = 0.0;
    int n_paths = 0;
    long T = 0;
};

struct CapacityPoint {
    double lambda = 0.0;
    std::optional<PerformanceMetrics> metrics;       // analytic
    std::optional<MonteCarloMetrics> mc_metrics;
    std::string solver_status = "ok"; // per-lambda failures recorded, not fatal
};

// Mean per-step conditional expectation and root mean conditional variance of
// the PnL along simulated closed-loop paths, per path; sub-seed for path i is
// a counter-mode split (seed, i). Deterministic for a fixed seed.
MonteCarloMetrics monte_carlo_metrics(const ClosedLoopSystem& cl, const LinearStateSpace& ss,
                                      const OutputSelectors& sel, const DareSolution& lqr,
                                      const KalmanSolution& kal, double lambda,
                                      const MonteCarloSettings& mc);

// Open-loop round trip: simulates the trade sequence (zero noise unless given),
// reconstructs decision prices from cumulative r_dec (base 0), execution
// prices pbar_{t+1} = p_{t+1} - r_exe_{t+1}, stepwise PnL and the hysteresis
// loops. trades must sum to zero.
RoundTripResult round_trip(const LinearStateSpace& ss, const OutputSelectors& sel,
                           const Eigen::VectorXd& trades,
                           const NoiseSource& noise = NoiseSource::none());

// Noiseless impulse response of the augmented closed loop to one coordinate of
// the stacked noise (eps_x, eps_y), named by state label (state-noise part) or
// output label prefixed "y:" (observation-noise part). Reports position,
// decision price, execution price, trades.
Trajectory closed_loop_impulse(const ClosedLoopSystem& cl, const LinearStateSpace& ss,
                               const OutputSelectors& sel, const DareSolution& lqr,
                               const std::string& noise_channel, long horizon,
                               double amplitude = 1.0);

// Full pipeline per lambda: Kalman -> cost -> LQR -> closed loop -> analytic
// metrics (and optionally Monte Carlo). Per-point solver failures land in
// solver_status instead of aborting the sweep.
std::vector<CapacityPoint> capacity_curve(const SeparableModelParams& params,
                                          const std::vector<double>& lambdas,
                                          const std::optional<MonteCarloSettings>& mc = {},
                                          const SolverConfig& cfg = {});

// Closed-loop predictor-noise impulse responses across lambda values. The
// model is rebuilt with permanent_fraction = 0 (beta_i = -gamma_i) unless
// keep_permanent_impact is set; impact relaxation then fully reverts, which is
// the regime the lambda sensitivity study looks at.
std::vector<Trajectory> lambda_impulse_study(const SeparableModelParams& params,
                                             const std::vector<double>& lambdas, long horizon,
                                             bool keep_permanent_impact = false,
                                             const SolverConfig& cfg = {});

} // namespace lqgalloc
