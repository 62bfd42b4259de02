#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lqgalloc/models.hpp"
#include "lqgalloc/sim.hpp"

namespace lqgalloc {

// Stable exit-code contract for scripting.
enum ExitCode {
    kExitOk = 0,
    kExitConfigError = 2,
    kExitAssumptionFailure = 3,
    kExitNumericalFailure = 4,
};

struct ImpulseConfig {
    std::string mode = "open_loop"; // open_loop | closed_loop | lambda_study
    std::string channel = "q";
    long horizon = 200;
    double amplitude = 1.0;
    std::vector<double> lambdas; // lambda_study only
    bool keep_permanent_impact = false;
};

struct RoundTripSchedule {
    double rate = 0.01;
    long buy_steps = 10;
    long hold_steps = 10;
    long sell_steps = 10;
};

struct RunConfig {
    // Exactly one of the two model descriptions is present.
    std::optional<SeparableModelParams> model;
    std::optional<std::pair<LinearStateSpace, OutputSelectors>> matrices;

    double lambda = 1.0;
    std::vector<double> lambda_grid; // empty unless a grid was given

    ImpulseConfig impulse;
    std::optional<RoundTripSchedule> schedule;
    std::vector<double> trades; // explicit round-trip trades, overrides schedule
    MonteCarloSettings montecarlo;
    bool capacity_with_mc = false;

    std::string output_dir = "out";
    long popov_grid_size = 1024;
    bool force = false;

    std::string config_text; // raw bytes, hashed into run metadata
};

// Parses and schema-validates a config file. Unknown keys anywhere are an
// error naming the key. Throws ConfigError.
RunConfig load_config(const std::string& path);

struct CommandOverrides {
    std::optional<std::string> output_dir;
    std::optional<long> grid_size;
    std::optional<std::uint64_t> seed;
    bool force = false;
};

int cmd_check(const RunConfig& cfg, std::ostream& out);
int cmd_solve(const RunConfig& cfg, std::ostream& out);
int cmd_impulse(const RunConfig& cfg, std::ostream& out);
int cmd_roundtrip(const RunConfig& cfg, std::ostream& out);
int cmd_capacity(const RunConfig& cfg, std::ostream& out);
int cmd_montecarlo(const RunConfig& cfg, std::ostream& out);

// Full CLI entry point (verbs: check, solve, impulse, roundtrip, capacity,
// montecarlo).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace lqgalloc
