#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqgalloc/rng.hpp"
#include "lqgalloc/trajectory.hpp"

namespace lqgalloc {

// Discrete-time linear state space
//
//   x_{t+1} = A x_t + B q_t + eps_x_{t+1},   eps_x ~ N(0, sigma_x)
//   y_t     = C x_t + eps_y_t,               eps_y ~ N(0, sigma_y)
//
// with named state / input / output channels. The control q_t acts between
// y_t and y_{t+1}: an impulse applied at t = 0 is first visible in y_1.
struct LinearStateSpace {
    Eigen::MatrixXd A;       // n x n state transition
    Eigen::MatrixXd B;       // n x p control-to-state
    Eigen::MatrixXd C;       // d x n state-to-observation
    Eigen::MatrixXd sigma_x; // n x n state noise covariance
    Eigen::MatrixXd sigma_y; // d x d observation noise covariance
    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;
    std::vector<std::string> output_labels;

    Eigen::Index n_states() const { return A.rows(); }
    Eigen::Index n_inputs() const { return B.cols(); }
    Eigen::Index n_outputs() const { return C.rows(); }
};

struct Violation {
    std::string field;
    std::string message;
};

// Reports every broken type invariant; empty result means the model is valid.
// Never throws.
std::vector<Violation> validate(const LinearStateSpace& ss);

// Symmetric eigendecomposition square root of a covariance matrix. Eigenvalues
// in [-1e-10, 0] are clipped to zero; anything below -1e-10 throws
// SolverError(FactorizationFailure). Rank-deficient covariances are fine.
Eigen::MatrixXd covariance_sqrt(const Eigen::MatrixXd& cov);

// Noise fed to simulate(): seeded Gaussian draws with the model covariances,
// an explicit replay of both noise sequences, or none at all.
struct NoiseSource {
    enum class Kind { None, Gaussian, Replay };
    Kind kind = Kind::None;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    Eigen::MatrixXd eps_x; // T x n when kind == Replay
    Eigen::MatrixXd eps_y; // (T+1) x d when kind == Replay

    static NoiseSource none() { return {}; }
    static NoiseSource gaussian(std::uint64_t seed, std::uint64_t stream = 0) {
        NoiseSource s;
        s.kind = Kind::Gaussian;
        s.seed = seed;
        s.stream = stream;
        return s;
    }
    static NoiseSource replay(Eigen::MatrixXd eps_x, Eigen::MatrixXd eps_y) {
        NoiseSource s;
        s.kind = Kind::Replay;
        s.eps_x = std::move(eps_x);
        s.eps_y = std::move(eps_y);
        return s;
    }
};

struct SimulationResult {
    Eigen::MatrixXd states;       // (T+1) x n, rows x_0 .. x_T
    Eigen::MatrixXd observations; // (T+1) x d, rows y_0 .. y_T
    Eigen::MatrixXd eps_x;        // T x n, realized state noise (for replay)
    Eigen::MatrixXd eps_y;        // (T+1) x d, realized observation noise

    Trajectory to_trajectory(const LinearStateSpace& ss) const;
};

// Runs the recursion for T = controls.rows() steps from x0 (zero if empty).
// Bit-reproducible for a fixed seed.
SimulationResult simulate(const LinearStateSpace& ss, const Eigen::MatrixXd& controls,
                          const NoiseSource& noise,
                          const Eigen::VectorXd& x0 = Eigen::VectorXd());

// Noiseless response y_1..y_horizon to a unit impulse at t = 0 on a control
// channel (column of B) or a state-noise coordinate (state label), scaled by
// `amplitude`. Output channels come with their running cumulative sums
// (prefixed "cum.").
Trajectory impulse_response(const LinearStateSpace& ss, const std::string& input_channel,
                            long horizon, double amplitude = 1.0);

} // namespace lqgalloc
