#include "lqgalloc/state_space.hpp"

#include <algorithm>
#include <sstream>

#include "lqgalloc/errors.hpp"

namespace lqgalloc {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kEigClipTol = -1e-10;

void check_covariance(const Eigen::MatrixXd& M, const std::string& field,
                      std::vector<Violation>& out) {
    if (M.rows() != M.cols()) {
        out.push_back({field, "must be square"});
        return;
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
        out.push_back({field, "not symmetric to 1e-12"});
        return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        out.push_back({field, "eigendecomposition failed"});
        return;
    }
    if (es.eigenvalues().minCoeff() < kEigClipTol * scale) {
        out.push_back({field, "not positive semi-definite (min eigenvalue below -1e-10)"});
    }
}

} // namespace

std::vector<Violation> validate(const LinearStateSpace& ss) {
    std::vector<Violation> v;
    const Eigen::Index n = ss.A.rows();
    const Eigen::Index p = ss.B.cols();
    const Eigen::Index d = ss.C.rows();

    if (ss.A.cols() != n) v.push_back({"A", "must be square"});
    if (ss.B.rows() != n) v.push_back({"B", "row count must match A"});
    if (ss.C.cols() != n) v.push_back({"C", "column count must match A"});
    if (ss.sigma_x.rows() != n || ss.sigma_x.cols() != n)
        v.push_back({"sigma_x", "must be n x n"});
    if (ss.sigma_y.rows() != d || ss.sigma_y.cols() != d)
        v.push_back({"sigma_y", "must be d x d"});

    if (ss.sigma_x.rows() == ss.sigma_x.cols() && ss.sigma_x.rows() == n)
        check_covariance(ss.sigma_x, "sigma_x", v);
    if (ss.sigma_y.rows() == ss.sigma_y.cols() && ss.sigma_y.rows() == d)
        check_covariance(ss.sigma_y, "sigma_y", v);

    if (!ss.state_labels.empty() && static_cast<Eigen::Index>(ss.state_labels.size()) != n)
        v.push_back({"state_labels", "size must match state dimension"});
    if (!ss.input_labels.empty() && static_cast<Eigen::Index>(ss.input_labels.size()) != p)
        v.push_back({"input_labels", "size must match input dimension"});
    if (!ss.output_labels.empty() && static_cast<Eigen::Index>(ss.output_labels.size()) != d)
        v.push_back({"output_labels", "size must match output dimension"});
    return v;
}

Eigen::MatrixXd covariance_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw SolverError(SolverError::Code::FactorizationFailure,
                          "covariance eigendecomposition failed");
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    Eigen::VectorXd w = es.eigenvalues();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] < kEigClipTol * scale)
            throw SolverError(SolverError::Code::FactorizationFailure,
                              "covariance has eigenvalue below -1e-10, not PSD");
        w[i] = std::max(w[i], 0.0);
    }
    return es.eigenvectors() * w.cwiseSqrt().asDiagonal();
}

SimulationResult simulate(const LinearStateSpace& ss, const Eigen::MatrixXd& controls,
                          const NoiseSource& noise, const Eigen::VectorXd& x0) {
    const Eigen::Index n = ss.n_states();
    const Eigen::Index p = ss.n_inputs();
    const Eigen::Index d = ss.n_outputs();
    const Eigen::Index T = controls.rows();
    if (controls.cols() != p && T > 0)
        throw std::invalid_argument("controls must have one column per input channel");

    SimulationResult res;
    res.states.setZero(T + 1, n);
    res.observations.setZero(T + 1, d);
    res.eps_x.setZero(T, n);
    res.eps_y.setZero(T + 1, d);

    if (noise.kind == NoiseSource::Kind::Replay) {
        if (noise.eps_x.rows() < T || noise.eps_x.cols() != n)
            throw std::invalid_argument("replay eps_x must be T x n");
        if (noise.eps_y.rows() < T + 1 || noise.eps_y.cols() != d)
            throw std::invalid_argument("replay eps_y must be (T+1) x d");
        res.eps_x = noise.eps_x.topRows(T);
        res.eps_y = noise.eps_y.topRows(T + 1);
    } else if (noise.kind == NoiseSource::Kind::Gaussian) {
        const Eigen::MatrixXd Fx = covariance_sqrt(ss.sigma_x);
        const Eigen::MatrixXd Fy = covariance_sqrt(ss.sigma_y);
        GaussianRng rng(noise.seed, noise.stream);
        // Draw order is fixed: eps_y_0, then (eps_x_{t+1}, eps_y_{t+1}) per step.
        res.eps_y.row(0) = (Fy * rng.normal_vector(d)).transpose();
        for (Eigen::Index t = 0; t < T; ++t) {
            res.eps_x.row(t) = (Fx * rng.normal_vector(n)).transpose();
            res.eps_y.row(t + 1) = (Fy * rng.normal_vector(d)).transpose();
        }
    }

    Eigen::VectorXd x = x0.size() ? x0 : Eigen::VectorXd::Zero(n);
    if (x.size() != n) throw std::invalid_argument("x0 dimension mismatch");

    res.states.row(0) = x.transpose();
    res.observations.row(0) = (ss.C * x + res.eps_y.row(0).transpose()).transpose();
    for (Eigen::Index t = 0; t < T; ++t) {
        x = ss.A * x + ss.B * controls.row(t).transpose() + res.eps_x.row(t).transpose();
        res.states.row(t + 1) = x.transpose();
        res.observations.row(t + 1) = (ss.C * x + res.eps_y.row(t + 1).transpose()).transpose();
    }
    return res;
}

Trajectory SimulationResult::to_trajectory(const LinearStateSpace& ss) const {
    const Eigen::Index n = states.cols();
    const Eigen::Index d = observations.cols();
    Trajectory tr;
    tr.times.resize(static_cast<std::size_t>(states.rows()));
    for (Eigen::Index t = 0; t < states.rows(); ++t) tr.times[static_cast<std::size_t>(t)] = t;
    tr.values.resize(states.rows(), n + d);
    tr.values.leftCols(n) = states;
    tr.values.rightCols(d) = observations;
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string base = ss.state_labels.empty()
                                     ? "s" + std::to_string(i)
                                     : ss.state_labels[static_cast<std::size_t>(i)];
        tr.channel_names.push_back("x." + base);
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        const std::string base = ss.output_labels.empty()
                                     ? "o" + std::to_string(i)
                                     : ss.output_labels[static_cast<std::size_t>(i)];
        tr.channel_names.push_back("y." + base);
    }
    return tr;
}

Trajectory impulse_response(const LinearStateSpace& ss, const std::string& input_channel,
                            long horizon, double amplitude) {
    if (horizon < 1) throw std::invalid_argument("impulse horizon must be >= 1");
    const Eigen::Index n = ss.n_states();
    const Eigen::Index d = ss.n_outputs();

    // The impulse enters either through a B column (control) or directly as a
    // state-noise coordinate.
    Eigen::VectorXd x1;
    const auto in_it = std::find(ss.input_labels.begin(), ss.input_labels.end(), input_channel);
    if (in_it != ss.input_labels.end()) {
        const Eigen::Index j = in_it - ss.input_labels.begin();
        x1 = amplitude * ss.B.col(j);
    } else {
        const auto st_it =
            std::find(ss.state_labels.begin(), ss.state_labels.end(), input_channel);
        if (st_it == ss.state_labels.end())
            throw std::invalid_argument("unknown impulse channel: " + input_channel);
        x1 = Eigen::VectorXd::Zero(n);
        x1[st_it - ss.state_labels.begin()] = amplitude;
    }

    Trajectory tr;
    tr.meta = "impulse_response channel=" + input_channel;
    tr.values.setZero(horizon, 2 * d);
    tr.times.resize(static_cast<std::size_t>(horizon));
    Eigen::VectorXd x = x1;
    Eigen::VectorXd cum = Eigen::VectorXd::Zero(d);
    for (long t = 0; t < horizon; ++t) {
        const Eigen::VectorXd y = ss.C * x;
        cum += y;
        tr.times[static_cast<std::size_t>(t)] = t + 1;
        tr.values.row(t).head(d) = y.transpose();
        tr.values.row(t).tail(d) = cum.transpose();
        x = ss.A * x;
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        const std::string base = ss.output_labels.empty()
                                     ? "o" + std::to_string(i)
                                     : ss.output_labels[static_cast<std::size_t>(i)];
        tr.channel_names.push_back("y." + base);
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        const std::string base = ss.output_labels.empty()
                                     ? "o" + std::to_string(i)
                                     : ss.output_labels[static_cast<std::size_t>(i)];
        tr.channel_names.push_back("cum." + base);
    }
    return tr;
}

} // namespace lqgalloc
