#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lqgalloc {

// Dense time series: one named column per channel, one row per step.
struct Trajectory {
    std::vector<long> times;
    std::vector<std::string> channel_names;
    Eigen::MatrixXd values; // times.size() x channel_names.size()
    std::string meta;

    Eigen::Index length() const { return static_cast<Eigen::Index>(times.size()); }

    Eigen::Index channel_index(const std::string& name) const;
    Eigen::VectorXd channel(const std::string& name) const;

    // Header row of channel names, then one row per step: integer time first,
    // values in scientific notation with 17 significant digits.
    std::string to_csv() const;
    void write_csv(const std::string& path) const;
};

} // namespace lqgalloc
