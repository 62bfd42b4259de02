#include "lqgalloc/trajectory.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lqgalloc/io.hpp"

namespace lqgalloc {

Eigen::Index Trajectory::channel_index(const std::string& name) const {
    for (std::size_t i = 0; i < channel_names.size(); ++i) {
        if (channel_names[i] == name) return static_cast<Eigen::Index>(i);
    }
    throw std::out_of_range("unknown trajectory channel: " + name);
}

Eigen::VectorXd Trajectory::channel(const std::string& name) const {
    return values.col(channel_index(name));
}

std::string Trajectory::to_csv() const {
    std::ostringstream os;
    os << "time";
    for (const auto& name : channel_names) os << "," << name;
    os << "\n";
    for (Eigen::Index t = 0; t < length(); ++t) {
        os << times[static_cast<std::size_t>(t)];
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            os << "," << format_double(values(t, c));
        }
        os << "\n";
    }
    return os.str();
}

void Trajectory::write_csv(const std::string& path) const {
    write_text_file(path, to_csv());
}

} // namespace lqgalloc
