#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace lqgalloc {

// Deterministic Gaussian source. std::normal_distribution is not guaranteed
// to produce the same stream across standard libraries, so the normal variates
// are generated here from raw mt19937_64 output via Box-Muller.
class GaussianRng {
  public:
    explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

    // Counter-mode sub-stream: path `stream` of master seed `seed`. The two
    // words go through seed_seq so nearby (seed, stream) pairs decorrelate.
    GaussianRng(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
    }

    // Uniform in (0, 1]; 53-bit mantissa, never exactly 0.
    double uniform() {
        const std::uint64_t bits = engine_();
        return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    Eigen::VectorXd normal_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace lqgalloc
