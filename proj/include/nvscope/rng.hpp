#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nvscope {

/// Seed-stable Gaussian source. std::mt19937_64 output is fixed by the
/// standard; the normal transform is done here (Box-Muller) because
/// std::normal_distribution differs between standard libraries.
class GaussianRng {
public:
    explicit GaussianRng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform01() {
        // 53 random mantissa bits in (0, 1]
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal(double mean = 0.0, double sigma = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sigma * spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return mean + sigma * radius * std::cos(angle);
    }

    bool operator==(const GaussianRng&) const = default;

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace nvscope
