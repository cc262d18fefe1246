#pragma once

// Seeded random streams shared by the ELM and MLP initializers.
//
// Bits come from std::mt19937_64 (its output sequence is fixed by the
// standard). Uniform doubles take the top 53 bits; normals use the Marsaglia
// polar method. Neither step depends on library-specific distribution code,
// so a seed reproduces the same draws on any conforming toolchain.

#include <cmath>
#include <cstdint>
#include <random>

namespace elmsb {

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [low, high).
    double uniform(double low, double high) { return low + (high - low) * uniform01(); }

    double normal(double mean, double sd) { return mean + sd * standard_normal(); }

    double standard_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace elmsb
