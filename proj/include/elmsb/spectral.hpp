#pragma once

// Frequency-resolved error measures standing in for visual curve comparison.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace elmsb {

inline constexpr double kDefaultCaptureThreshold = 0.05;

/// Cosine and sine coefficients for k = 0..k_max. A unit-amplitude tone
/// cos(kx) or sin(kx) projects to exactly 1; a constant c gives a_0 = c.
struct SpectrumReport {
    std::size_t k_max = 0;
    std::vector<double> a;  // cosine coefficients
    std::vector<double> b;  // sine coefficients, b[0] == 0

    /// sqrt(a_k^2 + b_k^2)
    double amplitude(std::size_t k) const;
};

struct CaptureReport {
    double rel_l2 = 0.0;
    std::map<int, double> per_freq_rel_error;
    bool captured = false;
    double threshold = kDefaultCaptureThreshold;
};

/// Trapezoid-weighted projection onto cos(kx), sin(kx). The grid must be
/// uniform and span an interval of length 2π (within 1e-9).
SpectrumReport project_sines(std::span<const double> values, std::span<const double> grid, std::size_t k_max);

/// ||pred - target|| / ||target||. Throws on length mismatch or zero-norm target.
double relative_l2_error(std::span<const double> pred, std::span<const double> target);

/// rel_l2 and verdict only; per-frequency errors are left empty.
CaptureReport capture_verdict(std::span<const double> pred, std::span<const double> target,
                              double threshold = kDefaultCaptureThreshold);

/// rel_l2 and verdict plus per-frequency errors |c_pred - c_target| / |c_target|
/// for every frequency k <= k_max whose target amplitude exceeds 1e-9. All
/// three vectors are sampled on `grid`, which must satisfy project_sines.
CaptureReport capture_verdict(std::span<const double> pred, std::span<const double> target,
                              std::span<const double> grid, std::size_t k_max,
                              double threshold = kDefaultCaptureThreshold);

/// Fills report.per_freq_rel_error from full-period samples, leaving rel_l2
/// and the verdict untouched.
void attach_frequency_errors(CaptureReport& report, std::span<const double> grid, std::span<const double> pred,
                             std::span<const double> target, std::size_t k_max);

void write_spectrum_csv(std::ostream& os, const SpectrumReport& s);
void write_capture_csv(std::ostream& os, const CaptureReport& c);
nlohmann::json to_json(const SpectrumReport& s);
nlohmann::json to_json(const CaptureReport& c);

}  // namespace elmsb
