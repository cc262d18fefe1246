#include "elmsb/spectral.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "elmsb/format.hpp"

namespace elmsb {

double SpectrumReport::amplitude(std::size_t k) const { return std::hypot(a.at(k), b.at(k)); }

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kAmplitudeFloor = 1e-9;

void check_full_period_grid(std::span<const double> grid) {
    if (grid.size() < 3) throw std::invalid_argument("project_sines: grid needs at least 3 points");
    const double span = grid.back() - grid.front();
    if (std::abs(span - kTwoPi) > 1e-9) {
        throw std::invalid_argument("project_sines: grid spans " + fmt_double(span) + ", expected 2*pi");
    }
    const double h = span / static_cast<double>(grid.size() - 1);
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (std::abs(grid[i] - grid[i - 1] - h) > 1e-9) {
            throw std::invalid_argument("project_sines: non-uniform grid at index " + std::to_string(i));
        }
    }
}

}  // namespace

SpectrumReport project_sines(std::span<const double> values, std::span<const double> grid, std::size_t k_max) {
    if (values.size() != grid.size()) {
        throw std::invalid_argument("project_sines: " + std::to_string(values.size()) + " values on " +
                                    std::to_string(grid.size()) + " grid points");
    }
    check_full_period_grid(grid);

    const std::size_t n = grid.size();
    const double h = (grid.back() - grid.front()) / static_cast<double>(n - 1);
    SpectrumReport out{k_max, std::vector<double>(k_max + 1, 0.0), std::vector<double>(k_max + 1, 0.0)};
    for (std::size_t k = 0; k <= k_max; ++k) {
        double ca = 0.0, cb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
            const double phase = static_cast<double>(k) * grid[i];
            ca += w * values[i] * std::cos(phase);
            cb += w * values[i] * std::sin(phase);
        }
        // ∫cos² over a period is π (2π for k = 0)
        out.a[k] = ca / (k == 0 ? kTwoPi : std::numbers::pi);
        out.b[k] = k == 0 ? 0.0 : cb / std::numbers::pi;
    }
    return out;
}

double relative_l2_error(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) {
        throw std::invalid_argument("relative_l2_error: length mismatch " + std::to_string(pred.size()) + " vs " +
                                    std::to_string(target.size()));
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        num += d * d;
        den += target[i] * target[i];
    }
    if (den == 0.0) throw std::invalid_argument("relative_l2_error: target has zero norm");
    return std::sqrt(num / den);
}

CaptureReport capture_verdict(std::span<const double> pred, std::span<const double> target, double threshold) {
    CaptureReport r;
    r.threshold = threshold;
    r.rel_l2 = relative_l2_error(pred, target);
    r.captured = r.rel_l2 < threshold;
    return r;
}

void attach_frequency_errors(CaptureReport& report, std::span<const double> grid, std::span<const double> pred,
                             std::span<const double> target, std::size_t k_max) {
    const SpectrumReport sp = project_sines(pred, grid, k_max);
    const SpectrumReport st = project_sines(target, grid, k_max);
    report.per_freq_rel_error.clear();
    for (std::size_t k = 0; k <= k_max; ++k) {
        const double ref = st.amplitude(k);
        if (ref <= kAmplitudeFloor) continue;
        report.per_freq_rel_error[static_cast<int>(k)] = std::hypot(sp.a[k] - st.a[k], sp.b[k] - st.b[k]) / ref;
    }
}

CaptureReport capture_verdict(std::span<const double> pred, std::span<const double> target,
                              std::span<const double> grid, std::size_t k_max, double threshold) {
    CaptureReport r = capture_verdict(pred, target, threshold);
    attach_frequency_errors(r, grid, pred, target, k_max);
    return r;
}

void write_spectrum_csv(std::ostream& os, const SpectrumReport& s) {
    os << "k,a_k,b_k\n";
    for (std::size_t k = 0; k <= s.k_max; ++k) os << k << ',' << fmt_double(s.a[k]) << ',' << fmt_double(s.b[k]) << '\n';
}

void write_capture_csv(std::ostream& os, const CaptureReport& c) {
    os << "k,rel_err\n";
    for (const auto& [k, e] : c.per_freq_rel_error) os << k << ',' << fmt_double(e) << '\n';
}

nlohmann::json to_json(const SpectrumReport& s) {
    return {{"k_max", s.k_max}, {"a_k", s.a}, {"b_k", s.b}};
}

nlohmann::json to_json(const CaptureReport& c) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [k, e] : c.per_freq_rel_error) per[std::to_string(k)] = e;
    return {{"rel_l2", c.rel_l2}, {"captured", c.captured}, {"threshold", c.threshold}, {"per_freq_rel_error", per}};
}

}  // namespace elmsb
