#pragma once

// Sinusoidal benchmark targets, their sampled realizations on a closed grid,
// and the interleaved train/test split.

#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace elmsb {

struct GridSpec {
    double x_min = -std::numbers::pi;
    double x_max = std::numbers::pi;
    std::size_t n_points = 1000;

    void validate() const;
};

/// Sum of five even harmonics: sum_{k=1..5} sin(2kx) / (2k).
struct MultiSine {
    friend bool operator==(const MultiSine&, const MultiSine&) = default;
};

/// Single tone -(1/k^2) sin(kx).
struct SingleSine {
    int k = 1;
    friend bool operator==(const SingleSine&, const SingleSine&) = default;
};

struct TargetSpec {
    std::variant<MultiSine, SingleSine> variant;

    static TargetSpec multi_sine() { return {MultiSine{}}; }
    static TargetSpec single_sine(int k) { return {SingleSine{k}}; }

    void validate() const;
    /// Highest frequency present in the target.
    int max_frequency() const;
    /// Nonzero sine amplitudes of the closed form, keyed by frequency.
    std::vector<std::pair<int, double>> sine_amplitudes() const;
    /// "multisine" or "sine-k<k>".
    std::string label() const;
    /// Inverse of label(); throws std::invalid_argument on unknown text.
    static TargetSpec parse(const std::string& text);

    friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

struct Dataset {
    std::vector<double> x;
    std::vector<double> y;
    TargetSpec spec;
    GridSpec grid;

    std::size_t size() const noexcept { return x.size(); }
};

struct SplitSpec {
    std::size_t test_stride = 5;

    void validate() const;
};

std::vector<double> make_grid(const GridSpec& spec);

double eval_target(const TargetSpec& spec, double x);

Dataset sample(const TargetSpec& spec, const GridSpec& grid = {});

/// Index i goes to test when i % stride == stride - 1, otherwise to train.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec = {});

/// Train/test index lists matching split().
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            const SplitSpec& spec);

/// Writes "x,y" followed by one row per sample at full double precision.
void write_csv(std::ostream& os, const Dataset& ds);

}  // namespace elmsb
