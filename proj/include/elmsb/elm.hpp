#pragma once

// Extreme Learning Machine: a random, fixed tanh hidden layer followed by a
// linear output layer solved in one shot with the Moore-Penrose
// pseudoinverse of the hidden-layer output matrix.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "elmsb/datagen.hpp"
#include "elmsb/linops.hpp"
#include "elmsb/random.hpp"

namespace elmsb {

/// Relative singular-value cutoff used for the output-layer solve unless the
/// configuration overrides it. Saturated or very smooth tanh features leave
/// H with a long tail of singular values that carry rounding noise only.
inline constexpr double kElmDefaultRcond = 1e-10;

struct UniformInit {
    double low = 0.0;
    double high = 1.0;
    friend bool operator==(const UniformInit&, const UniformInit&) = default;
};

struct NormalInit {
    double mean = 0.0;
    double sd = 1.0;
    friend bool operator==(const NormalInit&, const NormalInit&) = default;
};

/// Distribution shared by the first-layer weights and the hidden biases.
struct WeightInit {
    std::variant<UniformInit, NormalInit> variant = NormalInit{};

    static WeightInit normal(double sd, double mean = 0.0) { return {NormalInit{mean, sd}}; }
    static WeightInit uniform(double low = 0.0, double high = 1.0) { return {UniformInit{low, high}}; }

    void validate() const;
    double draw(RandomStream& rng) const;
    /// e.g. "normal(0,20)" or "uniform(0,1)".
    std::string label() const;

    friend bool operator==(const WeightInit&, const WeightInit&) = default;
};

enum class Activation { tanh };

struct ElmConfig {
    std::size_t n_in = 1;
    std::size_t n_out = 1;
    std::size_t hidden = 800;
    Activation activation = Activation::tanh;
    WeightInit init;
    std::uint64_t seed = 0;
    PinvOptions rcond{kElmDefaultRcond};

    void validate() const;
};

struct RandomLayer {
    Matrix w;               // hidden x n_in
    std::vector<double> b;  // hidden
};

struct FitReport {
    double train_rmse = 0.0;
    double train_rel_l2 = 0.0;
    std::size_t rank_h = 0;
    double fit_wall_time_ms = 0.0;
};

class ElmModel {
public:
    ElmModel(ElmConfig config, RandomLayer layer);

    const ElmConfig& config() const noexcept { return config_; }
    const Matrix& w() const noexcept { return layer_.w; }
    const std::vector<double>& b() const noexcept { return layer_.b; }
    bool fitted() const noexcept { return beta_.has_value(); }
    /// Throws std::logic_error before fit.
    const Matrix& beta() const;
    /// Shape must be hidden x n_out.
    void set_beta(Matrix beta);

private:
    ElmConfig config_;
    RandomLayer layer_;
    std::optional<Matrix> beta_;
};

/// Weights are drawn row-major first, then the biases, from one stream seeded
/// with config.seed.
RandomLayer init_random(const ElmConfig& config);

/// Entry (j, l) = tanh(sum_i w[l, i] x[j, i] + b[l]). Throws if any entry is
/// non-finite, naming the first offending hidden node.
Matrix hidden_matrix(const Matrix& w, std::span<const double> b, const Matrix& x);

/// Fits on inputs x (N x n_in) and targets t (N x n_out).
std::pair<ElmModel, FitReport> fit(const ElmConfig& config, const Matrix& x, const Matrix& t);
/// Convenience overload for scalar datasets.
std::pair<ElmModel, FitReport> fit(const ElmConfig& config, const Dataset& train);

/// hidden_matrix(w, b, x) * beta.
Matrix predict(const ElmModel& model, const Matrix& x);
std::vector<double> predict(const ElmModel& model, std::span<const double> x);

nlohmann::json to_json(const WeightInit& init);
WeightInit weight_init_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ElmConfig& config);
ElmConfig elm_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ElmModel& model);
ElmModel elm_model_from_json(const nlohmann::json& j);

}  // namespace elmsb
