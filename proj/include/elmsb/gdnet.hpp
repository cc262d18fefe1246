#pragma once

// Fully connected tanh network trained by full-batch gradient descent on the
// mean squared error, plus empirical neural tangent kernel analysis: the
// kernel at a parameter point, its eigendecomposition, and how the training
// residual decays along each eigenvector.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "elmsb/datagen.hpp"
#include "elmsb/linops.hpp"

namespace elmsb {

struct MlpConfig {
    std::vector<std::size_t> layer_sizes{1, 100, 100, 1};
    double learning_rate = 1e-3;
    std::size_t max_iters = 10000;
    std::size_t snapshot_every = 1000;
    std::uint64_t seed = 0;
    /// Relative L2 test error below which training counts as converged.
    double convergence_threshold = 0.05;
    std::size_t check_every = 10;
    /// Stop as soon as the convergence criterion holds.
    bool stop_at_convergence = true;
    /// MSE above this (or non-finite) aborts training.
    double divergence_limit = 1e6;

    void validate() const;
};

/// weights[l] is (layer_sizes[l+1] x layer_sizes[l]); biases[l] has
/// layer_sizes[l+1] entries. Also used as the gradient container.
struct MlpParams {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    std::size_t param_count() const;
    std::size_t n_in() const { return weights.front().cols(); }
    std::size_t n_out() const { return weights.back().rows(); }
    /// Layer-by-layer: weights row-major, then biases.
    std::vector<double> flatten() const;
    /// this += scale * other (shapes must match).
    void axpy(double scale, const MlpParams& other);
    /// Zero-filled parameters with the same shapes.
    MlpParams zeros_like() const;
};

struct ResidualSnapshot {
    std::size_t iter = 0;
    std::vector<double> residual;  // f(x_train) - y_train
};

struct TrainTrace {
    std::vector<double> mse_per_iter;  // entry t: loss before update t
    std::vector<ResidualSnapshot> residual_snapshots;
    std::optional<std::size_t> converged_at;
    std::size_t iterations_run = 0;
    double final_test_rel_l2 = 0.0;
};

MlpParams init_params(const MlpConfig& config);

/// x is N x n_in; returns N x n_out. Hidden layers use tanh, output is linear.
Matrix forward(const MlpParams& params, const Matrix& x);
std::vector<double> forward(const MlpParams& params, std::span<const double> x);

/// (1/N) sum_i ||f(x_i) - y_i||^2
double mse(const MlpParams& params, const Matrix& x, const Matrix& y);

/// Exact gradient of mse() by reverse-mode accumulation.
MlpParams grad_mse(const MlpParams& params, const Matrix& x, const Matrix& y);

using SnapshotHook = std::function<void(std::size_t iter, const MlpParams& params)>;

/// theta <- theta - lr * grad each iteration. Snapshots are taken at every
/// multiple of snapshot_every (including 0) and at the final iteration; the
/// hook, when given, sees the parameters at the same points.
TrainTrace train_full_batch(const MlpConfig& config, const Dataset& train, const Dataset& test,
                            const SnapshotHook& hook = {});
/// Variant that also returns the trained parameters.
TrainTrace train_full_batch(const MlpConfig& config, const Dataset& train, const Dataset& test, MlpParams& params,
                            const SnapshotHook& hook = {});

/// Default cap on Jacobian entries (N x P) for ntk_matrix.
inline constexpr std::size_t kDefaultJacobianBudget = 50'000'000;

/// N x P Jacobian of the (scalar) network output w.r.t. flattened parameters.
Matrix output_jacobian(const MlpParams& params, std::span<const double> x);

/// K = J Jᵀ. Throws std::length_error when N * P exceeds the budget.
Matrix ntk_matrix(const MlpParams& params, std::span<const double> x,
                  std::size_t jacobian_budget = kDefaultJacobianBudget);

/// Eigenpairs with non-increasing eigenvalues. Throws std::invalid_argument
/// when k is not symmetric within 1e-8 (relative to its largest entry).
SymEigen eigendecomp_sym(const Matrix& k);

/// curves[i][s] = |q_iᵀ residual(snapshot s)| for the first n_modes columns of q
/// (all columns when n_modes is 0).
std::vector<std::vector<double>> projected_error_trace(const Matrix& q, const TrainTrace& trace,
                                                       std::size_t n_modes = 0);

/// Exponential decay rate per iteration of each curve, from a least-squares fit
/// of log(curve) against iteration over the stretch before the curve first
/// falls below floor_ratio times its initial value. A curve starting at or
/// below min_initial_ratio times the largest initial value carries no
/// residual to decay; its rate is NaN.
std::vector<double> fit_decay_rates(const std::vector<std::vector<double>>& curves,
                                    std::span<const std::size_t> iters, double floor_ratio = 1e-6,
                                    double min_initial_ratio = 1e-6);

/// Spearman correlation between eigenvalues[i] and rates[i] over the modes with
/// a finite rate; also returns how many modes took part. Throws when fewer than
/// three do.
std::pair<double, std::size_t> decay_rate_correlation(std::span<const double> eigenvalues,
                                                      std::span<const double> rates);

/// Frequency k maximizing the cos/sin projection energy of q on a full-period
/// grid (k = 0 counts the constant mode at equal-norm weight).
int dominant_frequency(std::span<const double> q, std::span<const double> grid);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

struct NtkReport {
    Matrix k;
    std::vector<double> eigenvalues;
    Matrix eigenvectors;
    std::vector<int> dominant_freq;
    std::vector<double> decay_rates;  // empty unless a trace was analyzed
    double symmetry_residual = 0.0;   // max |K - Kᵀ| / max |K|
    double reconstruction_error = 0.0;  // ||K - QΛQᵀ||_F / ||K||_F
};

/// Spearman correlation between mode index (eigenvalue rank) and dominant
/// frequency over the leading n_modes.
double frequency_rank_correlation(const NtkReport& report, std::size_t n_modes);

/// Kernel, spectrum and dominant frequencies at the given parameters.
NtkReport analyze_ntk(const MlpParams& params, std::span<const double> grid,
                      std::size_t jacobian_budget = kDefaultJacobianBudget);

void write_mse_csv(std::ostream& os, const TrainTrace& trace);
void write_ntk_csv(std::ostream& os, const NtkReport& report, std::size_t n_modes = 0);
nlohmann::json to_json(const TrainTrace& trace);
nlohmann::json to_json(const NtkReport& report, std::size_t n_modes = 0);

}  // namespace elmsb
