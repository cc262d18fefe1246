#pragma once

// Experiment orchestration: declarative experiment specs, per-seed runs with
// majority verdicts, SD / L / frequency sweeps, the gradient-descent baselines
// and the NTK report. Artifacts are written atomically under an output
// directory when one is given.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "elmsb/config.hpp"
#include "elmsb/datagen.hpp"
#include "elmsb/elm.hpp"
#include "elmsb/gdnet.hpp"
#include "elmsb/spectral.hpp"

namespace elmsb {

inline constexpr std::array<std::uint64_t, 5> kDefaultSeeds{1, 2, 3, 4, 5};
inline constexpr const char* kToolVersion = "0.1.0";
/// Learning rate of the gradient-descent baselines (snapshots and Table 1);
/// stable for the default network on the 800-point training set.
inline constexpr double kGdBaselineLearningRate = 1e-2;

enum class Method { elm, gd_ann };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct ExperimentSpec {
    std::string id = "experiment";
    TargetSpec target = TargetSpec::multi_sine();
    Method method = Method::elm;
    WeightInit init = WeightInit::normal(1.0);
    std::size_t hidden = 800;
    std::vector<std::uint64_t> seeds{kDefaultSeeds.begin(), kDefaultSeeds.end()};
    double threshold = kDefaultCaptureThreshold;
    GridSpec grid;
    SplitSpec split;
    double rcond = kElmDefaultRcond;
    /// gd-ann only; the seed field is replaced by each run seed.
    MlpConfig mlp;
    /// Expected majority verdict; unset means the run is recorded, not judged.
    std::optional<bool> expect_captured;

    void validate() const;
};

/// The highest frequency present in the target, as a first-layer SD.
double suggested_sd(const TargetSpec& target);

/// Applies recognized keys on top of base. Unknown keys are an error.
ExperimentSpec spec_from_key_values(const KeyValues& kv, ExperimentSpec base = {});

nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j);

struct SeedRun {
    std::uint64_t seed = 0;
    CaptureReport report;  // test-set verdict; per-frequency errors over the full grid
    double train_rel_l2 = 0.0;
    std::size_t rank_h = 0;  // ELM only
    double fit_ms = 0.0;
    std::optional<std::size_t> converged_at;  // gd-ann only
    std::vector<double> test_x, test_true, test_pred;
    SpectrumReport spectrum;  // of the full-grid prediction
};

struct RunManifest {
    ExperimentSpec spec;
    std::vector<SeedRun> runs;
    double median_rel_l2 = 0.0;
    std::size_t captured_count = 0;
    bool captured = false;  // strict majority of runs
    double median_fit_ms = 0.0;
    std::vector<std::string> artifacts;  // relative to out_dir / spec.id
    std::string tool_version = kToolVersion;
    std::string timestamp;

    /// True when no expectation is set or the verdict equals it.
    bool matches_expectation() const;
};

struct RunOptions {
    /// Artifacts go to out_dir / spec.id; nothing is written when unset.
    std::optional<std::filesystem::path> out_dir;
};

RunManifest run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {});

nlohmann::json to_json(const RunManifest& m);
/// Spec and per-seed verdicts back from manifest.json (sample vectors are not
/// stored there and stay empty).
RunManifest load_manifest(const std::filesystem::path& path);

struct SweepPoint {
    double value = 0.0;
    double median_rel_l2 = 0.0;
    bool captured = false;
    double median_fit_ms = 0.0;
};

struct SweepResult {
    std::string id;
    std::string axis;  // "sd", "L" or "k"
    std::vector<SweepPoint> points;  // strictly increasing values
    std::vector<RunManifest> runs;   // parallel to points

    std::vector<bool> verdicts() const;
    bool errors_non_increasing() const;
};

/// One run per SD (sorted ascending) with a Normal{0, sd} first layer.
SweepResult run_sd_sweep(const ExperimentSpec& base, std::span<const double> sds, const RunOptions& opts = {});
/// One run per hidden width (sorted ascending).
SweepResult run_l_sweep(const ExperimentSpec& base, std::span<const std::size_t> ls, const RunOptions& opts = {});

nlohmann::json to_json(const SweepResult& s);

struct Table1Row {
    int k = 0;
    std::uint64_t seed = 0;
    std::optional<std::size_t> converged_at;
    std::size_t iterations_run = 0;
    double final_test_rel_l2 = 0.0;
    double wall_s = 0.0;
};

struct Table1Options {
    std::vector<std::uint64_t> seeds{kDefaultSeeds.begin(), kDefaultSeeds.end()};
    /// Stop everything once one seed can no longer be strictly increasing.
    bool stop_at_first_failure = false;
    GridSpec grid;
    SplitSpec split;
    std::optional<std::filesystem::path> out_dir;
};

struct Table1Result {
    std::vector<int> ks;
    std::vector<Table1Row> rows;  // seed-major, ks in order; may stop early

    /// Every seed converged at every k, strictly later as k grows.
    bool strictly_increasing_all_seeds(std::size_t n_seeds) const;
};

/// ks are trained in the given order per seed; a seed stops at its first
/// non-converged k since later ones cannot restore the ordering.
Table1Result run_table1(std::span<const int> ks, const MlpConfig& mlp, const Table1Options& opts = {});

nlohmann::json to_json(const Table1Result& t);

/// Per-frequency errors of the gradient-descent network at one snapshot.
struct SnapshotSpectrum {
    std::uint64_t seed = 0;
    std::size_t iter = 0;
    CaptureReport report;  // full-grid, per-frequency
    std::vector<double> grid_pred;
};

/// One training run per seed, sampled after each of at_iters updates; results
/// are seed-major in at_iters order.
std::vector<SnapshotSpectrum> run_gd_snapshots(const TargetSpec& target, const MlpConfig& mlp,
                                               std::span<const std::uint64_t> seeds,
                                               std::span<const std::size_t> at_iters, const GridSpec& grid = {},
                                               const SplitSpec& split = {});

struct NtkRunOptions {
    std::size_t n_samples = 128;
    std::size_t n_modes = 20;
    /// Gradient-descent iterations for the decay-rate measurement (0 skips it).
    std::size_t train_iters = 3000;
    TargetSpec target = TargetSpec::multi_sine();
    std::size_t jacobian_budget = kDefaultJacobianBudget;
    std::optional<std::filesystem::path> out_dir;
};

struct NtkRun {
    std::uint64_t seed = 0;
    NtkReport report;
    double min_eigenvalue_ratio = 0.0;  // lambda_min / lambda_max
    double frequency_rank_rho = 0.0;
    double decay_rank_rho = 0.0;
    std::size_t decay_modes = 0;  // modes with a measurable rate
    std::vector<std::string> artifacts;
};

/// Kernel at initialization on an n_samples closed grid, plus the decay rates
/// of the training residual along its leading eigenvectors.
NtkRun run_ntk_report(const MlpConfig& mlp, const NtkRunOptions& opts = {});

nlohmann::json to_json(const NtkRun& r);

/// The ELM figure scenarios with their expected verdicts.
std::vector<ExperimentSpec> builtin_scenario_specs();
/// Throws std::invalid_argument for an unknown id.
ExperimentSpec figure_spec(const std::string& id);

/// Writes bytes to path via a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace elmsb
