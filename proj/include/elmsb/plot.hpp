#pragma once

// SVG overlay of the closed-form target and a prediction, rendered with fixed
// precision so identical inputs give identical bytes.

#include <filesystem>
#include <string>
#include <vector>

namespace elmsb {

struct RunManifest;

struct PlotSeries {
    std::vector<double> x;
    std::vector<double> f_true;
    std::vector<double> f_pred;
};

/// Reads an `x,f_true,f_pred` file; rows are sorted by x.
PlotSeries read_predictions_csv(const std::filesystem::path& path);

/// Two polylines (target, prediction) with axes, tick labels and a title.
/// Throws std::invalid_argument on an empty or ragged series.
std::string render_svg(const PlotSeries& series, const std::string& title);

/// Plots the run whose test error is the median over seeds, reading its
/// predictions.csv under run_dir, and writes run_dir/plot.svg.
std::filesystem::path emit_plot(const RunManifest& run, const std::filesystem::path& run_dir);

}  // namespace elmsb
