#include "elmsb/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "elmsb/bench.hpp"
#include "elmsb/config.hpp"
#include "elmsb/format.hpp"

namespace elmsb {

namespace fs = std::filesystem;

PlotSeries read_predictions_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("plot: missing predictions file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "x,f_true,f_pred") {
        throw std::runtime_error("plot: " + path.string() + " lacks the x,f_true,f_pred header");
    }
    struct Row {
        double x, t, p;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split_list(line);
        if (cells.size() != 3) {
            throw std::runtime_error("plot: " + path.string() + " line " + std::to_string(line_no) +
                                     " does not have three fields");
        }
        rows.push_back({parse_real("x", cells[0]), parse_real("f_true", cells[1]), parse_real("f_pred", cells[2])});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.x < b.x; });
    PlotSeries s;
    for (const auto& r : rows) {
        s.x.push_back(r.x);
        s.f_true.push_back(r.t);
        s.f_pred.push_back(r.p);
    }
    return s;
}

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

std::string num(double v, const char* fmt = "%.2f") {
    char buf[48];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

}  // namespace

std::string render_svg(const PlotSeries& s, const std::string& title) {
    if (s.x.empty()) throw std::invalid_argument("render_svg: empty series");
    if (s.f_true.size() != s.x.size() || s.f_pred.size() != s.x.size()) {
        throw std::invalid_argument("render_svg: series lengths differ");
    }
    const auto [xmin_it, xmax_it] = std::minmax_element(s.x.begin(), s.x.end());
    double x0 = *xmin_it, x1 = *xmax_it;
    double y0 = std::min(*std::min_element(s.f_true.begin(), s.f_true.end()),
                         *std::min_element(s.f_pred.begin(), s.f_pred.end()));
    double y1 = std::max(*std::max_element(s.f_true.begin(), s.f_true.end()),
                         *std::max_element(s.f_pred.begin(), s.f_pred.end()));
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y1 = y0 + 1.0;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };
    auto polyline = [&](const std::vector<double>& ys, const char* color, const char* name) {
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) pts += ' ';
            pts += num(px(s.x[i])) + ',' + num(py(ys[i]));
        }
        return std::string("<polyline data-series=\"") + name + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth, "%.0f") << "\" height=\""
       << num(kHeight, "%.0f") << "\" viewBox=\"0 0 " << num(kWidth, "%.0f") << ' ' << num(kHeight, "%.0f")
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
       << "</text>\n";
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0;
        const double yv = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">"
           << num(xv, "%.3g") << "</text>\n";
        os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">"
           << num(yv, "%.3g") << "</text>\n";
    }
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10) << "\" text-anchor=\"middle\">x</text>\n";
    os << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << num(kTop + ph / 2) << ")\">f(x)</text>\n";
    os << polyline(s.f_true, "#1f4fd8", "target");
    os << polyline(s.f_pred, "#d62728", "prediction");
    os << "<text x=\"" << num(kLeft + pw - 6) << "\" y=\"" << num(kTop + 16)
       << "\" text-anchor=\"end\" fill=\"#1f4fd8\">closed form</text>\n";
    os << "<text x=\"" << num(kLeft + pw - 6) << "\" y=\"" << num(kTop + 32)
       << "\" text-anchor=\"end\" fill=\"#d62728\">prediction</text>\n";
    os << "</svg>\n";
    return os.str();
}

fs::path emit_plot(const RunManifest& run, const fs::path& run_dir) {
    if (run.runs.empty()) throw std::invalid_argument("emit_plot: manifest has no runs");
    std::vector<std::size_t> order(run.runs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return run.runs[a].report.rel_l2 < run.runs[b].report.rel_l2;
    });
    const SeedRun& rep = run.runs[order[(order.size() - 1) / 2]];
    const PlotSeries series = read_predictions_csv(run_dir / ("seed-" + std::to_string(rep.seed)) / "predictions.csv");

    std::string title = run.spec.id + ": " + run.spec.target.label();
    if (run.spec.method == Method::elm) title += ", " + run.spec.init.label() + ", L=" + std::to_string(run.spec.hidden);
    else title += ", gd-ann";
    title += ", seed " + std::to_string(rep.seed) + ", test rel L2 " + num(rep.report.rel_l2, "%.3g");

    const fs::path out = run_dir / "plot.svg";
    write_file_atomic(out, render_svg(series, title));
    return out;
}

}  // namespace elmsb
