#include "elmsb/datagen.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "elmsb/format.hpp"

namespace elmsb {

void GridSpec::validate() const {
    if (!(x_min < x_max)) throw std::invalid_argument("GridSpec: x_min must be below x_max");
    if (n_points < 2) throw std::invalid_argument("GridSpec: need at least 2 points");
}

void TargetSpec::validate() const {
    if (const auto* s = std::get_if<SingleSine>(&variant); s && s->k < 1) {
        throw std::invalid_argument("TargetSpec: single-sine frequency must be >= 1, got " + std::to_string(s->k));
    }
}

int TargetSpec::max_frequency() const {
    if (const auto* s = std::get_if<SingleSine>(&variant)) return s->k;
    return 10;
}

std::vector<std::pair<int, double>> TargetSpec::sine_amplitudes() const {
    if (const auto* s = std::get_if<SingleSine>(&variant)) {
        return {{s->k, -1.0 / (static_cast<double>(s->k) * s->k)}};
    }
    std::vector<std::pair<int, double>> out;
    for (int j = 1; j <= 5; ++j) out.emplace_back(2 * j, 1.0 / (2.0 * j));
    return out;
}

std::string TargetSpec::label() const {
    if (const auto* s = std::get_if<SingleSine>(&variant)) return "sine-k" + std::to_string(s->k);
    return "multisine";
}

TargetSpec TargetSpec::parse(const std::string& text) {
    if (text == "multisine") return multi_sine();
    if (text.rfind("sine-k", 0) == 0) {
        std::size_t used = 0;
        const int k = std::stoi(text.substr(6), &used);
        if (used != text.size() - 6) throw std::invalid_argument("TargetSpec: bad frequency in '" + text + "'");
        TargetSpec spec = single_sine(k);
        spec.validate();
        return spec;
    }
    throw std::invalid_argument("TargetSpec: unknown target '" + text + "' (expected multisine or sine-k<k>)");
}

void SplitSpec::validate() const {
    if (test_stride < 2) throw std::invalid_argument("SplitSpec: test_stride must be >= 2");
}

std::vector<double> make_grid(const GridSpec& spec) {
    spec.validate();
    std::vector<double> x(spec.n_points);
    const double step = (spec.x_max - spec.x_min) / static_cast<double>(spec.n_points - 1);
    for (std::size_t i = 0; i < spec.n_points; ++i) x[i] = spec.x_min + step * static_cast<double>(i);
    x.back() = spec.x_max;
    return x;
}

double eval_target(const TargetSpec& spec, double x) {
    if (const auto* s = std::get_if<SingleSine>(&spec.variant)) {
        const double k = s->k;
        return -std::sin(k * x) / (k * k);
    }
    double sum = 0.0;
    for (int j = 1; j <= 5; ++j) sum += std::sin(2.0 * j * x) / (2.0 * j);
    return sum;
}

Dataset sample(const TargetSpec& spec, const GridSpec& grid) {
    spec.validate();
    Dataset ds{make_grid(grid), {}, spec, grid};
    ds.y.reserve(ds.x.size());
    for (double xi : ds.x) ds.y.push_back(eval_target(spec, xi));
    return ds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            const SplitSpec& spec) {
    spec.validate();
    if (n < spec.test_stride) {
        throw std::invalid_argument("split: dataset of " + std::to_string(n) + " points is smaller than stride " +
                                    std::to_string(spec.test_stride));
    }
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) {
        (i % spec.test_stride == spec.test_stride - 1 ? test : train).push_back(i);
    }
    return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    const auto [train_idx, test_idx] = split_indices(ds.size(), spec);
    auto gather = [&](const std::vector<std::size_t>& idx) {
        Dataset out{{}, {}, ds.spec, ds.grid};
        out.x.reserve(idx.size());
        out.y.reserve(idx.size());
        for (std::size_t i : idx) {
            out.x.push_back(ds.x[i]);
            out.y.push_back(ds.y[i]);
        }
        return out;
    };
    return {gather(train_idx), gather(test_idx)};
}

void write_csv(std::ostream& os, const Dataset& ds) {
    os << "x,y\n";
    for (std::size_t i = 0; i < ds.size(); ++i) os << fmt_double(ds.x[i]) << ',' << fmt_double(ds.y[i]) << '\n';
}

}  // namespace elmsb
