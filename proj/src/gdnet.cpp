#include "elmsb/gdnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "elmsb/format.hpp"
#include "elmsb/random.hpp"
#include "elmsb/spectral.hpp"

namespace elmsb {

void MlpConfig::validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("MlpConfig: need at least input and output layers");
    if (std::any_of(layer_sizes.begin(), layer_sizes.end(), [](std::size_t s) { return s == 0; })) {
        throw std::invalid_argument("MlpConfig: layer sizes must be positive");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("MlpConfig: learning rate must be finite and non-negative");
    }
    if (check_every == 0) throw std::invalid_argument("MlpConfig: check_every must be >= 1");
}

std::size_t MlpParams::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

std::vector<double> MlpParams::flatten() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.insert(out.end(), weights[l].data().begin(), weights[l].data().end());
        out.insert(out.end(), biases[l].begin(), biases[l].end());
    }
    return out;
}

void MlpParams::axpy(double scale, const MlpParams& other) {
    if (other.weights.size() != weights.size()) throw std::invalid_argument("MlpParams::axpy: layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto& w = weights[l].data();
        const auto& ow = other.weights[l].data();
        auto& b = biases[l];
        const auto& ob = other.biases[l];
        if (w.size() != ow.size() || b.size() != ob.size()) {
            throw std::invalid_argument("MlpParams::axpy: shape mismatch in layer " + std::to_string(l));
        }
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += scale * ow[i];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += scale * ob[i];
    }
}

MlpParams MlpParams::zeros_like() const {
    MlpParams z;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        z.weights.emplace_back(weights[l].rows(), weights[l].cols());
        z.biases.emplace_back(biases[l].size(), 0.0);
    }
    return z;
}

MlpParams init_params(const MlpConfig& config) {
    config.validate();
    RandomStream rng(config.seed);
    MlpParams p;
    for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
        const std::size_t fan_in = config.layer_sizes[l];
        const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Matrix w(config.layer_sizes[l + 1], fan_in);
        for (double& v : w.data()) v = rng.normal(0.0, sd);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(config.layer_sizes[l + 1], 0.0);
    }
    return p;
}

namespace {

// acts[0] = x; acts[l + 1] = output of layer l.
std::vector<Matrix> forward_all(const MlpParams& params, const Matrix& x) {
    if (x.cols() != params.n_in()) {
        throw std::invalid_argument("forward: input " + x.shape_str() + " does not match " +
                                    std::to_string(params.n_in()) + " input features");
    }
    const std::size_t n_layers = params.weights.size();
    std::vector<Matrix> acts;
    acts.reserve(n_layers + 1);
    acts.push_back(x);
    for (std::size_t l = 0; l < n_layers; ++l) {
        Matrix z = matmul_nt(acts.back(), params.weights[l]);
        const auto& b = params.biases[l];
        const bool hidden = l + 1 < n_layers;
        for (std::size_t r = 0; r < z.rows(); ++r) {
            auto row = z.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) {
                row[c] += b[c];
                if (hidden) row[c] = std::tanh(row[c]);
            }
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

void tanh_backprop(Matrix& grad, const Matrix& act) {
    auto& g = grad.data();
    const auto& a = act.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - a[i] * a[i];
}

void require_targets(const Matrix& x, const Matrix& y, std::size_t n_out) {
    if (y.rows() != x.rows() || y.cols() != n_out) {
        throw std::invalid_argument("targets " + y.shape_str() + " do not match inputs " + x.shape_str() +
                                    " and " + std::to_string(n_out) + " outputs");
    }
}

}  // namespace

Matrix forward(const MlpParams& params, const Matrix& x) { return std::move(forward_all(params, x).back()); }

std::vector<double> forward(const MlpParams& params, std::span<const double> x) {
    return forward(params, Matrix::column(x)).data();
}

double mse(const MlpParams& params, const Matrix& x, const Matrix& y) {
    require_targets(x, y, params.n_out());
    const Matrix f = forward(params, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = f.data()[i] - y.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.rows());
}

MlpParams grad_mse(const MlpParams& params, const Matrix& x, const Matrix& y) {
    require_targets(x, y, params.n_out());
    const std::vector<Matrix> acts = forward_all(params, x);
    const std::size_t n_layers = params.weights.size();

    Matrix delta = (2.0 / static_cast<double>(x.rows())) * (acts.back() - y);
    MlpParams g;
    g.weights.resize(n_layers);
    g.biases.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        g.weights[l] = matmul_tn(delta, acts[l]);
        auto& gb = g.biases[l];
        gb.assign(delta.cols(), 0.0);
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            const auto row = delta.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
        }
        if (l > 0) {
            delta = matmul(delta, params.weights[l]);
            tanh_backprop(delta, acts[l]);
        }
    }
    return g;
}

TrainTrace train_full_batch(const MlpConfig& config, const Dataset& train, const Dataset& test,
                            const SnapshotHook& hook) {
    MlpParams params;
    return train_full_batch(config, train, test, params, hook);
}

TrainTrace train_full_batch(const MlpConfig& config, const Dataset& train, const Dataset& test, MlpParams& params,
                            const SnapshotHook& hook) {
    config.validate();
    if (config.layer_sizes.front() != 1 || config.layer_sizes.back() != 1) {
        throw std::invalid_argument("train_full_batch: datasets are scalar; layer sizes must start and end with 1");
    }
    if (train.size() == 0 || test.size() == 0) throw std::invalid_argument("train_full_batch: empty dataset");

    params = init_params(config);
    const Matrix x = Matrix::column(train.x);
    const Matrix y = Matrix::column(train.y);
    const Matrix x_test = Matrix::column(test.x);

    TrainTrace trace;
    trace.mse_per_iter.reserve(config.max_iters + 1);

    auto snapshot = [&](std::size_t iter, const Matrix& pred) {
        ResidualSnapshot s{iter, std::vector<double>(pred.rows())};
        for (std::size_t i = 0; i < pred.rows(); ++i) s.residual[i] = pred(i, 0) - y(i, 0);
        trace.residual_snapshots.push_back(std::move(s));
        if (hook) hook(iter, params);
    };
    auto test_error = [&] { return relative_l2_error(forward(params, x_test).data(), test.y); };

    std::size_t iter = 0;
    for (;; ++iter) {
        const std::vector<Matrix> acts = forward_all(params, x);
        const Matrix& pred = acts.back();
        double loss = 0.0;
        for (std::size_t i = 0; i < pred.rows(); ++i) {
            const double d = pred(i, 0) - y(i, 0);
            loss += d * d;
        }
        loss /= static_cast<double>(pred.rows());
        if (!std::isfinite(loss) || loss > config.divergence_limit) {
            throw std::runtime_error("train_full_batch: diverged at iteration " + std::to_string(iter) +
                                     " (mse " + fmt_double(loss) + ")");
        }
        trace.mse_per_iter.push_back(loss);

        bool stop = iter >= config.max_iters;
        if (iter % config.check_every == 0 && !trace.converged_at) {
            if (test_error() < config.convergence_threshold) {
                trace.converged_at = iter;
                stop = stop || config.stop_at_convergence;
            }
        }
        if (iter % config.snapshot_every == 0 || stop) snapshot(iter, pred);
        if (stop) break;

        // Backward pass reusing this iteration's activations.
        Matrix delta = (2.0 / static_cast<double>(x.rows())) * (pred - y);
        for (std::size_t l = params.weights.size(); l-- > 0;) {
            Matrix gw = matmul_tn(delta, acts[l]);
            std::vector<double> gb(delta.cols(), 0.0);
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                const auto row = delta.row(r);
                for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
            }
            if (l > 0) {
                delta = matmul(delta, params.weights[l]);
                tanh_backprop(delta, acts[l]);
            }
            auto& w = params.weights[l].data();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * gw.data()[i];
            auto& b = params.biases[l];
            for (std::size_t i = 0; i < b.size(); ++i) b[i] -= config.learning_rate * gb[i];
        }
    }
    trace.iterations_run = iter;
    trace.final_test_rel_l2 = test_error();
    return trace;
}

Matrix output_jacobian(const MlpParams& params, std::span<const double> x) {
    if (params.n_in() != 1 || params.n_out() != 1) {
        throw std::invalid_argument("output_jacobian: expects a scalar-input, scalar-output network");
    }
    const std::size_t n = x.size();
    const std::size_t p = params.param_count();
    const std::vector<Matrix> acts = forward_all(params, Matrix::column(x));
    const std::size_t n_layers = params.weights.size();

    // Offsets of each layer's weight block in the flattened parameter vector.
    std::vector<std::size_t> offset(n_layers);
    for (std::size_t l = 0, o = 0; l < n_layers; ++l) {
        offset[l] = o;
        o += params.weights[l].size() + params.biases[l].size();
    }

    Matrix jac(n, p);
    Matrix delta(n, 1, std::vector<double>(n, 1.0));  // per-sample ∂f/∂z of the output layer
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& a = acts[l];
        const std::size_t n_out = delta.cols();
        const std::size_t n_prev = a.cols();
        for (std::size_t i = 0; i < n; ++i) {
            double* jrow = &jac(i, offset[l]);
            const auto drow = delta.row(i);
            const auto arow = a.row(i);
            for (std::size_t r = 0; r < n_out; ++r)
                for (std::size_t c = 0; c < n_prev; ++c) jrow[r * n_prev + c] = drow[r] * arow[c];
            for (std::size_t r = 0; r < n_out; ++r) jrow[n_out * n_prev + r] = drow[r];
        }
        if (l > 0) {
            delta = matmul(delta, params.weights[l]);
            tanh_backprop(delta, acts[l]);
        }
    }
    return jac;
}

Matrix ntk_matrix(const MlpParams& params, std::span<const double> x, std::size_t jacobian_budget) {
    const std::size_t entries = x.size() * params.param_count();
    if (entries > jacobian_budget) {
        throw std::length_error("ntk_matrix: Jacobian of " + std::to_string(x.size()) + " x " +
                                std::to_string(params.param_count()) + " exceeds budget of " +
                                std::to_string(jacobian_budget) + " entries");
    }
    const Matrix jac = output_jacobian(params, x);
    Matrix k = matmul_nt(jac, jac);
    // dgemm can leave last-bit asymmetry; mirror the lower triangle.
    for (std::size_t i = 0; i < k.rows(); ++i)
        for (std::size_t j = 0; j < i; ++j) k(j, i) = k(i, j);
    return k;
}

namespace {

double symmetry_residual(const Matrix& k) {
    double max_abs = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < k.rows(); ++i) {
        for (std::size_t j = 0; j < k.cols(); ++j) {
            max_abs = std::max(max_abs, std::abs(k(i, j)));
            max_diff = std::max(max_diff, std::abs(k(i, j) - k(j, i)));
        }
    }
    return max_abs > 0.0 ? max_diff / max_abs : 0.0;
}

}  // namespace

SymEigen eigendecomp_sym(const Matrix& k) {
    if (k.rows() != k.cols()) throw std::invalid_argument("eigendecomp_sym: non-square " + k.shape_str());
    const double asym = symmetry_residual(k);
    if (asym > 1e-8) {
        throw std::invalid_argument("eigendecomp_sym: matrix is not symmetric (relative residual " +
                                    fmt_double(asym) + ")");
    }
    return eig_sym(k);
}

std::vector<std::vector<double>> projected_error_trace(const Matrix& q, const TrainTrace& trace,
                                                       std::size_t n_modes) {
    if (trace.residual_snapshots.empty()) throw std::invalid_argument("projected_error_trace: no residual snapshots");
    const std::size_t modes = n_modes == 0 ? q.cols() : std::min(n_modes, q.cols());
    std::vector<std::vector<double>> curves(modes);
    for (const auto& snap : trace.residual_snapshots) {
        if (snap.residual.size() != q.rows()) {
            throw std::invalid_argument("projected_error_trace: residual of length " +
                                        std::to_string(snap.residual.size()) + " vs eigenvectors " + q.shape_str());
        }
        const Matrix proj = matmul_tn(q, Matrix::column(snap.residual));
        for (std::size_t i = 0; i < modes; ++i) curves[i].push_back(std::abs(proj(i, 0)));
    }
    return curves;
}

std::vector<double> fit_decay_rates(const std::vector<std::vector<double>>& curves,
                                    std::span<const std::size_t> iters, double floor_ratio,
                                    double min_initial_ratio) {
    double max_initial = 0.0;
    for (const auto& curve : curves) {
        if (curve.size() != iters.size()) throw std::invalid_argument("fit_decay_rates: curve/iteration length mismatch");
        if (!curve.empty()) max_initial = std::max(max_initial, curve.front());
    }
    std::vector<double> rates;
    rates.reserve(curves.size());
    for (const auto& curve : curves) {
        if (curve.size() < 2 || !(curve.front() > min_initial_ratio * max_initial)) {
            rates.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        std::size_t end = 1;
        while (end < curve.size() && curve[end] > floor_ratio * curve.front()) ++end;
        end = std::max<std::size_t>(end, 2);

        double st = 0, sy = 0, stt = 0, sty = 0;
        std::size_t m = 0;
        for (std::size_t s = 0; s < end; ++s) {
            if (curve[s] <= 0.0) continue;
            const double t = static_cast<double>(iters[s]);
            const double ly = std::log(curve[s]);
            st += t;
            sy += ly;
            stt += t * t;
            sty += t * ly;
            ++m;
        }
        const double denom = static_cast<double>(m) * stt - st * st;
        rates.push_back(m >= 2 && denom > 0.0 ? -(static_cast<double>(m) * sty - st * sy) / denom
                                              : std::numeric_limits<double>::quiet_NaN());
    }
    return rates;
}

int dominant_frequency(std::span<const double> q, std::span<const double> grid) {
    if (q.size() != grid.size()) throw std::invalid_argument("dominant_frequency: length mismatch");
    const std::size_t k_max = (grid.size() - 1) / 2;
    const SpectrumReport s = project_sines(q, grid, k_max);
    int best = 0;
    double best_energy = -1.0;
    for (std::size_t k = 0; k <= k_max; ++k) {
        const double e = k == 0 ? 2.0 * s.a[0] * s.a[0] : s.a[k] * s.a[k] + s.b[k] * s.b[k];
        if (e > best_energy) {
            best_energy = e;
            best = static_cast<int>(k);
        }
    }
    return best;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double mean = (n + 1.0) / 2.0;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - mean) * (rb[i] - mean);
        saa += (ra[i] - mean) * (ra[i] - mean);
        sbb += (rb[i] - mean) * (rb[i] - mean);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

std::pair<double, std::size_t> decay_rate_correlation(std::span<const double> eigenvalues,
                                                      std::span<const double> rates) {
    if (rates.size() > eigenvalues.size()) {
        throw std::invalid_argument("decay_rate_correlation: more rates than eigenvalues");
    }
    std::vector<double> lam, rate;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!std::isfinite(rates[i])) continue;
        lam.push_back(eigenvalues[i]);
        rate.push_back(rates[i]);
    }
    if (lam.size() < 3) {
        throw std::invalid_argument("decay_rate_correlation: only " + std::to_string(lam.size()) +
                                    " modes carry a measurable rate");
    }
    return {spearman(rate, lam), lam.size()};
}

double frequency_rank_correlation(const NtkReport& report, std::size_t n_modes) {
    const std::size_t modes = std::min(n_modes, report.dominant_freq.size());
    std::vector<double> rank(modes), freq(modes);
    for (std::size_t i = 0; i < modes; ++i) {
        rank[i] = static_cast<double>(i);
        freq[i] = static_cast<double>(report.dominant_freq[i]);
    }
    return spearman(rank, freq);
}

NtkReport analyze_ntk(const MlpParams& params, std::span<const double> grid, std::size_t jacobian_budget) {
    NtkReport r;
    r.k = ntk_matrix(params, grid, jacobian_budget);
    r.symmetry_residual = symmetry_residual(r.k);
    SymEigen eig = eigendecomp_sym(r.k);
    r.eigenvalues = std::move(eig.values);
    r.eigenvectors = std::move(eig.vectors);

    Matrix scaled = r.eigenvectors;
    for (std::size_t i = 0; i < scaled.rows(); ++i)
        for (std::size_t j = 0; j < scaled.cols(); ++j) scaled(i, j) *= r.eigenvalues[j];
    const double k_norm = r.k.frobenius_norm();
    const double rec = (matmul_nt(scaled, r.eigenvectors) - r.k).frobenius_norm();
    r.reconstruction_error = k_norm > 0.0 ? rec / k_norm : rec;

    r.dominant_freq.reserve(r.eigenvectors.cols());
    for (std::size_t j = 0; j < r.eigenvectors.cols(); ++j) {
        r.dominant_freq.push_back(dominant_frequency(r.eigenvectors.col(j), grid));
    }
    return r;
}

void write_mse_csv(std::ostream& os, const TrainTrace& trace) {
    os << "iter,mse\n";
    for (std::size_t t = 0; t < trace.mse_per_iter.size(); ++t) os << t << ',' << fmt_double(trace.mse_per_iter[t]) << '\n';
}

void write_ntk_csv(std::ostream& os, const NtkReport& report, std::size_t n_modes) {
    const std::size_t modes = n_modes == 0 ? report.eigenvalues.size() : std::min(n_modes, report.eigenvalues.size());
    os << "mode,eigenvalue,dominant_freq,decay_rate\n";
    for (std::size_t i = 0; i < modes; ++i) {
        os << i << ',' << fmt_double(report.eigenvalues[i]) << ',' << report.dominant_freq[i] << ',';
        if (i < report.decay_rates.size() && std::isfinite(report.decay_rates[i])) os << fmt_double(report.decay_rates[i]);
        os << '\n';
    }
}

nlohmann::json to_json(const TrainTrace& trace) {
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& s : trace.residual_snapshots) snaps.push_back({{"iter", s.iter}, {"residual", s.residual}});
    return {{"mse_per_iter", trace.mse_per_iter},
            {"residual_snapshots", snaps},
            {"converged_at", trace.converged_at ? nlohmann::json(*trace.converged_at) : nlohmann::json(nullptr)},
            {"iterations_run", trace.iterations_run},
            {"final_test_rel_l2", trace.final_test_rel_l2}};
}

nlohmann::json to_json(const NtkReport& report, std::size_t n_modes) {
    const std::size_t modes = n_modes == 0 ? report.eigenvalues.size() : std::min(n_modes, report.eigenvalues.size());
    nlohmann::json j = {{"n", report.k.rows()},
                        {"symmetry_residual", report.symmetry_residual},
                        {"reconstruction_error", report.reconstruction_error}};
    j["eigenvalues"] = std::vector<double>(report.eigenvalues.begin(), report.eigenvalues.begin() + static_cast<std::ptrdiff_t>(modes));
    j["dominant_freq"] = std::vector<int>(report.dominant_freq.begin(), report.dominant_freq.begin() + static_cast<std::ptrdiff_t>(modes));
    if (!report.decay_rates.empty()) j["decay_rates"] = report.decay_rates;
    return j;
}

}  // namespace elmsb
