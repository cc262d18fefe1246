#include "elmsb/elm.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "elmsb/format.hpp"

namespace elmsb {

void WeightInit::validate() const {
    if (const auto* u = std::get_if<UniformInit>(&variant)) {
        if (!(u->low < u->high)) throw std::invalid_argument("WeightInit: uniform requires low < high");
    } else if (const auto* n = std::get_if<NormalInit>(&variant)) {
        if (!(n->sd > 0.0)) throw std::invalid_argument("WeightInit: normal requires sd > 0");
    }
}

double WeightInit::draw(RandomStream& rng) const {
    if (const auto* u = std::get_if<UniformInit>(&variant)) return rng.uniform(u->low, u->high);
    const auto& n = std::get<NormalInit>(variant);
    return rng.normal(n.mean, n.sd);
}

std::string WeightInit::label() const {
    if (const auto* u = std::get_if<UniformInit>(&variant)) {
        return "uniform(" + fmt_double(u->low) + "," + fmt_double(u->high) + ")";
    }
    const auto& n = std::get<NormalInit>(variant);
    return "normal(" + fmt_double(n.mean) + "," + fmt_double(n.sd) + ")";
}

void ElmConfig::validate() const {
    if (n_in == 0 || n_out == 0 || hidden == 0) {
        throw std::invalid_argument("ElmConfig: n_in, n_out and hidden must all be >= 1");
    }
    init.validate();
    if (rcond.rcond < 0.0 || rcond.rcond >= 1.0) throw std::invalid_argument("ElmConfig: rcond must lie in [0, 1)");
}

ElmModel::ElmModel(ElmConfig config, RandomLayer layer) : config_(std::move(config)), layer_(std::move(layer)) {
    if (layer_.w.rows() != config_.hidden || layer_.w.cols() != config_.n_in || layer_.b.size() != config_.hidden) {
        throw std::invalid_argument("ElmModel: random layer " + layer_.w.shape_str() + " does not match config");
    }
}

const Matrix& ElmModel::beta() const {
    if (!beta_) throw std::logic_error("ElmModel: model has not been fitted");
    return *beta_;
}

void ElmModel::set_beta(Matrix beta) {
    if (beta.rows() != config_.hidden || beta.cols() != config_.n_out) {
        throw std::invalid_argument("ElmModel: beta " + beta.shape_str() + " must be " +
                                    std::to_string(config_.hidden) + "x" + std::to_string(config_.n_out));
    }
    beta_ = std::move(beta);
}

RandomLayer init_random(const ElmConfig& config) {
    config.validate();
    RandomStream rng(config.seed);
    RandomLayer layer{Matrix(config.hidden, config.n_in), std::vector<double>(config.hidden)};
    for (double& v : layer.w.data()) v = config.init.draw(rng);
    for (double& v : layer.b) v = config.init.draw(rng);
    return layer;
}

Matrix hidden_matrix(const Matrix& w, std::span<const double> b, const Matrix& x) {
    if (x.cols() != w.cols()) {
        throw std::invalid_argument("hidden_matrix: inputs " + x.shape_str() + " incompatible with weights " +
                                    w.shape_str());
    }
    if (b.size() != w.rows()) {
        throw std::invalid_argument("hidden_matrix: " + std::to_string(b.size()) + " biases for " +
                                    std::to_string(w.rows()) + " nodes");
    }
    Matrix h = matmul_nt(x, w);
    for (std::size_t j = 0; j < h.rows(); ++j) {
        auto row = h.row(j);
        for (std::size_t l = 0; l < row.size(); ++l) {
            row[l] = std::tanh(row[l] + b[l]);
            if (!std::isfinite(row[l])) {
                throw std::runtime_error("hidden_matrix: non-finite output at hidden node " + std::to_string(l) +
                                         " for sample " + std::to_string(j));
            }
        }
    }
    return h;
}

std::pair<ElmModel, FitReport> fit(const ElmConfig& config, const Matrix& x, const Matrix& t) {
    config.validate();
    if (x.rows() == 0) throw std::invalid_argument("fit: empty training set");
    if (x.rows() != t.rows()) {
        throw std::invalid_argument("fit: inputs " + x.shape_str() + " and targets " + t.shape_str() +
                                    " differ in sample count");
    }
    if (x.cols() != config.n_in || t.cols() != config.n_out) {
        throw std::invalid_argument("fit: data shapes " + x.shape_str() + " / " + t.shape_str() +
                                    " do not match n_in/n_out");
    }
    if (!x.all_finite()) throw std::invalid_argument("fit: non-finite training input");

    ElmModel model(config, init_random(config));
    FitReport report;

    const auto start = std::chrono::steady_clock::now();
    const Matrix h = hidden_matrix(model.w(), model.b(), x);
    model.set_beta(solve_least_squares(h, t, config.rcond, &report.rank_h));
    const auto stop = std::chrono::steady_clock::now();
    report.fit_wall_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();

    const Matrix residual = matmul(h, model.beta()) - t;
    const double res_norm = residual.frobenius_norm();
    const double t_norm = t.frobenius_norm();
    report.train_rmse = res_norm / std::sqrt(static_cast<double>(t.size()));
    report.train_rel_l2 = t_norm > 0.0 ? res_norm / t_norm : res_norm;
    return {std::move(model), report};
}

std::pair<ElmModel, FitReport> fit(const ElmConfig& config, const Dataset& train) {
    return fit(config, Matrix::column(train.x), Matrix::column(train.y));
}

Matrix predict(const ElmModel& model, const Matrix& x) {
    return matmul(hidden_matrix(model.w(), model.b(), x), model.beta());
}

std::vector<double> predict(const ElmModel& model, std::span<const double> x) {
    if (model.config().n_in != 1 || model.config().n_out != 1) {
        throw std::invalid_argument("predict: scalar overload needs n_in == n_out == 1");
    }
    return predict(model, Matrix::column(x)).data();
}

nlohmann::json to_json(const WeightInit& init) {
    if (const auto* u = std::get_if<UniformInit>(&init.variant)) {
        return {{"dist", "uniform"}, {"low", u->low}, {"high", u->high}};
    }
    const auto& n = std::get<NormalInit>(init.variant);
    return {{"dist", "normal"}, {"mean", n.mean}, {"sd", n.sd}};
}

WeightInit weight_init_from_json(const nlohmann::json& j) {
    const std::string dist = j.at("dist").get<std::string>();
    WeightInit init;
    if (dist == "uniform") {
        init = WeightInit::uniform(j.at("low").get<double>(), j.at("high").get<double>());
    } else if (dist == "normal") {
        init = WeightInit::normal(j.at("sd").get<double>(), j.at("mean").get<double>());
    } else {
        throw std::invalid_argument("WeightInit: unknown distribution '" + dist + "'");
    }
    init.validate();
    return init;
}

nlohmann::json to_json(const ElmConfig& c) {
    return {{"n_in", c.n_in},   {"n_out", c.n_out},           {"hidden", c.hidden},      {"activation", "tanh"},
            {"init", to_json(c.init)}, {"seed", c.seed}, {"rcond", c.rcond.rcond}};
}

ElmConfig elm_config_from_json(const nlohmann::json& j) {
    ElmConfig c;
    c.n_in = j.at("n_in").get<std::size_t>();
    c.n_out = j.at("n_out").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    if (j.at("activation").get<std::string>() != "tanh") throw std::invalid_argument("ElmConfig: unsupported activation");
    c.init = weight_init_from_json(j.at("init"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.rcond.rcond = j.at("rcond").get<double>();
    c.validate();
    return c;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
}

}  // namespace

nlohmann::json to_json(const ElmModel& model) {
    nlohmann::json j = {{"config", to_json(model.config())}, {"w", matrix_json(model.w())}, {"b", model.b()}};
    j["beta"] = model.fitted() ? matrix_json(model.beta()) : nlohmann::json(nullptr);
    return j;
}

ElmModel elm_model_from_json(const nlohmann::json& j) {
    ElmModel model(elm_config_from_json(j.at("config")),
                   RandomLayer{matrix_from_json(j.at("w")), j.at("b").get<std::vector<double>>()});
    if (!j.at("beta").is_null()) model.set_beta(matrix_from_json(j.at("beta")));
    return model;
}

}  // namespace elmsb
