#include "idlfm/model_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace idlfm {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "idlfm-model";
constexpr int kVersion = 1;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* block) {
    if (!j.is_object()) {
        throw std::invalid_argument(std::string(block) + " config must be a JSON object");
    }
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) {
            throw std::invalid_argument("unknown key '" + item.key() + "' in " + block + " config");
        }
    }
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

const json& require(const json& doc, const char* key) {
    if (!doc.contains(key)) {
        throw std::invalid_argument(std::string("model file lacks '") + key + "'");
    }
    return doc.at(key);
}

}  // namespace

json to_json(const FittedModel& model) {
    const ModelParams& p = model.params;
    const auto& basis = p.basis();
    const std::size_t I = p.num_subjects(), J = p.num_series(), R = p.rank(), M = p.num_basis();

    std::vector<double> F;
    F.reserve(J * R);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t r = 0; r < R; ++r) {
            F.push_back(p.loadings()(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)));
        }
    }
    std::vector<double> W;
    W.reserve(I * R * M);
    for (std::size_t i = 0; i < I; ++i) {
        const auto& w = p.weights(i);
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t m = 0; m < M; ++m) {
                W.push_back(w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m)));
            }
        }
    }

    std::vector<double> means, stds;
    std::vector<bool> degenerate;
    for (const auto& c : model.stats.cells) {
        means.push_back(c.mean);
        stds.push_back(c.std);
        degenerate.push_back(c.degenerate);
    }

    json doc;
    doc["format"] = kFormat;
    doc["version"] = kVersion;
    doc["num_subjects"] = I;
    doc["num_series"] = J;
    doc["rank"] = R;
    doc["subject_ids"] = model.subject_ids;
    doc["series_ids"] = model.series_ids;
    doc["basis"] = {{"degree", basis.degree()},
                    {"num_basis", M},
                    {"domain_end", basis.domain_end()},
                    {"knots", std::vector<double>(basis.knots().begin(), basis.knots().end())}};
    doc["F"] = F;
    doc["W"] = W;
    doc["standardization"] = {{"convention", model.stats.convention},
                              {"mean", means},
                              {"std", stds},
                              {"degenerate", degenerate}};
    doc["seed"] = model.seed;
    doc["config"] = model.config;
    return doc;
}

FittedModel model_from_json(const json& doc) {
    try {
        if (require(doc, "format").get<std::string>() != kFormat) {
            throw std::invalid_argument("not an idlfm model file");
        }
        if (require(doc, "version").get<int>() != kVersion) {
            throw std::invalid_argument("unsupported model file version");
        }
        const auto I = require(doc, "num_subjects").get<std::size_t>();
        const auto J = require(doc, "num_series").get<std::size_t>();
        const auto R = require(doc, "rank").get<std::size_t>();
        const json& b = require(doc, "basis");
        BSplineBasis basis(b.at("domain_end").get<double>(), b.at("num_basis").get<std::size_t>(),
                           b.at("degree").get<std::size_t>());
        const auto knots = b.at("knots").get<std::vector<double>>();
        if (!std::equal(knots.begin(), knots.end(), basis.knots().begin(), basis.knots().end())) {
            throw std::invalid_argument("stored knots differ from the clamped uniform knot vector");
        }
        const std::size_t M = basis.num_basis();

        const auto F = require(doc, "F").get<std::vector<double>>();
        const auto W = require(doc, "W").get<std::vector<double>>();
        if (F.size() != J * R || W.size() != I * R * M) {
            throw std::invalid_argument("parameter arrays do not match the declared shapes");
        }
        Eigen::MatrixXd loadings(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(R));
        for (std::size_t j = 0; j < J; ++j) {
            for (std::size_t r = 0; r < R; ++r) {
                loadings(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) = F[j * R + r];
            }
        }
        std::vector<Eigen::MatrixXd> weights(I, Eigen::MatrixXd(static_cast<Eigen::Index>(R),
                                                                static_cast<Eigen::Index>(M)));
        for (std::size_t i = 0; i < I; ++i) {
            for (std::size_t r = 0; r < R; ++r) {
                for (std::size_t m = 0; m < M; ++m) {
                    weights[i](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m)) =
                        W[(i * R + r) * M + m];
                }
            }
        }

        FittedModel model{ModelParams(std::move(loadings), std::move(weights), std::move(basis)),
                          require(doc, "subject_ids").get<std::vector<std::string>>(),
                          require(doc, "series_ids").get<std::vector<std::string>>(),
                          {},
                          doc.value("seed", std::uint64_t{0}),
                          doc.value("config", json::object())};
        if (model.subject_ids.size() != I || model.series_ids.size() != J) {
            throw std::invalid_argument("label lists do not match the declared shapes");
        }

        const json& s = require(doc, "standardization");
        const auto means = s.at("mean").get<std::vector<double>>();
        const auto stds = s.at("std").get<std::vector<double>>();
        const auto degenerate = s.at("degenerate").get<std::vector<bool>>();
        if (means.size() != I * J || stds.size() != I * J || degenerate.size() != I * J) {
            throw std::invalid_argument("standardization arrays do not match the declared shapes");
        }
        model.stats.num_subjects = I;
        model.stats.num_series = J;
        model.stats.convention = s.at("convention").get<std::string>();
        for (std::size_t k = 0; k < I * J; ++k) {
            model.stats.cells.push_back({means[k], stds[k], degenerate[k]});
        }
        return model;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed model file: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const FittedModel& model) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_json(model).dump(1) << '\n';
}

FittedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return model_from_json(doc);
}

// ---------------------------------------------------------------------------

json to_json(const FitConfig& c) {
    return {{"rank", c.rank},           {"lambda", c.lambda},       {"step_size", c.step_size},
            {"stop_eps", c.stop_eps},   {"max_iters", c.max_iters}, {"num_basis", c.num_basis},
            {"degree", c.degree},       {"init_scale", c.init_scale}, {"seed", c.seed}};
}

FitConfig fit_config_from_json(const json& j, FitConfig c) {
    reject_unknown(j, {"rank", "lambda", "step_size", "stop_eps", "max_iters", "num_basis", "degree",
                       "init_scale", "seed"},
                   "fit");
    read_if(j, "rank", c.rank);
    read_if(j, "lambda", c.lambda);
    read_if(j, "step_size", c.step_size);
    read_if(j, "stop_eps", c.stop_eps);
    read_if(j, "max_iters", c.max_iters);
    read_if(j, "num_basis", c.num_basis);
    read_if(j, "degree", c.degree);
    read_if(j, "init_scale", c.init_scale);
    read_if(j, "seed", c.seed);
    return c;
}

json to_json(const TuneGrid& g) {
    return {{"lambda_candidates", g.lambda_candidates},
            {"rank_candidates", g.rank_candidates},
            {"step_candidates", g.step_candidates},
            {"validation_fraction", g.validation_fraction},
            {"seed", g.seed}};
}

TuneGrid tune_grid_from_json(const json& j, TuneGrid g) {
    reject_unknown(j, {"lambda_candidates", "rank_candidates", "step_candidates", "validation_fraction", "seed"},
                   "tune");
    read_if(j, "lambda_candidates", g.lambda_candidates);
    read_if(j, "rank_candidates", g.rank_candidates);
    read_if(j, "step_candidates", g.step_candidates);
    read_if(j, "validation_fraction", g.validation_fraction);
    read_if(j, "seed", g.seed);
    return g;
}

json to_json(const ScenarioSpec& s) {
    json j = {{"scenario", to_string(s.id)},
              {"num_subjects", s.num_subjects},
              {"num_series", s.num_series},
              {"true_rank", s.true_rank},
              {"domain_end", s.domain_end},
              {"noise_sd", s.noise_sd},
              {"seed", s.seed},
              {"continuous_time", s.continuous_time}};
    if (s.observe_prob) j["observe_prob"] = *s.observe_prob;
    if (s.observe_prob_low) j["observe_prob_low"] = *s.observe_prob_low;
    return j;
}

ScenarioSpec scenario_from_json(const json& j, ScenarioSpec s) {
    reject_unknown(j, {"scenario", "num_subjects", "num_series", "true_rank", "domain_end", "noise_sd", "seed",
                       "continuous_time", "observe_prob", "observe_prob_low"},
                   "scenario");
    if (j.contains("scenario")) {
        s.id = parse_scenario(j.at("scenario").get<std::string>());
    }
    read_if(j, "num_subjects", s.num_subjects);
    read_if(j, "num_series", s.num_series);
    read_if(j, "true_rank", s.true_rank);
    read_if(j, "domain_end", s.domain_end);
    read_if(j, "noise_sd", s.noise_sd);
    read_if(j, "seed", s.seed);
    read_if(j, "continuous_time", s.continuous_time);
    if (j.contains("observe_prob")) s.observe_prob = j.at("observe_prob").get<double>();
    if (j.contains("observe_prob_low")) s.observe_prob_low = j.at("observe_prob_low").get<double>();
    return s;
}

}  // namespace idlfm
