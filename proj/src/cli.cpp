#include "idlfm/cli.hpp"

#include "idlfm/errors.hpp"
#include "idlfm/eval.hpp"
#include "idlfm/model_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace idlfm {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_config(const std::optional<std::string>& path, const std::set<std::string>& blocks) {
    if (!path) {
        return json::object();
    }
    std::ifstream in(*path);
    if (!in) {
        throw DataError("cannot open config " + *path);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(*path + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw DataError(*path + ": config must be a JSON object");
    }
    for (const auto& item : doc.items()) {
        if (!blocks.contains(item.key())) {
            throw UsageError("unknown block '" + item.key() + "' in config " + *path);
        }
    }
    return doc;
}

json block(const json& doc, const char* key) {
    return doc.contains(key) ? doc.at(key) : json::object();
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    body(out);
    if (!out) {
        throw DataError("error while writing " + path);
    }
}

std::string config_comment(const json& echo) {
    return "config: " + echo.dump();
}

// Options shared by every subcommand that fits the model.
struct FitFlags {
    std::optional<std::size_t> rank;
    std::optional<double> lambda;
    std::optional<double> step_size;
    std::optional<double> stop_eps;
    std::optional<std::size_t> max_iters;
    std::optional<std::size_t> num_basis;
    std::optional<std::size_t> degree;
    std::optional<double> init_scale;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App& app, bool with_seed = true) {
        app.add_option("--rank", rank, "latent rank R");
        app.add_option("--lambda", lambda, "ridge penalty");
        app.add_option("--step", step_size, "gradient step size");
        app.add_option("--stop-eps", stop_eps, "relative loss change stopping threshold");
        app.add_option("--max-iters", max_iters, "maximum number of sweeps");
        app.add_option("--num-basis", num_basis, "number of B-spline basis functions M");
        app.add_option("--degree", degree, "B-spline degree");
        app.add_option("--init-scale", init_scale, "standard deviation of the initial draw");
        if (with_seed) {
            app.add_option("--seed", seed, "initialization seed");
        }
    }

    [[nodiscard]] FitConfig overlay(FitConfig c) const {
        if (rank) c.rank = *rank;
        if (lambda) c.lambda = *lambda;
        if (step_size) c.step_size = *step_size;
        if (stop_eps) c.stop_eps = *stop_eps;
        if (max_iters) c.max_iters = *max_iters;
        if (num_basis) c.num_basis = *num_basis;
        if (degree) c.degree = *degree;
        if (init_scale) c.init_scale = *init_scale;
        if (seed) c.seed = *seed;
        return c;
    }
};

struct GridFlags {
    std::vector<double> lambdas;
    std::vector<std::size_t> ranks;
    std::vector<double> steps;
    std::optional<double> validation_fraction;

    void attach(CLI::App& app) {
        app.add_option("--lambdas", lambdas, "comma-separated lambda candidates")->delimiter(',');
        app.add_option("--ranks", ranks, "comma-separated rank candidates")->delimiter(',');
        app.add_option("--steps", steps, "comma-separated step-size candidates")->delimiter(',');
        app.add_option("--validation-fraction", validation_fraction, "held-out fraction of target points");
    }

    [[nodiscard]] TuneGrid overlay(TuneGrid g) const {
        if (!lambdas.empty()) g.lambda_candidates = lambdas;
        if (!ranks.empty()) g.rank_candidates = ranks;
        if (!steps.empty()) g.step_candidates = steps;
        if (validation_fraction) g.validation_fraction = *validation_fraction;
        return g;
    }
};

struct ScenarioFlags {
    std::optional<std::string> scenario;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> subjects;
    std::optional<std::size_t> series;
    std::optional<std::size_t> true_rank;
    std::optional<std::size_t> domain_end;
    std::optional<double> noise_sd;
    std::optional<double> observe_prob;
    std::optional<double> observe_prob_low;
    bool continuous_time = false;
    bool desk = false;

    void attach(CLI::App& app) {
        app.add_option("--scenario", scenario, "S1.1 .. S3.3, MCAR, MAR, MNAR");
        app.add_option("--seed", seed, "base seed");
        app.add_option("--subjects", subjects, "number of subjects I");
        app.add_option("--series", series, "number of series J");
        app.add_option("--true-rank", true_rank, "rank of the generating model (1..3)");
        app.add_option("--domain-end", domain_end, "grid length T");
        app.add_option("--noise-sd", noise_sd, "observation noise standard deviation");
        app.add_option("--observe-prob", observe_prob, "Bernoulli rate of the densely sampled series");
        app.add_option("--observe-prob-low", observe_prob_low, "Bernoulli rate of the sparse target series");
        app.add_flag("--continuous-time", continuous_time, "jitter observation times off the integer grid");
        app.add_flag("--desk-scale", desk, "shrink to I=10, T=200");
    }

    [[nodiscard]] ScenarioSpec resolve(const json& cfg) const {
        std::string name = "S1.3";
        if (cfg.contains("scenario")) {
            name = cfg.at("scenario").get<std::string>();
        }
        if (scenario) {
            name = *scenario;
        }
        ScenarioSpec s;
        try {
            s = default_spec(parse_scenario(name));
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (desk) {
            s = desk_scale(s);
        }
        s = scenario_from_json(cfg, s);
        if (seed) s.seed = *seed;
        if (subjects) s.num_subjects = *subjects;
        if (series) s.num_series = *series;
        if (true_rank) s.true_rank = *true_rank;
        if (domain_end) s.domain_end = *domain_end;
        if (noise_sd) s.noise_sd = *noise_sd;
        if (observe_prob) s.observe_prob = *observe_prob;
        if (observe_prob_low) s.observe_prob_low = *observe_prob_low;
        if (continuous_time) s.continuous_time = true;
        return s;
    }
};

ObservationPanel load_panel(const std::string& path, std::optional<double> domain_end) {
    try {
        return read_panel_csv(fs::path(path), domain_end);
    } catch (const ParseError& e) {
        throw DataError(path + ":" + std::to_string(e.line()) + ": " + e.what());
    } catch (const std::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::optional<std::size_t> resolve_target(const ObservationPanel& panel, const std::optional<std::string>& label) {
    if (!label) {
        return std::nullopt;
    }
    const auto idx = panel.find_series(*label);
    if (!idx) {
        throw DataError("unknown target series '" + *label + "'");
    }
    return idx;
}

// ---------------------------------------------------------------------------

struct SimulateCmd {
    std::optional<std::string> config;
    ScenarioFlags flags;
    std::string out_dir = ".";

    void attach(CLI::App& app) {
        app.add_option("--config", config, "JSON config file (block \"scenario\")");
        flags.attach(app);
        app.add_option("--out-dir", out_dir, "directory for train.csv, test.csv and truth.csv");
    }

    int run(std::ostream& out, int verbosity) const {
        const json cfg = read_config(config, {"scenario"});
        const ScenarioSpec spec = flags.resolve(block(cfg, "scenario"));
        spec.validate();
        const SimulatedData data = generate(spec);
        const std::string comment = config_comment({{"command", "simulate"}, {"scenario", to_json(spec)}});
        const fs::path dir(out_dir);
        write_file((dir / "train.csv").string(), [&](std::ostream& o) { write_panel_csv(o, data.train, comment); });
        write_file((dir / "test.csv").string(), [&](std::ostream& o) { write_panel_csv(o, data.test, comment); });
        write_file((dir / "truth.csv").string(),
                   [&](std::ostream& o) { write_truth_csv(o, data.truth, data.train, comment); });
        if (verbosity > 0) {
            out << "simulated " << to_string(spec.id) << ": " << data.train.size() << " training and "
                << data.test.size() << " test observations\n";
        }
        return kExitOk;
    }
};

struct FitCmd {
    std::optional<std::string> config;
    std::string train;
    std::string model = "model.json";
    std::optional<std::string> trace;
    std::optional<double> domain_end;
    bool no_standardize = false;
    FitFlags flags;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "JSON config file (block \"fit\")");
        app.add_option("--train", train, "training CSV (subject,series,time,value)")->required();
        app.add_option("--model", model, "output model JSON");
        app.add_option("--trace", trace, "output loss trace CSV (iteration,loss)");
        app.add_option("--domain-end", domain_end, "time domain end T (default: latest observation)");
        app.add_flag("--no-standardize", no_standardize, "fit on the raw scale");
        flags.attach(app);
    }

    int run(std::ostream& out, int verbosity) const {
        const json cfg = read_config(config, {"fit"});
        const FitConfig fc = flags.overlay(fit_config_from_json(block(cfg, "fit")));
        fc.validate();
        const ObservationPanel raw = load_panel(train, domain_end);

        StandardizedPanel sp;
        if (no_standardize) {
            sp.panel = raw;
            sp.stats = StandardizationStats::identity(raw.num_subjects(), raw.num_series());
        } else {
            sp = standardize(raw);
        }

        const FitResult result = fit(sp.panel, fc);
        const json echo = {{"command", "fit"},
                           {"fit", to_json(fc)},
                           {"standardize", !no_standardize},
                           {"domain_end", raw.domain_end()}};

        FittedModel fm{result.params, raw.subject_ids(), raw.series_ids(), sp.stats, fc.seed, echo};
        try {
            save_model(model, fm);
        } catch (const std::runtime_error& e) {
            throw DataError(e.what());
        }
        if (trace) {
            write_file(*trace, [&](std::ostream& o) {
                write_comment_lines(o, config_comment(echo));
                o << "iteration,loss\n";
                const auto& lt = result.report.loss_trace;
                for (std::size_t s = 0; s < lt.size(); ++s) {
                    o << s << ',' << format_double(lt[s]) << '\n';
                }
            });
        }
        if (verbosity > 0) {
            out << (result.report.converged ? "converged" : "stopped at max_iters") << " after "
                << result.report.iterations_run << " iterations, loss " << format_double(result.report.final_loss)
                << '\n';
        }
        return kExitOk;
    }
};

struct InterpolateCmd {
    std::string model;
    std::optional<std::string> query;
    std::optional<std::size_t> grid;
    std::string out_path = "predictions.csv";

    void attach(CLI::App& app) {
        app.add_option("--model", model, "model JSON written by fit")->required();
        auto* q = app.add_option("--query", query, "query CSV (subject,series,time)");
        auto* g = app.add_option("--grid", grid, "predict every cell on N evenly spaced points of [0, T]")
                      ->check(CLI::Range(std::size_t{2}, std::size_t{10000000}));
        q->excludes(g);
        app.add_option("--out", out_path, "output CSV (subject,series,time,value)");
    }

    int run(std::ostream& out, int verbosity) const {
        if (!query && !grid) {
            throw UsageError("interpolate needs --query or --grid");
        }
        const FittedModel fm = [&] {
            try {
                return load_model(model);
            } catch (const std::exception& e) {
                throw DataError(model + ": " + e.what());
            }
        }();
        const ModelParams& p = fm.params;
        const double T = p.basis().domain_end();

        struct Row {
            std::size_t i, j;
            double t;
        };
        std::vector<Row> rows;
        if (query) {
            std::ifstream in(*query);
            if (!in) {
                throw DataError("cannot open " + *query);
            }
            std::vector<QueryPoint> points;
            try {
                points = read_query_csv(in);
            } catch (const ParseError& e) {
                throw DataError(*query + ":" + std::to_string(e.line()) + ": " + e.what());
            }
            for (const auto& q : points) {
                const auto si = std::find(fm.subject_ids.begin(), fm.subject_ids.end(), q.subject);
                const auto sj = std::find(fm.series_ids.begin(), fm.series_ids.end(), q.series);
                if (si == fm.subject_ids.end()) {
                    throw DataError("unknown subject '" + q.subject + "'");
                }
                if (sj == fm.series_ids.end()) {
                    throw DataError("unknown series '" + q.series + "'");
                }
                if (!(q.time >= 0.0 && q.time <= T)) {
                    throw DataError("query time " + format_double(q.time) + " outside [0, " + format_double(T) + "]");
                }
                rows.push_back({static_cast<std::size_t>(si - fm.subject_ids.begin()),
                                static_cast<std::size_t>(sj - fm.series_ids.begin()), q.time});
            }
        } else {
            const std::size_t n = *grid;
            for (std::size_t i = 0; i < p.num_subjects(); ++i) {
                for (std::size_t j = 0; j < p.num_series(); ++j) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const double t = k + 1 == n ? T : T * static_cast<double>(k) / static_cast<double>(n - 1);
                        rows.push_back({i, j, t});
                    }
                }
            }
        }

        json echo = {{"command", "interpolate"}, {"model_config", fm.config}};
        if (grid) echo["grid"] = *grid;
        write_file(out_path, [&](std::ostream& o) {
            write_comment_lines(o, config_comment(echo));
            o << "subject,series,time,value\n";
            for (const auto& r : rows) {
                const double v = destandardize(predict(p, r.i, r.j, r.t), fm.stats, r.i, r.j);
                o << fm.subject_ids[r.i] << ',' << fm.series_ids[r.j] << ',' << format_double(r.t) << ','
                  << format_double(v) << '\n';
            }
        });
        if (verbosity > 0) {
            out << "wrote " << rows.size() << " predictions to " << out_path << '\n';
        }
        return kExitOk;
    }
};

struct TuneCmd {
    std::optional<std::string> config;
    std::string train;
    std::string out_path = "tune.csv";
    std::optional<double> domain_end;
    std::optional<std::string> target;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    bool no_standardize = false;
    FitFlags fit_flags;
    GridFlags grid_flags;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "JSON config file (blocks \"fit\", \"tune\")");
        app.add_option("--train", train, "training CSV (subject,series,time,value)")->required();
        app.add_option("--out", out_path, "output tuning report CSV");
        app.add_option("--domain-end", domain_end, "time domain end T (default: latest observation)");
        app.add_option("--target", target, "target series label (default: last series)");
        app.add_option("--seed", seed, "validation split and initialization seed");
        app.add_option("--jobs", jobs, "parallel candidate fits")->check(CLI::PositiveNumber);
        app.add_flag("--no-standardize", no_standardize, "tune on the raw scale");
        fit_flags.attach(app, false);
        grid_flags.attach(app);
    }

    int run(std::ostream& out, int verbosity) const {
        const json cfg = read_config(config, {"fit", "tune"});
        FitConfig fc = fit_flags.overlay(fit_config_from_json(block(cfg, "fit")));
        TuneGrid grid = grid_flags.overlay(tune_grid_from_json(block(cfg, "tune")));
        if (seed) {
            fc.seed = *seed;
            grid.seed = *seed;
        }
        fc.validate();
        grid.validate();
        const ObservationPanel raw = load_panel(train, domain_end);
        const auto tgt = resolve_target(raw, target);
        const ObservationPanel panel = no_standardize ? raw : standardize(raw).panel;

        const TuneResult result = tune(panel, grid, fc, tgt, jobs);
        json echo = {{"command", "tune"}, {"fit", to_json(fc)}, {"tune", to_json(grid)}, {"standardize", !no_standardize}};
        if (target) echo["target"] = *target;
        write_file(out_path, [&](std::ostream& o) { write_tune_csv(o, result, config_comment(echo)); });
        out << "best lambda=" << format_double(result.best_lambda) << " rank=" << result.best_rank
            << " step=" << format_double(result.best_step) << " val_mse=" << format_double(result.best_val_mse)
            << '\n';
        if (verbosity > 0) {
            out << result.table.size() << " candidate fits\n";
        }
        return kExitOk;
    }
};

struct BenchmarkCmd {
    std::optional<std::string> config;
    ScenarioFlags scenario_flags;
    FitFlags fit_flags;
    GridFlags grid_flags;
    std::optional<std::size_t> reps;
    std::vector<std::string> methods;
    std::size_t jobs = 1;
    bool tune = false;
    bool timing = false;
    std::string out_csv = "benchmark.csv";
    std::optional<std::string> out_md;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "JSON config file (blocks \"scenario\", \"fit\", \"tune\", \"benchmark\")");
        scenario_flags.attach(app);
        fit_flags.attach(app, false);
        grid_flags.attach(app);
        app.add_option("--reps", reps, "number of replications")->check(CLI::PositiveNumber);
        app.add_option("--methods", methods, "comma-separated: idlfm, spline-baseline, mean-fill")->delimiter(',');
        app.add_option("--jobs", jobs, "parallel replications")->check(CLI::PositiveNumber);
        app.add_flag("--tune", tune, "tune IDLFM hyperparameters in every replication");
        app.add_flag("--timing", timing, "record wall-clock times in the CSV");
        app.add_option("--out-csv", out_csv, "per-replication CSV");
        app.add_option("--out-md", out_md, "Markdown summary (default: CSV path with .md)");
    }

    int run(std::ostream& out, int verbosity) const {
        const json cfg = read_config(config, {"scenario", "fit", "tune", "benchmark"});
        BenchmarkConfig bc;
        bc.scenario = scenario_flags.resolve(block(cfg, "scenario"));

        FitConfig base;
        std::size_t replications = 1;
        if (scenario_flags.desk) {
            base.num_basis = 60;
            replications = 5;
        }
        bc.fit = fit_flags.overlay(fit_config_from_json(block(cfg, "fit"), base));

        const json bench = block(cfg, "benchmark");
        for (const auto& item : bench.items()) {
            if (item.key() != "replications" && item.key() != "methods" && item.key() != "tune") {
                throw UsageError("unknown key '" + item.key() + "' in benchmark config");
            }
        }
        if (bench.contains("replications")) replications = bench.at("replications").get<std::size_t>();
        if (reps) replications = *reps;
        bc.replications = replications;

        std::vector<std::string> names = methods;
        if (names.empty() && bench.contains("methods")) {
            names = bench.at("methods").get<std::vector<std::string>>();
        }
        if (!names.empty()) {
            bc.methods.clear();
            for (const auto& n : names) {
                try {
                    bc.methods.push_back(parse_method(n));
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            }
        }
        if (tune || bench.value("tune", false)) {
            bc.tune = grid_flags.overlay(tune_grid_from_json(block(cfg, "tune")));
            bc.tune->validate();
        }
        bc.jobs = jobs;

        json method_names = json::array();
        for (const Method m : bc.methods) method_names.push_back(to_string(m));
        json echo = {{"command", "benchmark"},
                     {"scenario", to_json(bc.scenario)},
                     {"fit", to_json(bc.fit)},
                     {"replications", bc.replications},
                     {"methods", method_names},
                     {"spline_smoothing", bc.spline_smoothing},
                     {"spline_validation_fraction", bc.spline_validation_fraction}};
        if (bc.tune) echo["tune"] = to_json(*bc.tune);

        const EvalReport report = run_benchmark(bc);
        write_file(out_csv, [&](std::ostream& o) { write_benchmark_csv(o, report, timing, config_comment(echo)); });
        const std::string md = out_md ? *out_md : fs::path(out_csv).replace_extension(".md").string();
        write_file(md, [&](std::ostream& o) { write_markdown_summary(o, report, echo.dump(2)); });

        for (const auto& s : report.summaries) {
            out << to_string(s.method) << ": test mse " << format_double(s.test_mean) << " (se "
                << format_double(s.test_se) << ")\n";
        }
        if (verbosity > 0) {
            out << "wrote " << out_csv << " and " << md << '\n';
        }
        return kExitOk;
    }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Individualized dynamic latent factor model: simulate, fit, interpolate, tune, benchmark"};
    app.name("idlfm");
    app.require_subcommand(1);
    int verbosity = 0;
    app.add_flag("-v,--verbose", verbosity, "more output");

    SimulateCmd simulate;
    FitCmd fit_cmd;
    InterpolateCmd interpolate;
    TuneCmd tune_cmd;
    BenchmarkCmd benchmark;
    auto* simulate_app = app.add_subcommand("simulate", "generate a simulation scenario");
    auto* fit_app = app.add_subcommand("fit", "fit the model to a training CSV");
    auto* interpolate_app = app.add_subcommand("interpolate", "predict from a fitted model");
    auto* tune_app = app.add_subcommand("tune", "grid search over lambda, rank and step size");
    auto* benchmark_app = app.add_subcommand("benchmark", "multi-replication simulation benchmark");
    simulate.attach(*simulate_app);
    fit_cmd.attach(*fit_app);
    interpolate.attach(*interpolate_app);
    tune_cmd.attach(*tune_app);
    benchmark.attach(*benchmark_app);
    for (auto* sub : {simulate_app, fit_app, interpolate_app, tune_app, benchmark_app}) {
        sub->add_flag("-v,--verbose", verbosity, "more output");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (simulate_app->parsed()) return simulate.run(out, verbosity);
        if (fit_app->parsed()) return fit_cmd.run(out, verbosity);
        if (interpolate_app->parsed()) return interpolate.run(out, verbosity);
        if (tune_app->parsed()) return tune_cmd.run(out, verbosity);
        if (benchmark_app->parsed()) return benchmark.run(out, verbosity);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << " (iteration " << e.iteration() << ")\n";
        return kExitDivergence;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "error: malformed config: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace idlfm
