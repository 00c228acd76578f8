#include "idlfm/eval.hpp"

#include "idlfm/errors.hpp"
#include "parallel.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace idlfm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt3(double v) {
    if (!std::isfinite(v)) {
        return "n/a";
    }
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << v;
    return s.str();
}

// Per-subject errors of an arbitrary predictor on one series.
template <class Predict>
std::vector<ErrorTally> tally(const ObservationPanel& panel, std::size_t series, Predict&& predict) {
    std::vector<ErrorTally> out(panel.num_subjects());
    for (std::size_t i = 0; i < panel.num_subjects(); ++i) {
        for (const auto& o : panel.cell(i, series)) {
            const double r = o.value - predict(i, o.time);
            out[i].sse += r * r;
            ++out[i].count;
        }
    }
    return out;
}

ErrorTally pooled(const std::vector<ErrorTally>& parts) {
    ErrorTally total;
    for (const auto& p : parts) {
        total += p;
    }
    return total;
}

std::vector<double> subject_means(const std::vector<ErrorTally>& parts) {
    std::vector<double> out;
    out.reserve(parts.size());
    for (const auto& p : parts) {
        out.push_back(p.mean());
    }
    return out;
}

}  // namespace

double mse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.empty()) {
        throw std::invalid_argument("mse of an empty set");
    }
    if (predictions.size() != targets.size()) {
        throw std::invalid_argument("mse inputs differ in length");
    }
    double sse = 0.0;
    for (std::size_t k = 0; k < predictions.size(); ++k) {
        const double d = predictions[k] - targets[k];
        sse += d * d;
    }
    return sse / static_cast<double>(predictions.size());
}

double ErrorTally::mean() const {
    return count == 0 ? kNaN : sse / static_cast<double>(count);
}

std::vector<ErrorTally> series_errors(const ModelParams& params, const ObservationPanel& panel,
                                      std::size_t series) {
    if (panel.num_subjects() != params.num_subjects() || panel.num_series() != params.num_series()) {
        throw ShapeMismatch("evaluation panel does not match the model shape");
    }
    return tally(panel, series, [&](std::size_t i, double t) { return predict(params, i, series, t); });
}

double series_mse(const ModelParams& params, const ObservationPanel& panel, std::size_t series) {
    return pooled(series_errors(params, panel, series)).mean();
}

double grid_mise(const ModelParams& params, const GroundTruth& truth) {
    if (truth.num_subjects != params.num_subjects() || truth.num_series != params.num_series()) {
        throw ShapeMismatch("ground truth does not match the model shape");
    }
    std::vector<double> grid(truth.domain_end);
    for (std::size_t t = 1; t <= truth.domain_end; ++t) {
        grid[t - 1] = static_cast<double>(t);
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < truth.num_subjects; ++i) {
        for (std::size_t j = 0; j < truth.num_series; ++j) {
            const auto curve = predict_curve(params, i, j, grid);
            for (std::size_t t = 1; t <= truth.domain_end; ++t) {
                const double d = curve[t - 1] - truth.psi(i, j, t);
                sse += d * d;
            }
        }
    }
    return sse / static_cast<double>(truth.num_subjects * truth.num_series * truth.domain_end);
}

std::string to_string(Method m) {
    switch (m) {
        case Method::Idlfm: return "idlfm";
        case Method::SplineBaseline: return "spline-baseline";
        case Method::MeanFill: return "mean-fill";
    }
    throw std::invalid_argument("unknown method");
}

Method parse_method(const std::string& name) {
    if (name == "idlfm") return Method::Idlfm;
    if (name == "spline-baseline" || name == "spline") return Method::SplineBaseline;
    if (name == "mean-fill") return Method::MeanFill;
    throw std::invalid_argument("unknown method '" + name + "'");
}

std::uint64_t replication_seed(const ScenarioSpec& scenario, std::size_t replication) {
    return scenario.seed + replication;
}

MethodRun evaluate_method(Method method, const SimulatedData& data, const BenchmarkConfig& config,
                          std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t target = data.train.num_series() - 1;
    const double T = data.train.domain_end();
    MethodRun run;
    run.method = method;
    run.seed = seed;

    switch (method) {
        case Method::Idlfm: {
            FitConfig cfg = config.fit;
            cfg.seed = seed;
            try {
                if (config.tune) {
                    TuneGrid grid = *config.tune;
                    grid.seed = seed;
                    cfg = apply(tune(data.train, grid, cfg), cfg);
                }
                run.fit_config = cfg;
                const FitResult fitted = fit(data.train, cfg);
                run.converged = fitted.report.converged;
                run.iterations = fitted.report.iterations_run;
                const auto train_err = series_errors(fitted.params, data.train, target);
                const auto test_err = series_errors(fitted.params, data.test, target);
                run.train_mse = pooled(train_err).mean();
                run.test_mse = pooled(test_err).mean();
                run.subject_test_mse = subject_means(test_err);
            } catch (const DivergenceError& e) {
                run.converged = false;
                run.iterations = e.iteration();
                run.train_mse = kNaN;
                run.test_mse = kNaN;
            }
            break;
        }
        case Method::SplineBaseline: {
            std::vector<SplineFit> fits;
            fits.reserve(data.train.num_subjects());
            for (std::size_t i = 0; i < data.train.num_subjects(); ++i) {
                fits.push_back(fit_spline_tuned(data.train.cell(i, target), T, config.fit.num_basis,
                                                config.spline_smoothing, config.spline_validation_fraction,
                                                seed + i, config.fit.degree));
            }
            auto predictor = [&](std::size_t i, double t) { return predict_spline(fits[i], t); };
            const auto test_err = tally(data.test, target, predictor);
            run.train_mse = pooled(tally(data.train, target, predictor)).mean();
            run.test_mse = pooled(test_err).mean();
            run.subject_test_mse = subject_means(test_err);
            break;
        }
        case Method::MeanFill: {
            std::vector<double> means(data.train.num_subjects(), 0.0);
            for (std::size_t i = 0; i < means.size(); ++i) {
                const auto obs = data.train.cell(i, target);
                double sum = 0.0;
                for (const auto& o : obs) {
                    sum += o.value;
                }
                means[i] = obs.empty() ? 0.0 : sum / static_cast<double>(obs.size());
            }
            auto predictor = [&](std::size_t i, double) { return means[i]; };
            const auto test_err = tally(data.test, target, predictor);
            run.train_mse = pooled(tally(data.train, target, predictor)).mean();
            run.test_mse = pooled(test_err).mean();
            run.subject_test_mse = subject_means(test_err);
            break;
        }
    }
    run.wall_ms = elapsed_ms(start);
    return run;
}

std::vector<MethodSummary> summarize(std::span<const MethodRun> rows, std::span<const Method> methods) {
    std::vector<MethodSummary> out;
    for (const Method m : methods) {
        std::vector<double> train, test;
        for (const auto& r : rows) {
            if (r.method == m && std::isfinite(r.train_mse) && std::isfinite(r.test_mse)) {
                train.push_back(r.train_mse);
                test.push_back(r.test_mse);
            }
        }
        auto mean_se = [](const std::vector<double>& v) -> std::pair<double, double> {
            if (v.empty()) {
                return {kNaN, kNaN};
            }
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            if (v.size() < 2) {
                return {mean, 0.0};
            }
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
            return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
        };
        MethodSummary s;
        s.method = m;
        s.replications = train.size();
        std::tie(s.train_mean, s.train_se) = mean_se(train);
        std::tie(s.test_mean, s.test_se) = mean_se(test);
        out.push_back(s);
    }
    return out;
}

EvalReport run_benchmark(const BenchmarkConfig& config) {
    if (config.replications == 0) {
        throw std::invalid_argument("benchmark needs at least one replication");
    }
    if (config.methods.empty()) {
        throw std::invalid_argument("benchmark needs at least one method");
    }
    config.scenario.validate();
    config.fit.validate();

    const std::size_t n_methods = config.methods.size();
    std::vector<MethodRun> rows(config.replications * n_methods);
    detail::parallel_for(config.replications, config.jobs, [&](std::size_t k) {
        ScenarioSpec spec = config.scenario;
        spec.seed = replication_seed(config.scenario, k + 1);
        const SimulatedData data = generate(spec);
        for (std::size_t m = 0; m < n_methods; ++m) {
            rows[k * n_methods + m] = evaluate_method(config.methods[m], data, config, spec.seed);
        }
    });

    EvalReport report;
    report.scenario = to_string(config.scenario.id);
    report.rows = std::move(rows);
    report.summaries = summarize(report.rows, config.methods);
    return report;
}

void write_benchmark_csv(std::ostream& out, const EvalReport& report, bool include_timing,
                         const std::string& comment) {
    write_comment_lines(out, comment);
    out << "scenario,method,seed,train_mse,test_mse,converged,iters,wall_ms\n";
    auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); };
    for (const auto& r : report.rows) {
        out << report.scenario << ',' << to_string(r.method) << ',' << r.seed << ',' << num(r.train_mse) << ','
            << num(r.test_mse) << ',' << (r.converged ? "true" : "false") << ',' << r.iterations << ','
            << (include_timing ? format_double(std::round(r.wall_ms * 1000.0) / 1000.0) : std::string("0"))
            << '\n';
    }
}

void write_markdown_summary(std::ostream& out, const EvalReport& report, const std::string& config_json) {
    out << "## Scenario " << report.scenario << "\n\n";
    out << "Mean square error on the target series; standard errors in parentheses.\n\n";
    out << "| Method | Replications | Training | Testing |\n";
    out << "|---|---|---|---|\n";
    for (const auto& s : report.summaries) {
        out << "| " << to_string(s.method) << " | " << s.replications << " | " << fmt3(s.train_mean) << " ("
            << fmt3(s.train_se) << ") | " << fmt3(s.test_mean) << " (" << fmt3(s.test_se) << ") |\n";
    }
    out << "\nThe spline baseline is a ridge-penalized cubic B-spline fit to each subject's target series, "
           "with the penalty chosen on a validation split.\n";
    if (!config_json.empty()) {
        out << "\n```json\n" << config_json << "\n```\n";
    }
}

}  // namespace idlfm
