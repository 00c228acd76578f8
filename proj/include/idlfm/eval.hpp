/**
 * @file eval.hpp
 * @brief Interpolation error metrics and replicated benchmark runs.
 *
 * Errors are measured on the target series only. Training MSE averages over
 * its observed points; testing MSE over the held-out points, which for the
 * simulations are all unobserved grid points (count I*T - sum_i |T_iJ|).
 */
#pragma once

#include "idlfm/baseline.hpp"
#include "idlfm/data.hpp"
#include "idlfm/model.hpp"
#include "idlfm/optim.hpp"
#include "idlfm/simgen.hpp"
#include "idlfm/tuning.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace idlfm {

/// Mean squared difference. Throws std::invalid_argument on empty or
/// mismatched inputs.
double mse(std::span<const double> predictions, std::span<const double> targets);

/// Sum of squared errors and point count, so errors can be pooled.
struct ErrorTally {
    double sse = 0.0;
    std::size_t count = 0;

    ErrorTally& operator+=(const ErrorTally& other) {
        sse += other.sse;
        count += other.count;
        return *this;
    }
    /// NaN when empty.
    [[nodiscard]] double mean() const;
};

/// Errors of the fitted model on one series of `panel`, per subject.
std::vector<ErrorTally> series_errors(const ModelParams& params, const ObservationPanel& panel,
                                      std::size_t series);

/// Pooled MSE of the model on one series of `panel`.
double series_mse(const ModelParams& params, const ObservationPanel& panel, std::size_t series);

/// Mean integrated squared error against the noiseless truth, averaged over
/// every subject, series and grid point t = 1..T.
double grid_mise(const ModelParams& params, const GroundTruth& truth);

enum class Method { Idlfm, SplineBaseline, MeanFill };

std::string to_string(Method m);
/// "idlfm", "spline-baseline" (alias "spline"), "mean-fill".
Method parse_method(const std::string& name);

struct BenchmarkConfig {
    ScenarioSpec scenario;
    std::vector<Method> methods{Method::Idlfm, Method::SplineBaseline, Method::MeanFill};
    std::size_t replications = 1;
    FitConfig fit;
    /// When set, the IDLFM hyperparameters are tuned per replication.
    std::optional<TuneGrid> tune;
    std::vector<double> spline_smoothing = default_smoothing_grid();
    double spline_validation_fraction = 0.3;
    std::size_t jobs = 1;
};

struct MethodRun {
    Method method = Method::Idlfm;
    std::uint64_t seed = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
    double wall_ms = 0.0;
    std::vector<double> subject_test_mse;
    /// Hyperparameters used by IDLFM in this replication.
    std::optional<FitConfig> fit_config;
};

struct MethodSummary {
    Method method = Method::Idlfm;
    std::size_t replications = 0;  // rows with finite errors
    double train_mean = 0.0;
    double train_se = 0.0;
    double test_mean = 0.0;
    double test_se = 0.0;
};

struct EvalReport {
    std::string scenario;
    /// Replication-major, then method order of the config.
    std::vector<MethodRun> rows;
    std::vector<MethodSummary> summaries;
};

/// Replication r (1-based) draws its data with seed scenario.seed + r.
std::uint64_t replication_seed(const ScenarioSpec& scenario, std::size_t replication);

/// Fits and scores one method on one simulated data set. IDLFM divergence is
/// reported as converged = false with NaN errors.
MethodRun evaluate_method(Method method, const SimulatedData& data, const BenchmarkConfig& config,
                          std::uint64_t seed);

/// Mean and standard error (sample sd / sqrt(n)) per method over the finite rows.
std::vector<MethodSummary> summarize(std::span<const MethodRun> rows, std::span<const Method> methods);

/// Runs all replications (in parallel with config.jobs); rows come back in seed order.
EvalReport run_benchmark(const BenchmarkConfig& config);

/// CSV `scenario,method,seed,train_mse,test_mse,converged,iters,wall_ms`.
/// wall_ms is written as 0 unless include_timing is set, so repeated runs are byte-identical.
void write_benchmark_csv(std::ostream& out, const EvalReport& report, bool include_timing,
                         const std::string& comment = {});

/// Markdown table laid out as training/testing columns with standard errors in parentheses.
void write_markdown_summary(std::ostream& out, const EvalReport& report, const std::string& config_json = {});

}  // namespace idlfm
