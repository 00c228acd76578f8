/**
 * @file simgen.hpp
 * @brief Simulation scenarios with known latent structure.
 *
 * Every scenario draws loadings f_j ~ N(0, I_R), evaluates
 * psi_ij(t) = f_j^T theta_i(t) on the integer grid t = 1..T, adds Gaussian
 * noise, and then decides which grid points are observed. The last series is
 * the interpolation target: its unobserved grid points form the test set.
 *
 * Observation schemes (J = number of series, "last" = series J):
 *   S1.1   Bernoulli(0.8) per point for series 1..J-1, Bernoulli(0.2) for the last
 *   S1.2   series 1..J-2 on every point, series J-1 on every 2nd, last on every 4th
 *   S1.3   Bernoulli(0.7) per point, independently for every (i, j)
 *   S2.x   one Bernoulli(0.7) time set shared by all subjects and series
 *   S3.1   like S1.1 with the first 80/101 of the series at 0.8
 *   S3.2   like S1.2 with 60/101 full, 20/101 every 2nd, the rest every 4th
 *   S3.3   like S1.3
 *   MCAR   identical to S1.3
 *   MAR    series 1 fully observed, series 2..J-1 Bernoulli(0.7); the last
 *          series keeps its Bernoulli(0.7) draw and is additionally missing
 *          wherever series 1 exceeds its 90% quantile
 *   MNAR   series 1..J-1 Bernoulli(0.7); the last series keeps its
 *          Bernoulli(0.7) draw and is additionally missing wherever it
 *          exceeds its own 90% quantile
 *
 * Quantiles are per subject, taken over the noisy full-grid series.
 */
#pragma once

#include "idlfm/data.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace idlfm {

enum class ScenarioId { S1_1, S1_2, S1_3, S2_1, S2_2, S2_3, S3_1, S3_2, S3_3, MCAR, MAR, MNAR };

/// "S1.1", ..., "MNAR".
std::string to_string(ScenarioId id);
/// Throws std::invalid_argument for an unknown name.
ScenarioId parse_scenario(const std::string& name);
std::vector<ScenarioId> all_scenarios();

struct ScenarioSpec {
    ScenarioId id = ScenarioId::S1_3;
    std::size_t num_subjects = 30;
    std::size_t num_series = 5;
    std::size_t true_rank = 3;
    std::size_t domain_end = 1000;
    double noise_sd = 0.5;
    std::uint64_t seed = 0;
    /// Overrides the scenario's Bernoulli rates: high-rate series first, then the low-rate target.
    std::optional<double> observe_prob;
    std::optional<double> observe_prob_low;
    /// Observation times drawn uniformly from (t-1, t] instead of the integer grid.
    bool continuous_time = false;

    void validate() const;
};

/// Full-scale defaults for a scenario (J = 101 for the S3 family).
ScenarioSpec default_spec(ScenarioId id, std::uint64_t seed = 0);

/// Shrinks a spec to I = 10 subjects, T = 200.
ScenarioSpec desk_scale(ScenarioSpec spec);

using Trajectory = std::function<double(double)>;

/// theta_i1, theta_i2, theta_i3 for 0-based subject index `subject`
/// (the formulas use i = subject + 1). Throws std::invalid_argument for an
/// unknown scenario.
std::array<Trajectory, 3> make_theta(ScenarioId id, std::size_t subject);

struct GroundTruth {
    std::size_t num_subjects = 0;
    std::size_t num_series = 0;
    std::size_t domain_end = 0;
    Eigen::MatrixXd loadings;  // J x R_true
    ScenarioId scenario = ScenarioId::S1_3;
    /// Noiseless psi_ij(t) at t = 1..T, flattened as ((i * J) + j) * T + (t - 1).
    std::vector<double> full_grid_values;
    /// psi + noise on the same grid.
    std::vector<double> noisy_values;
    /// 1 where (i, j, t) was observed.
    std::vector<std::uint8_t> observed_mask;

    [[nodiscard]] std::size_t index(std::size_t subject, std::size_t series, std::size_t t) const {
        return (subject * num_series + series) * domain_end + (t - 1);
    }
    [[nodiscard]] double psi(std::size_t subject, std::size_t series, std::size_t t) const {
        return full_grid_values[index(subject, series, t)];
    }
    /// psi at an arbitrary time in [0, T].
    [[nodiscard]] double psi_at(std::size_t subject, std::size_t series, double t) const;
};

struct SimulatedData {
    ObservationPanel train;
    ObservationPanel test;
    GroundTruth truth;
};

/// Observation mask for the noisy full-grid values (layout as in GroundTruth).
/// Random draws come from a stream seeded only by spec.seed, so the mask of
/// each mechanism depends on values only through its quantile rule.
std::vector<std::uint8_t> observation_mask(const ScenarioSpec& spec, std::span<const double> noisy_values);

/// Deterministic given spec.seed.
SimulatedData generate(const ScenarioSpec& spec);

/// Truth CSV: header `subject,series,time,psi` over the full grid.
void write_truth_csv(std::ostream& out, const GroundTruth& truth, const ObservationPanel& labels,
                     const std::string& comment = {});

}  // namespace idlfm
