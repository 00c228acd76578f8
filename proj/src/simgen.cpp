#include "idlfm/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace idlfm {

namespace {

constexpr std::array<std::pair<ScenarioId, const char*>, 12> kNames{{
    {ScenarioId::S1_1, "S1.1"},
    {ScenarioId::S1_2, "S1.2"},
    {ScenarioId::S1_3, "S1.3"},
    {ScenarioId::S2_1, "S2.1"},
    {ScenarioId::S2_2, "S2.2"},
    {ScenarioId::S2_3, "S2.3"},
    {ScenarioId::S3_1, "S3.1"},
    {ScenarioId::S3_2, "S3.2"},
    {ScenarioId::S3_3, "S3.3"},
    {ScenarioId::MCAR, "MCAR"},
    {ScenarioId::MAR, "MAR"},
    {ScenarioId::MNAR, "MNAR"},
}};

enum class Stream : std::uint64_t { Loadings = 1, Noise = 2, Mask = 3, Jitter = 4 };

std::mt19937_64 make_stream(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::size_t scaled_count(std::size_t J, double fraction) {
    return static_cast<std::size_t>(std::lround(static_cast<double>(J) * fraction));
}

bool is_s3(ScenarioId id) {
    return id == ScenarioId::S3_1 || id == ScenarioId::S3_2 || id == ScenarioId::S3_3;
}

}  // namespace

std::string to_string(ScenarioId id) {
    for (const auto& [key, name] : kNames) {
        if (key == id) {
            return name;
        }
    }
    throw std::invalid_argument("unknown scenario");
}

ScenarioId parse_scenario(const std::string& name) {
    for (const auto& [key, label] : kNames) {
        if (name == label) {
            return key;
        }
    }
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::vector<ScenarioId> all_scenarios() {
    std::vector<ScenarioId> out;
    for (const auto& entry : kNames) {
        out.push_back(entry.first);
    }
    return out;
}

void ScenarioSpec::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid scenario: " + what); };
    if (num_subjects == 0) fail("need at least one subject");
    if (num_series < 2) fail("need at least two series (covariates plus a target)");
    if (true_rank == 0 || true_rank > 3) fail("true rank must be 1, 2 or 3");
    if (domain_end < 2) fail("T must be at least 2");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) fail("noise sd must be >= 0");
    if ((id == ScenarioId::S1_2) && num_series < 3) fail("S1.2 needs at least three series");
    if (id == ScenarioId::MAR && num_series < 2) fail("MAR needs a covariate series");
    for (const auto& p : {observe_prob, observe_prob_low}) {
        if (p && !(*p > 0.0 && *p <= 1.0)) fail("observation probabilities must lie in (0, 1]");
    }
}

ScenarioSpec default_spec(ScenarioId id, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.id = id;
    spec.seed = seed;
    if (is_s3(id)) {
        spec.num_series = 101;
    }
    return spec;
}

ScenarioSpec desk_scale(ScenarioSpec spec) {
    spec.num_subjects = 10;
    spec.domain_end = 200;
    return spec;
}

std::array<Trajectory, 3> make_theta(ScenarioId id, std::size_t subject) {
    const double i = static_cast<double>(subject + 1);
    const bool shared_pulses = id == ScenarioId::S2_1;
    const bool flat_trend = id == ScenarioId::S2_1 || id == ScenarioId::S2_2;
    const double c1 = shared_pulses ? 60.0 : 60.0 + 10.0 * i;
    const double c2 = shared_pulses ? 70.0 : 70.0 + 10.0 * i;
    const double trend = flat_trend ? 0.2 : 0.02 * i;

    return {
        [c1, c2](double t) {
            return 2.0 * std::exp(-(t - c1) * (t - c1) / 50.0) + 4.0 * std::exp(-(t - c2) * (t - c2) / 20.0);
        },
        [trend](double t) { return trend * std::log(t + 1.0); },
        [](double t) { return std::cos(0.12 * std::numbers::pi * t + 1.0); },
    };
}

double GroundTruth::psi_at(std::size_t subject, std::size_t series, double t) const {
    const auto theta = make_theta(scenario, subject);
    double v = 0.0;
    for (Eigen::Index r = 0; r < loadings.cols(); ++r) {
        v += loadings(static_cast<Eigen::Index>(series), r) * theta[static_cast<std::size_t>(r)](t);
    }
    return v;
}

std::vector<std::uint8_t> observation_mask(const ScenarioSpec& spec, std::span<const double> noisy_values) {
    spec.validate();
    const std::size_t I = spec.num_subjects;
    const std::size_t J = spec.num_series;
    const std::size_t T = spec.domain_end;
    if (noisy_values.size() != I * J * T) {
        throw std::invalid_argument("full-grid values do not match the scenario shape");
    }
    const std::size_t target = J - 1;
    auto at = [&](std::size_t i, std::size_t j, std::size_t t) { return (i * J + j) * T + (t - 1); };

    // One uniform draw per grid point, in fixed order, for every mechanism.
    std::mt19937_64 rng = make_stream(spec.seed, Stream::Mask);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> u(I * J * T);
    for (auto& x : u) {
        x = unif(rng);
    }
    std::vector<double> shared(T);
    for (auto& x : shared) {
        x = unif(rng);
    }

    std::vector<std::uint8_t> mask(I * J * T, 0);
    const double p_high = spec.observe_prob.value_or(0.8);
    const double p_low = spec.observe_prob_low.value_or(0.2);
    const double p_all = spec.observe_prob.value_or(0.7);

    auto bernoulli = [&](std::size_t i, std::size_t j, double p) {
        for (std::size_t t = 1; t <= T; ++t) {
            mask[at(i, j, t)] = u[at(i, j, t)] < p ? 1 : 0;
        }
    };
    auto every = [&](std::size_t i, std::size_t j, std::size_t stride) {
        for (std::size_t t = 1; t <= T; ++t) {
            mask[at(i, j, t)] = (t - 1) % stride == 0 ? 1 : 0;
        }
    };
    auto below_quantile = [&](std::size_t i, std::size_t driver) {
        std::vector<double> series(noisy_values.begin() + static_cast<std::ptrdiff_t>(at(i, driver, 1)),
                                   noisy_values.begin() + static_cast<std::ptrdiff_t>(at(i, driver, T) + 1));
        const double q = quantile(series, 0.9);
        for (std::size_t t = 1; t <= T; ++t) {
            const bool drawn = u[at(i, target, t)] < p_all;
            mask[at(i, target, t)] = drawn && series[t - 1] <= q ? 1 : 0;
        }
    };

    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            switch (spec.id) {
                case ScenarioId::S1_1:
                    bernoulli(i, j, j == target ? p_low : p_high);
                    break;
                case ScenarioId::S3_1:
                    bernoulli(i, j, j < scaled_count(J, 80.0 / 101.0) ? p_high : p_low);
                    break;
                case ScenarioId::S1_2:
                    every(i, j, j + 2 < J ? 1 : (j + 2 == J ? 2 : 4));
                    break;
                case ScenarioId::S3_2: {
                    const std::size_t full = scaled_count(J, 60.0 / 101.0);
                    const std::size_t half = scaled_count(J, 80.0 / 101.0);
                    every(i, j, j < full ? 1 : (j < half ? 2 : 4));
                    break;
                }
                case ScenarioId::S1_3:
                case ScenarioId::S3_3:
                case ScenarioId::MCAR:
                    bernoulli(i, j, p_all);
                    break;
                case ScenarioId::S2_1:
                case ScenarioId::S2_2:
                case ScenarioId::S2_3:
                    for (std::size_t t = 1; t <= T; ++t) {
                        mask[at(i, j, t)] = shared[t - 1] < p_all ? 1 : 0;
                    }
                    break;
                case ScenarioId::MAR:
                    if (j == 0) {
                        every(i, j, 1);
                    } else if (j == target) {
                        below_quantile(i, 0);
                    } else {
                        bernoulli(i, j, p_all);
                    }
                    break;
                case ScenarioId::MNAR:
                    if (j == target) {
                        below_quantile(i, target);
                    } else {
                        bernoulli(i, j, p_all);
                    }
                    break;
            }
        }
    }
    return mask;
}

SimulatedData generate(const ScenarioSpec& spec) {
    spec.validate();
    const std::size_t I = spec.num_subjects;
    const std::size_t J = spec.num_series;
    const std::size_t R = spec.true_rank;
    const std::size_t T = spec.domain_end;

    GroundTruth truth;
    truth.num_subjects = I;
    truth.num_series = J;
    truth.domain_end = T;
    truth.scenario = spec.id;
    truth.loadings.resize(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(R));

    std::mt19937_64 rng_f = make_stream(spec.seed, Stream::Loadings);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t r = 0; r < R; ++r) {
            truth.loadings(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) = std_normal(rng_f);
        }
    }

    truth.full_grid_values.resize(I * J * T);
    truth.noisy_values.resize(I * J * T);
    std::mt19937_64 rng_noise = make_stream(spec.seed, Stream::Noise);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<std::array<double, 3>> theta_grid(T);
    for (std::size_t i = 0; i < I; ++i) {
        const auto theta = make_theta(spec.id, i);
        for (std::size_t t = 1; t <= T; ++t) {
            for (std::size_t r = 0; r < 3; ++r) {
                theta_grid[t - 1][r] = theta[r](static_cast<double>(t));
            }
        }
        for (std::size_t j = 0; j < J; ++j) {
            for (std::size_t t = 1; t <= T; ++t) {
                double psi = 0.0;
                for (std::size_t r = 0; r < R; ++r) {
                    psi += truth.loadings(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) *
                           theta_grid[t - 1][r];
                }
                const std::size_t k = truth.index(i, j, t);
                truth.full_grid_values[k] = psi;
                truth.noisy_values[k] = psi + spec.noise_sd * noise(rng_noise);
            }
        }
    }

    truth.observed_mask = observation_mask(spec, truth.noisy_values);

    const double domain = static_cast<double>(T);
    SimulatedData out{ObservationPanel(I, J, domain), ObservationPanel(I, J, domain), std::move(truth)};
    const GroundTruth& gt = out.truth;
    std::mt19937_64 rng_jitter = make_stream(spec.seed, Stream::Jitter);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            std::vector<Observation> train_obs, test_obs;
            for (std::size_t t = 1; t <= T; ++t) {
                const std::size_t k = gt.index(i, j, t);
                if (gt.observed_mask[k]) {
                    if (spec.continuous_time) {
                        // Move the point into (t-1, t] and keep its noise draw.
                        const double tc = static_cast<double>(t) - unit(rng_jitter);
                        const double eps = gt.noisy_values[k] - gt.full_grid_values[k];
                        train_obs.push_back({tc, gt.psi_at(i, j, tc) + eps});
                    } else {
                        train_obs.push_back({static_cast<double>(t), gt.noisy_values[k]});
                    }
                } else if (j == J - 1) {
                    test_obs.push_back({static_cast<double>(t), gt.noisy_values[k]});
                }
            }
            out.train.set_cell(i, j, std::move(train_obs));
            out.test.set_cell(i, j, std::move(test_obs));
        }
    }
    return out;
}

void write_truth_csv(std::ostream& out, const GroundTruth& truth, const ObservationPanel& labels,
                     const std::string& comment) {
    write_comment_lines(out, comment);
    out << "subject,series,time,psi\n";
    for (std::size_t i = 0; i < truth.num_subjects; ++i) {
        for (std::size_t j = 0; j < truth.num_series; ++j) {
            for (std::size_t t = 1; t <= truth.domain_end; ++t) {
                out << labels.subject_ids()[i] << ',' << labels.series_ids()[j] << ',' << t << ','
                    << format_double(truth.psi(i, j, t)) << '\n';
            }
        }
    }
}

}  // namespace idlfm
