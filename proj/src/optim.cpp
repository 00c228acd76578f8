#include "idlfm/optim.hpp"

#include "idlfm/errors.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace idlfm {

namespace {

// Basis values of every observation, evaluated once per fit.
struct CellDesign {
    std::vector<std::size_t> first;  // first nonzero basis index per observation
    std::vector<double> basis;       // (degree + 1) values per observation
    std::vector<double> y;
};

struct Design {
    std::size_t num_subjects = 0;
    std::size_t num_series = 0;
    std::size_t width = 0;  // degree + 1
    std::vector<CellDesign> cells;

    const CellDesign& cell(std::size_t i, std::size_t j) const { return cells[i * num_series + j]; }
};

void check_compatible(const ObservationPanel& panel, const ModelParams& params) {
    if (panel.num_subjects() != params.num_subjects() || panel.num_series() != params.num_series()) {
        std::ostringstream msg;
        msg << "panel has " << panel.num_subjects() << " subjects x " << panel.num_series()
            << " series but parameters have " << params.num_subjects() << " x " << params.num_series();
        throw ShapeMismatch(msg.str());
    }
}

Design build_design(const ObservationPanel& panel, const BSplineBasis& basis) {
    Design d;
    d.num_subjects = panel.num_subjects();
    d.num_series = panel.num_series();
    d.width = basis.degree() + 1;
    d.cells.resize(d.num_subjects * d.num_series);
    for (std::size_t i = 0; i < d.num_subjects; ++i) {
        for (std::size_t j = 0; j < d.num_series; ++j) {
            const auto obs = panel.cell(i, j);
            auto& c = d.cells[i * d.num_series + j];
            c.first.resize(obs.size());
            c.basis.resize(obs.size() * d.width);
            c.y.resize(obs.size());
            for (std::size_t k = 0; k < obs.size(); ++k) {
                c.first[k] = basis.eval_nonzero(obs[k].time, std::span<double>(c.basis.data() + k * d.width, d.width));
                c.y[k] = obs[k].value;
            }
        }
    }
    return d;
}

struct Gradients {
    Eigen::MatrixXd F;
    std::vector<Eigen::MatrixXd> W;
};

// Residual pass of subject i: returns its squared-error sum and adds the
// data-fit gradient contributions into gF (J x R) and gW (R x M).
double subject_pass(const Design& d, const ModelParams& params, std::size_t i, Eigen::MatrixXd* gF,
                    Eigen::MatrixXd* gW) {
    const Eigen::MatrixXd& w = params.weights(i);
    const Eigen::MatrixXd& F = params.loadings();
    const auto R = static_cast<std::size_t>(w.rows());
    const double* wdata = w.data();  // column-major: column m starts at m * R
    std::vector<double> theta(R);
    std::vector<double> f(R);
    double sse = 0.0;

    for (std::size_t j = 0; j < d.num_series; ++j) {
        const CellDesign& c = d.cell(i, j);
        if (c.y.empty()) {
            continue;
        }
        for (std::size_t r = 0; r < R; ++r) {
            f[r] = F(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r));
        }
        for (std::size_t k = 0; k < c.y.size(); ++k) {
            const double* b = c.basis.data() + k * d.width;
            const double* wcol = wdata + c.first[k] * R;
            std::fill(theta.begin(), theta.end(), 0.0);
            for (std::size_t q = 0; q < d.width; ++q) {
                for (std::size_t r = 0; r < R; ++r) {
                    theta[r] += b[q] * wcol[q * R + r];
                }
            }
            double pred = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                pred += f[r] * theta[r];
            }
            const double resid = c.y[k] - pred;
            sse += resid * resid;
            const double scale = -2.0 * resid;
            if (gF != nullptr) {
                for (std::size_t r = 0; r < R; ++r) {
                    (*gF)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(r)) += scale * theta[r];
                }
            }
            if (gW != nullptr) {
                double* gcol = gW->data() + c.first[k] * R;
                for (std::size_t q = 0; q < d.width; ++q) {
                    const double s = scale * b[q];
                    for (std::size_t r = 0; r < R; ++r) {
                        gcol[q * R + r] += s * f[r];
                    }
                }
            }
        }
    }
    return sse;
}

// Loss and both gradient blocks at one iterate. Subjects are visited in index
// order so the F reduction is bit-reproducible.
double full_pass(const Design& d, const ModelParams& params, double lambda, Gradients& g) {
    g.F.setZero(params.loadings().rows(), params.loadings().cols());
    g.W.resize(params.num_subjects());
    double sse = 0.0;
    for (std::size_t i = 0; i < params.num_subjects(); ++i) {
        const auto& w = params.weights(i);
        g.W[i].setZero(w.rows(), w.cols());
        sse += subject_pass(d, params, i, &g.F, &g.W[i]);
        g.W[i] += (2.0 * lambda) * w;
    }
    g.F += (2.0 * lambda) * params.loadings();
    return sse + lambda * params.squared_norm();
}

}  // namespace

void FitConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid fit config: " + what); };
    if (rank == 0) fail("rank must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be a finite value >= 0");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) fail("step size must be > 0");
    if (!(stop_eps > 0.0)) fail("stopping tolerance must be > 0");
    if (max_iters == 0) fail("max_iters must be >= 1");
    if (num_basis < degree + 1) fail("num_basis must be >= degree + 1");
    if (!(init_scale > 0.0) || !std::isfinite(init_scale)) fail("init_scale must be > 0");
}

double loss(const ObservationPanel& panel, const ModelParams& params, double lambda) {
    check_compatible(panel, params);
    const Design d = build_design(panel, params.basis());
    double sse = 0.0;
    for (std::size_t i = 0; i < params.num_subjects(); ++i) {
        sse += subject_pass(d, params, i, nullptr, nullptr);
    }
    return sse + lambda * params.squared_norm();
}

Eigen::MatrixXd grad_F(const ObservationPanel& panel, const ModelParams& params, double lambda) {
    check_compatible(panel, params);
    const Design d = build_design(panel, params.basis());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(params.loadings().rows(), params.loadings().cols());
    for (std::size_t i = 0; i < params.num_subjects(); ++i) {
        subject_pass(d, params, i, &g, nullptr);
    }
    return g + (2.0 * lambda) * params.loadings();
}

Eigen::MatrixXd grad_W(const ObservationPanel& panel, const ModelParams& params, double lambda,
                       std::size_t subject) {
    check_compatible(panel, params);
    const auto& w = params.weights(subject);
    const Design d = build_design(panel, params.basis());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(w.rows(), w.cols());
    subject_pass(d, params, subject, nullptr, &g);
    return g + (2.0 * lambda) * w;
}

ModelParams initial_params(const ObservationPanel& panel, const FitConfig& config) {
    config.validate();
    ModelParams params(panel.num_subjects(), panel.num_series(), config.rank,
                       make_basis(panel.domain_end(), config.num_basis, config.degree));
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, config.init_scale);
    auto fill = [&](Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = normal(rng);
            }
        }
    };
    fill(params.loadings());
    for (std::size_t i = 0; i < params.num_subjects(); ++i) {
        fill(params.weights(i));
    }
    return params;
}

FitResult fit(const ObservationPanel& panel, const FitConfig& config) {
    return fit_from(panel, config, initial_params(panel, config));
}

FitResult fit_from(const ObservationPanel& panel, const FitConfig& config, ModelParams start) {
    config.validate();
    check_compatible(panel, start);
    if (panel.empty()) {
        throw std::invalid_argument("cannot fit an empty panel");
    }
    const auto t0 = std::chrono::steady_clock::now();

    const Design d = build_design(panel, start.basis());
    FitResult result{std::move(start), {}};
    ModelParams& params = result.params;
    FitReport& report = result.report;

    Gradients g;
    double previous = full_pass(d, params, config.lambda, g);
    report.loss_trace.push_back(previous);

    for (std::size_t s = 1; s <= config.max_iters; ++s) {
        params.loadings() -= config.step_size * g.F;
        for (std::size_t i = 0; i < params.num_subjects(); ++i) {
            params.weights(i) -= config.step_size * g.W[i];
        }

        // Loss at the new iterate; the gradients for the next sweep come with it.
        const double current = full_pass(d, params, config.lambda, g);
        report.loss_trace.push_back(current);
        report.iterations_run = s;

        if (!std::isfinite(current)) {
            throw DivergenceError("loss became non-finite at iteration " + std::to_string(s) +
                                      "; reduce the step size",
                                  s);
        }
        if (current > 10.0 * previous) {
            std::ostringstream msg;
            msg << "loss grew from " << previous << " to " << current << " at iteration " << s
                << "; reduce the step size";
            throw DivergenceError(msg.str(), s);
        }

        const double change = std::abs(current - previous);
        const bool small = previous > 0.0 ? change / previous < config.stop_eps : change == 0.0;
        previous = current;
        if (small) {
            report.converged = true;
            break;
        }
    }

    report.final_loss = report.loss_trace.back();
    report.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace idlfm
