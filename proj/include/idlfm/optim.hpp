/**
 * @file optim.hpp
 * @brief Penalized squared loss and alternating gradient descent.
 *
 * The objective is the unnormalized sum
 *
 *   L(F, W) = sum_{i,j} sum_{t in T_ij} (Y_ij(t) - f_j^T W_i B(t))^2
 *             + lambda (||F||_F^2 + ||W||_F^2)
 *
 * Because it is a plain sum over observations, the usable step size shrinks
 * as the panel grows; step size is a tuned hyperparameter.
 */
#pragma once

#include "idlfm/data.hpp"
#include "idlfm/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace idlfm {

struct FitConfig {
    std::size_t rank = 3;
    double lambda = 1.0;
    double step_size = 1e-4;
    double stop_eps = 1e-6;
    std::size_t max_iters = 5000;
    std::size_t num_basis = 60;
    std::size_t degree = 3;
    /// Standard deviation of the i.i.d. normal initial values.
    double init_scale = 0.1;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument naming the first offending field.
    void validate() const;
};

struct FitReport {
    /// L^(0), L^(1), ..., one entry per completed iteration plus the initial loss.
    std::vector<double> loss_trace;
    std::size_t iterations_run = 0;
    bool converged = false;
    double final_loss = 0.0;
    double wall_time_ms = 0.0;
};

struct FitResult {
    ModelParams params;
    FitReport report;
};

/// Penalized squared loss. Throws ShapeMismatch if the panel and parameters disagree on I or J.
double loss(const ObservationPanel& panel, const ModelParams& params, double lambda);

/// dL/dF, J x R.
Eigen::MatrixXd grad_F(const ObservationPanel& panel, const ModelParams& params, double lambda);

/// dL/dW_i, R x M.
Eigen::MatrixXd grad_W(const ObservationPanel& panel, const ModelParams& params, double lambda,
                       std::size_t subject);

/// Initial parameters: F then W_1..W_I, each filled row-major from
/// Normal(0, init_scale^2) draws of a generator seeded with config.seed.
ModelParams initial_params(const ObservationPanel& panel, const FitConfig& config);

/// Alternating gradient descent. Each sweep updates F and every W_i from the
/// previous iterate (F and W are both read at step s-1), then stops once the
/// relative loss change drops below stop_eps or max_iters sweeps have run.
///
/// Throws DivergenceError when the loss becomes non-finite or grows more than
/// tenfold in one sweep.
FitResult fit(const ObservationPanel& panel, const FitConfig& config);

/// fit() starting from explicit parameters instead of the seeded draw.
FitResult fit_from(const ObservationPanel& panel, const FitConfig& config, ModelParams start);

}  // namespace idlfm
