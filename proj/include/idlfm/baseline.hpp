/**
 * @file baseline.hpp
 * @brief Single-series smoothing-spline interpolation.
 *
 * Comparator that sees only the target series of one subject: a cubic
 * B-spline fit with a ridge penalty on the coefficients,
 *
 *   c = argmin sum_k (y_k - c^T B(t_k))^2 + lambda_s ||c||^2,
 *
 * solved through the normal equations.
 */
#pragma once

#include "idlfm/bspline.hpp"
#include "idlfm/data.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace idlfm {

struct SplineFit {
    BSplineBasis basis;
    Eigen::VectorXd coefficients;
    double smoothing = 0.0;
};

/// Throws std::invalid_argument for fewer than two points or a negative
/// smoothing value, std::domain_error for times outside [0, T] and
/// std::runtime_error if the system is singular (possible only at lambda_s = 0).
SplineFit fit_spline(std::span<const Observation> points, double domain_end, std::size_t num_basis,
                     double smoothing, std::size_t degree = 3);

/// c^T B(t); std::domain_error outside the basis domain.
double predict_spline(const SplineFit& fit, double t);

/// Default smoothing candidates searched by fit_spline_tuned.
std::vector<double> default_smoothing_grid();

/// Picks lambda_s from `grid` by holding out `validation_fraction` of the
/// points (seeded), then refits on every point with the chosen value.
/// Ties go to the later grid entry.
SplineFit fit_spline_tuned(std::span<const Observation> points, double domain_end, std::size_t num_basis,
                           std::span<const double> grid, double validation_fraction, std::uint64_t seed,
                           std::size_t degree = 3);

}  // namespace idlfm
