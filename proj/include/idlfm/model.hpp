/**
 * @file model.hpp
 * @brief Factorized parameters and interpolation.
 *
 * Series j of subject i is modelled as f_j^T W_i B(t): a time-invariant
 * loading vector f_j (row j of F, shared by all subjects) against the
 * subject's dynamic factors theta_i(t) = W_i B(t), where B(t) is the
 * B-spline basis vector.
 */
#pragma once

#include "idlfm/bspline.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace idlfm {

class ModelParams {
public:
    /// Zero-initialized parameters: F is J x R, each W_i is R x M.
    ModelParams(std::size_t num_subjects, std::size_t num_series, std::size_t rank, BSplineBasis basis);

    /// Takes ownership of explicit parameter blocks; throws ShapeMismatch on
    /// inconsistent shapes and std::invalid_argument on non-finite entries.
    ModelParams(Eigen::MatrixXd loadings, std::vector<Eigen::MatrixXd> weights, BSplineBasis basis);

    [[nodiscard]] std::size_t num_subjects() const noexcept { return weights_.size(); }
    [[nodiscard]] std::size_t num_series() const noexcept { return static_cast<std::size_t>(loadings_.rows()); }
    [[nodiscard]] std::size_t rank() const noexcept { return static_cast<std::size_t>(loadings_.cols()); }
    [[nodiscard]] std::size_t num_basis() const noexcept { return basis_.num_basis(); }
    [[nodiscard]] const BSplineBasis& basis() const noexcept { return basis_; }

    /// F, one row per series.
    [[nodiscard]] const Eigen::MatrixXd& loadings() const noexcept { return loadings_; }
    [[nodiscard]] Eigen::MatrixXd& loadings() noexcept { return loadings_; }

    /// W_i, the R x M spline weights of one subject.
    [[nodiscard]] const Eigen::MatrixXd& weights(std::size_t subject) const;
    [[nodiscard]] Eigen::MatrixXd& weights(std::size_t subject);
    [[nodiscard]] const std::vector<Eigen::MatrixXd>& all_weights() const noexcept { return weights_; }

    /// ||F||_F^2 + ||W||_F^2.
    [[nodiscard]] double squared_norm() const;
    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const ModelParams& a, const ModelParams& b);

private:
    void check_shapes() const;

    Eigen::MatrixXd loadings_;
    std::vector<Eigen::MatrixXd> weights_;
    BSplineBasis basis_;
};

/// theta_i(t) = W_i B(t). Throws std::domain_error outside [0, T] and
/// std::out_of_range for a bad subject index.
Eigen::VectorXd dynamic_factors(const ModelParams& params, std::size_t subject, double t);

/// f_j^T W_i B(t).
double predict(const ModelParams& params, std::size_t subject, std::size_t series, double t);

/// predict over a grid; one basis evaluation per grid point.
std::vector<double> predict_curve(const ModelParams& params, std::size_t subject, std::size_t series,
                                  std::span<const double> grid);

}  // namespace idlfm
