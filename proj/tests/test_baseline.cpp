#include "idlfm/baseline.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace idlfm;

TEST_CASE("two points on a line are interpolated") {
    const std::vector<Observation> pts{{0.0, 0.0}, {1.0, 1.0}};
    const auto f = fit_spline(pts, 1.0, 2, 1e-10, 1);
    CHECK(std::abs(predict_spline(f, 0.5) - 0.5) < 1e-6);
}

TEST_CASE("constants are reproduced") {
    std::vector<Observation> pts;
    for (int t = 0; t <= 40; t += 3) pts.push_back({double(t), 3.0});
    const auto f = fit_spline(pts, 40.0, 8, 1e-10);
    for (double t : {0.0, 1.5, 20.0, 39.0, 40.0}) CHECK(std::abs(predict_spline(f, t) - 3.0) < 1e-8);
}

TEST_CASE("coefficients solve the penalized normal equations") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<Observation> pts;
    for (int t = 0; t < 60; ++t) pts.push_back({double(t), std::sin(t / 7.0) + 0.1 * N(rng)});
    const double lambda = 0.3;
    const auto f = fit_spline(pts, 59.0, 10, lambda);
    Eigen::MatrixXd B(60, 10);
    Eigen::VectorXd y(60);
    for (int k = 0; k < 60; ++k) {
        const auto row = f.basis.eval(pts[k].time);
        for (int m = 0; m < 10; ++m) B(k, m) = row[m];
        y(k) = pts[k].value;
    }
    const Eigen::VectorXd residual =
        (B.transpose() * B + lambda * Eigen::MatrixXd::Identity(10, 10)) * f.coefficients - B.transpose() * y;
    CHECK(residual.norm() < 1e-10 * std::max(1.0, (B.transpose() * y).norm()));
}

TEST_CASE("too few points or an ill-posed unpenalized fit are rejected") {
    CHECK_THROWS(fit_spline(std::vector<Observation>{{0.0, 1.0}}, 1.0, 4, 0.1));
    CHECK_THROWS(fit_spline(std::vector<Observation>{{0.0, 1.0}, {0.1, 2.0}}, 10.0, 8, 0.0));
}

TEST_CASE("tuned fit picks from the grid and is deterministic") {
    std::vector<Observation> pts;
    for (int t = 0; t < 50; ++t) pts.push_back({double(t), std::cos(t / 5.0)});
    const auto grid = default_smoothing_grid();
    const auto a = fit_spline_tuned(pts, 49.0, 12, grid, 0.3, 7, 3);
    const auto b = fit_spline_tuned(pts, 49.0, 12, grid, 0.3, 7, 3);
    CHECK(std::find(grid.begin(), grid.end(), a.smoothing) != grid.end());
    CHECK(a.coefficients == b.coefficients);
    CHECK(std::abs(predict_spline(a, 25.0) - std::cos(5.0)) < 0.05);
}
