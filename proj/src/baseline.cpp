#include "idlfm/baseline.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace idlfm {

SplineFit fit_spline(std::span<const Observation> points, double domain_end, std::size_t num_basis,
                     double smoothing, std::size_t degree) {
    if (points.size() < 2) {
        throw std::invalid_argument("spline fit needs at least two points");
    }
    if (!(smoothing >= 0.0)) {
        throw std::invalid_argument("smoothing parameter must be >= 0");
    }
    BSplineBasis basis(domain_end, num_basis, degree);
    const auto M = static_cast<Eigen::Index>(num_basis);

    // Accumulate G^T G and G^T y from the sparse rows of the design matrix.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(M, M);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(M);
    std::vector<double> values(degree + 1);
    for (const auto& p : points) {
        const auto first = static_cast<Eigen::Index>(basis.eval_nonzero(p.time, values));
        for (std::size_t a = 0; a <= degree; ++a) {
            rhs(first + static_cast<Eigen::Index>(a)) += values[a] * p.value;
            for (std::size_t b = 0; b <= degree; ++b) {
                gram(first + static_cast<Eigen::Index>(a), first + static_cast<Eigen::Index>(b)) +=
                    values[a] * values[b];
            }
        }
    }
    gram.diagonal().array() += smoothing;

    Eigen::VectorXd coef;
    if (smoothing > 0.0) {
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success) {
            throw std::runtime_error("spline normal equations are not positive definite");
        }
        coef = llt.solve(rhs);
    } else {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        if (!lu.isInvertible()) {
            throw std::runtime_error("spline normal equations are singular; use a positive smoothing value");
        }
        coef = lu.solve(rhs);
    }
    return {std::move(basis), std::move(coef), smoothing};
}

double predict_spline(const SplineFit& fit, double t) {
    const BasisSpan nz = fit.basis.eval_nonzero(t);
    double v = 0.0;
    for (std::size_t k = 0; k < nz.values.size(); ++k) {
        v += nz.values[k] * fit.coefficients(static_cast<Eigen::Index>(nz.first + k));
    }
    return v;
}

std::vector<double> default_smoothing_grid() {
    return {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
}

SplineFit fit_spline_tuned(std::span<const Observation> points, double domain_end, std::size_t num_basis,
                           std::span<const double> grid, double validation_fraction, std::uint64_t seed,
                           std::size_t degree) {
    if (grid.empty()) {
        throw std::invalid_argument("smoothing grid must not be empty");
    }
    // Reuse the panel splitter on a one-cell panel.
    ObservationPanel one(1, 1, domain_end);
    one.set_cell(0, 0, std::vector<Observation>(points.begin(), points.end()));
    SplitSpec spec;
    spec.test_fraction = validation_fraction;
    spec.seed = seed;
    const PanelSplit parts = split(one, spec);
    const auto train = parts.train.cell(0, 0);
    const auto valid = parts.test.cell(0, 0);

    double best_lambda = grid.front();
    double best_mse = std::numeric_limits<double>::infinity();
    if (train.size() >= 2 && !valid.empty()) {
        for (const double lam : grid) {
            const SplineFit candidate = fit_spline(train, domain_end, num_basis, lam, degree);
            double sse = 0.0;
            for (const auto& p : valid) {
                const double r = p.value - predict_spline(candidate, p.time);
                sse += r * r;
            }
            const double mse = sse / static_cast<double>(valid.size());
            if (mse <= best_mse) {
                best_mse = mse;
                best_lambda = lam;
            }
        }
    }
    return fit_spline(points, domain_end, num_basis, best_lambda, degree);
}

}  // namespace idlfm
