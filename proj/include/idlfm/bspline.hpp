/**
 * @file bspline.hpp
 * @brief Clamped uniform B-spline bases on [0, T].
 *
 * The knot vector repeats each boundary knot degree+1 times and places
 * M - degree - 1 interior knots evenly on (0, T). Evaluation uses the
 * triangular Cox-de Boor scheme, so only the degree+1 functions that are
 * nonzero on the knot span containing t are ever computed.
 */
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace idlfm {

/// Nonzero window of a basis evaluation: B_{first}, ..., B_{first+degree}.
struct BasisSpan {
    std::size_t first = 0;
    std::vector<double> values;
};

class BSplineBasis {
public:
    /// Clamped basis with evenly spaced interior knots.
    /// Throws std::invalid_argument if domain_end <= 0 or num_basis < degree + 1.
    BSplineBasis(double domain_end, std::size_t num_basis, std::size_t degree = 3);

    [[nodiscard]] std::size_t degree() const noexcept { return degree_; }
    [[nodiscard]] std::size_t num_basis() const noexcept { return num_basis_; }
    [[nodiscard]] double domain_end() const noexcept { return domain_end_; }
    [[nodiscard]] std::span<const double> knots() const noexcept { return knots_; }
    [[nodiscard]] std::size_t num_interior_knots() const noexcept {
        return num_basis_ - degree_ - 1;
    }
    [[nodiscard]] bool contains(double t) const noexcept { return t >= 0.0 && t <= domain_end_; }

    /// (B_1(t), ..., B_M(t)). Throws std::domain_error outside [0, T].
    [[nodiscard]] std::vector<double> eval(double t) const;

    /// The degree+1 possibly-nonzero values and the index of the first one.
    [[nodiscard]] BasisSpan eval_nonzero(double t) const;

    /// Writes the degree+1 nonzero values into out; returns the first index.
    std::size_t eval_nonzero(double t, std::span<double> out) const;

private:
    std::size_t find_span(double t) const;

    double domain_end_;
    std::size_t num_basis_;
    std::size_t degree_;
    std::vector<double> knots_;
};

/// Free-function spelling of the constructor.
inline BSplineBasis make_basis(double domain_end, std::size_t num_basis, std::size_t degree = 3) {
    return BSplineBasis(domain_end, num_basis, degree);
}

}  // namespace idlfm
