#include "idlfm/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace idlfm {

BSplineBasis::BSplineBasis(double domain_end, std::size_t num_basis, std::size_t degree)
    : domain_end_(domain_end), num_basis_(num_basis), degree_(degree) {
    if (!(domain_end > 0.0) || !std::isfinite(domain_end)) {
        throw std::invalid_argument("B-spline domain end must be a positive finite time");
    }
    if (num_basis < degree + 1) {
        std::ostringstream msg;
        msg << "number of basis functions (" << num_basis << ") must be at least degree + 1 ("
            << degree + 1 << ")";
        throw std::invalid_argument(msg.str());
    }

    const std::size_t interior = num_basis - degree - 1;
    knots_.reserve(num_basis + degree + 1);
    knots_.insert(knots_.end(), degree + 1, 0.0);
    for (std::size_t k = 1; k <= interior; ++k) {
        knots_.push_back(domain_end * static_cast<double>(k) / static_cast<double>(interior + 1));
    }
    knots_.insert(knots_.end(), degree + 1, domain_end);
}

// Index s of the knot span [u_s, u_{s+1}) holding t, with degree <= s < M.
// t == T maps to the last nonempty span so that B_M(T) = 1.
std::size_t BSplineBasis::find_span(double t) const {
    if (t >= domain_end_) {
        return num_basis_ - 1;
    }
    const auto begin = knots_.begin() + static_cast<std::ptrdiff_t>(degree_);
    const auto end = knots_.begin() + static_cast<std::ptrdiff_t>(num_basis_ + 1);
    const auto it = std::upper_bound(begin, end, t);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

std::size_t BSplineBasis::eval_nonzero(double t, std::span<double> out) const {
    if (!contains(t)) {
        std::ostringstream msg;
        msg << "time " << t << " outside basis domain [0, " << domain_end_ << "]";
        throw std::domain_error(msg.str());
    }
    if (out.size() != degree_ + 1) {
        throw std::invalid_argument("output span must hold degree + 1 values");
    }

    // The NURBS Book, algorithm A2.2.
    const std::size_t span = find_span(t);
    std::vector<double> left(degree_ + 1), right(degree_ + 1);
    out[0] = 1.0;
    for (std::size_t j = 1; j <= degree_; ++j) {
        left[j] = t - knots_[span + 1 - j];
        right[j] = knots_[span + j] - t;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
    return span - degree_;
}

BasisSpan BSplineBasis::eval_nonzero(double t) const {
    BasisSpan result;
    result.values.resize(degree_ + 1);
    result.first = eval_nonzero(t, result.values);
    return result;
}

std::vector<double> BSplineBasis::eval(double t) const {
    const BasisSpan nz = eval_nonzero(t);
    std::vector<double> full(num_basis_, 0.0);
    std::copy(nz.values.begin(), nz.values.end(), full.begin() + static_cast<std::ptrdiff_t>(nz.first));
    return full;
}

}  // namespace idlfm
