#include "idlfm/model.hpp"

#include "idlfm/errors.hpp"

#include <sstream>
#include <stdexcept>

namespace idlfm {

namespace {

void check_index(std::size_t index, std::size_t bound, const char* what) {
    if (index >= bound) {
        std::ostringstream msg;
        msg << what << " index " << index << " out of range (" << bound << ")";
        throw std::out_of_range(msg.str());
    }
}

// theta = W_i B(t), touching only the degree+1 nonzero basis columns.
void accumulate_factors(const Eigen::MatrixXd& w, const BasisSpan& nz, Eigen::VectorXd& theta) {
    theta.setZero(w.rows());
    for (std::size_t k = 0; k < nz.values.size(); ++k) {
        theta += nz.values[k] * w.col(static_cast<Eigen::Index>(nz.first + k));
    }
}

}  // namespace

ModelParams::ModelParams(std::size_t num_subjects, std::size_t num_series, std::size_t rank,
                         BSplineBasis basis)
    : loadings_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_series), static_cast<Eigen::Index>(rank))),
      weights_(num_subjects, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rank),
                                                   static_cast<Eigen::Index>(basis.num_basis()))),
      basis_(std::move(basis)) {
    if (num_subjects == 0 || num_series == 0 || rank == 0) {
        throw std::invalid_argument("model needs at least one subject, one series and rank >= 1");
    }
}

ModelParams::ModelParams(Eigen::MatrixXd loadings, std::vector<Eigen::MatrixXd> weights, BSplineBasis basis)
    : loadings_(std::move(loadings)), weights_(std::move(weights)), basis_(std::move(basis)) {
    check_shapes();
    if (!all_finite()) {
        throw std::invalid_argument("model parameters must be finite");
    }
}

void ModelParams::check_shapes() const {
    if (loadings_.rows() == 0 || loadings_.cols() == 0 || weights_.empty()) {
        throw ShapeMismatch("model needs at least one subject, one series and rank >= 1");
    }
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const auto& w = weights_[i];
        if (w.rows() != loadings_.cols() || static_cast<std::size_t>(w.cols()) != basis_.num_basis()) {
            std::ostringstream msg;
            msg << "W_" << i << " is " << w.rows() << "x" << w.cols() << ", expected " << loadings_.cols()
                << "x" << basis_.num_basis();
            throw ShapeMismatch(msg.str());
        }
    }
}

const Eigen::MatrixXd& ModelParams::weights(std::size_t subject) const {
    check_index(subject, weights_.size(), "subject");
    return weights_[subject];
}

Eigen::MatrixXd& ModelParams::weights(std::size_t subject) {
    check_index(subject, weights_.size(), "subject");
    return weights_[subject];
}

double ModelParams::squared_norm() const {
    double total = loadings_.squaredNorm();
    for (const auto& w : weights_) {
        total += w.squaredNorm();
    }
    return total;
}

bool ModelParams::all_finite() const {
    if (!loadings_.allFinite()) {
        return false;
    }
    for (const auto& w : weights_) {
        if (!w.allFinite()) {
            return false;
        }
    }
    return true;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
    if (a.loadings_.rows() != b.loadings_.rows() || a.loadings_.cols() != b.loadings_.cols() ||
        a.weights_.size() != b.weights_.size() || a.basis_.degree() != b.basis_.degree() ||
        a.basis_.num_basis() != b.basis_.num_basis() || a.basis_.domain_end() != b.basis_.domain_end()) {
        return false;
    }
    if (a.loadings_ != b.loadings_) {
        return false;
    }
    for (std::size_t i = 0; i < a.weights_.size(); ++i) {
        if (a.weights_[i] != b.weights_[i]) {
            return false;
        }
    }
    return true;
}

Eigen::VectorXd dynamic_factors(const ModelParams& params, std::size_t subject, double t) {
    const auto& w = params.weights(subject);
    Eigen::VectorXd theta;
    accumulate_factors(w, params.basis().eval_nonzero(t), theta);
    return theta;
}

double predict(const ModelParams& params, std::size_t subject, std::size_t series, double t) {
    check_index(series, params.num_series(), "series");
    const Eigen::VectorXd theta = dynamic_factors(params, subject, t);
    return params.loadings().row(static_cast<Eigen::Index>(series)).dot(theta);
}

std::vector<double> predict_curve(const ModelParams& params, std::size_t subject, std::size_t series,
                                  std::span<const double> grid) {
    check_index(series, params.num_series(), "series");
    const auto& w = params.weights(subject);
    const auto f = params.loadings().row(static_cast<Eigen::Index>(series));
    std::vector<double> out;
    out.reserve(grid.size());
    Eigen::VectorXd theta;
    for (const double t : grid) {
        accumulate_factors(w, params.basis().eval_nonzero(t), theta);
        out.push_back(f.dot(theta));
    }
    return out;
}

}  // namespace idlfm
