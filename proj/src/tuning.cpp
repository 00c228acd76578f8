#include "idlfm/tuning.hpp"

#include "idlfm/errors.hpp"
#include "idlfm/eval.hpp"
#include "parallel.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace idlfm {

namespace {

constexpr double kTieTolerance = 1e-12;

struct Candidate {
    double lambda;
    std::size_t rank;
    double step;

    auto key() const { return std::make_tuple(lambda, rank, step); }
};

TuneRow score(const ObservationPanel& train, const ObservationPanel& valid, std::size_t target,
              const FitConfig& base, const Candidate& c, int phase) {
    FitConfig cfg = base;
    cfg.lambda = c.lambda;
    cfg.rank = c.rank;
    cfg.step_size = c.step;
    TuneRow row{phase, c.lambda, c.rank, c.step, false, false, 0, std::numeric_limits<double>::infinity()};
    try {
        const FitResult fitted = fit(train, cfg);
        row.converged = fitted.report.converged;
        row.iterations = fitted.report.iterations_run;
        const double v = series_mse(fitted.params, valid, target);
        row.val_mse = std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const DivergenceError& e) {
        row.diverged = true;
        row.iterations = e.iteration();
    }
    return row;
}

// True if a beats b: lower MSE, or a tie broken by rank, lambda, step.
bool better(const TuneRow& a, const TuneRow& b) {
    if (a.val_mse < b.val_mse - kTieTolerance) return true;
    if (b.val_mse < a.val_mse - kTieTolerance) return false;
    if (a.rank != b.rank) return a.rank < b.rank;
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.step < b.step;
}

const TuneRow* pick(const std::vector<const TuneRow*>& rows) {
    auto select = [&](bool need_converged) -> const TuneRow* {
        const TuneRow* best = nullptr;
        for (const TuneRow* r : rows) {
            if (!std::isfinite(r->val_mse) || (need_converged && !r->converged)) {
                continue;
            }
            if (best == nullptr || better(*r, *best)) {
                best = r;
            }
        }
        return best;
    };
    const TuneRow* best = select(true);
    return best != nullptr ? best : select(false);
}

}  // namespace

void TuneGrid::validate() const {
    if (lambda_candidates.empty() || rank_candidates.empty() || step_candidates.empty()) {
        throw std::invalid_argument("tuning grid lists must not be empty");
    }
    for (double l : lambda_candidates) {
        if (!(l > 0.0)) throw std::invalid_argument("lambda candidates must be positive");
    }
    for (std::size_t r : rank_candidates) {
        if (r == 0) throw std::invalid_argument("rank candidates must be positive");
    }
    for (double s : step_candidates) {
        if (!(s > 0.0)) throw std::invalid_argument("step candidates must be positive");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie in (0, 1)");
    }
}

TuneResult tune(const ObservationPanel& panel, const TuneGrid& grid, const FitConfig& base,
                std::optional<std::size_t> target_series, std::size_t jobs) {
    grid.validate();
    base.validate();
    const std::size_t target = target_series.value_or(panel.num_series() - 1);

    SplitSpec split_spec;
    split_spec.test_fraction = grid.validation_fraction;
    split_spec.target_series = target;
    split_spec.seed = grid.seed;
    const PanelSplit parts = split(panel, split_spec);

    auto run_phase = [&](const std::vector<Candidate>& candidates, int phase,
                         const std::map<std::tuple<double, std::size_t, double>, TuneRow>& done) {
        std::vector<TuneRow> rows(candidates.size());
        detail::parallel_for(candidates.size(), jobs, [&](std::size_t k) {
            const auto hit = done.find(candidates[k].key());
            if (hit != done.end()) {
                rows[k] = hit->second;
                rows[k].phase = phase;
            } else {
                rows[k] = score(parts.train, parts.test, target, base, candidates[k], phase);
            }
        });
        return rows;
    };

    TuneResult result;
    std::map<std::tuple<double, std::size_t, double>, TuneRow> done;

    std::vector<Candidate> phase1;
    for (double l : grid.lambda_candidates) {
        phase1.push_back({l, base.rank, base.step_size});
    }
    const auto rows1 = run_phase(phase1, 1, done);
    std::vector<const TuneRow*> view1;
    for (std::size_t k = 0; k < rows1.size(); ++k) {
        done.emplace(phase1[k].key(), rows1[k]);
        view1.push_back(&rows1[k]);
    }
    const TuneRow* best1 = pick(view1);
    // If every lambda diverged at the base step, phase 2 may still find a
    // stable step; carry the first lambda forward.
    const double lambda_star = best1 != nullptr ? best1->lambda : grid.lambda_candidates.front();

    std::vector<Candidate> phase2;
    for (std::size_t r : grid.rank_candidates) {
        for (double s : grid.step_candidates) {
            phase2.push_back({lambda_star, r, s});
        }
    }
    const auto rows2 = run_phase(phase2, 2, done);
    // The phase-1 winner competes too, so the result is the table minimum
    // even when the base (rank, step) pair is not on the phase-2 grid.
    std::vector<const TuneRow*> view2;
    if (best1 != nullptr) {
        view2.push_back(best1);
    }
    for (const auto& r : rows2) {
        view2.push_back(&r);
    }
    const TuneRow* best2 = pick(view2);
    if (best2 == nullptr) {
        throw DivergenceError("every tuning candidate diverged", 0);
    }
    result.best_lambda = best2->lambda;
    result.best_rank = best2->rank;
    result.best_step = best2->step;
    result.best_val_mse = best2->val_mse;
    result.table = rows1;
    result.table.insert(result.table.end(), rows2.begin(), rows2.end());
    return result;
}

FitConfig apply(const TuneResult& result, FitConfig base) {
    base.lambda = result.best_lambda;
    base.rank = result.best_rank;
    base.step_size = result.best_step;
    return base;
}

void write_tune_csv(std::ostream& out, const TuneResult& result, const std::string& comment) {
    write_comment_lines(out, comment);
    out << "phase,lambda,rank,step,converged,val_mse\n";
    for (const auto& r : result.table) {
        out << r.phase << ',' << format_double(r.lambda) << ',' << r.rank << ',' << format_double(r.step) << ','
            << (r.converged ? "true" : "false") << ','
            << (std::isfinite(r.val_mse) ? format_double(r.val_mse) : std::string("inf")) << '\n';
    }
}

}  // namespace idlfm
