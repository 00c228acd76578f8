/**
 * @file tuning.hpp
 * @brief Two-phase grid search on a held-out share of the target series.
 *
 * Phase 1 fits one model per lambda candidate with the base rank and step
 * size. Phase 2 fixes the best lambda and searches every (rank, step) pair.
 * Diverged fits score +inf.
 */
#pragma once

#include "idlfm/data.hpp"
#include "idlfm/optim.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <optional>
#include <vector>

namespace idlfm {

struct TuneGrid {
    std::vector<double> lambda_candidates{0.01, 0.1, 1.0, 10.0};
    std::vector<std::size_t> rank_candidates{1, 2, 3, 4, 5, 6};
    std::vector<double> step_candidates{1e-6, 1e-5, 1e-4, 1e-3};
    double validation_fraction = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TuneRow {
    int phase = 1;
    double lambda = 0.0;
    std::size_t rank = 0;
    double step = 0.0;
    bool converged = false;
    bool diverged = false;
    std::size_t iterations = 0;
    double val_mse = 0.0;
};

struct TuneResult {
    double best_lambda = 0.0;
    std::size_t best_rank = 0;
    double best_step = 0.0;
    double best_val_mse = 0.0;
    std::vector<TuneRow> table;
};

/// Searches `grid` around `base`. Validation points come from the target
/// series only (default: the last series). Ties within 1e-12 go to the
/// smaller rank, then smaller lambda, then smaller step. Only converged rows
/// compete unless none converged, in which case every finite row does.
///
/// Throws DivergenceError if every candidate diverges.
TuneResult tune(const ObservationPanel& panel, const TuneGrid& grid, const FitConfig& base,
                std::optional<std::size_t> target_series = std::nullopt, std::size_t jobs = 1);

/// `base` with the tuned lambda, rank and step.
FitConfig apply(const TuneResult& result, FitConfig base);

/// CSV with columns `phase,lambda,rank,step,converged,val_mse`.
void write_tune_csv(std::ostream& out, const TuneResult& result, const std::string& comment = {});

}  // namespace idlfm
