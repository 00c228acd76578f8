/**
 * @file model_io.hpp
 * @brief JSON persistence of fitted models and configuration blocks.
 *
 * A model file is one self-describing document:
 *
 *   {
 *     "format": "idlfm-model", "version": 1,
 *     "num_subjects": I, "num_series": J, "rank": R,
 *     "subject_ids": [...], "series_ids": [...],
 *     "basis": {"degree": p, "num_basis": M, "domain_end": T, "knots": [...]},
 *     "F": [J*R values, row-major],
 *     "W": [I*R*M values, index (i*R + r)*M + m],
 *     "standardization": {"convention": ..., "mean": [...], "std": [...], "degenerate": [...]},
 *     "seed": s, "config": {...}
 *   }
 *
 * Doubles are written in shortest round-trip form, so reloading reproduces
 * every parameter bit for bit.
 */
#pragma once

#include "idlfm/data.hpp"
#include "idlfm/model.hpp"
#include "idlfm/optim.hpp"
#include "idlfm/simgen.hpp"
#include "idlfm/tuning.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace idlfm {

struct FittedModel {
    ModelParams params;
    std::vector<std::string> subject_ids;
    std::vector<std::string> series_ids;
    StandardizationStats stats;
    std::uint64_t seed = 0;
    /// Effective configuration echoed from the run that produced the model.
    nlohmann::json config = nlohmann::json::object();
};

nlohmann::json to_json(const FittedModel& model);
/// Throws std::invalid_argument on a malformed or inconsistent document.
FittedModel model_from_json(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const FittedModel& model);
FittedModel load_model(const std::filesystem::path& path);

nlohmann::json to_json(const FitConfig& config);
/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
FitConfig fit_config_from_json(const nlohmann::json& j, FitConfig base = {});

nlohmann::json to_json(const TuneGrid& grid);
TuneGrid tune_grid_from_json(const nlohmann::json& j, TuneGrid base = {});

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& j, ScenarioSpec base = {});

}  // namespace idlfm
