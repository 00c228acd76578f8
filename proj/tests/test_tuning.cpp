#include "idlfm/errors.hpp"
#include "idlfm/simgen.hpp"
#include "idlfm/tuning.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace idlfm;

namespace {

ObservationPanel rank_one_panel() {
    const double T = 40.0;
    const double f[3] = {1.0, -0.7, 0.4};
    ObservationPanel p(2, 3, T);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (int t = 0; t <= 40; ++t)
                p.add(i, j, {double(t), f[j] * (std::sin(2.0 * M_PI * t / T + double(i)) + 0.5)});
    return p;
}

FitConfig small_config() {
    FitConfig c;
    c.num_basis = 10;
    c.step_size = 1e-2;
    c.max_iters = 3000;
    c.stop_eps = 1e-10;
    c.init_scale = 0.5;
    c.lambda = 1e-6;
    return c;
}

}  // namespace

TEST_CASE("single-candidate grid returns that candidate") {
    const auto panel = rank_one_panel();
    TuneGrid g;
    g.lambda_candidates = {0.1};
    g.rank_candidates = {2};
    g.step_candidates = {5e-3};
    g.seed = 3;
    FitConfig base = small_config();
    base.rank = 2;
    base.step_size = 5e-3;
    const auto r = tune(panel, g, base);
    CHECK(r.best_lambda == 0.1);
    CHECK(r.best_rank == 2);
    CHECK(r.best_step == 5e-3);
    REQUIRE_FALSE(r.table.empty());
    CHECK(std::isfinite(r.best_val_mse));
    for (const auto& row : r.table) CHECK(row.val_mse == r.best_val_mse);
    const auto applied = apply(r, small_config());
    CHECK(applied.rank == 2);
    CHECK(applied.lambda == 0.1);
    CHECK(applied.step_size == 5e-3);
}

TEST_CASE("near-ties on noiseless rank-one data go to the smaller rank") {
    const auto panel = rank_one_panel();
    TuneGrid g;
    g.lambda_candidates = {1e-6};
    g.rank_candidates = {1, 2};
    g.step_candidates = {1e-2};
    const auto r = tune(panel, g, small_config());
    double mse1 = -1, mse2 = -1;
    for (const auto& row : r.table) {
        if (row.phase == 2 && row.rank == 1) mse1 = row.val_mse;
        if (row.phase == 2 && row.rank == 2) mse2 = row.val_mse;
    }
    CHECK(mse1 < 1e-2);
    CHECK(mse2 < 1e-2);
    if (std::abs(mse1 - mse2) <= 1e-12) CHECK(r.best_rank == 1);
}

TEST_CASE("exact ties resolve toward smaller rank, lambda and step") {
    // Zero data and strong shrinkage: every candidate ends with a validation MSE far below the tie tolerance.
    ObservationPanel p(2, 2, 10.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (int t = 0; t <= 10; ++t) p.add(i, j, {double(t), 0.0});
    FitConfig c = small_config();
    c.rank = 3;
    c.step_size = 0.1;
    c.max_iters = 500;
    TuneGrid g;
    g.lambda_candidates = {1.0, 0.5};
    g.rank_candidates = {3, 2};
    g.step_candidates = {0.1, 0.05};
    const auto r = tune(p, g, c);
    CHECK(r.best_val_mse < 1e-12);
    CHECK(r.best_rank == 2);
    CHECK(r.best_lambda == 0.5);
    CHECK(r.best_step == 0.05);
}

TEST_CASE("diverging candidates score infinity and are skipped") {
    const auto panel = rank_one_panel();
    TuneGrid g;
    g.lambda_candidates = {1e-6};
    g.rank_candidates = {1};
    g.step_candidates = {1e-2, 50.0};
    const auto r = tune(panel, g, small_config());
    CHECK(r.best_step == 1e-2);
    bool saw_divergence = false;
    for (const auto& row : r.table) {
        if (row.diverged) {
            saw_divergence = true;
            CHECK(std::isinf(row.val_mse));
        }
    }
    CHECK(saw_divergence);
    std::ostringstream out;
    write_tune_csv(out, r);
    CHECK(out.str().rfind("phase,lambda,rank,step,converged,val_mse\n", 0) == 0);
    CHECK(out.str().find("inf") != std::string::npos);

    g.step_candidates = {50.0};
    FitConfig c = small_config();
    c.step_size = 50.0;
    CHECK_THROWS_AS(tune(panel, g, c), DivergenceError);
}

TEST_CASE("tuning is deterministic and independent of the job count") {
    auto spec = desk_scale(default_spec(ScenarioId::S1_3, 2));
    spec.num_subjects = 4;
    spec.domain_end = 60;
    const auto data = generate(spec);
    FitConfig c;
    c.num_basis = 12;
    c.max_iters = 400;
    TuneGrid g;
    g.lambda_candidates = {0.1, 1.0};
    g.rank_candidates = {1, 3};
    g.step_candidates = {1e-3, 3e-3};
    const auto a = tune(data.train, g, c, std::nullopt, 1);
    const auto b = tune(data.train, g, c, std::nullopt, 3);
    std::ostringstream sa, sb;
    write_tune_csv(sa, a);
    write_tune_csv(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(a.best_rank == b.best_rank);
}

TEST_CASE("invalid grids") {
    TuneGrid g;
    g.rank_candidates = {};
    CHECK_THROWS(g.validate());
    g = TuneGrid{};
    g.validation_fraction = 1.5;
    CHECK_THROWS(g.validate());
}
