#include "idlfm/eval.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace idlfm;

TEST_CASE("mse basics") {
    const std::vector<double> y{1.0, -2.0, 3.5};
    CHECK(mse(y, y) == 0.0);
    const std::vector<double> y1{2.0, -1.0, 4.5};
    CHECK(mse(y1, y) == 1.0);
    CHECK_THROWS(mse(std::vector<double>{}, std::vector<double>{}));
    CHECK_THROWS(mse(y, std::vector<double>{1.0}));
}

TEST_CASE("error tallies pool by counts") {
    ErrorTally a{4.0, 2}, b{2.0, 2};
    a += b;
    CHECK(a.mean() == 1.5);
    CHECK(std::isnan(ErrorTally{}.mean()));
}

TEST_CASE("summaries use the sample standard error") {
    std::vector<MethodRun> rows;
    for (double v : {1.0, 2.0, 3.0, 4.0}) {
        MethodRun r;
        r.method = Method::MeanFill;
        r.train_mse = v;
        r.test_mse = 2 * v;
        rows.push_back(r);
    }
    MethodRun bad;
    bad.method = Method::MeanFill;
    bad.train_mse = bad.test_mse = std::nan("");
    rows.push_back(bad);
    const std::vector<Method> methods{Method::MeanFill};
    const auto s = summarize(rows, methods);
    REQUIRE(s.size() == 1);
    CHECK(s[0].replications == 4);
    CHECK(s[0].train_mean == 2.5);
    CHECK(s[0].test_mean == 5.0);
    // sample sd of 1..4 is sqrt(5/3)
    CHECK(s[0].train_se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-14));
    CHECK(s[0].test_se == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("method names") {
    for (auto m : {Method::Idlfm, Method::SplineBaseline, Method::MeanFill}) CHECK(parse_method(to_string(m)) == m);
    CHECK(parse_method("spline") == Method::SplineBaseline);
    CHECK_THROWS(parse_method("lstm"));
}

TEST_CASE("mean fill on constant data is exact") {
    ScenarioSpec spec = desk_scale(default_spec(ScenarioId::S1_3, 1));
    spec.num_subjects = 3;
    spec.domain_end = 50;
    auto data = generate(spec);
    auto flatten = [](ObservationPanel& p) {
        for (std::size_t i = 0; i < p.num_subjects(); ++i)
            for (std::size_t j = 0; j < p.num_series(); ++j) {
                std::vector<Observation> c(p.cell(i, j).begin(), p.cell(i, j).end());
                for (auto& o : c) o.value = 7.0;
                p.set_cell(i, j, c);
            }
    };
    flatten(data.train);
    flatten(data.test);
    BenchmarkConfig cfg;
    const auto run = evaluate_method(Method::MeanFill, data, cfg, 1);
    CHECK(run.train_mse == 0.0);
    CHECK(run.test_mse == 0.0);
}

TEST_CASE("oracle floor under noise is the noise variance") {
    auto spec = default_spec(ScenarioId::S1_3, 3);
    spec.num_subjects = 5;
    const auto data = generate(spec);
    const std::size_t J = spec.num_series;
    std::vector<double> pred, target;
    for (std::size_t i = 0; i < spec.num_subjects; ++i)
        for (const auto& o : data.test.cell(i, J - 1)) {
            pred.push_back(data.truth.psi(i, J - 1, static_cast<std::size_t>(o.time)));
            target.push_back(o.value);
        }
    const double n = static_cast<double>(pred.size());
    CHECK(std::abs(mse(pred, target) - 0.25) < 3 * 0.25 * std::sqrt(2.0 / n));
}

TEST_CASE("grid MISE of a zero model is the mean squared truth") {
    ScenarioSpec spec = desk_scale(default_spec(ScenarioId::S1_3, 1));
    spec.num_subjects = 2;
    spec.domain_end = 30;
    const auto data = generate(spec);
    ModelParams zero(2, spec.num_series, 1, BSplineBasis(30.0, 8));
    double expect = 0.0;
    for (double v : data.truth.full_grid_values) expect += v * v;
    expect /= static_cast<double>(data.truth.full_grid_values.size());
    CHECK(grid_mise(zero, data.truth) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("benchmark is deterministic and reports every method") {
    BenchmarkConfig cfg;
    cfg.scenario = desk_scale(default_spec(ScenarioId::S1_1, 0));
    cfg.scenario.num_subjects = 4;
    cfg.scenario.domain_end = 60;
    cfg.fit.num_basis = 15;
    cfg.fit.step_size = 1e-3;
    cfg.fit.max_iters = 500;
    cfg.replications = 2;
    const auto a = run_benchmark(cfg);
    cfg.jobs = 2;
    const auto b = run_benchmark(cfg);
    std::ostringstream sa, sb;
    write_benchmark_csv(sa, a, false, "x");
    write_benchmark_csv(sb, b, false, "x");
    CHECK(sa.str() == sb.str());
    REQUIRE(a.rows.size() == 6);
    CHECK(a.rows[0].seed == 1);
    CHECK(a.rows[3].seed == 2);
    CHECK(a.summaries.size() == 3);
    std::ostringstream md;
    write_markdown_summary(md, a, "{}");
    CHECK(md.str().find("| idlfm |") != std::string::npos);
    CHECK(md.str().find("| spline-baseline |") != std::string::npos);
}

TEST_CASE("divergence becomes a flagged row") {
    BenchmarkConfig cfg;
    cfg.scenario = desk_scale(default_spec(ScenarioId::S1_3, 0));
    cfg.scenario.num_subjects = 3;
    cfg.scenario.domain_end = 50;
    cfg.fit.num_basis = 10;
    cfg.fit.step_size = 10.0;
    cfg.fit.init_scale = 1.0;
    cfg.methods = {Method::Idlfm};
    const auto r = run_benchmark(cfg);
    REQUIRE(r.rows.size() == 1);
    CHECK_FALSE(r.rows[0].converged);
    CHECK(std::isnan(r.rows[0].test_mse));
    std::ostringstream out;
    write_benchmark_csv(out, r, false);
    CHECK(out.str().find(",nan,nan,false,") != std::string::npos);
}
