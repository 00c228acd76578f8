// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "idlfm/cli.hpp"
#include "idlfm/eval.hpp"
#include "idlfm/model_io.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

using namespace idlfm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

std::size_t jobs() {
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// 1. Gradient oracle

Outcome gradient_oracle() {
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<std::size_t> small(1, 4), rank(1, 3), nb(1, 6), count(1, 6);
    std::normal_distribution<double> N(0.0, 1.0);
    const double h = 1e-6;
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t I = small(rng), J = small(rng), R = rank(rng), M = nb(rng);
        const double lambda = inst % 2 == 0 ? 0.0 : 0.5;
        const double T = 10.0;
        BSplineBasis basis(T, M, std::min<std::size_t>(3, M - 1));
        ObservationPanel panel(I, J, T);
        std::uniform_real_distribution<double> U(0.0, T);
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t j = 0; j < J; ++j)
                for (std::size_t k = count(rng); k > 0; --k) panel.add(i, j, {U(rng), N(rng)});
        Eigen::MatrixXd F(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(R));
        for (Eigen::Index k = 0; k < F.size(); ++k) F.data()[k] = N(rng);
        std::vector<Eigen::MatrixXd> W;
        for (std::size_t i = 0; i < I; ++i) {
            Eigen::MatrixXd w(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(M));
            for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = N(rng);
            W.push_back(w);
        }
        const ModelParams params(F, W, basis);

        auto compare = [&](const Eigen::MatrixXd& analytic, const std::function<double&(ModelParams&, Eigen::Index)>& at) {
            const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
            for (Eigen::Index k = 0; k < analytic.size(); ++k) {
                ModelParams up = params, dn = params;
                at(up, k) += h;
                at(dn, k) -= h;
                const double fd = (loss(panel, up, lambda) - loss(panel, dn, lambda)) / (2 * h);
                worst = std::max(worst, std::abs(analytic.data()[k] - fd) / scale);
            }
        };
        compare(grad_F(panel, params, lambda), [](ModelParams& p, Eigen::Index k) -> double& {
            return p.loadings().data()[k];
        });
        for (std::size_t i = 0; i < I; ++i) {
            compare(grad_W(panel, params, lambda, i), [i](ModelParams& p, Eigen::Index k) -> double& {
                return p.weights(i).data()[k];
            });
        }
    }
    return {worst < 1e-6, "max relative error " + num(worst, 3) + " (limit 1e-6)"};
}

// ---------------------------------------------------------------------------
// 2. Basis properties

Outcome basis_properties() {
    double worst_sum = 0.0;
    std::size_t worst_support = 0;
    bool endpoints = true, nonnegative = true;
    std::mt19937_64 rng(2);
    for (auto [T, M, p] : {std::tuple{1000.0, 300u, 3u}, std::tuple{200.0, 60u, 3u}, std::tuple{1.0, 4u, 3u},
                           std::tuple{50.0, 12u, 2u}}) {
        BSplineBasis b(T, M, p);
        std::uniform_real_distribution<double> U(0.0, T);
        for (int k = 0; k < 1000; ++k) {
            const auto v = b.eval(U(rng));
            double sum = 0.0;
            std::size_t nz = 0;
            for (double x : v) {
                sum += x;
                nz += x != 0.0;
                nonnegative = nonnegative && x >= 0.0;
            }
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            worst_support = std::max(worst_support, nz > p + 1 ? nz : std::size_t{0});
        }
        endpoints = endpoints && b.eval(0.0).front() == 1.0 && b.eval(T).back() == 1.0;
    }
    const bool pass = worst_sum < 1e-10 && worst_support == 0 && endpoints && nonnegative;
    return {pass, "max |sum - 1| " + num(worst_sum, 3) + ", support " + (worst_support == 0 ? "ok" : "violated") +
                      ", endpoints " + (endpoints ? "exact" : "wrong")};
}

// ---------------------------------------------------------------------------
// 3. Noiseless rank-1 recovery

Outcome noiseless_recovery() {
    const double T = 50.0;
    const double f[2] = {1.0, -0.6};
    ObservationPanel panel(2, 2, T);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (int t = 0; t <= 50; ++t) {
                const double theta = std::sin(2.0 * M_PI * t / T + static_cast<double>(i)) + 0.5 * std::cos(M_PI * t / T);
                panel.add(i, j, {double(t), f[j] * theta});
            }
    FitConfig cfg;
    cfg.rank = 1;
    cfg.lambda = 1e-8;
    cfg.num_basis = 12;
    cfg.step_size = 1e-2;
    cfg.stop_eps = 1e-12;
    cfg.max_iters = 5000;
    cfg.init_scale = 0.5;
    cfg.seed = 1;
    const auto r = fit(panel, cfg);
    double sse = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (const auto& o : panel.cell(i, j)) sse += std::pow(o.value - predict(r.params, i, j, o.time), 2);
    const double m = sse / static_cast<double>(panel.size());
    return {m <= 1e-3 && r.report.iterations_run <= 5000,
            "training MSE " + num(m, 3) + " after " + std::to_string(r.report.iterations_run) + " iterations"};
}

// ---------------------------------------------------------------------------
// 4. Scale indeterminacy

Outcome scale_indeterminacy() {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N(0.0, 1.0);
    const std::size_t I = 4, J = 5, R = 3;
    BSplineBasis basis(100.0, 20);
    Eigen::MatrixXd F = Eigen::MatrixXd::NullaryExpr(J, R, [&] { return N(rng); });
    std::vector<Eigen::MatrixXd> W;
    for (std::size_t i = 0; i < I; ++i) W.push_back(Eigen::MatrixXd::NullaryExpr(R, 20, [&] { return N(rng); }));
    const ModelParams p(F, W, basis);
    ObservationPanel panel(I, J, 100.0);
    std::uniform_real_distribution<double> U(0.0, 100.0);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
            for (int k = 0; k < 30; ++k) panel.add(i, j, {U(rng), N(rng)});

    double worst_pred = 0.0, worst_loss = 0.0;
    const double base_loss = loss(panel, p, 0.0);
    for (double c : {-2.0, 0.5, 10.0}) {
        std::vector<Eigen::MatrixXd> Wc;
        for (const auto& w : W) Wc.push_back(w / c);
        const ModelParams q(F * c, Wc, basis);
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t j = 0; j < J; ++j)
                for (int k = 0; k <= 200; ++k) {
                    const double t = 0.5 * k;
                    const double a = predict(p, i, j, t), b = predict(q, i, j, t);
                    worst_pred = std::max(worst_pred, std::abs(a - b) / std::max(std::abs(a), 1.0));
                }
        worst_loss = std::max(worst_loss, std::abs(loss(panel, q, 0.0) - base_loss) / base_loss);
    }
    return {worst_pred <= 1e-12 && worst_loss <= 1e-10,
            "prediction rel diff " + num(worst_pred, 3) + " (limit 1e-12), loss rel diff " + num(worst_loss, 3) +
                " (limit 1e-10)"};
}

// ---------------------------------------------------------------------------
// Desk-scale runs shared by criteria 5 and 6

FitConfig desk_fit() {
    FitConfig c;
    c.num_basis = 60;
    c.lambda = 1.0;
    c.step_size = 3e-4;
    c.max_iters = 5000;
    return c;
}

TuneGrid desk_grid() {
    TuneGrid g;
    g.lambda_candidates = {0.1, 1.0, 10.0};
    g.rank_candidates = {2, 3, 4};
    g.step_candidates = {1e-4, 3e-4, 1e-3};
    return g;
}

EvalReport desk_benchmark(ScenarioId id, bool tuned) {
    BenchmarkConfig cfg;
    cfg.scenario = desk_scale(default_spec(id, 0));
    cfg.methods = {Method::Idlfm, Method::SplineBaseline};
    cfg.replications = 5;
    cfg.fit = desk_fit();
    if (tuned) cfg.tune = desk_grid();
    cfg.jobs = jobs();
    return run_benchmark(cfg);
}

double method_mean(const EvalReport& r, Method m) {
    for (const auto& s : r.summaries)
        if (s.method == m) return s.test_mean;
    return std::nan("");
}

std::size_t idlfm_wins(const EvalReport& r) {
    std::size_t wins = 0;
    for (std::size_t k = 0; k + 1 < r.rows.size(); k += 2) {
        if (std::isfinite(r.rows[k].test_mse) && r.rows[k].test_mse < r.rows[k + 1].test_mse) ++wins;
    }
    return wins;
}

Outcome setting13_band(const EvalReport& s13) {
    const double m = method_mean(s13, Method::Idlfm);
    return {m >= 0.25 && m <= 0.70, "IDLFM mean test MSE " + num(m) + " (band [0.25, 0.70])"};
}

Outcome method_ordering(const EvalReport& s11, const EvalReport& s13) {
    const auto w11 = idlfm_wins(s11), w13 = idlfm_wins(s13);
    return {w11 >= 4 && w13 >= 4, "IDLFM beats spline in " + std::to_string(w11) + "/5 seeds on S1.1 (" +
                                      num(method_mean(s11, Method::Idlfm)) + " vs " +
                                      num(method_mean(s11, Method::SplineBaseline)) + "), " + std::to_string(w13) +
                                      "/5 on S1.3 (" + num(method_mean(s13, Method::Idlfm)) + " vs " +
                                      num(method_mean(s13, Method::SplineBaseline)) + ")"};
}

// ---------------------------------------------------------------------------
// 7. Rank sensitivity

Outcome rank_sensitivity() {
    double sum1 = 0.0, sum3 = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto data = generate(desk_scale(default_spec(ScenarioId::S1_1, seed)));
        TuneGrid g;
        g.lambda_candidates = {1.0};
        g.rank_candidates = {1, 3};
        g.step_candidates = {3e-4};
        g.seed = seed;
        const auto r = tune(data.train, g, desk_fit(), std::nullopt, jobs());
        for (const auto& row : r.table) {
            if (row.phase != 2) continue;
            if (row.rank == 1) sum1 += row.val_mse;
            if (row.rank == 3) sum3 += row.val_mse;
        }
    }
    const double m1 = sum1 / 5, m3 = sum3 / 5;
    return {m3 < m1, "mean validation MSE R=3 " + num(m3) + " vs R=1 " + num(m1)};
}

// ---------------------------------------------------------------------------
// 8. Missingness robustness

Outcome missingness() {
    std::array<double, 3> means{};
    const std::array<ScenarioId, 3> ids{ScenarioId::MCAR, ScenarioId::MAR, ScenarioId::MNAR};
    for (std::size_t k = 0; k < 3; ++k) {
        BenchmarkConfig cfg;
        cfg.scenario = desk_scale(default_spec(ids[k], 0));
        cfg.methods = {Method::Idlfm};
        cfg.replications = 5;
        cfg.fit = desk_fit();
        cfg.jobs = jobs();
        means[k] = method_mean(run_benchmark(cfg), Method::Idlfm);
    }
    const double mar_gap = std::abs(means[1] - means[0]) / means[0];
    const double mnar_gap = (means[2] - means[0]) / means[0];
    return {mar_gap < 0.25 && mnar_gap < 0.40,
            "MCAR " + num(means[0]) + ", MAR " + num(means[1]) + " (" + num(100 * mar_gap, 3) + "%, limit 25%), MNAR " +
                num(means[2]) + " (+" + num(100 * mnar_gap, 3) + "%, limit 40%)"};
}

// ---------------------------------------------------------------------------
// 9. Determinism and round trip

int cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"idlfm"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "idlfm_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto p = [&](const std::string& f) { return (dir / f).string(); };
    std::vector<std::string> failures;

    for (const char* run : {"a", "b"}) {
        cli({"simulate", "--scenario", "S1.1", "--seed", "7", "--desk-scale", "--out-dir", p(run)});
        cli({"fit", "--train", p(std::string(run) + "/train.csv"), "--num-basis", "60", "--step", "3e-4", "--max-iters",
             "1000", "--seed", "3", "--model", p(std::string(run) + "/model.json"), "--trace",
             p(std::string(run) + "/trace.csv")});
        cli({"benchmark", "--scenario", "S1.3", "--desk-scale", "--reps", "2", "--max-iters", "500", "--step", "3e-4",
             "--out-csv", p(std::string(run) + "/bench.csv")});
    }
    for (const char* f : {"train.csv", "test.csv", "truth.csv", "model.json", "trace.csv", "bench.csv", "bench.md"}) {
        const auto a = slurp(dir / "a" / f);
        if (a.empty() || a != slurp(dir / "b" / f)) failures.push_back(f);
    }

    bool round_trip = false;
    try {
        const auto m = load_model(dir / "a" / "model.json");
        const auto again = dir / "again.json";
        save_model(again, m);
        round_trip = slurp(again) == slurp(dir / "a" / "model.json") && load_model(again).params == m.params;
    } catch (const std::exception&) {
        round_trip = false;
    }
    fs::remove_all(dir);
    std::string detail = failures.empty() ? "simulate, fit and benchmark outputs byte-identical" : "differing: ";
    for (const auto& f : failures) detail += f + " ";
    detail += round_trip ? "; model JSON round-trips exactly" : "; model JSON round trip FAILED";
    return {failures.empty() && round_trip, detail};
}

// ---------------------------------------------------------------------------
// 10. Convergence-rate trend

Outcome convergence_trend() {
    const std::array<double, 3> probs{0.25, 0.5, 1.0};
    std::array<double, 3> mise{};
    for (std::size_t k = 0; k < 3; ++k) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto spec = desk_scale(default_spec(ScenarioId::S1_3, seed));
            spec.observe_prob = probs[k];
            const auto data = generate(spec);
            FitConfig cfg = desk_fit();
            cfg.num_basis = 40;
            cfg.step_size = 3e-4 / probs[k];
            cfg.seed = seed;
            sum += grid_mise(fit(data.train, cfg).params, data.truth);
        }
        mise[k] = sum / 5;
    }
    return {mise[1] < mise[0] && mise[2] < mise[1],
            "MISE at K=50/100/200: " + num(mise[0]) + " / " + num(mise[1]) + " / " + num(mise[2])};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = limit_s <= 0.0 || secs < limit_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("[%s] %2d %-28s %s; %.2f s%s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                    in_time ? "" : " (over time limit)");
        std::fflush(stdout);
    };

    report(1, "gradient oracle", 5.0, gradient_oracle);
    report(2, "basis properties", 1.0, basis_properties);
    report(3, "noiseless recovery", 10.0, noiseless_recovery);
    report(4, "scale indeterminacy", 0.0, scale_indeterminacy);

    EvalReport s13, s11;
    report(5, "desk-scale S1.3 band", 300.0, [&] {
        s13 = desk_benchmark(ScenarioId::S1_3, true);
        return setting13_band(s13);
    });
    report(6, "method ordering", 600.0, [&] {
        s11 = desk_benchmark(ScenarioId::S1_1, true);
        return method_ordering(s11, s13);
    });
    report(7, "rank sensitivity", 600.0, rank_sensitivity);
    report(8, "missingness robustness", 600.0, missingness);
    report(9, "determinism and round trip", 0.0, determinism);
    report(10, "convergence-rate trend", 0.0, convergence_trend);

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
