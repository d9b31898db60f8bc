#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ctpe/bandwidth.hpp"
#include "ctpe/fit.hpp"
#include "ctpe/ground_truth.hpp"
#include "ctpe/metrics.hpp"
#include "ctpe/presets.hpp"

using namespace ctpe;

namespace {

DiffusionModel constant_case(double beta, double reward, double terminal) {
    return DiffusionModel::plain(
        1, 1, [](const Vec& s, double) { return Vec(-0.3 * s); },
        [](const Vec&, double) { return Mat(Mat::Constant(1, 1, 0.5)); },
        [reward](const Vec&, double) { return reward; },
        [terminal](const Vec&) { return terminal; }, beta,
        StartDistribution::box(Vec::Zero(1), Vec::Ones(1)));
}

}  // namespace

TEST_CASE("constant-feature closed forms") {
    FeatureMap cmap = make_features(FeatureFamily::constant, 1);
    for (double beta : {0.0, 0.5, 1.0}) {
        for (double dt : {0.1, 0.05}) {
            TimeGrid grid = make_grid(1.0, dt);
            FitOptions opt;
            opt.ridge = 0.0;

            // geometric decay: r = 0, h = c
            const double c = 2.0;
            DiffusionModel geh = constant_case(beta, 0.0, c);
            TrajectoryBatch batch = simulate(geh, grid, 4, 11, 2);
            ValueSurface be = fit_bellman(batch, cmap, geh, opt);
            GenFitResult gen1 = fit_gen(batch, cmap, solve_stencil(1), geh, opt);
            for (int n = 0; n <= grid.count; ++n) {
                const int k = grid.count - n;
                INFO("beta=" << beta << " dt=" << dt << " n=" << n);
                CHECK(be.weights(n, 0) ==
                      Catch::Approx(c * std::exp(-beta * k * dt)).margin(1e-10));
                CHECK(gen1.surface.weights(n, 0) ==
                      Catch::Approx(c * std::pow(1.0 + beta * dt, -k)).margin(1e-10));
            }

            // linear horizon: beta = 0, r = 1, h = 0
            if (beta == 0.0) {
                DiffusionModel lin = constant_case(0.0, 1.0, 0.0);
                TrajectoryBatch batch2 = simulate(lin, grid, 4, 13, 2);
                ValueSurface be2 = fit_bellman(batch2, cmap, lin, opt);
                GenFitResult gen2 = fit_gen(batch2, cmap, solve_stencil(1), lin, opt);
                for (int n = 0; n <= grid.count; ++n) {
                    const double remaining = grid.horizon - grid.time(n);
                    CHECK(be2.weights(n, 0) == Catch::Approx(remaining).margin(1e-10));
                    CHECK(gen2.surface.weights(n, 0) == Catch::Approx(remaining).margin(1e-10));
                }
            }
        }
    }
}

TEST_CASE("linear-horizon identity survives pooling") {
    FeatureMap cmap = make_features(FeatureFamily::constant, 1);
    TimeGrid grid = make_grid(1.0, 0.1);
    DiffusionModel lin = constant_case(0.0, 1.0, 0.0);
    TrajectoryBatch batch = simulate(lin, grid, 4, 13, 2);
    FitOptions opt;
    opt.ridge = 0.0;
    opt.window.width = 5;
    GenFitResult gen2 = fit_gen(batch, cmap, solve_stencil(2), lin, opt);
    for (int n = 0; n <= grid.count; ++n) {
        CHECK(gen2.surface.weights(n, 0) ==
              Catch::Approx(grid.horizon - grid.time(n)).margin(1e-10));
    }
}

TEST_CASE("startup block") {
    TimeGrid grid = make_grid(1.0, 0.1);
    FeatureMap cmap = make_features(FeatureFamily::constant, 1);
    const double beta = 0.6, c = 1.5;
    DiffusionModel geh = constant_case(beta, 0.0, c);
    TrajectoryBatch batch = simulate(geh, grid, 8, 3, 2);

    // r = 0, constant features, h = c: w_{N_T - ell} = c e^{-beta ell dt}
    Mat block = startup_block(batch, cmap, geh, 3, 0.0);
    for (int ell = 0; ell < 3; ++ell) {
        CHECK(block(ell, 0) == Catch::Approx(c * std::exp(-beta * ell * 0.1)).margin(1e-10));
    }

    // terminal_copy pins every row at w_{N_T}
    Mat copied = startup_block(batch, cmap, geh, 3, 0.0, StartupMode::terminal_copy);
    for (int ell = 0; ell < 3; ++ell) CHECK(copied(ell, 0) == Catch::Approx(c).margin(1e-12));

    // realizable terminal: h(s) = phi(s)^T w*, lambda = 0 recovers w*
    Preset preset = make_preset("ou1");
    FeatureMap lin = make_features(FeatureFamily::linear, 1);
    TrajectoryBatch oub = simulate(preset.model, grid, 32, 5, 2);
    Mat w = startup_block(oub, lin, preset.model, 1, 0.0);
    CHECK(w(0, 0) == Catch::Approx(0.0).margin(1e-8));
    CHECK(w(0, 1) == Catch::Approx(1.0).margin(1e-8));

    // independent normal-equations oracle for an arbitrary batch
    FeatureCache cache(oub, lin, preset.model);
    Mat g = cache.gram_sum(grid.count) / oub.episodes;
    Vec rhs = cache.terminal_sum() / oub.episodes;
    Vec oracle = (g + 1e-3 * Mat::Identity(2, 2)).ldlt().solve(rhs);
    Mat ridge_block = startup_block(oub, lin, preset.model, 1, 1e-3);
    CHECK((ridge_block.row(0).transpose() - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("bellman fit beats the zero surface on the pendulum") {
    Preset preset = make_preset("pendulum2");
    TimeGrid grid = make_grid(1.0, 0.1);
    TrajectoryBatch train = simulate(preset.model, grid, 64, 2, 8);
    FeatureMap quad = make_features(FeatureFamily::quadratic, 2);
    ValueSurface surface = fit_bellman(train, quad, preset.model);
    CHECK(surface.weights.allFinite());

    std::vector<Vec> states;
    RngStream rng(44);
    for (int i = 0; i < 8; ++i) {
        Vec s(2);
        s << rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9);
        states.push_back(s);
    }
    GroundTruthTable truth = mc_ground_truth(preset.model, grid, states, 300, 91, 16);
    MetricReport fit_report = metrics(surface, truth);

    ValueSurface zero = surface;
    zero.weights.setZero();
    MetricReport zero_report = metrics(zero, truth);
    CHECK(fit_report.integrated_rmse < 0.5 * zero_report.integrated_rmse);
}

TEST_CASE("gen fit reports singular systems with slice index") {
    // duplicated state column makes the gram rank deficient at ridge 0
    TimeGrid grid = make_grid(0.5, 0.1);
    DiffusionModel frozen = DiffusionModel::plain(
        2, 2, [](const Vec&, double) { return Vec(Vec::Zero(2)); },
        [](const Vec&, double) { return Mat(Mat::Zero(2, 2)); },
        [](const Vec& s, double) { return s[0]; }, [](const Vec& s) { return s[0]; }, 0.0,
        StartDistribution::box(Vec::Zero(2), Vec::Zero(2)));  // all states identical
    TrajectoryBatch batch = simulate(frozen, grid, 3, 1, 1);
    FeatureMap lin = make_features(FeatureFamily::linear, 2);
    FitOptions opt;
    opt.ridge = 0.0;
    CHECK_THROWS_AS(fit_gen(batch, lin, solve_stencil(1), frozen, opt), SingularSystem);
}

TEST_CASE("reparameterized features give the same surface at ridge 0") {
    Preset preset = make_preset("lqcal");
    TimeGrid grid = make_grid(1.0, 0.1);
    TrajectoryBatch batch = simulate(preset.model, grid, 96, 19, 4);
    FeatureMap quad = make_features(FeatureFamily::quadratic, 2);

    Mat transform = Mat::Identity(quad.p, quad.p);
    RngStream rng(5);
    for (int a = 0; a < quad.p; ++a)
        for (int b = 0; b < quad.p; ++b) transform(a, b) += 0.25 * rng.uniform(-1.0, 1.0);
    FeatureMap mapped = linearly_transformed(quad, transform);

    FitOptions opt;
    opt.ridge = 0.0;
    ValueSurface be_a = fit_bellman(batch, quad, preset.model, opt);
    ValueSurface be_b = fit_bellman(batch, mapped, preset.model, opt);
    GenFitResult gen_a = fit_gen(batch, quad, solve_stencil(2), preset.model, opt);
    GenFitResult gen_b = fit_gen(batch, mapped, solve_stencil(2), preset.model, opt);

    RngStream srng(6);
    for (int trial = 0; trial < 20; ++trial) {
        Vec s(2);
        s << srng.uniform(-1.0, 1.0), srng.uniform(-1.0, 1.0);
        for (int n = 0; n <= grid.count; ++n) {
            CHECK(be_a.value(s, n) == Catch::Approx(be_b.value(s, n)).margin(1e-6));
            CHECK(gen_a.surface.value(s, n) ==
                  Catch::Approx(gen_b.surface.value(s, n)).margin(1e-6));
        }
    }
}

TEST_CASE("fits are deterministic given data and config") {
    Preset preset = make_preset("ou1");
    TimeGrid grid = make_grid(1.0, 0.1);
    TrajectoryBatch batch = simulate(preset.model, grid, 32, 3, 4);
    FeatureMap lin = make_features(FeatureFamily::linear, 1);
    FitOptions opt;
    opt.window.width = 4;
    GenFitResult a = fit_gen(batch, lin, solve_stencil(2), preset.model, opt);
    GenFitResult b = fit_gen(batch, lin, solve_stencil(2), preset.model, opt);
    CHECK(a.surface.weights == b.surface.weights);
}

TEST_CASE("short grids are rejected") {
    Preset preset = make_preset("ou1");
    TimeGrid grid = make_grid(0.3, 0.1);  // N_T = 3
    TrajectoryBatch batch = simulate(preset.model, grid, 8, 3, 2);
    FeatureMap lin = make_features(FeatureFamily::linear, 1);
    CHECK_THROWS(fit_gen(batch, lin, solve_stencil(3), preset.model));
    CHECK_NOTHROW(fit_gen(batch, lin, solve_stencil(2), preset.model));
}
