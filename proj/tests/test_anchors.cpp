#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "ctpe/anchors.hpp"
#include "ctpe/presets.hpp"

using namespace ctpe;

TEST_CASE("zero dynamics yield zero drift coefficients") {
    DiffusionModel frozen = DiffusionModel::plain(
        2, 2, [](const Vec&, double) { return Vec(Vec::Zero(2)); },
        [](const Vec&, double) { return Mat(Mat::Zero(2, 2)); },
        [](const Vec&, double) { return 0.0; }, [](const Vec&) { return 0.0; }, 0.0,
        StartDistribution::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)));
    TimeGrid grid = make_grid(1.0, 0.1);
    TrajectoryBatch batch = simulate(frozen, grid, 32, 9, 1);
    FittedDynamics dyn = fit_mb_anchor(batch, 1);
    CHECK(dyn.coeffs[0].cwiseAbs().maxCoeff() < 1e-10);
    CHECK(dyn.sigma_hat.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("linear anchor recovers the discrete-time divided difference") {
    Mat a(2, 2);
    a << -0.5, 0.8, -0.8, -0.3;
    DiffusionModel lin = DiffusionModel::plain(
        2, 2, [a](const Vec& s, double) { return Vec(a * s); },
        [](const Vec&, double) { return Mat(Mat::Zero(2, 2)); },
        [](const Vec&, double) { return 0.0; }, [](const Vec&) { return 0.0; }, 0.0,
        StartDistribution::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)));
    TimeGrid grid = make_grid(0.05, 0.01);
    // the divided difference amplifies flow error by 1/dt, so the integrator
    // needs very fine substeps for a 1e-6 comparison
    TrajectoryBatch batch = simulate(lin, grid, 64, 4, 8192);
    FittedDynamics dyn = fit_mb_anchor(batch, 1);

    Mat oracle = ((a * grid.dt).exp() - Mat::Identity(2, 2)) / grid.dt;  // matrix exponential
    // coeffs rows: [constant, s_1, s_2] -> columns of the drift map
    Mat fitted = dyn.coeffs[0].block(1, 0, 2, 2).transpose();
    CHECK((fitted - oracle).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(dyn.coeffs[0].row(0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("quadratic anchor on linear data keeps quadratic terms small") {
    Mat a(2, 2);
    a << -0.5, 0.4, -0.4, -0.6;
    DiffusionModel lin = DiffusionModel::plain(
        2, 2, [a](const Vec& s, double) { return Vec(a * s); },
        [](const Vec&, double) { return Mat(Mat::Zero(2, 2)); },
        [](const Vec&, double) { return 0.0; }, [](const Vec&) { return 0.0; }, 0.0,
        StartDistribution::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)));
    TimeGrid grid = make_grid(0.2, 0.01);
    TrajectoryBatch batch = simulate(lin, grid, 256, 6, 64);  // 4096+ noiseless samples
    FittedDynamics dyn = fit_mb_anchor(batch, 2);
    // rows beyond the affine block are the quadratic coefficients
    CHECK(dyn.coeffs[0].block(3, 0, dyn.coeffs[0].rows() - 3, 2).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("anchor valuation recovers the analytic value under true dynamics") {
    Preset preset = make_preset("ou1", 0.0);  // frozen coefficients
    TimeGrid grid = make_grid(1.0, 0.1);
    TrajectoryBatch batch = simulate(preset.model, grid, 512, 21, 8);
    FittedDynamics dyn = fit_mb_anchor(batch, 1);

    std::vector<Vec> states{Vec::Constant(1, 0.7), Vec::Constant(1, 1.3)};
    GroundTruthTable anchor_value =
        mb_value(dyn, preset.model, grid, states, 3000, 33, 16);
    GroundTruthTable truth = analytic_truth(preset, grid, states);
    for (std::size_t i = 0; i < states.size(); ++i) {
        for (int n = 0; n <= grid.count; ++n) {
            const double tol = 3.0 * anchor_value.stderrs(i, n) + 0.02;
            CHECK(std::abs(anchor_value.values(i, n) - truth.values(i, n)) < tol);
        }
    }
}

TEST_CASE("terminal-only value under zero fitted dynamics") {
    DiffusionModel frozen = DiffusionModel::plain(
        1, 1, [](const Vec&, double) { return Vec(Vec::Zero(1)); },
        [](const Vec&, double) { return Mat(Mat::Zero(1, 1)); },
        [](const Vec&, double) { return 0.0; }, [](const Vec&) { return 2.0; }, 0.4,
        StartDistribution::box(Vec::Zero(1), Vec::Ones(1)));
    TimeGrid grid = make_grid(1.0, 0.25);
    TrajectoryBatch batch = simulate(frozen, grid, 16, 2, 1);
    FittedDynamics dyn = fit_mb_anchor(batch, 1);
    std::vector<Vec> states{Vec::Constant(1, 0.5)};
    GroundTruthTable table = mb_value(dyn, frozen, grid, states, 64, 5, 8);
    for (int n = 0; n <= grid.count; ++n) {
        CHECK(table.values(0, n) ==
              Catch::Approx(2.0 * std::exp(-0.4 * (1.0 - grid.time(n)))).margin(1e-8));
    }
}

TEST_CASE("explosive fitted dynamics are marked invalid, not fatal") {
    // hand-build dynamics with a strongly unstable drift
    FittedDynamics dyn;
    dyn.degree = 1;
    dyn.dim = 1;
    dyn.time_bins = 1;
    dyn.horizon = 1.0;
    dyn.dyn_features = make_features(FeatureFamily::linear, 1);
    Mat coef = Mat::Zero(2, 1);
    coef(1, 0) = 500.0;
    dyn.coeffs = {coef};
    dyn.sigma_hat = Mat::Zero(1, 1);
    dyn.sigma_sqrt = Mat::Zero(1, 1);

    DiffusionModel target = DiffusionModel::plain(
        1, 1, [](const Vec&, double) { return Vec(Vec::Zero(1)); },
        [](const Vec&, double) { return Mat(Mat::Zero(1, 1)); },
        [](const Vec& s, double) { return s[0]; }, [](const Vec& s) { return s[0]; }, 0.0,
        StartDistribution::box(Vec::Ones(1), Vec::Ones(1)));
    TimeGrid grid = make_grid(1.0, 0.25);
    std::vector<Vec> states{Vec::Constant(1, 1e250)};
    GroundTruthTable table = mb_value(dyn, target, grid, states, 4, 1, 64);
    CHECK_FALSE(table.all_valid());
}
