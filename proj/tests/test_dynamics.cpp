#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ctpe/ground_truth.hpp"
#include "ctpe/simulate.hpp"

using namespace ctpe;

namespace {

DiffusionModel decay_model(double sigma) {
    return DiffusionModel::plain(
        1, 1, [](const Vec& s, double) { return Vec(-s); },
        [sigma](const Vec&, double) { return Mat(Mat::Constant(1, 1, sigma)); },
        [](const Vec&, double) { return 0.0; }, [](const Vec& s) { return s[0]; }, 0.0,
        StartDistribution::box(Vec::Ones(1), Vec::Ones(1)));
}

}  // namespace

TEST_CASE("deterministic exponential flow") {
    DiffusionModel m = decay_model(0.0);
    TimeGrid grid = make_grid(1.0, 0.1);
    TrajectoryBatch batch = simulate(m, grid, 1, 42, 64);
    CHECK(std::abs(batch.state(0, grid.count)[0] - std::exp(-1.0)) < 1e-3);
}

TEST_CASE("simulate shape and determinism") {
    Preset preset = make_preset("ou1");
    TimeGrid grid = make_grid(1.0, 0.1);
    TrajectoryBatch a = simulate(preset.model, grid, 3, 7, 8);
    CHECK(a.episodes == 3);
    CHECK(a.data.size() == 3u * 11u * 1u);

    TrajectoryBatch b = simulate(preset.model, grid, 3, 7, 8);
    CHECK(a.data == b.data);  // bit-identical

    TrajectoryBatch c = simulate(preset.model, grid, 3, 8, 8);
    CHECK(a.data != c.data);

    // split changes the stream domain
    TrajectoryBatch d = simulate(preset.model, grid, 3, 7, 8, Split::val);
    CHECK(a.data != d.data);
}

TEST_CASE("simulate rejects blow-ups with indices") {
    DiffusionModel m = DiffusionModel::plain(
        1, 1, [](const Vec& s, double) { return Vec(s.array().cube()); },  // explosive
        [](const Vec&, double) { return Mat(Mat::Zero(1, 1)); },
        [](const Vec&, double) { return 0.0; }, [](const Vec&) { return 0.0; }, 0.0,
        StartDistribution::box(Vec::Constant(1, 1e200), Vec::Constant(1, 1e200)));
    TimeGrid grid = make_grid(1.0, 0.1);
    try {
        simulate(m, grid, 2, 1, 4);
        FAIL("expected blow-up");
    } catch (const SimulationBlowup& e) {
        CHECK(e.episode >= 0);
        CHECK(e.grid_step >= 1);
    }
}

TEST_CASE("substep convergence of the deterministic flow") {
    DiffusionModel m = decay_model(0.0);
    TimeGrid grid = make_grid(1.0, 0.5);
    auto endpoint = [&](int substeps) {
        return simulate(m, grid, 1, 0, substeps).state(0, grid.count)[0];
    };
    const double reference = endpoint(640);  // 10x finer
    const double err_coarse = std::abs(endpoint(32) - reference);
    const double err_fine = std::abs(endpoint(64) - reference);
    CHECK(err_fine < err_coarse);
    CHECK(err_coarse / err_fine == Catch::Approx(2.0).margin(0.35));
}

TEST_CASE("realized return basics") {
    TimeGrid grid = make_grid(1.0, 0.1);
    Preset preset = make_preset("ou1");

    DiffusionModel unit = DiffusionModel::plain(
        1, 1, [](const Vec&, double) { return Vec(Vec::Zero(1)); },
        [](const Vec&, double) { return Mat(Mat::Zero(1, 1)); },
        [](const Vec&, double) { return 1.0; }, [](const Vec&) { return 0.0; }, 0.0,
        preset.model.start);
    TrajectoryBatch batch = simulate(unit, grid, 2, 5, 4);
    CHECK(realized_return(batch, 0, 0, unit) == Catch::Approx(1.0).margin(1e-12));
    CHECK(realized_return(batch, 0, grid.count - 1, unit) == Catch::Approx(0.1).margin(1e-12));

    const double beta = 0.7, c = 2.5;
    DiffusionModel terminal_only = DiffusionModel::plain(
        1, 1, [](const Vec&, double) { return Vec(Vec::Zero(1)); },
        [](const Vec&, double) { return Mat(Mat::Zero(1, 1)); },
        [](const Vec&, double) { return 0.0; }, [c](const Vec&) { return c; }, beta,
        preset.model.start);
    TrajectoryBatch batch2 = simulate(terminal_only, grid, 1, 5, 4);
    for (int n : {0, 3, 10}) {
        CHECK(realized_return(batch2, 0, n, terminal_only) ==
              Catch::Approx(c * std::exp(-beta * (1.0 - grid.time(n)))).margin(1e-12));
    }

    // table matches the direct sum
    TrajectoryBatch ou = simulate(preset.model, grid, 4, 9, 4);
    Mat table = realized_return_table(ou, preset.model);
    for (int m = 0; m < 4; ++m) {
        for (int n = 0; n <= grid.count; ++n) {
            CHECK(table(m, n) ==
                  Catch::Approx(realized_return(ou, m, n, preset.model)).margin(1e-10));
        }
    }
    CHECK_THROWS(realized_return(ou, 0, grid.count + 1, preset.model));
}

TEST_CASE("perturbation identity leaves the model unchanged") {
    Preset preset = make_preset("regulator4");
    DiffusionModel gain1 =
        perturb_controller(preset.model, {ControllerPerturbation::Kind::gain_shift, 1.0});
    DiffusionModel cov1 = perturb_controller(
        preset.model, {ControllerPerturbation::Kind::covariance_inflation, 1.0});
    DiffusionModel shift0 =
        perturb_controller(preset.model, {ControllerPerturbation::Kind::time_shift, 0.0});

    RngStream rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        Vec s(4);
        for (int j = 0; j < 4; ++j) s[j] = rng.uniform(-2.0, 2.0);
        const double t = rng.uniform(0.0, 1.0);
        CHECK((gain1.drift(s, t) - preset.model.drift(s, t)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((cov1.sigma(s, t) - preset.model.sigma(s, t)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((shift0.drift(s, t) - preset.model.drift(s, t)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("perturbation arithmetic") {
    Preset preset = make_preset("regulator4");
    DiffusionModel cov4 = perturb_controller(
        preset.model, {ControllerPerturbation::Kind::covariance_inflation, 4.0});
    Vec s = Vec::Ones(4);
    Mat ratio = cov4.covariance(s, 0.3).cwiseQuotient(preset.model.covariance(s, 0.3));
    CHECK((ratio.diagonal().array() - 4.0).abs().maxCoeff() < 1e-12);

    // kappa = 2 doubles the feedback term: f + 2 g K s, checked by hand
    DiffusionModel gain2 =
        perturb_controller(preset.model, {ControllerPerturbation::Kind::gain_shift, 2.0});
    Vec s2(4);
    s2 << 0.3, -0.8, 1.1, 0.25;
    const double t = 0.4;
    Vec expected = preset.model.drift_base(s2, t) +
                   2.0 * preset.model.input_map(s2, t) * (preset.model.feedback_gain(t) * s2);
    CHECK((gain2.drift(s2, t) - expected).cwiseAbs().maxCoeff() < 1e-13);

    // reward side untouched
    CHECK(gain2.reward(s2, t) == preset.model.reward(s2, t));
    CHECK(gain2.terminal(s2) == preset.model.terminal(s2));
}

TEST_CASE("exact conditional moments: brownian motion") {
    Preset bm = make_preset("oubd1");  // zero drift, sigma = 0.5
    Vec s = Vec::Constant(1, 0.7);
    auto [mean, second] = exact_conditional_moments(bm, s, 0.2, 0.3);
    CHECK(mean[0] == Catch::Approx(0.7).margin(1e-10));
    const double var = second(0, 0) - mean[0] * mean[0];
    CHECK(var == Catch::Approx(0.25 * 0.3).margin(1e-10));

    Preset pend = make_preset("pendulum2");
    CHECK_THROWS(exact_conditional_moments(pend, Vec::Zero(2), 0.0, 0.1));
}

TEST_CASE("exact conditional moments match Monte Carlo on the OU preset") {
    Preset preset = make_preset("ou1");
    Vec s = Vec::Constant(1, 1.2);
    const double t = 0.0, lag = 0.2;
    auto [mean, second] = exact_conditional_moments(preset, s, t, lag);

    // fine-substep Monte Carlo oracle
    const int rollouts = 20000;
    double acc = 0.0, acc2 = 0.0;
    const int steps = 256;
    const double h = lag / steps;
    for (int r = 0; r < rollouts; ++r) {
        RngStream rng(99, "mc-oracle", r);
        double x = s[0];
        for (int k = 0; k < steps; ++k) {
            const double tk = t + k * h;
            x += preset.model.drift(Vec::Constant(1, x), tk)[0] * h +
                 preset.model.sigma(Vec::Constant(1, x), tk)(0, 0) * std::sqrt(h) * rng.gauss();
        }
        acc += x;
        acc2 += x * x;
    }
    const double mc_mean = acc / rollouts;
    const double mc_second = acc2 / rollouts;
    const double se_mean = std::sqrt((mc_second - mc_mean * mc_mean) / rollouts);
    CHECK(std::abs(mean[0] - mc_mean) < 3.0 * se_mean + 1e-3);
}
