#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctpe/analytic_value.hpp"
#include "ctpe/presets.hpp"
#include "ctpe/simulate.hpp"

namespace ctpe {

/// Reference values V(s, t_n) for a list of test states at every grid time.
/// Analytic entries carry zero standard error.
struct GroundTruthTable {
    enum class Provenance { analytic, monte_carlo };
    std::vector<Vec> states;
    TimeGrid grid;
    Mat values;   // states x (N_T + 1)
    Mat stderrs;  // same shape, 0 for analytic entries
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;
    Provenance provenance = Provenance::monte_carlo;

    bool all_valid() const { return valid.all(); }
};

enum class BlowupPolicy { propagate, mark_invalid };

/// Monte Carlo ground truth: for each (state, n), averages the discounted
/// return of fresh rollouts started at (state, t_n), simulated and integrated
/// on a refined grid of step dt/substeps. Deterministic in the seed;
/// substream hashing keys on (state index, n, rollout).
inline GroundTruthTable mc_ground_truth(const DiffusionModel& model, const TimeGrid& grid,
                                        const std::vector<Vec>& states, int rollouts,
                                        std::uint64_t seed, int substeps = 32,
                                        BlowupPolicy policy = BlowupPolicy::propagate) {
    if (rollouts < 2) throw std::invalid_argument("mc_ground_truth: rollouts must be >= 2");
    if (substeps < 1) throw std::invalid_argument("mc_ground_truth: substeps must be >= 1");
    GroundTruthTable table;
    table.states = states;
    table.grid = grid;
    table.values = Mat::Zero(states.size(), grid.count + 1);
    table.stderrs = Mat::Zero(states.size(), grid.count + 1);
    table.valid.setConstant(states.size(), grid.count + 1, true);
    table.provenance = GroundTruthTable::Provenance::monte_carlo;

    const double beta = model.discount;
    const double fine_dt = grid.dt / substeps;

    for (std::size_t i = 0; i < states.size(); ++i) {
        for (int n = 0; n <= grid.count; ++n) {
            const double tn = grid.time(n);
            const int fine_steps = (grid.count - n) * substeps;
            double sum = 0.0, sum_sq = 0.0;
            bool ok = true;
            for (int r = 0; r < rollouts && ok; ++r) {
                RngStream rng(seed, "truth", i, static_cast<std::uint64_t>(n),
                              static_cast<std::uint64_t>(r));
                Vec s = states[i];
                double acc = 0.0;
                try {
                    double ret = 0.0;
                    // accumulate reward before each fine step, then advance
                    const double sqrt_h = std::sqrt(fine_dt);
                    Vec noise(model.noise_dim);
                    for (int k = 0; k < fine_steps; ++k) {
                        const double t = tn + k * fine_dt;
                        ret += std::exp(-beta * (t - tn)) * model.reward(s, t) * fine_dt;
                        for (int j = 0; j < model.noise_dim; ++j) noise[j] = rng.gauss();
                        s += model.drift(s, t) * fine_dt + model.sigma(s, t) * (sqrt_h * noise);
                        if (!s.allFinite()) throw SimulationBlowup(static_cast<int>(i), n);
                    }
                    ret += std::exp(-beta * (grid.horizon - tn)) * model.terminal(s);
                    acc = ret;
                } catch (const SimulationBlowup&) {
                    if (policy == BlowupPolicy::propagate) throw;
                    ok = false;
                    break;
                }
                sum += acc;
                sum_sq += acc * acc;
            }
            if (!ok) {
                table.values(i, n) = std::numeric_limits<double>::quiet_NaN();
                table.stderrs(i, n) = std::numeric_limits<double>::quiet_NaN();
                table.valid(i, n) = false;
                continue;
            }
            const double mean = sum / rollouts;
            const double var = std::max(0.0, (sum_sq - rollouts * mean * mean) / (rollouts - 1));
            table.values(i, n) = mean;
            table.stderrs(i, n) = std::sqrt(var / rollouts);
        }
    }
    return table;
}

/// Value from the preset's closed form or its coefficient ODEs. Throws a
/// capability error when the preset has no analytic surface.
inline double analytic_value(const Preset& preset, const Vec& s, double t,
                             const TimeGrid& grid) {
    if (preset.closed_form_value) return preset.closed_form_value(s, t);
    if (!(preset.linear && preset.reward_spec)) {
        throw std::runtime_error("analytic_value: preset '" + preset.id +
                                 "' has no analytic capability");
    }
    // integrate the coefficient ODEs backward from T to t
    const LinearSystem& sys = *preset.linear;
    const QuadraticRewardSpec& rw = *preset.reward_spec;
    const int d = sys.dim;
    const int np = d * d;
    const double beta = preset.model.discount;
    auto deriv = [&](const Vec& y, double tau) {
        Eigen::Map<const Mat> p(y.data(), d, d);
        Eigen::Map<const Vec> gv(y.data() + np, d);
        const double kv = y[np + d];
        Mat a = sys.A(tau);
        Vec ut = sys.u(tau);
        Vec dy(np + d + 1);
        Eigen::Map<Mat>(dy.data(), d, d) = beta * p - rw.R2(tau) - a.transpose() * p - p * a;
        Eigen::Map<Vec>(dy.data() + np, d) = beta * gv - rw.r1(tau) - a.transpose() * gv - 2.0 * (p * ut);
        dy[np + d] = beta * kv - rw.r0(tau) - ut.dot(gv) - (sys.covariance(tau) * p).trace();
        return dy;
    };
    Vec y(np + d + 1);
    Eigen::Map<Mat>(y.data(), d, d) = rw.H2;
    Eigen::Map<Vec>(y.data() + np, d) = rw.h1;
    y[np + d] = rw.h0;
    if (t < grid.horizon) {
        y = rk4_integrate(deriv, y, grid.horizon, t, ode_steps_for_span(grid.horizon - t));
    }
    Mat p = Eigen::Map<const Mat>(y.data(), d, d);
    return s.dot(p * s) + Eigen::Map<const Vec>(y.data() + np, d).dot(s) + y[np + d];
}

/// Full analytic truth table on the grid (one backward ODE sweep).
inline GroundTruthTable analytic_truth(const Preset& preset, const TimeGrid& grid,
                                       const std::vector<Vec>& states) {
    GroundTruthTable table;
    table.states = states;
    table.grid = grid;
    table.values = Mat::Zero(states.size(), grid.count + 1);
    table.stderrs = Mat::Zero(states.size(), grid.count + 1);
    table.valid.setConstant(states.size(), grid.count + 1, true);
    table.provenance = GroundTruthTable::Provenance::analytic;

    if (preset.closed_form_value) {
        for (std::size_t i = 0; i < states.size(); ++i)
            for (int n = 0; n <= grid.count; ++n)
                table.values(i, n) = preset.closed_form_value(states[i], grid.time(n));
        return table;
    }
    if (!(preset.linear && preset.reward_spec)) {
        throw std::runtime_error("analytic_truth: preset '" + preset.id +
                                 "' has no analytic capability");
    }
    QuadraticValue qv =
        solve_value_odes(*preset.linear, *preset.reward_spec, preset.model.discount, grid);
    for (std::size_t i = 0; i < states.size(); ++i)
        for (int n = 0; n <= grid.count; ++n) table.values(i, n) = qv.value(states[i], n);
    return table;
}

/// Exact conditional mean and uncentered second moment of s_{t + lag} given
/// s_t = s under a linear preset. Capability error otherwise.
inline std::pair<Vec, Mat> exact_conditional_moments(const Preset& preset, const Vec& s,
                                                     double t, double lag) {
    if (!preset.linear || !preset.model.exact_moment_capable) {
        throw std::runtime_error("exact_conditional_moments: preset '" + preset.id +
                                 "' is not linear");
    }
    if (lag < 0.0) throw std::invalid_argument("exact_conditional_moments: lag must be >= 0");
    ConditionalMoments cm = conditional_moments(*preset.linear, t, t + lag);
    return {cm.mean(s), cm.second_moment(s)};
}

}  // namespace ctpe
