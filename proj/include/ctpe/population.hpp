#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "ctpe/analytic_value.hpp"
#include "ctpe/fit.hpp"
#include "ctpe/presets.hpp"

namespace ctpe {

/// Population-mode fitting: the regression blocks are computed from exact
/// first/second moments instead of sample averages. Available for linear
/// presets with affine rewards and the linear feature family, which is the
/// setting where the discretization order of the fits can be isolated.
struct PopulationProblem {
    LinearSystem sys;
    StartDistribution start;
    Vec q1;
    double q0 = 0.0;
    Vec h1;
    double h0 = 0.0;
    double beta = 0.0;
};

inline PopulationProblem make_population_problem(const Preset& preset) {
    if (!preset.linear || !preset.reward_spec || !preset.reward_spec->is_affine()) {
        throw std::runtime_error("population mode requires a linear preset with affine reward (" +
                                 preset.id + ")");
    }
    PopulationProblem prob;
    prob.sys = *preset.linear;
    prob.start = preset.model.start;
    prob.q1 = preset.reward_spec->r1(0.0);
    prob.q0 = preset.reward_spec->r0(0.0);
    prob.h1 = preset.reward_spec->h1;
    prob.h0 = preset.reward_spec->h0;
    prob.beta = preset.model.discount;
    return prob;
}

/// Exact moment blocks for linear features phi = (1, s):
///   G_n = E[phi_n phi_n^T], C_{n,j} = E[phi_n phi_{n+j}^T], b_n = E[phi_n r_n].
class PopulationMoments {
  public:
    PopulationMoments(const PopulationProblem& prob, const TimeGrid& grid, int max_lag,
                      int steps_per_unit = 2048)
        : grid_(grid), max_lag_(max_lag) {
        const int d = prob.sys.dim;
        marginals_ = marginal_moments_on_grid(prob.sys, prob.start, grid, steps_per_unit);
        gram_.resize(grid.count + 1);
        reward_.resize(grid.count + 1);
        for (int n = 0; n <= grid.count; ++n) {
            const Vec& m = marginals_[n].mean;
            const Mat& s2 = marginals_[n].second;
            Mat g(d + 1, d + 1);
            g(0, 0) = 1.0;
            g.block(0, 1, 1, d) = m.transpose();
            g.block(1, 0, d, 1) = m;
            g.block(1, 1, d, d) = s2;
            gram_[n] = g;
            Vec b(d + 1);
            b[0] = prob.q0 + prob.q1.dot(m);
            b.segment(1, d) = prob.q0 * m + s2 * prob.q1;
            reward_[n] = b;
        }
        cross_.resize(grid.count + 1);
        for (int n = 0; n <= grid.count; ++n) {
            const int lag_max = std::min(max_lag, grid.count - n);
            cross_[n].resize(lag_max + 1);
            cross_[n][0] = gram_[n];
            for (int j = 1; j <= lag_max; ++j) {
                ConditionalMoments cm = conditional_moments(prob.sys, grid.time(n),
                                                            grid.time(n + j), steps_per_unit);
                const Vec& m = marginals_[n].mean;
                const Mat& s2 = marginals_[n].second;
                Vec mj = cm.transition * m + cm.offset;  // E[s_{n+j}]
                Mat c(d + 1, d + 1);
                c(0, 0) = 1.0;
                c.block(0, 1, 1, d) = mj.transpose();
                c.block(1, 0, d, 1) = m;
                c.block(1, 1, d, d) = s2 * cm.transition.transpose() + m * cm.offset.transpose();
                cross_[n][j] = c;
            }
        }
    }

    int p() const { return static_cast<int>(gram_[0].rows()); }
    const Mat& gram(int n) const { return gram_[n]; }
    const Mat& cross(int n, int j) const { return cross_[n][j]; }
    const Vec& reward_moment(int n) const { return reward_[n]; }
    const TimeGrid& grid() const { return grid_; }

  private:
    TimeGrid grid_;
    int max_lag_;
    std::vector<MarginalMoments> marginals_;
    std::vector<Mat> gram_;
    std::vector<Vec> reward_;
    std::vector<std::vector<Mat>> cross_;
};

struct PopulationFitOptions {
    PoolingWindow window{1};
    double ridge = 0.0;
    StartupMode startup = StartupMode::analytic;
    int steps_per_unit = 2048;
};

namespace detail {

/// Exact affine coefficients (k_n, g_n) of the value surface, used for the
/// analytic startup block and as the calibration reference.
inline Mat population_analytic_weights(const PopulationProblem& prob, const TimeGrid& grid,
                                       int steps_per_unit) {
    QuadraticRewardSpec spec =
        QuadraticRewardSpec::affine(prob.q1, prob.q0, prob.h1, prob.h0);
    QuadraticValue qv = solve_value_odes(prob.sys, spec, prob.beta, grid, steps_per_unit);
    Mat w(grid.count + 1, prob.sys.dim + 1);
    for (int n = 0; n <= grid.count; ++n) {
        w(n, 0) = qv.k[n];
        w.row(n).segment(1, prob.sys.dim) = qv.g[n];
    }
    return w;
}

inline Vec population_ridge_solve(const Mat& gram, const Vec& rhs, double ridge) {
    return ridge_solve(gram, rhs, ridge, "population regression");
}

}  // namespace detail

/// Population analogue of fit_bellman hooked to exact moments.
inline ValueSurface fit_bellman_population(const PopulationProblem& prob, const TimeGrid& grid,
                                           const PopulationFitOptions& opt = {}) {
    PopulationMoments mom(prob, grid, 1, opt.steps_per_unit);
    const int nt = grid.count;
    const int p = mom.p();
    const double decay = std::exp(-prob.beta * grid.dt);

    ValueSurface surface;
    surface.grid = grid;
    surface.estimator = "BE";
    surface.map = make_features(FeatureFamily::linear, prob.sys.dim);
    surface.bandwidth = opt.window.width;
    surface.ridge = opt.ridge;
    surface.weights = Mat::Zero(nt + 1, p);

    // terminal regression of the affine h is exact in this class
    Vec w_term(p);
    w_term[0] = prob.h0;
    w_term.segment(1, prob.sys.dim) = prob.h1;
    surface.weights.row(nt) = w_term;

    for (int n = nt - 1; n >= 0; --n) {
        auto [lo, hi] = opt.window.range(n, nt - 1);
        Mat g = Mat::Zero(p, p);
        Vec rhs = Vec::Zero(p);
        for (int k = lo; k <= hi; ++k) {
            const int target = std::max(k + 1, n + 1);
            g += mom.gram(k);
            rhs += grid.dt * mom.reward_moment(k) +
                   decay * mom.cross(k, 1) * surface.weights.row(target).transpose();
        }
        const double cnt = hi - lo + 1;
        surface.weights.row(n) = detail::population_ridge_solve(g / cnt, rhs / cnt, opt.ridge);
    }
    return surface;
}

/// Population analogue of fit_gen.
inline GenFitResult fit_gen_population(const PopulationProblem& prob, const Stencil& st,
                                       const TimeGrid& grid,
                                       const PopulationFitOptions& opt = {}) {
    const int i = st.order;
    const int nt = grid.count;
    if (nt < i + 1) throw std::invalid_argument("fit_gen_population: grid too short");
    PopulationMoments mom(prob, grid, i, opt.steps_per_unit);
    const int p = mom.p();
    const double dt = grid.dt;
    const Mat eye = Mat::Identity(p, p);

    GenFitResult result;
    ValueSurface& surface = result.surface;
    surface.grid = grid;
    surface.estimator = "Gen" + std::to_string(i);
    surface.map = make_features(FeatureFamily::linear, prob.sys.dim);
    surface.bandwidth = opt.window.width;
    surface.ridge = opt.ridge;
    surface.weights = Mat::Zero(nt + 1, p);

    // startup block
    Vec w_term(p);
    w_term[0] = prob.h0;
    w_term.segment(1, prob.sys.dim) = prob.h1;
    surface.weights.row(nt) = w_term;
    const double decay = std::exp(-prob.beta * dt);
    Mat analytic;
    if (opt.startup == StartupMode::analytic) {
        analytic = detail::population_analytic_weights(prob, grid, opt.steps_per_unit);
    }
    for (int ell = 1; ell < i; ++ell) {
        const int k = nt - ell;
        switch (opt.startup) {
            case StartupMode::terminal_copy:
                surface.weights.row(k) = w_term;
                break;
            case StartupMode::analytic:
                surface.weights.row(k) = analytic.row(k);
                break;
            case StartupMode::bellman: {
                Vec rhs = dt * mom.reward_moment(k) +
                          decay * mom.cross(k, 1) * surface.weights.row(k + 1).transpose();
                surface.weights.row(k) =
                    detail::population_ridge_solve(mom.gram(k), rhs, opt.ridge);
                break;
            }
        }
    }

    result.sigma_min.assign(nt - i + 1, 0.0);
    const double a0 = st.coeffs[0];
    for (int n = nt - i; n >= 0; --n) {
        auto [lo, hi] = opt.window.range(n, nt - i);
        Mat g = Mat::Zero(p, p), a = Mat::Zero(p, p);
        Vec b = Vec::Zero(p);
        for (int k = lo; k <= hi; ++k) {
            g += mom.gram(k);
            b += mom.reward_moment(k);
            for (int j = 0; j <= i; ++j) a += st.coeffs[j] * mom.cross(k, j) / dt;
        }
        const double cnt = hi - lo + 1;
        g /= cnt;
        a /= cnt;
        b /= cnt;
        Mat system = (prob.beta - a0 / dt) * (g + opt.ridge * eye) - a;

        MomentBlocks blocks;
        blocks.n = n;
        blocks.gram = g;
        blocks.stiffness = a;
        blocks.reward_moment = b;
        blocks.system = system;
        blocks.m_eff = 0;
        blocks.ridge = opt.ridge;

        Eigen::BDCSVD<Mat> svd(system, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smin = svd.singularValues().minCoeff();
        const double smax = svd.singularValues().maxCoeff();
        result.sigma_min[n] = smin;
        if (!(smin >= 1e-12 * smax)) throw SingularSystem(n, smin, smax);

        Vec carry = Vec::Zero(p);
        for (int j = 1; j <= i; ++j) carry += st.coeffs[j] * surface.weights.row(n + j).transpose();
        Vec rhs = b + (g + opt.ridge * eye) * carry / dt;
        surface.weights.row(n) = svd.solve(rhs);
        result.blocks.push_back(std::move(blocks));
    }
    std::reverse(result.blocks.begin(), result.blocks.end());
    return result;
}

}  // namespace ctpe
