#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctpe/moments.hpp"

namespace ctpe {

/// Fitted value surface: V(s, t_n) = phi(s)^T w_n at every grid index.
struct ValueSurface {
    TimeGrid grid;
    std::string estimator;  // "BE", "Gen2", "Gen3", "MBLinear", ...
    FeatureMap map;
    Mat weights;  // (N_T + 1) x p
    int bandwidth = 1;
    double ridge = 0.0;
    std::uint64_t seed = 0;

    double value(const Vec& s, int n) const { return map.eval(s).dot(weights.row(n)); }
};

enum class StartupMode { bellman, terminal_copy, analytic };

inline std::string to_string(StartupMode m) {
    switch (m) {
        case StartupMode::bellman: return "bellman";
        case StartupMode::terminal_copy: return "terminal_copy";
        case StartupMode::analytic: return "analytic";
    }
    return "?";
}

inline StartupMode startup_from_string(const std::string& s) {
    if (s == "bellman") return StartupMode::bellman;
    if (s == "terminal_copy") return StartupMode::terminal_copy;
    if (s == "analytic") return StartupMode::analytic;
    throw std::invalid_argument("unknown startup mode: " + s);
}

struct FitOptions {
    PoolingWindow window{1};
    double ridge = std::numeric_limits<double>::quiet_NaN();  // NaN -> auto level
    StartupMode startup = StartupMode::bellman;
    // reference surface for StartupMode::analytic, evaluated at (state, t)
    std::function<double(const Vec&, double)> analytic_fn;
    bool collect_blocks = false;
};

/// Raised when the pooled multistep system matrix loses rank; reports the
/// slice and its conditioning, which is the instability signature the
/// diagnostics track.
struct SingularSystem : std::runtime_error {
    int n;
    double sigma_min, sigma_max;
    SingularSystem(int slice, double smin, double smax)
        : std::runtime_error("singular system matrix at n=" + std::to_string(slice) +
                             " (sigma_min=" + std::to_string(smin) +
                             ", sigma_max=" + std::to_string(smax) + ")"),
          n(slice),
          sigma_min(smin),
          sigma_max(smax) {}
};

namespace detail {

inline Vec ridge_solve(const Mat& gram, const Vec& rhs, double ridge, const char* context) {
    Mat lhs = gram + ridge * Mat::Identity(gram.rows(), gram.cols());
    Eigen::LDLT<Mat> ldlt(lhs);
    Vec w = ldlt.solve(rhs);
    const double tol = 1e-8 * (rhs.norm() + lhs.norm() * w.norm()) + 1e-12;
    if (!w.allFinite() || (lhs * w - rhs).norm() > tol) {
        throw std::runtime_error(std::string("singular normal equations in ") + context);
    }
    return w;
}

}  // namespace detail

/// Terminal block of the backward recursion: w_{N_T} regresses h onto phi;
/// the remaining order-1..order-1 slices are filled per the startup mode
/// (single-slice backward steps for `bellman`, copies for `terminal_copy`,
/// reference regression for `analytic`). Returns rows indexed by offset
/// ell = 0..order-1 for slice N_T - ell.
inline Mat startup_block(const FeatureCache& cache, const DiffusionModel& model, int order,
                         double ridge, StartupMode mode,
                         const std::function<double(const Vec&, double)>& analytic_fn,
                         const TrajectoryBatch& batch) {
    const int nt = cache.grid_count();
    const int m = cache.episodes();
    Mat out(order, cache.p());

    Vec w_term = detail::ridge_solve(cache.gram_sum(nt) / m, cache.terminal_sum() / m, ridge,
                                     "terminal regression");
    out.row(0) = w_term;

    const double decay = std::exp(-model.discount * cache.dt());
    for (int ell = 1; ell < order; ++ell) {
        const int k = nt - ell;
        switch (mode) {
            case StartupMode::terminal_copy:
                out.row(ell) = w_term;
                break;
            case StartupMode::bellman: {
                Vec rhs = (cache.dt() * cache.reward_sum(k) +
                           decay * cache.cross_sum(k) * out.row(ell - 1).transpose()) /
                          m;
                out.row(ell) =
                    detail::ridge_solve(cache.gram_sum(k) / m, rhs, ridge, "startup step");
                break;
            }
            case StartupMode::analytic: {
                if (!analytic_fn) {
                    throw std::invalid_argument("startup_block: analytic mode needs a reference");
                }
                const double tk = batch.grid.time(k);
                Vec vals(m);
                for (int mm = 0; mm < m; ++mm) vals[mm] = analytic_fn(batch.state(mm, k), tk);
                Vec rhs = cache.features(k).transpose() * vals / m;
                out.row(ell) =
                    detail::ridge_solve(cache.gram_sum(k) / m, rhs, ridge, "analytic startup");
                break;
            }
        }
    }
    return out;
}

inline Mat startup_block(const TrajectoryBatch& batch, const FeatureMap& map,
                         const DiffusionModel& model, int order, double ridge,
                         StartupMode mode = StartupMode::bellman,
                         const std::function<double(const Vec&, double)>& analytic_fn = {}) {
    FeatureCache cache(batch, map, model);
    return startup_block(cache, model, order, ridge, mode, analytic_fn, batch);
}

/// Pooled one-step backward regression. Each pooled slice k contributes the
/// target r(s_k, t_k) dt + e^{-beta dt} phi(s_{k+1})^T w_{k+1}; slices whose
/// w_{k+1} is not yet available in the backward sweep (k < n) substitute
/// w_{n+1}, which is the same order of substitution as the pooling bias
/// itself.
inline ValueSurface fit_bellman(const TrajectoryBatch& batch, const FeatureMap& map,
                                const DiffusionModel& model, const FitOptions& opt = {}) {
    FeatureCache cache(batch, map, model);
    const double ridge = std::isnan(opt.ridge) ? cache.auto_ridge() : opt.ridge;
    const int nt = cache.grid_count();
    const int m = cache.episodes();
    const double decay = std::exp(-model.discount * cache.dt());

    ValueSurface surface;
    surface.grid = batch.grid;
    surface.estimator = "BE";
    surface.map = map;
    surface.bandwidth = opt.window.width;
    surface.ridge = ridge;
    surface.weights = Mat::Zero(nt + 1, cache.p());

    surface.weights.row(nt) = detail::ridge_solve(cache.gram_sum(nt) / m,
                                                  cache.terminal_sum() / m, ridge,
                                                  "terminal regression");
    for (int n = nt - 1; n >= 0; --n) {
        auto [lo, hi] = opt.window.range(n, nt - 1);
        Mat g = Mat::Zero(cache.p(), cache.p());
        Vec rhs = Vec::Zero(cache.p());
        for (int k = lo; k <= hi; ++k) {
            const int target = std::max(k + 1, n + 1);
            g += cache.gram_sum(k);
            rhs += cache.dt() * cache.reward_sum(k) +
                   decay * cache.cross_sum(k) * surface.weights.row(target).transpose();
        }
        const double denom = static_cast<double>(m) * (hi - lo + 1);
        surface.weights.row(n) =
            detail::ridge_solve(g / denom, rhs / denom, ridge, "backward regression");
    }
    return surface;
}

struct GenFitResult {
    ValueSurface surface;
    std::vector<double> sigma_min;   // per interior slice n = 0..N_T-i
    std::vector<MomentBlocks> blocks;  // populated when collect_blocks is set
};

/// Order-i multistep backward fit: terminal block from startup_block, then
///   M_n w_n = b_n + (1/dt)(G_n + ridge I) sum_{j=1..i} a_j w_{n+j}
/// with pooled blocks. The system matrix is gated on its smallest singular
/// value before each solve.
inline GenFitResult fit_gen(const TrajectoryBatch& batch, const FeatureMap& map,
                            const Stencil& st, const DiffusionModel& model,
                            const FitOptions& opt = {}) {
    const int i = st.order;
    const int nt = batch.grid.count;
    if (nt < i + 1) {
        throw std::invalid_argument("fit_gen: grid needs at least order+1 steps");
    }
    FeatureCache cache(batch, map, model);
    const double ridge = std::isnan(opt.ridge) ? cache.auto_ridge() : opt.ridge;
    MomentAssembler assembler(cache, st, model.discount);

    GenFitResult result;
    ValueSurface& surface = result.surface;
    surface.grid = batch.grid;
    surface.estimator = "Gen" + std::to_string(i);
    surface.map = map;
    surface.bandwidth = opt.window.width;
    surface.ridge = ridge;
    surface.weights = Mat::Zero(nt + 1, cache.p());

    Mat startup =
        startup_block(cache, model, i, ridge, opt.startup, opt.analytic_fn, batch);
    for (int ell = 0; ell < i; ++ell) surface.weights.row(nt - ell) = startup.row(ell);

    result.sigma_min.assign(nt - i + 1, 0.0);
    const double dt = cache.dt();
    const Mat eye = Mat::Identity(cache.p(), cache.p());
    for (int n = nt - i; n >= 0; --n) {
        MomentBlocks blocks = assembler.assemble(n, opt.window, ridge);
        Eigen::BDCSVD<Mat> svd(blocks.system, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smin = svd.singularValues().minCoeff();
        const double smax = svd.singularValues().maxCoeff();
        result.sigma_min[n] = smin;
        if (!(smin >= 1e-12 * smax)) throw SingularSystem(n, smin, smax);

        Vec carry = Vec::Zero(cache.p());
        for (int j = 1; j <= i; ++j) {
            carry += st.coeffs[j] * surface.weights.row(n + j).transpose();
        }
        Vec rhs = blocks.reward_moment +
                  (blocks.gram + ridge * eye) * carry / dt;
        surface.weights.row(n) = svd.solve(rhs);
        if (!surface.weights.row(n).allFinite()) throw SingularSystem(n, smin, smax);
        if (opt.collect_blocks) result.blocks.push_back(std::move(blocks));
    }
    if (opt.collect_blocks) std::reverse(result.blocks.begin(), result.blocks.end());
    return result;
}

}  // namespace ctpe
