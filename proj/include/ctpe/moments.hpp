#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "ctpe/features.hpp"
#include "ctpe/model.hpp"
#include "ctpe/simulate.hpp"
#include "ctpe/stencil.hpp"

namespace ctpe {

/// Temporal pooling window, counted in grid slices. The window for slice n is
/// [max(0, n - w/2), min(n_max, n + w/2)], symmetric and boundary-truncated,
/// with n_max chosen so every pooled transition keeps its forward steps.
struct PoolingWindow {
    int width = 1;

    std::pair<int, int> range(int n, int max_index) const {
        const int half = width / 2;
        return {std::max(0, n - half), std::min(max_index, n + half)};
    }
};

/// Pooled per-time regression blocks. system = (beta - a_0/dt)(gram + ridge I)
/// - stiffness.
struct MomentBlocks {
    int n = 0;
    Mat gram;           // G_n (unridged)
    Mat stiffness;      // A_n
    Vec reward_moment;  // b_n
    Mat system;         // M_n
    long m_eff = 0;
    double ridge = 0.0;
};

/// Per-slice feature products shared by all fits on one batch.
class FeatureCache {
  public:
    FeatureCache(const TrajectoryBatch& batch, const FeatureMap& map, const DiffusionModel& model)
        : episodes_(batch.episodes), nt_(batch.grid.count), p_(map.p), dt_(batch.grid.dt) {
        feats_.resize(nt_ + 1);
        gram_sums_.resize(nt_ + 1);
        reward_sums_.resize(nt_ + 1);
        cross_sums_.resize(nt_);
        Vec phi(p_);
        for (int k = 0; k <= nt_; ++k) {
            Mat x(episodes_, p_);
            Vec r(episodes_);
            const double tk = batch.grid.time(k);
            for (int m = 0; m < episodes_; ++m) {
                map.fill(batch.state(m, k), phi);
                x.row(m) = phi;
                r[m] = model.reward(batch.state(m, k), tk);
            }
            feats_[k] = std::move(x);
            gram_sums_[k] = feats_[k].transpose() * feats_[k];
            reward_sums_[k] = feats_[k].transpose() * r;
        }
        for (int k = 0; k < nt_; ++k) cross_sums_[k] = feats_[k].transpose() * feats_[k + 1];
        terminal_sum_ = Vec::Zero(p_);
        for (int m = 0; m < episodes_; ++m) {
            terminal_sum_ += feats_[nt_].row(m).transpose() * model.terminal(batch.state(m, nt_));
        }
    }

    int episodes() const { return episodes_; }
    int grid_count() const { return nt_; }
    int p() const { return p_; }
    double dt() const { return dt_; }
    const Mat& features(int k) const { return feats_[k]; }
    const Mat& gram_sum(int k) const { return gram_sums_[k]; }
    const Mat& cross_sum(int k) const { return cross_sums_[k]; }
    const Vec& reward_sum(int k) const { return reward_sums_[k]; }
    const Vec& terminal_sum() const { return terminal_sum_; }

    /// Default regularization level: 1e-6 * mean_k tr(G_k) / p.
    double auto_ridge() const {
        double tr = 0.0;
        for (const Mat& g : gram_sums_) tr += g.trace() / episodes_;
        tr /= (nt_ + 1);
        return 1e-6 * tr / p_;
    }

  private:
    int episodes_, nt_, p_;
    double dt_;
    std::vector<Mat> feats_, gram_sums_, cross_sums_;
    std::vector<Vec> reward_sums_;
    Vec terminal_sum_;
};

/// Adds the stencil-dependent per-slice stiffness sums and assembles pooled
/// blocks.
class MomentAssembler {
  public:
    MomentAssembler(const FeatureCache& cache, const Stencil& st, double beta)
        : cache_(cache), stencil_(st), beta_(beta) {
        const int nt = cache.grid_count();
        const int last = nt - st.order;
        stiff_sums_.resize(std::max(0, last + 1));
        for (int k = 0; k <= last; ++k) {
            Mat diff = Mat::Zero(cache.episodes(), cache.p());
            for (int j = 0; j <= st.order; ++j) diff += st.coeffs[j] * cache.features(k + j);
            stiff_sums_[k] = cache.features(k).transpose() * diff / cache.dt();
        }
    }

    int max_index() const { return cache_.grid_count() - stencil_.order; }

    MomentBlocks assemble(int n, PoolingWindow window, double ridge) const {
        const int last = max_index();
        if (last < 0) throw std::invalid_argument("assemble_moments: grid shorter than stencil");
        auto [lo, hi] = window.range(n, last);
        if (lo > hi) {
            throw std::invalid_argument("assemble_moments: empty pooling window at n=" +
                                        std::to_string(n));
        }
        const int p = cache_.p();
        MomentBlocks blocks;
        blocks.n = n;
        blocks.ridge = ridge;
        Mat g = Mat::Zero(p, p), a = Mat::Zero(p, p);
        Vec b = Vec::Zero(p);
        for (int k = lo; k <= hi; ++k) {
            g += cache_.gram_sum(k);
            a += stiff_sums_[k];
            b += cache_.reward_sum(k);
        }
        const double denom = static_cast<double>(cache_.episodes()) * (hi - lo + 1);
        blocks.gram = g / denom;
        blocks.stiffness = a / denom;
        blocks.reward_moment = b / denom;
        blocks.m_eff = static_cast<long>(cache_.episodes()) * (hi - lo + 1);
        const double a0 = stencil_.coeffs[0];
        blocks.system = (beta_ - a0 / cache_.dt()) *
                            (blocks.gram + ridge * Mat::Identity(p, p)) -
                        blocks.stiffness;
        if (!blocks.system.allFinite() || !blocks.reward_moment.allFinite()) {
            throw std::runtime_error("assemble_moments: non-finite moment block at n=" +
                                     std::to_string(n));
        }
        return blocks;
    }

  private:
    const FeatureCache& cache_;
    Stencil stencil_;
    double beta_;
    std::vector<Mat> stiff_sums_;
};

/// One-shot assembly matching the incremental path; convenient for oracles.
inline MomentBlocks assemble_moments(const TrajectoryBatch& batch, const FeatureMap& map,
                                     const Stencil& st, const DiffusionModel& model, int n,
                                     PoolingWindow window, double ridge) {
    FeatureCache cache(batch, map, model);
    MomentAssembler assembler(cache, st, model.discount);
    return assembler.assemble(n, window, ridge);
}

}  // namespace ctpe
