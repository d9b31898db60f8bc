#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ctpe/ground_truth.hpp"
#include "ctpe/simulate.hpp"
#include "ctpe/stencil.hpp"

namespace ctpe {

/// Multistep drift and diffusion surrogates at a point:
///   mu_i    = (1/dt) sum_{j=1..i} a_j E[s_{t+j dt} - s_t | s_t = s]
///   Sigma_i = (1/dt) sum_{j=1..i} a_j E[(s_{t+j dt} - s_t)(...)^T | s_t = s].
struct SurrogateEstimate {
    Vec drift;
    Mat covariance;
};

/// Population mode: conditional expectations come from the preset's exact
/// moment maps.
inline SurrogateEstimate surrogates_population(const Preset& preset, const Stencil& st,
                                               const Vec& s, double t, double dt) {
    if (!preset.linear || !preset.model.exact_moment_capable) {
        throw std::runtime_error("surrogates_population: preset '" + preset.id +
                                 "' has no exact moments");
    }
    const int d = preset.linear->dim;
    SurrogateEstimate est;
    est.drift = Vec::Zero(d);
    est.covariance = Mat::Zero(d, d);
    for (int j = 1; j <= st.order; ++j) {
        ConditionalMoments cm = conditional_moments(*preset.linear, t, t + j * dt);
        Vec mean = cm.mean(s);
        Vec inc = mean - s;
        // E[(X - s)(X - s)^T] = Cov(X) + (mean - s)(mean - s)^T
        Mat second = cm.cond_cov + inc * inc.transpose();
        est.drift += st.coeffs[j] * inc;
        est.covariance += st.coeffs[j] * second;
    }
    est.drift /= dt;
    est.covariance /= dt;
    return est;
}

/// Empirical mode: conditional expectations are k-nearest-neighbor averages
/// within the slice-n cross section of the batch (k defaults to
/// ceil(sqrt(episodes))).
inline SurrogateEstimate surrogates_empirical(const TrajectoryBatch& batch, const Stencil& st,
                                              const Vec& s, int n, int k_neighbors = 0) {
    const int i = st.order;
    if (n < 0 || n + i > batch.grid.count) {
        throw std::invalid_argument("surrogates_empirical: slice needs order forward steps");
    }
    const int m = batch.episodes;
    int k = k_neighbors > 0 ? std::min(k_neighbors, m)
                            : static_cast<int>(std::ceil(std::sqrt(double(m))));
    if (k < 1) throw std::invalid_argument("surrogates_empirical: empty neighborhood");

    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> dist(m);
    for (int mm = 0; mm < m; ++mm) dist[mm] = (batch.state(mm, n) - s).squaredNorm();
    std::nth_element(order.begin(), order.begin() + (k - 1), order.end(),
                     [&](int a, int b) { return dist[a] < dist[b]; });

    const int d = batch.dim;
    const double dt = batch.grid.dt;
    SurrogateEstimate est;
    est.drift = Vec::Zero(d);
    est.covariance = Mat::Zero(d, d);
    for (int j = 1; j <= i; ++j) {
        Vec mean_inc = Vec::Zero(d);
        Mat mean_outer = Mat::Zero(d, d);
        for (int idx = 0; idx < k; ++idx) {
            const int mm = order[idx];
            Vec inc = batch.state(mm, n + j) - batch.state(mm, n);
            mean_inc += inc;
            mean_outer += inc * inc.transpose();
        }
        mean_inc /= k;
        mean_outer /= k;
        est.drift += st.coeffs[j] * mean_inc;
        est.covariance += st.coeffs[j] * mean_outer;
    }
    est.drift /= dt;
    est.covariance /= dt;
    return est;
}

}  // namespace ctpe
