#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ctpe/model.hpp"
#include "ctpe/ode.hpp"
#include "ctpe/time_grid.hpp"

namespace ctpe {

/// Closed-loop linear dynamics ds = (A(t) s + u(t)) dt + sigma(t) dW with
/// state-independent diffusion. First and second moments are then governed by
/// linear ODEs, which is what the exact-moment and analytic-value paths
/// integrate.
struct LinearSystem {
    int dim = 1;
    int noise_dim = 1;
    std::function<Mat(double)> A;
    std::function<Vec(double)> u;
    std::function<Mat(double)> sigma;  // dim x noise_dim

    Mat covariance(double t) const {
        Mat sg = sigma(t);
        return sg * sg.transpose();
    }
};

/// Conditional law of s_{t1} given s_{t0} = s:
///   mean = transition * s + offset, covariance = cond_cov.
struct ConditionalMoments {
    Mat transition;  // Phi(t1, t0)
    Vec offset;
    Mat cond_cov;

    Vec mean(const Vec& s) const { return transition * s + offset; }
    /// Uncentered second moment E[s_{t1} s_{t1}^T | s_{t0} = s].
    Mat second_moment(const Vec& s) const {
        Vec m = mean(s);
        return cond_cov + m * m.transpose();
    }
};

/// Integrates Phi' = A Phi, c' = A c + u, P' = A P + P A^T + Sigma from t0
/// to t1 (forward in time).
inline ConditionalMoments conditional_moments(const LinearSystem& sys, double t0, double t1,
                                              int steps_per_unit = 2048) {
    const int d = sys.dim;
    const int n_phi = d * d;
    const int total = n_phi + d + d * d;

    Vec y0 = Vec::Zero(total);
    Eigen::Map<Mat>(y0.data(), d, d).setIdentity();

    auto deriv = [&](const Vec& y, double t) {
        Eigen::Map<const Mat> phi(y.data(), d, d);
        Eigen::Map<const Vec> c(y.data() + n_phi, d);
        Eigen::Map<const Mat> p(y.data() + n_phi + d, d, d);
        Mat a = sys.A(t);
        Vec dy(total);
        Eigen::Map<Mat>(dy.data(), d, d) = a * phi;
        Eigen::Map<Vec>(dy.data() + n_phi, d) = a * c + sys.u(t);
        Mat ap = a * p;
        Eigen::Map<Mat>(dy.data() + n_phi + d, d, d) = ap + ap.transpose() + sys.covariance(t);
        return dy;
    };

    Vec y = (t1 == t0) ? y0
                       : rk4_integrate(deriv, y0, t0, t1,
                                       ode_steps_for_span(t1 - t0, steps_per_unit));
    ConditionalMoments out;
    out.transition = Eigen::Map<const Mat>(y.data(), d, d);
    out.offset = Eigen::Map<const Vec>(y.data() + n_phi, d);
    Mat p = Eigen::Map<const Mat>(y.data() + n_phi + d, d, d);
    out.cond_cov = 0.5 * (p + p.transpose());
    return out;
}

/// Marginal first/second moments of the state on the grid, propagated from
/// the start law. second is uncentered: S_n = Cov + mean mean^T.
struct MarginalMoments {
    Vec mean;
    Mat second;
};

inline std::vector<MarginalMoments> marginal_moments_on_grid(const LinearSystem& sys,
                                                             const StartDistribution& start,
                                                             const TimeGrid& grid,
                                                             int steps_per_unit = 2048) {
    const int d = sys.dim;
    Vec m = start.moment_mean();
    Mat s2 = start.moment_cov() + m * m.transpose();

    auto deriv = [&](const Vec& y, double t) {
        Eigen::Map<const Vec> mm(y.data(), d);
        Eigen::Map<const Mat> ss(y.data() + d, d, d);
        Mat a = sys.A(t);
        Vec ut = sys.u(t);
        Vec dy(d + d * d);
        Eigen::Map<Vec>(dy.data(), d) = a * mm + ut;
        Mat as = a * ss;
        Eigen::Map<Mat>(dy.data() + d, d, d) =
            as + as.transpose() + sys.covariance(t) + ut * mm.transpose() + mm * ut.transpose();
        return dy;
    };

    std::vector<MarginalMoments> out(grid.count + 1);
    Vec y(d + d * d);
    Eigen::Map<Vec>(y.data(), d) = m;
    Eigen::Map<Mat>(y.data() + d, d, d) = s2;
    out[0] = {m, s2};
    for (int n = 1; n <= grid.count; ++n) {
        y = rk4_integrate(deriv, y, grid.time(n - 1), grid.time(n),
                          ode_steps_for_span(grid.dt, steps_per_unit));
        Mat raw = Eigen::Map<const Mat>(y.data() + d, d, d);
        out[n] = {Eigen::Map<const Vec>(y.data(), d), 0.5 * (raw + raw.transpose())};
    }
    return out;
}

}  // namespace ctpe
