#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctpe/features.hpp"
#include "ctpe/ground_truth.hpp"
#include "ctpe/simulate.hpp"

namespace ctpe {

/// Fitted-dynamics anchor: least-squares drift on polynomial features of the
/// state plus a constant diffusion estimate. Used as a model-based baseline
/// that values the policy by simulating under the fitted dynamics.
struct FittedDynamics {
    int degree = 1;  // 1 = linear, 2 = quadratic
    int dim = 1;
    int time_bins = 1;
    double horizon = 1.0;
    FeatureMap dyn_features;
    std::vector<Mat> coeffs;  // per bin: p_dyn x dim, drift(s) = coeffs^T phi(s)
    Mat sigma_hat;            // d x d PSD diffusion covariance estimate
    Mat sigma_sqrt;           // symmetric PSD square root used for simulation

    int bin_of(double t) const {
        int b = static_cast<int>(std::floor(t / horizon * time_bins));
        return std::min(std::max(b, 0), time_bins - 1);
    }
    Vec drift(const Vec& s, double t) const {
        return coeffs[bin_of(t)].transpose() * dyn_features.eval(s);
    }
};

/// Fits one-step increments (s_{k+1} - s_k)/dt onto degree-1 or degree-2
/// polynomial features of s_k; a small fixed ridge (1e-8) is always applied.
/// Sigma_hat is the increment residual covariance divided by dt, symmetrized
/// and projected to the PSD cone.
inline FittedDynamics fit_mb_anchor(const TrajectoryBatch& batch, int degree,
                                    int time_bins = 1) {
    if (degree != 1 && degree != 2) {
        throw std::invalid_argument("fit_mb_anchor: degree must be 1 or 2");
    }
    if (time_bins < 1) throw std::invalid_argument("fit_mb_anchor: time_bins must be >= 1");
    const int d = batch.dim;
    FeatureMap map =
        make_features(degree == 1 ? FeatureFamily::linear : FeatureFamily::quadratic, d);
    const int nt = batch.grid.count;
    const long samples = static_cast<long>(batch.episodes) * nt;
    if (samples < map.p) {
        throw std::invalid_argument("fit_mb_anchor: fewer samples than dynamics features");
    }
    const double dt = batch.grid.dt;

    FittedDynamics dyn;
    dyn.degree = degree;
    dyn.dim = d;
    dyn.time_bins = time_bins;
    dyn.horizon = batch.grid.horizon;
    dyn.dyn_features = map;
    dyn.coeffs.resize(time_bins);

    Mat resid_cov = Mat::Zero(d, d);
    long resid_count = 0;
    Vec phi(map.p);
    for (int b = 0; b < time_bins; ++b) {
        Mat xtx = Mat::Zero(map.p, map.p);
        Mat xty = Mat::Zero(map.p, d);
        for (int m = 0; m < batch.episodes; ++m) {
            for (int k = 0; k < nt; ++k) {
                if (dyn.bin_of(batch.grid.time(k)) != b) continue;
                map.fill(batch.state(m, k), phi);
                Vec y = (batch.state(m, k + 1) - batch.state(m, k)) / dt;
                xtx.noalias() += phi * phi.transpose();
                xty.noalias() += phi * y.transpose();
            }
        }
        Mat lhs = xtx + 1e-8 * Mat::Identity(map.p, map.p);
        dyn.coeffs[b] = lhs.ldlt().solve(xty);
        if (!dyn.coeffs[b].allFinite()) {
            throw std::runtime_error("fit_mb_anchor: rank-deficient dynamics design");
        }
    }
    for (int m = 0; m < batch.episodes; ++m) {
        for (int k = 0; k < nt; ++k) {
            map.fill(batch.state(m, k), phi);
            const int b = dyn.bin_of(batch.grid.time(k));
            Vec pred = dyn.coeffs[b].transpose() * phi;
            Vec resid = (batch.state(m, k + 1) - batch.state(m, k)) - dt * pred;
            resid_cov.noalias() += resid * resid.transpose();
            ++resid_count;
        }
    }
    resid_cov /= static_cast<double>(resid_count) * dt;
    resid_cov = 0.5 * (resid_cov + resid_cov.transpose());

    Eigen::SelfAdjointEigenSolver<Mat> eig(resid_cov);
    Vec evals = eig.eigenvalues().cwiseMax(0.0);
    dyn.sigma_hat = eig.eigenvectors() * evals.asDiagonal() * eig.eigenvectors().transpose();
    dyn.sigma_sqrt =
        eig.eigenvectors() * evals.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    return dyn;
}

/// Model that pairs the fitted dynamics with the true evaluation target
/// (reward, terminal, discount).
inline DiffusionModel fitted_model(const FittedDynamics& dyn, const DiffusionModel& target) {
    DiffusionModel m = DiffusionModel::plain(
        dyn.dim, dyn.dim, [dyn](const Vec& s, double t) { return dyn.drift(s, t); },
        [dyn](const Vec&, double) { return dyn.sigma_sqrt; }, target.reward, target.terminal,
        target.discount, target.start);
    m.preset_id = target.preset_id;
    return m;
}

/// Monte Carlo value table under the fitted dynamics with the true reward
/// side. Rollout blow-ups mark the affected entries invalid instead of
/// aborting, mirroring how unstable anchors behave on hard tasks.
inline GroundTruthTable mb_value(const FittedDynamics& dyn, const DiffusionModel& target,
                                 const TimeGrid& grid, const std::vector<Vec>& states,
                                 int rollouts, std::uint64_t seed, int substeps = 16) {
    return mc_ground_truth(fitted_model(dyn, target), grid, states, rollouts, seed, substeps,
                           BlowupPolicy::mark_invalid);
}

}  // namespace ctpe
