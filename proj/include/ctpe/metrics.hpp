#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctpe/fit.hpp"
#include "ctpe/ground_truth.hpp"

namespace ctpe {

/// Error summary of a fitted surface against a truth table. Integrated RMSE
/// is the root of the grid-time-averaged mean squared error (uniform time
/// weights), so a constant offset c gives integrated RMSE exactly c.
struct MetricReport {
    double integrated_rmse = 0.0;
    double t0_rmse = 0.0;
    std::vector<double> per_time;  // RMSE_n
    std::string estimator;
    std::uint64_t seed = 0;
    std::string config_hash;
};

inline MetricReport metrics(const ValueSurface& surface, const GroundTruthTable& truth) {
    if (truth.grid.count != surface.grid.count || truth.states.empty()) {
        throw std::invalid_argument("metrics: truth does not cover the surface grid");
    }
    if (!truth.all_valid()) {
        throw std::invalid_argument("metrics: truth table has invalid entries");
    }
    MetricReport report;
    report.estimator = surface.estimator;
    report.seed = surface.seed;
    report.per_time.resize(truth.grid.count + 1);
    double mean_sq_acc = 0.0;
    Vec phi(surface.map.p);
    for (int n = 0; n <= truth.grid.count; ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < truth.states.size(); ++i) {
            surface.map.fill(truth.states[i], phi);
            const double diff = phi.dot(surface.weights.row(n)) - truth.values(i, n);
            acc += diff * diff;
        }
        const double mse = acc / truth.states.size();
        report.per_time[n] = std::sqrt(mse);
        mean_sq_acc += mse;
    }
    report.integrated_rmse = std::sqrt(mean_sq_acc / (truth.grid.count + 1));
    report.t0_rmse = report.per_time[0];
    if (!std::isfinite(report.integrated_rmse)) {
        throw std::runtime_error("metrics: non-finite error");
    }
    return report;
}

/// OLS slope of log(error) on log(dt); needs >= 3 strictly positive points.
inline double log_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw std::invalid_argument("log_slope: need at least 3 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [dt, err] : points) {
        if (!(dt > 0.0) || !(err > 0.0)) {
            throw std::invalid_argument("log_slope: entries must be positive");
        }
        const double x = std::log(dt), y = std::log(err);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(points.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace ctpe
