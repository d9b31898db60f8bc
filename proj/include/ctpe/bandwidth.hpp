#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ctpe/fit.hpp"
#include "ctpe/simulate.hpp"

namespace ctpe {

struct BandwidthSelection {
    int selected = 1;
    std::vector<std::pair<int, double>> scores;  // (h, validation score)
};

/// Validation score of a surface: mean over validation episodes and grid
/// indices of (V_hat(s_{m,n}, t_n) - realized return from (m, n))^2.
inline double validation_score(const ValueSurface& surface, const TrajectoryBatch& val,
                               const Mat& returns) {
    double acc = 0.0;
    long count = 0;
    Vec phi(surface.map.p);
    for (int m = 0; m < val.episodes; ++m) {
        for (int n = 0; n <= val.grid.count; ++n) {
            surface.map.fill(val.state(m, n), phi);
            const double diff = phi.dot(surface.weights.row(n)) - returns(m, n);
            acc += diff * diff;
            ++count;
        }
    }
    return acc / count;
}

/// Scores each candidate window on the validation split and returns the
/// argmin, ties broken toward the smallest width. A fit failure marks that
/// candidate's score as +inf instead of aborting the sweep.
inline BandwidthSelection select_bandwidth(
    const std::function<ValueSurface(int)>& fit, const std::vector<int>& candidates,
    const TrajectoryBatch& val, const DiffusionModel& model) {
    if (candidates.empty()) throw std::invalid_argument("select_bandwidth: no candidates");
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (candidates[i] <= candidates[i - 1]) {
            throw std::invalid_argument("select_bandwidth: candidates must be sorted ascending");
        }
    }
    const Mat returns = realized_return_table(val, model);
    BandwidthSelection sel;
    double best = std::numeric_limits<double>::infinity();
    sel.selected = candidates.front();
    for (int h : candidates) {
        double score = std::numeric_limits<double>::infinity();
        try {
            ValueSurface surface = fit(h);
            score = validation_score(surface, val, returns);
        } catch (const std::exception&) {
            // leave at +inf
        }
        sel.scores.emplace_back(h, score);
        if (score < best) {
            best = score;
            sel.selected = h;
        }
    }
    return sel;
}

}  // namespace ctpe
