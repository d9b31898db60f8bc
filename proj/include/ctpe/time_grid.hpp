#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ctpe {

/// Uniform evaluation grid t_n = n * dt, n = 0..count, with count * dt == horizon.
struct TimeGrid {
    double horizon = 1.0;  // T
    double dt = 0.1;
    int count = 10;  // N_T

    double time(int n) const { return n * dt; }
};

/// Builds a grid after checking that T / dt is an integer (within 1e-9).
/// The stored horizon is snapped to count * dt so that time(count) == horizon
/// holds bit-exactly.
inline TimeGrid make_grid(double horizon, double dt) {
    if (!(horizon > 0.0) || !(dt > 0.0)) {
        throw std::invalid_argument("make_grid: horizon and dt must be positive");
    }
    const double quotient = horizon / dt;
    const double rounded = std::nearbyint(quotient);
    if (std::abs(quotient - rounded) > 1e-9 || rounded < 1.0) {
        std::ostringstream msg;
        msg << "make_grid: T/dt not integral (T=" << horizon << ", dt=" << dt
            << ", T/dt=" << quotient << ")";
        throw std::invalid_argument(msg.str());
    }
    TimeGrid grid;
    grid.count = static_cast<int>(rounded);
    grid.dt = dt;
    grid.horizon = grid.count * dt;
    return grid;
}

}  // namespace ctpe
