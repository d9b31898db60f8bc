#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "ctpe/features.hpp"

namespace ctpe {

/// Classic fixed-step RK4 on a flattened state. Integrates from t0 to t1
/// (either direction) in `steps` equal steps.
template <class Deriv>
Vec rk4_integrate(Deriv&& deriv, Vec y, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    double t = t0;
    Vec k1, k2, k3, k4;
    for (int s = 0; s < steps; ++s) {
        k1 = deriv(y, t);
        k2 = deriv(y + 0.5 * h * k1, t + 0.5 * h);
        k3 = deriv(y + 0.5 * h * k2, t + 0.5 * h);
        k4 = deriv(y + h * k3, t + h);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = t0 + (s + 1) * h;
    }
    return y;
}

/// Step count giving ~1e-12 RK4 accuracy for O(1) coefficient dynamics over
/// the given span.
inline int ode_steps_for_span(double span, int steps_per_unit = 2048) {
    int steps = static_cast<int>(std::ceil(std::abs(span) * steps_per_unit));
    return std::max(steps, 16);
}

}  // namespace ctpe
