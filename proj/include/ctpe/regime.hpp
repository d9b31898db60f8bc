#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ctpe {

/// Nonstationarity floor at the bias/variance-optimal pooling bandwidth,
/// up to the suppressed proportionality constant:
///   F_ns = (d * L * dt / M)^(1/3),  L = L_{mu,t} + L_{Sigma,t}.
inline double ns_floor(double dim, double lip_time, double dt, double episodes) {
    if (!(dim > 0.0) || !(dt > 0.0) || !(episodes > 0.0) || lip_time < 0.0) {
        throw std::invalid_argument("ns_floor: d, dt, M must be positive and L >= 0");
    }
    return std::cbrt(dim * lip_time * dt / episodes);
}

enum class Regime { floor_dominated, second_order, third_order };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::floor_dominated: return "i";
        case Regime::second_order: return "ii";
        case Regime::third_order: return "iii";
    }
    return "?";
}

/// Regime label plus the leading error envelopes. Boundaries are half-open
/// with the suppressed-constant-1 convention, so every (F_ns, dt) pair maps
/// to exactly one label:
///   i   : F_ns >= dt          (floor-dominated)
///   ii  : dt^2 <= F_ns < dt   (second order pays, third need not)
///   iii : F_ns < dt^2         (third-order gains possible; demoted to ii
///                              with a warning when the higher-order
///                              variance/conditioning cost dominates)
struct RegimeReport {
    Regime label = Regime::floor_dominated;
    bool v3_warning = false;
    double f_ns = 0.0;
    double dt = 0.0;
    double env_be = 0.0;
    double env_gen2 = 0.0;
    double env_gen3 = 0.0;
};

inline RegimeReport classify_regime(double f_ns, double dt, bool v3_dominant = false) {
    if (f_ns < 0.0 || dt < 0.0) {
        throw std::invalid_argument("classify_regime: inputs must be nonnegative");
    }
    RegimeReport report;
    report.f_ns = f_ns;
    report.dt = dt;
    report.env_be = dt + f_ns;
    report.env_gen2 = dt * dt + f_ns;
    report.env_gen3 = dt * dt * dt + f_ns;
    if (f_ns >= dt) {
        report.label = Regime::floor_dominated;
    } else if (f_ns >= dt * dt) {
        report.label = Regime::second_order;
    } else if (!v3_dominant) {
        report.label = Regime::third_order;
    } else {
        report.label = Regime::second_order;
        report.v3_warning = true;
    }
    return report;
}

}  // namespace ctpe
