#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ctpe/linear_system.hpp"
#include "ctpe/time_grid.hpp"

namespace ctpe {

/// Reward family closed under the linear-dynamics value equation:
///   r(s,t) = s^T R2(t) s + r1(t)^T s + r0(t),  h(s) = s^T H2 s + h1^T s + h0.
/// Affine rewards are the R2 == H2 == 0 special case.
struct QuadraticRewardSpec {
    int dim = 1;
    std::function<Mat(double)> R2;
    std::function<Vec(double)> r1;
    std::function<double(double)> r0;
    Mat H2;
    Vec h1;
    double h0 = 0.0;

    bool is_affine() const {
        return H2.cwiseAbs().maxCoeff() == 0.0 && R2(0.0).cwiseAbs().maxCoeff() == 0.0;
    }

    static QuadraticRewardSpec affine(const Vec& q1, double q0, const Vec& hv, double hc) {
        const int d = static_cast<int>(q1.size());
        QuadraticRewardSpec spec;
        spec.dim = d;
        spec.R2 = [d](double) { return Mat::Zero(d, d); };
        spec.r1 = [q1](double) { return q1; };
        spec.r0 = [q0](double) { return q0; };
        spec.H2 = Mat::Zero(d, d);
        spec.h1 = hv;
        spec.h0 = hc;
        return spec;
    }

    static QuadraticRewardSpec quadratic(const Mat& R2c, const Mat& H2c) {
        const int d = static_cast<int>(R2c.rows());
        QuadraticRewardSpec spec;
        spec.dim = d;
        spec.R2 = [R2c](double) { return R2c; };
        spec.r1 = [d](double) { return Vec(Vec::Zero(d)); };
        spec.r0 = [](double) { return 0.0; };
        spec.H2 = H2c;
        spec.h1 = Vec::Zero(d);
        spec.h0 = 0.0;
        return spec;
    }
};

/// Coefficients of V(s, t_n) = s^T P_n s + g_n^T s + k_n on the grid,
/// obtained by backward integration of the value equation.
struct QuadraticValue {
    TimeGrid grid;
    std::vector<Mat> P;
    std::vector<Vec> g;
    std::vector<double> k;

    double value(const Vec& s, int n) const {
        return s.dot(P[n] * s) + g[n].dot(s) + k[n];
    }
};

/// Backward RK4 on
///   P' = beta P - R2 - A^T P - P A
///   g' = beta g - r1 - A^T g - 2 P u
///   k' = beta k - r0 - u^T g - tr(Sigma P)
/// with terminal values (H2, h1, h0). Step density is chosen for ~1e-10
/// accuracy on O(1) coefficients.
inline QuadraticValue solve_value_odes(const LinearSystem& sys, const QuadraticRewardSpec& reward,
                                       double beta, const TimeGrid& grid,
                                       int steps_per_unit = 2048) {
    const int d = sys.dim;
    const int np = d * d;
    const int total = np + d + 1;

    auto deriv = [&](const Vec& y, double t) {
        Eigen::Map<const Mat> p(y.data(), d, d);
        Eigen::Map<const Vec> gv(y.data() + np, d);
        const double kv = y[total - 1];
        Mat a = sys.A(t);
        Vec ut = sys.u(t);
        Vec dy(total);
        Eigen::Map<Mat>(dy.data(), d, d) =
            beta * p - reward.R2(t) - a.transpose() * p - p * a;
        Eigen::Map<Vec>(dy.data() + np, d) =
            beta * gv - reward.r1(t) - a.transpose() * gv - 2.0 * (p * ut);
        dy[total - 1] = beta * kv - reward.r0(t) - ut.dot(gv) - (sys.covariance(t) * p).trace();
        return dy;
    };

    QuadraticValue out;
    out.grid = grid;
    out.P.resize(grid.count + 1);
    out.g.resize(grid.count + 1);
    out.k.resize(grid.count + 1);

    Vec y(total);
    Eigen::Map<Mat>(y.data(), d, d) = reward.H2;
    Eigen::Map<Vec>(y.data() + np, d) = reward.h1;
    y[total - 1] = reward.h0;
    out.P[grid.count] = reward.H2;
    out.g[grid.count] = reward.h1;
    out.k[grid.count] = reward.h0;

    for (int n = grid.count - 1; n >= 0; --n) {
        y = rk4_integrate(deriv, y, grid.time(n + 1), grid.time(n),
                          ode_steps_for_span(grid.dt, steps_per_unit));
        Mat p = Eigen::Map<const Mat>(y.data(), d, d);
        out.P[n] = 0.5 * (p + p.transpose());
        out.g[n] = Eigen::Map<const Vec>(y.data() + np, d);
        out.k[n] = y[total - 1];
    }
    return out;
}

}  // namespace ctpe
