#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctpe/analytic_value.hpp"
#include "ctpe/linear_system.hpp"
#include "ctpe/model.hpp"

namespace ctpe {

/// A registered benchmark or calibration model. The dynamics families follow
/// the documented stand-in parameterizations below; every preset exposes the
/// feedback decomposition and, where the family permits, exact conditional
/// moments (via the closed-loop LinearSystem) and an analytic value surface.
struct Preset {
    std::string id;
    DiffusionModel model;
    std::optional<LinearSystem> linear;               // closed-loop dynamics
    std::optional<QuadraticRewardSpec> reward_spec;   // for the value ODEs
    std::function<double(const Vec&, double)> closed_form_value;  // (s, t) -> V
    double default_horizon = 1.0;
    double lip_coeff = 0.0;  // L_{mu,t} + L_{Sigma,t} = lip_coeff * zeta
    std::string note;

    bool has_analytic_value() const {
        return static_cast<bool>(closed_form_value) || (linear && reward_spec);
    }
    /// Combined time-Lipschitz scale of the coefficients at the preset's zeta.
    double lip_time() const { return lip_coeff * model.zeta; }
};

namespace detail {

inline Mat ring_laplacian(int d) {
    Mat lap = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        lap(i, i) = 2.0;
        lap(i, (i + 1) % d) = -1.0;
        lap(i, (i + d - 1) % d) = -1.0;
    }
    return lap;
}

inline Mat chain_matrix(int d, double diag, double off) {
    Mat a = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        a(i, i) = diag;
        if (i + 1 < d) {
            a(i, i + 1) = off;
            a(i + 1, i) = off;
        }
    }
    return a;
}

/// Shared builder for the linear-quadratic families:
///   ds = (A(t) s - K0 s) dt + sigma dW,  A(t) = A0 + zeta sin(2 pi t / T) A1,
///   r(s) = -s' Q s, h(s) = -s' QT s, start uniform on [-b, b]^d.
inline Preset make_lq(const std::string& id, const Mat& a0, const Mat& a1, const Mat& k0,
                      double sigma, const Mat& q, const Mat& qt, double beta, double box,
                      double zeta, double horizon) {
    const int d = static_cast<int>(a0.rows());
    Preset preset;
    preset.id = id;
    preset.default_horizon = horizon;

    DiffusionModel m;
    m.dim = d;
    m.noise_dim = d;
    m.discount = beta;
    m.zeta = zeta;
    m.coeff_period = horizon;
    m.preset_id = id;
    m.exact_moment_capable = true;
    m.drift_base = [a0, a1, zeta, horizon](const Vec& s, double t) {
        return Vec((a0 + zeta * std::sin(2.0 * M_PI * t / horizon) * a1) * s);
    };
    m.input_map = [d](const Vec&, double) { return Mat(Mat::Identity(d, d)); };
    m.feedback_gain = [k0](double) { return Mat(-k0); };
    m.diffusion_map = [sigma, d](const Vec&, double) { return Mat(sigma * Mat::Identity(d, d)); };
    m.reward = [q](const Vec& s, double) { return -s.dot(q * s); };
    m.terminal = [qt](const Vec& s) { return -s.dot(qt * s); };
    m.start = StartDistribution::box(Vec::Constant(d, -box), Vec::Constant(d, box));
    preset.model = m;

    LinearSystem sys;
    sys.dim = d;
    sys.noise_dim = d;
    sys.A = [a0, a1, k0, zeta, horizon](double t) {
        return Mat(a0 + zeta * std::sin(2.0 * M_PI * t / horizon) * a1 - k0);
    };
    sys.u = [d](double) { return Vec(Vec::Zero(d)); };
    sys.sigma = [sigma, d](double) { return Mat(sigma * Mat::Identity(d, d)); };
    preset.linear = sys;
    preset.reward_spec = QuadraticRewardSpec::quadratic(-q, -qt);

    // sup_t ||dA/dt|| * state radius; sigma is time-constant.
    preset.lip_coeff = (2.0 * M_PI / horizon) * a1.operatorNorm() * box * std::sqrt(double(d));
    return preset;
}

}  // namespace detail

inline std::vector<std::string> preset_ids() {
    return {"ou1", "ou10", "lqcal", "pendulum2", "regulator4", "netlq12", "netlq24", "oubd1"};
}

inline double default_zeta(const std::string& id) {
    if (id == "ou1" || id == "ou10" || id == "lqcal") return 1.0;
    if (id == "oubd1") return 0.0;
    return 0.5;
}

/// Builds a preset by id at the given nonstationarity scale (NaN selects the
/// preset default). The horizon doubles as the period of the time-varying
/// coefficients and the clamp range for controller time shifts.
inline Preset make_preset(const std::string& id,
                          double zeta = std::numeric_limits<double>::quiet_NaN(),
                          double horizon = 1.0) {
    if (std::isnan(zeta)) zeta = default_zeta(id);
    if (!(horizon > 0.0)) throw std::invalid_argument("make_preset: horizon must be positive");

    if (id == "ou1") {
        // theta(t)-reverting scalar OU: ds = theta(t) (mbar - s) dt + sigma dW,
        // theta(t) = theta0 (1 + zeta sin(2 pi t / T)), affine reward r = s, h = s.
        const double theta0 = 1.0, mbar = 0.5, sigma = 0.3, beta = 1.0;
        Preset preset;
        preset.id = id;
        preset.default_horizon = horizon;
        auto theta = [theta0, zeta, horizon](double t) {
            return theta0 * (1.0 + zeta * std::sin(2.0 * M_PI * t / horizon));
        };
        DiffusionModel m;
        m.dim = 1;
        m.noise_dim = 1;
        m.discount = beta;
        m.zeta = zeta;
        m.coeff_period = horizon;
        m.preset_id = id;
        m.exact_moment_capable = true;
        m.drift_base = [theta, mbar](const Vec&, double t) {
            return Vec(Vec::Constant(1, theta(t) * mbar));
        };
        m.input_map = [](const Vec&, double) { return Mat(Mat::Identity(1, 1)); };
        m.feedback_gain = [theta](double t) { return Mat(Mat::Constant(1, 1, -theta(t))); };
        m.diffusion_map = [sigma](const Vec&, double) { return Mat(Mat::Constant(1, 1, sigma)); };
        m.reward = [](const Vec& s, double) { return s[0]; };
        m.terminal = [](const Vec& s) { return s[0]; };
        m.start = StartDistribution::box(Vec::Constant(1, 0.5), Vec::Constant(1, 1.5));
        preset.model = m;

        LinearSystem sys;
        sys.dim = 1;
        sys.noise_dim = 1;
        sys.A = [theta](double t) { return Mat(Mat::Constant(1, 1, -theta(t))); };
        sys.u = [theta, mbar](double t) { return Vec(Vec::Constant(1, theta(t) * mbar)); };
        sys.sigma = [sigma](double) { return Mat(Mat::Constant(1, 1, sigma)); };
        preset.linear = sys;
        preset.reward_spec =
            QuadraticRewardSpec::affine(Vec::Ones(1), 0.0, Vec::Ones(1), 0.0);
        // |d mu / dt| = theta0 zeta (2 pi / T) |mbar - s|, |mbar - s| <= 1 on the box.
        preset.lip_coeff = theta0 * 2.0 * M_PI / horizon;
        return preset;
    }

    if (id == "ou10") {
        // 10-dim chain-coupled OU with a common time-varying rate factor.
        const int d = 10;
        const double theta0 = 1.0, sigma = 0.25, beta = 0.5;
        Mat a0 = -theta0 * (Mat::Identity(d, d) + detail::chain_matrix(d, 0.0, 0.25));
        Preset preset;
        preset.id = id;
        preset.default_horizon = horizon;
        auto rate = [zeta, horizon](double t) {
            return 1.0 + zeta * std::sin(2.0 * M_PI * t / horizon);
        };
        DiffusionModel m;
        m.dim = d;
        m.noise_dim = d;
        m.discount = beta;
        m.zeta = zeta;
        m.coeff_period = horizon;
        m.preset_id = id;
        m.exact_moment_capable = true;
        m.drift_base = [d](const Vec&, double) { return Vec(Vec::Zero(d)); };
        m.input_map = [d](const Vec&, double) { return Mat(Mat::Identity(d, d)); };
        m.feedback_gain = [a0, rate](double t) { return Mat(rate(t) * a0); };
        m.diffusion_map = [sigma, d](const Vec&, double) {
            return Mat(sigma * Mat::Identity(d, d));
        };
        Vec q1 = Vec::Constant(d, 1.0 / std::sqrt(double(d)));
        m.reward = [q1](const Vec& s, double) { return q1.dot(s); };
        m.terminal = [q1](const Vec& s) { return q1.dot(s); };
        m.start = StartDistribution::box(Vec::Constant(d, -1.0), Vec::Constant(d, 1.0));
        preset.model = m;

        LinearSystem sys;
        sys.dim = d;
        sys.noise_dim = d;
        sys.A = [a0, rate](double t) { return Mat(rate(t) * a0); };
        sys.u = [d](double) { return Vec(Vec::Zero(d)); };
        sys.sigma = [sigma, d](double) { return Mat(sigma * Mat::Identity(d, d)); };
        preset.linear = sys;
        preset.reward_spec = QuadraticRewardSpec::affine(q1, 0.0, q1, 0.0);
        preset.lip_coeff = (2.0 * M_PI / horizon) * a0.operatorNorm() * std::sqrt(double(d));
        return preset;
    }

    if (id == "lqcal") {
        Mat a0(2, 2), a1(2, 2);
        a0 << 0.0, 1.0, -1.0, -0.6;
        a1 << 0.0, 0.0, -0.4, -0.2;
        Mat k0 = 0.35 * Mat::Identity(2, 2);
        Mat q = 0.5 * Mat::Identity(2, 2);
        return detail::make_lq(id, a0, a1, k0, 0.2, q, q, 0.3, 1.0, zeta, horizon);
    }

    if (id == "regulator4") {
        const int d = 4;
        Mat a0 = detail::chain_matrix(d, -0.7, 0.35);
        Mat a1 = 0.4 * Mat::Identity(d, d);
        Mat k0 = 0.5 * Mat::Identity(d, d);
        Mat q = 0.5 * Mat::Identity(d, d);
        return detail::make_lq(id, a0, a1, k0, 0.12, q, q, 0.2, 1.0, zeta, horizon);
    }

    if (id == "netlq12" || id == "netlq24") {
        const int d = (id == "netlq12") ? 12 : 24;
        Mat a0 = -(0.25 * Mat::Identity(d, d) + 0.35 * detail::ring_laplacian(d));
        Mat a1 = 0.3 * Mat::Identity(d, d);
        Mat k0 = 0.25 * Mat::Identity(d, d);
        Mat q = 0.3 * Mat::Identity(d, d);
        return detail::make_lq(id, a0, a1, k0, 0.1, q, q, 0.2, 1.0, zeta, horizon);
    }

    if (id == "pendulum2") {
        // ds = (s2, -sin s1 - 0.2 s2 + u) dt + sigma dW, u = -K(t) s,
        // K(t) = K0 (1 + zeta sin(2 pi t / T)), K0 = (1.2, 0.7).
        const double beta = 0.2;
        Eigen::RowVector2d k0(1.2, 0.7);
        Vec sig(2);
        sig << 0.05, 0.25;
        Mat q = Mat::Zero(2, 2);
        q(0, 0) = 1.0;
        q(1, 1) = 0.3;
        Mat qt = 0.5 * q;

        Preset preset;
        preset.id = id;
        preset.default_horizon = horizon;
        DiffusionModel m;
        m.dim = 2;
        m.noise_dim = 2;
        m.discount = beta;
        m.zeta = zeta;
        m.coeff_period = horizon;
        m.preset_id = id;
        m.drift_base = [](const Vec& s, double) {
            Vec f(2);
            f << s[1], -std::sin(s[0]) - 0.2 * s[1];
            return f;
        };
        m.input_map = [](const Vec&, double) {
            Mat g(2, 1);
            g << 0.0, 1.0;
            return g;
        };
        m.feedback_gain = [k0, zeta, horizon](double t) {
            return Mat(-(1.0 + zeta * std::sin(2.0 * M_PI * t / horizon)) * k0);
        };
        m.diffusion_map = [sig](const Vec&, double) { return Mat(sig.asDiagonal()); };
        m.reward = [q](const Vec& s, double) { return -s.dot(q * s); };
        m.terminal = [qt](const Vec& s) { return -s.dot(qt * s); };
        m.start = StartDistribution::box(Vec::Constant(2, -0.9), Vec::Constant(2, 0.9));
        preset.model = m;
        preset.lip_coeff = (2.0 * M_PI / horizon) * k0.norm() * 0.9 * std::sqrt(2.0);
        return preset;
    }

    if (id == "oubd1") {
        // Zero-reversion member of the OU family with a bounded trigonometric
        // reward; every norm entering the first-order error bound is explicit:
        //   r(s,t) = cos(k s + w t):  ||r|| = 1, ||dr/dt|| = w,
        //   ||L r|| = sigma^2 k^2 / 2, and h(s) = cos(s).
        const double sigma = 0.5, beta = 0.5, k = 2.0, w = M_PI;
        Preset preset;
        preset.id = id;
        preset.default_horizon = horizon;
        DiffusionModel m;
        m.dim = 1;
        m.noise_dim = 1;
        m.discount = beta;
        m.zeta = 0.0;
        m.coeff_period = horizon;
        m.preset_id = id;
        m.exact_moment_capable = true;
        m.drift_base = [](const Vec&, double) { return Vec(Vec::Zero(1)); };
        m.input_map = [](const Vec&, double) { return Mat(Mat::Identity(1, 1)); };
        m.feedback_gain = [](double) { return Mat(Mat::Zero(1, 1)); };
        m.diffusion_map = [sigma](const Vec&, double) { return Mat(Mat::Constant(1, 1, sigma)); };
        m.reward = [k, w](const Vec& s, double t) { return std::cos(k * s[0] + w * t); };
        m.terminal = [](const Vec& s) { return std::cos(s[0]); };
        m.start = StartDistribution::box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0));
        preset.model = m;

        LinearSystem sys;
        sys.dim = 1;
        sys.noise_dim = 1;
        sys.A = [](double) { return Mat(Mat::Zero(1, 1)); };
        sys.u = [](double) { return Vec(Vec::Zero(1)); };
        sys.sigma = [sigma](double) { return Mat(Mat::Constant(1, 1, sigma)); };
        preset.linear = sys;

        // E[cos(a X + b)] = cos(a m + b) exp(-a^2 v / 2) for X ~ N(m, v) makes
        // the value closed-form.
        preset.closed_form_value = [sigma, beta, k, w, horizon](const Vec& s, double t) {
            const double span = horizon - t;
            const std::complex<double> iw_l(-beta - 0.5 * k * k * sigma * sigma, w);
            const std::complex<double> phase =
                std::exp(std::complex<double>(0.0, k * s[0] + w * t));
            std::complex<double> integral;
            if (std::abs(iw_l) < 1e-14) {
                integral = phase * span;
            } else {
                integral = phase * (std::exp(iw_l * span) - 1.0) / iw_l;
            }
            const double terminal =
                std::exp(-beta * span) * std::exp(-0.5 * sigma * sigma * span) * std::cos(s[0]);
            return integral.real() + terminal;
        };
        preset.lip_coeff = 0.0;
        return preset;
    }

    throw std::invalid_argument("unknown preset id: " + id);
}

}  // namespace ctpe
