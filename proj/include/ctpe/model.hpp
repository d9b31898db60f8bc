#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "ctpe/features.hpp"  // Vec/Mat aliases
#include "ctpe/rng.hpp"

namespace ctpe {

/// Episode start law: i.i.d. uniform on a box, or Gaussian.
struct StartDistribution {
    enum class Kind { uniform_box, gaussian };
    Kind kind = Kind::uniform_box;
    Vec lo, hi;        // box bounds
    Vec mean;          // gaussian
    Mat cov_chol;      // lower Cholesky factor of the gaussian covariance

    static StartDistribution box(const Vec& lo, const Vec& hi) {
        if (lo.size() != hi.size()) throw std::invalid_argument("start box: size mismatch");
        StartDistribution d;
        d.kind = Kind::uniform_box;
        d.lo = lo;
        d.hi = hi;
        return d;
    }

    static StartDistribution gaussian(const Vec& mean, const Mat& cov) {
        StartDistribution d;
        d.kind = Kind::gaussian;
        d.mean = mean;
        Eigen::LLT<Mat> llt(cov);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument("gaussian start: covariance not positive definite");
        }
        d.cov_chol = llt.matrixL();
        return d;
    }

    int dim() const { return kind == Kind::uniform_box ? static_cast<int>(lo.size())
                                                       : static_cast<int>(mean.size()); }

    Vec sample(RngStream& rng) const {
        if (kind == Kind::uniform_box) {
            Vec s(lo.size());
            for (int i = 0; i < s.size(); ++i) s[i] = rng.uniform(lo[i], hi[i]);
            return s;
        }
        Vec z(mean.size());
        for (int i = 0; i < z.size(); ++i) z[i] = rng.gauss();
        return mean + cov_chol * z;
    }

    /// First two moments (mean, covariance); needed by the population-side
    /// moment machinery.
    Vec moment_mean() const { return kind == Kind::uniform_box ? Vec(0.5 * (lo + hi)) : mean; }
    Mat moment_cov() const {
        if (kind == Kind::uniform_box) {
            Vec w = hi - lo;
            return (w.cwiseProduct(w) / 12.0).asDiagonal();
        }
        return cov_chol * cov_chol.transpose();
    }
};

/// Controller stress knobs. Identity magnitudes (1 for the multiplicative
/// kinds, 0 for the shift) leave the model unchanged.
struct ControllerPerturbation {
    enum class Kind { gain_shift, covariance_inflation, time_shift };
    Kind kind = Kind::gain_shift;
    double magnitude = 1.0;
};

inline std::string to_string(ControllerPerturbation::Kind k) {
    switch (k) {
        case ControllerPerturbation::Kind::gain_shift: return "gain_shift";
        case ControllerPerturbation::Kind::covariance_inflation: return "covariance_inflation";
        case ControllerPerturbation::Kind::time_shift: return "time_shift";
    }
    return "?";
}

/// Closed-loop diffusion ds = mu(s,t) dt + sigma(s,t) dW with evaluation
/// target (reward r, terminal h, discount beta). The drift always exposes the
/// feedback decomposition mu(s,t) = f(s,t) + g(s,t) K(t) s, which is what the
/// controller perturbations act on. zeta scales every explicit time
/// derivative of the coefficients; zeta = 0 freezes them.
struct DiffusionModel {
    int dim = 1;
    int noise_dim = 1;
    double discount = 0.0;  // beta >= 0
    double zeta = 0.0;
    double coeff_period = 1.0;  // T used inside time-varying coefficients

    std::function<Vec(const Vec&, double)> drift_base;  // f(s,t)
    std::function<Mat(const Vec&, double)> input_map;   // g(s,t), dim x u
    std::function<Mat(double)> feedback_gain;           // K(t), u x dim
    std::function<Mat(const Vec&, double)> diffusion_map;  // sigma(s,t), dim x noise_dim
    std::function<double(const Vec&, double)> reward;
    std::function<double(const Vec&)> terminal;
    StartDistribution start;
    bool exact_moment_capable = false;
    std::string preset_id;

    Vec drift(const Vec& s, double t) const {
        return drift_base(s, t) + input_map(s, t) * (feedback_gain(t) * s);
    }
    Mat sigma(const Vec& s, double t) const { return diffusion_map(s, t); }
    Mat covariance(const Vec& s, double t) const {
        Mat sg = diffusion_map(s, t);
        return sg * sg.transpose();
    }

    /// Model without a feedback structure: the whole drift sits in f.
    static DiffusionModel plain(int dim, int noise_dim,
                                std::function<Vec(const Vec&, double)> drift,
                                std::function<Mat(const Vec&, double)> sigma,
                                std::function<double(const Vec&, double)> reward,
                                std::function<double(const Vec&)> terminal, double beta,
                                StartDistribution start) {
        DiffusionModel m;
        m.dim = dim;
        m.noise_dim = noise_dim;
        m.discount = beta;
        m.drift_base = std::move(drift);
        m.input_map = [dim](const Vec&, double) { return Mat::Zero(dim, 1); };
        m.feedback_gain = [dim](double) { return Mat::Zero(1, dim); };
        m.diffusion_map = std::move(sigma);
        m.reward = std::move(reward);
        m.terminal = std::move(terminal);
        m.start = std::move(start);
        return m;
    }
};

/// Applies a controller perturbation. The evaluation target (r, h, beta) is
/// left untouched; only the logged dynamics change. gain_shift scales K(t),
/// covariance_inflation scales sigma by sqrt(c), time_shift replaces K(t) by
/// K(t + tau) clamped to [0, coeff_period].
inline DiffusionModel perturb_controller(const DiffusionModel& base,
                                         const ControllerPerturbation& p) {
    DiffusionModel out = base;
    // Perturbed dynamics lose the closed-form moment shortcuts; everything
    // downstream falls back to simulation.
    out.exact_moment_capable = false;
    switch (p.kind) {
        case ControllerPerturbation::Kind::gain_shift: {
            const double kappa = p.magnitude;
            auto gain = base.feedback_gain;
            out.feedback_gain = [gain, kappa](double t) { return Mat(kappa * gain(t)); };
            break;
        }
        case ControllerPerturbation::Kind::covariance_inflation: {
            if (p.magnitude < 0.0) {
                throw std::invalid_argument("covariance_inflation: magnitude must be >= 0");
            }
            const double scale = std::sqrt(p.magnitude);
            auto sigma = base.diffusion_map;
            out.diffusion_map = [sigma, scale](const Vec& s, double t) {
                return Mat(scale * sigma(s, t));
            };
            break;
        }
        case ControllerPerturbation::Kind::time_shift: {
            const double tau = p.magnitude;
            const double period = base.coeff_period;
            auto gain = base.feedback_gain;
            out.feedback_gain = [gain, tau, period](double t) {
                double shifted = std::min(std::max(t + tau, 0.0), period);
                return gain(shifted);
            };
            break;
        }
    }
    return out;
}

}  // namespace ctpe
