#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctpe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class FeatureFamily { constant, linear, quadratic, reduced, richer, custom };

inline std::string to_string(FeatureFamily f) {
    switch (f) {
        case FeatureFamily::constant: return "constant";
        case FeatureFamily::linear: return "linear";
        case FeatureFamily::quadratic: return "quadratic";
        case FeatureFamily::reduced: return "reduced";
        case FeatureFamily::richer: return "richer";
        case FeatureFamily::custom: return "custom";
    }
    return "?";
}

inline FeatureFamily feature_family_from_string(const std::string& name) {
    if (name == "constant") return FeatureFamily::constant;
    if (name == "linear") return FeatureFamily::linear;
    if (name == "quadratic") return FeatureFamily::quadratic;
    if (name == "reduced") return FeatureFamily::reduced;
    if (name == "richer") return FeatureFamily::richer;
    throw std::invalid_argument("unknown feature family: " + name);
}

/// Linear feature class phi: R^d -> R^p. Every family starts with the
/// constant 1. Coordinate layouts:
///   constant:  [1]
///   linear:    [1, s]
///   quadratic: [1, s, s_a s_b for a <= b (row-major upper triangle)]
///   reduced:   [1, s, s_1^2 .. s_d^2]
///   richer:    quadratic layout followed by s_1^3 .. s_d^3
struct FeatureMap {
    FeatureFamily family = FeatureFamily::linear;
    int dim = 1;  // d
    int p = 2;
    std::function<void(const Vec&, Vec&)> fill;

    Vec eval(const Vec& s) const {
        if (s.size() != dim) {
            throw std::invalid_argument("eval_features: state dimension mismatch (got " +
                                        std::to_string(s.size()) + ", expected " +
                                        std::to_string(dim) + ")");
        }
        Vec out(p);
        fill(s, out);
        return out;
    }
};

inline FeatureMap make_features(FeatureFamily family, int d) {
    if (d < 1) throw std::invalid_argument("make_features: d must be >= 1");
    FeatureMap map;
    map.family = family;
    map.dim = d;
    switch (family) {
        case FeatureFamily::constant:
            map.p = 1;
            map.fill = [](const Vec&, Vec& out) { out[0] = 1.0; };
            break;
        case FeatureFamily::linear:
            map.p = 1 + d;
            map.fill = [d](const Vec& s, Vec& out) {
                out[0] = 1.0;
                out.segment(1, d) = s;
            };
            break;
        case FeatureFamily::quadratic:
            map.p = 1 + d + d * (d + 1) / 2;
            map.fill = [d](const Vec& s, Vec& out) {
                out[0] = 1.0;
                out.segment(1, d) = s;
                int idx = 1 + d;
                for (int a = 0; a < d; ++a)
                    for (int b = a; b < d; ++b) out[idx++] = s[a] * s[b];
            };
            break;
        case FeatureFamily::reduced:
            map.p = 1 + 2 * d;
            map.fill = [d](const Vec& s, Vec& out) {
                out[0] = 1.0;
                out.segment(1, d) = s;
                out.segment(1 + d, d) = s.cwiseProduct(s);
            };
            break;
        case FeatureFamily::richer:
            map.p = 1 + d + d * (d + 1) / 2 + d;
            map.fill = [d](const Vec& s, Vec& out) {
                out[0] = 1.0;
                out.segment(1, d) = s;
                int idx = 1 + d;
                for (int a = 0; a < d; ++a)
                    for (int b = a; b < d; ++b) out[idx++] = s[a] * s[b];
                for (int a = 0; a < d; ++a) out[idx++] = s[a] * s[a] * s[a];
            };
            break;
        case FeatureFamily::custom:
            throw std::invalid_argument("make_features: custom maps are built via linearly_transformed");
    }
    return map;
}

inline FeatureMap make_features(const std::string& family, int d) {
    return make_features(feature_family_from_string(family), d);
}

/// phi'(s) = R * phi(s) for an invertible p x p matrix R. Used to probe
/// span invariance of the fits.
inline FeatureMap linearly_transformed(const FeatureMap& base, const Mat& transform) {
    if (transform.rows() != base.p || transform.cols() != base.p) {
        throw std::invalid_argument("linearly_transformed: transform must be p x p");
    }
    FeatureMap map;
    map.family = FeatureFamily::custom;
    map.dim = base.dim;
    map.p = base.p;
    map.fill = [base, transform](const Vec& s, Vec& out) {
        Vec raw(base.p);
        base.fill(s, raw);
        out = transform * raw;
    };
    return map;
}

/// Sample average of phi(s) phi(s)^T; symmetric PSD by construction.
inline Mat gram(const FeatureMap& map, const std::vector<Vec>& states) {
    if (states.empty()) throw std::invalid_argument("gram: empty state list");
    Mat acc = Mat::Zero(map.p, map.p);
    Vec phi(map.p);
    for (const Vec& s : states) {
        if (s.size() != map.dim) throw std::invalid_argument("gram: state dimension mismatch");
        map.fill(s, phi);
        acc.noalias() += phi * phi.transpose();
    }
    acc /= static_cast<double>(states.size());
    return 0.5 * (acc + acc.transpose());
}

/// B = max ||phi(s)||_2 over a reference sample; a diagnostic scale, not an
/// enforced bound.
inline double estimate_bound(const FeatureMap& map, const std::vector<Vec>& states) {
    double best = 0.0;
    Vec phi(map.p);
    for (const Vec& s : states) {
        map.fill(s, phi);
        best = std::max(best, phi.norm());
    }
    return best;
}

}  // namespace ctpe
