#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctpe/moments.hpp"

namespace ctpe {

/// Stability constants of the multistep backward recursion, computed from the
/// fitted moment blocks:
///   gamma_{n,j} = sqrt(Lambda_G / lambda_G) * (|a_j| / dt) * ||M_n^{-1} G_n||
///   C_n         = companion matrix of the gamma row
///   Phi(n, k)   = C_n ... C_{n+k-1}, Phi(n, 0) = I
///   C_ms        = max over n of { sum_k ||Phi(n,k)||, tail propagator norm }
///   rho         = max_n ||C_n||, with C_ms <= 1/(1 - rho) whenever rho < 1.
/// c0 = sqrt(Lambda_G) / m_min; c0_sqrt_m = sqrt(Lambda_G / m_min) is the
/// alternate reading, reported alongside.
struct RecursionDiagnostics {
    double lambda_max_gram = 0.0;  // Lambda_G
    double lambda_min_gram = 0.0;  // lambda_G
    double min_sigma_min = 0.0;    // m_min over the system matrices
    double c0 = 0.0;
    double c0_sqrt_m = 0.0;
    double rho = 0.0;
    double c_ms = 0.0;
    bool geometric = false;  // rho < 1
    Mat gammas;                        // (count) x order
    std::vector<double> sigma_min;     // per slice
    std::vector<double> companion_norm;
};

inline RecursionDiagnostics recursion_constants(const std::vector<MomentBlocks>& blocks,
                                                const Stencil& st, double dt) {
    if (blocks.empty()) throw std::invalid_argument("recursion_constants: no blocks");
    const int i = st.order;
    const int count = static_cast<int>(blocks.size());
    RecursionDiagnostics diag;
    diag.gammas = Mat::Zero(count, i);
    diag.sigma_min.resize(count);
    diag.companion_norm.resize(count);

    double lam_max = -std::numeric_limits<double>::infinity();
    double lam_min = std::numeric_limits<double>::infinity();
    double m_min = std::numeric_limits<double>::infinity();
    std::vector<double> inv_gram_norm(count);
    for (int idx = 0; idx < count; ++idx) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(blocks[idx].gram);
        lam_max = std::max(lam_max, eig.eigenvalues().maxCoeff());
        lam_min = std::min(lam_min, eig.eigenvalues().minCoeff());

        Eigen::BDCSVD<Mat> svd(blocks[idx].system, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smin = svd.singularValues().minCoeff();
        diag.sigma_min[idx] = smin;
        m_min = std::min(m_min, smin);
        if (!(smin > 0.0)) {
            throw std::runtime_error("recursion_constants: singular system matrix");
        }
        Mat k = svd.solve(blocks[idx].gram);  // M_n^{-1} G_n
        inv_gram_norm[idx] = k.operatorNorm();
    }
    diag.lambda_max_gram = lam_max;
    diag.lambda_min_gram = lam_min;
    diag.min_sigma_min = m_min;
    diag.c0 = std::sqrt(lam_max) / m_min;
    diag.c0_sqrt_m = std::sqrt(lam_max / m_min);

    const double cond_gram = std::sqrt(lam_max / std::max(lam_min, 1e-300));
    std::vector<Mat> companions(count);
    double rho = 0.0;
    for (int idx = 0; idx < count; ++idx) {
        Mat comp = Mat::Zero(i, i);
        for (int j = 1; j <= i; ++j) {
            const double gamma =
                cond_gram * std::abs(st.coeffs[j]) / dt * inv_gram_norm[idx];
            diag.gammas(idx, j - 1) = gamma;
            comp(0, j - 1) = gamma;
        }
        for (int r = 1; r < i; ++r) comp(r, r - 1) = 1.0;
        const double norm = (i == 1) ? std::abs(comp(0, 0)) : comp.operatorNorm();
        diag.companion_norm[idx] = norm;
        rho = std::max(rho, norm);
        companions[idx] = std::move(comp);
    }
    diag.rho = rho;
    diag.geometric = rho < 1.0;

    // C_ms: running products Phi(n, k) = C_n ... C_{n+k-1} plus the full tail
    // propagator Phi(n, count - n).
    double c_ms = 0.0;
    for (int n = 0; n < count; ++n) {
        Mat phi = Mat::Identity(i, i);
        double sum = 1.0;  // ||Phi(n, 0)|| = 1
        for (int k = 1; k <= count - 1 - n; ++k) {
            phi = phi * companions[n + k - 1];
            sum += (i == 1) ? std::abs(phi(0, 0)) : phi.operatorNorm();
        }
        Mat tail = phi * companions[count - 1];  // Phi(n, count - n)
        const double tail_norm = (i == 1) ? std::abs(tail(0, 0)) : tail.operatorNorm();
        c_ms = std::max(c_ms, std::max(sum, tail_norm));
    }
    diag.c_ms = c_ms;
    return diag;
}

}  // namespace ctpe
