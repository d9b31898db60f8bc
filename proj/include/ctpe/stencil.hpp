#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ctpe {

inline double ipow(double base, int exp) {
    double out = 1.0;
    for (int k = 0; k < exp; ++k) out *= base;
    return out;  // convention: anything^0 == 1, including 0^0
}

inline long double ipow_ld(long double base, int exp) {
    long double out = 1.0L;
    for (int k = 0; k < exp; ++k) out *= base;
    return out;
}

/// One-sided multistep coefficients a_0..a_i over forward nodes {0,..,i},
/// chosen so that sum_j a_j j^k is 1 for k=1 and 0 for k in {0,2,..,i}.
/// The solve and the moment evaluation run in extended precision: at order 8
/// the k=i moment amplifies single double ulps by ~1e7, which would otherwise
/// swamp the 1e-10 moment tolerance.
struct Stencil {
    int order = 1;
    Eigen::VectorXd coeffs;                 // a_0..a_i
    std::vector<long double> coeffs_ext;    // extended-precision master copy

    /// sum_j a_j j^k with 0^0 = 1.
    double moment(int k) const {
        if (k < 0) throw std::invalid_argument("stencil moment: k must be >= 0");
        long double acc = 0.0L;
        for (int j = 0; j <= order; ++j) acc += coeffs_ext[j] * ipow_ld(j, k);
        return static_cast<double>(acc);
    }

    /// sum_j a_j j^(i+1); the surviving coefficient of the first uncancelled
    /// expansion term.
    double leading_moment() const { return moment(order + 1); }

    /// S_i = sum_j |a_j|.
    double abs_sum() const { return coeffs.cwiseAbs().sum(); }
};

/// Solves the (i+1)x(i+1) Vandermonde moment system for the order-i stencil
/// by LU with partial pivoting plus iterative refinement. Orders above 8 are
/// rejected: the system conditioning degrades quickly and only small orders
/// are validated.
inline Stencil solve_stencil(int order) {
    if (order < 1 || order > 8) {
        throw std::invalid_argument("solve_stencil: order must be in [1, 8]");
    }
    using MatLd = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VecLd = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const int n = order + 1;
    MatLd vand(n, n);
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) vand(k, j) = ipow_ld(j, k);
    }
    VecLd rhs = VecLd::Zero(n);
    rhs[1] = 1.0L;

    Eigen::PartialPivLU<MatLd> lu(vand);
    VecLd a = lu.solve(rhs);
    for (int pass = 0; pass < 3; ++pass) a += lu.solve(rhs - vand * a);

    const long double residual = (vand * a - rhs).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-10L)) {
        throw std::runtime_error("solve_stencil: moment residual too large at order " +
                                 std::to_string(order));
    }
    Stencil st;
    st.order = order;
    st.coeffs.resize(n);
    st.coeffs_ext.resize(n);
    for (int j = 0; j < n; ++j) {
        st.coeffs_ext[j] = a[j];
        st.coeffs[j] = static_cast<double>(a[j]);
    }
    return st;
}

}  // namespace ctpe
