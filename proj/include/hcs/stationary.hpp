#pragma once

#include "hcs/quantize.hpp"

namespace hcs {

// ======================================================================
// The critical manifold of the diagonal oscillatory phase for the frame
// alpha = e1 + i (cos(theta0) e2 + sin(theta0) e4) at E = -1/2.
// ======================================================================

struct CriticalPoint {
    double beta = 0.0;
    double theta0 = 0.0;
    Vec3 x{};
    Vec3 xi{};
    Vec3 v{};  // identically zero on the manifold
};

inline Vec3 critical_x(double beta, double theta0) {
    return {std::sin(beta) - std::sin(theta0), -std::cos(theta0) * std::cos(beta), 0.0};
}

inline Vec3 critical_xi(double beta, double theta0) {
    const double d = 1.0 - std::sin(theta0) * std::sin(beta);
    return {std::cos(beta) / d, std::sin(beta) * std::cos(theta0) / d, 0.0};
}

/// Unit normal of the configuration-space projection within the orbit plane.
inline Vec3 critical_normal(double beta, double theta0) {
    const double sb = std::sin(beta), st = std::sin(theta0);
    const double rho = std::sqrt(1.0 - sb * sb * st * st);
    return {-sb * std::cos(theta0) / rho, std::cos(beta) / rho, 0.0};
}

inline CriticalPoint critical_point(double beta, double theta0) {
    if (1.0 - std::sin(theta0) * std::sin(beta) <= 1e-12)
        throw precondition_error("critical_point: degenerate at the collision endpoint");
    return {beta, theta0, critical_x(beta, theta0), critical_xi(beta, theta0), {0, 0, 0}};
}

/// Volume factor of the tubular chart x = x(beta) + t n_beta + s e3.
inline double tubular_chart_volume(double beta, double theta0, double t) {
    const double sb = std::sin(beta), st = std::sin(theta0);
    return std::abs(std::sqrt(1.0 - sb * sb * st * st) + t * std::cos(theta0));
}

// ======================================================================
// Stationarity residuals
// ======================================================================

struct StationarityReport {
    Vec3 grad_x{}, grad_xi{}, grad_v{};
    double max_grad = 0.0;
    double im_p = 0.0;
};

/// Finite-difference gradient of the complex phase P at (x, xi, v) for the
/// diagonal pair (alpha, alpha); the log branch is pinned at the point.
inline StationarityReport check_stationarity(const Vec3& x, const Vec3& xi, const Vec3& v,
                                             const AlphaFrame& frame, double h = 1e-5) {
    const Vec4 up0 = stereographic_inv(xi + 0.5 * v);
    const Vec4 um0 = stereographic_inv(xi - 0.5 * v);
    const double ref1 = std::arg(frame_pairing(frame, up0));
    const double ref2 = std::arg(cplx(dot(frame.re, um0), -dot(frame.im, um0)));
    auto P = [&](const Vec3& xx, const Vec3& xxi, const Vec3& vv) {
        return oscillatory_phase_ref(frame, frame, xx, xxi, vv, ref1, ref2);
    };
    StationarityReport rep;
    rep.im_p = P(x, xi, v).imag();
    for (int j = 0; j < 3; ++j) {
        Vec3 e{0, 0, 0};
        e[j] = h;
        rep.grad_x[j] = std::abs(P(x + e, xi, v) - P(x - e, xi, v)) / (2 * h);
        rep.grad_xi[j] = std::abs(P(x, xi + e, v) - P(x, xi - e, v)) / (2 * h);
        rep.grad_v[j] = std::abs(P(x, xi, v + e) - P(x, xi, v - e)) / (2 * h);
        rep.max_grad = std::max({rep.max_grad, rep.grad_x[j], rep.grad_xi[j], rep.grad_v[j]});
    }
    return rep;
}

inline StationarityReport check_stationarity(const CriticalPoint& p, const AlphaFrame& frame,
                                             double h = 1e-5) {
    return check_stationarity(p.x, p.xi, p.v, frame, h);
}

// ======================================================================
// Hessian of the reduced phase
// ======================================================================

/// sqrt|det Hess| in closed form: 2 (1 - sin b sin t0)^3 sqrt(1 - sin^2 b sin^2 t0).
/// At sin(theta0) = 1 this continuously reduces to the collision-case value
/// 2 (1 - sin b)^3 |cos b|.
inline double hessian_det_closed(double beta, double theta0) {
    const double sb = std::sin(beta), st = std::sin(theta0);
    const double d = 1.0 - sb * st;
    return 2.0 * d * d * d * std::sqrt(std::max(0.0, 1.0 - sb * sb * st * st));
}

struct HessianNumeric {
    std::array<std::array<cplx, 8>, 8> H{};
    cplx det{};
    double sqrt_abs_det = 0.0;
    bool ill_conditioned = false;
};

namespace detail {

/// Central second differences of a complex function of 8 chart coordinates.
template <class F>
HessianNumeric hessian_fd(F&& P, double h) {
    HessianNumeric r;
    std::array<double, 8> z{};
    const cplx P0 = P(z);
    for (int i = 0; i < 8; ++i) {
        auto zp = z, zm = z;
        zp[i] += h;
        zm[i] -= h;
        r.H[i][i] = (P(zp) - 2.0 * P0 + P(zm)) / (h * h);
        for (int j = i + 1; j < 8; ++j) {
            auto zpp = z, zpm = z, zmp = z, zmm = z;
            zpp[i] += h; zpp[j] += h;
            zpm[i] += h; zpm[j] -= h;
            zmp[i] -= h; zmp[j] += h;
            zmm[i] -= h; zmm[j] -= h;
            r.H[i][j] = r.H[j][i] = (P(zpp) - P(zpm) - P(zmp) + P(zmm)) / (4.0 * h * h);
        }
    }
    r.det = det_complex<8>(r.H);
    r.sqrt_abs_det = std::sqrt(std::abs(r.det));
    r.ill_conditioned = std::abs(r.det) < 1e-10;
    return r;
}

}  // namespace detail

/// Finite-difference Hessian of the reduced phase at the critical point.
/// Generic orbits use the chart x = x(beta) + t n_beta + s e3 with ambient
/// (xi, v); collision orbits (sin theta0 = 1) use the phase-space chart with
/// the normalized in-plane transverse direction:
///   x  = x(b) + t1 e2 + t2 e3 + s1 m_b,   m_b  = c_b (1/(sin b - 1), 0, 0)
///   xi = xi(b) + s1 m'_b + s2 e2 + s3 e3, m'_b = c_b (cos b, 0, 0)
///   v  = s1' m'_b + s2' e2 + s3' e3.
inline HessianNumeric hessian_numeric(double beta, double theta0, double h = 1e-4) {
    const AlphaFrame frame = standard_frame(theta0);
    const double st = std::sin(theta0);
    const bool collision = st >= 1.0 - 1e-9;
    if (st <= -1.0 + 1e-9)
        throw precondition_error("hessian_numeric: use the time-reversed frame for theta0 = 3 pi/2");

    const double ref1 = beta, ref2 = -beta;
    const Vec3 x0 = critical_x(beta, theta0);
    const Vec3 xi0 = critical_xi(beta, theta0);

    if (!collision) {
        const Vec3 nb = critical_normal(beta, theta0);
        auto P = [&](const std::array<double, 8>& z) {
            const Vec3 x = x0 + z[0] * nb + Vec3{0, 0, z[1]};
            const Vec3 xi = xi0 + Vec3{z[2], z[3], z[4]};
            const Vec3 v{z[5], z[6], z[7]};
            return oscillatory_phase_ref(frame, frame, x, xi, v, ref1, ref2);
        };
        return detail::hessian_fd(P, h);
    }

    const double sb = std::sin(beta), cb = std::cos(beta);
    if (1.0 - sb <= 1e-9)
        throw precondition_error("hessian_numeric: collision endpoint");
    const double cbeta = 1.0 / std::sqrt(cb * cb + 1.0 / ((1.0 - sb) * (1.0 - sb)));
    const Vec3 mb{cbeta / (sb - 1.0), 0, 0};
    const Vec3 mpb{cbeta * cb, 0, 0};
    auto P = [&](const std::array<double, 8>& z) {
        // z = (t1, t2, s1, s2, s3, s1', s2', s3')
        const Vec3 x = x0 + Vec3{0, z[0], z[1]} + z[2] * mb;
        const Vec3 xi = xi0 + z[2] * mpb + Vec3{0, z[3], z[4]};
        const Vec3 v = z[5] * mpb + Vec3{0, z[6], z[7]};
        return oscillatory_phase_ref(frame, frame, x, xi, v, ref1, ref2);
    };
    return detail::hessian_fd(P, h);
}

/// Pointwise Step-2 assembly identity: the amplitude, chart volume, and
/// Hessian determinant cancel to (1 - sin b sin t0) / 2.
inline double leading_order_factor(double beta, double theta0) {
    const double xi2 = norm2(critical_xi(beta, theta0));
    const double sb = std::sin(beta), st = std::sin(theta0);
    const double rho = std::sqrt(1.0 - sb * sb * st * st);
    const double denom = xi2 + 1.0;
    return 16.0 / (denom * denom * denom * denom) * rho / hessian_det_closed(beta, theta0);
}

}  // namespace hcs
