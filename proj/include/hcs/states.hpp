#pragma once

#include <algorithm>
#include <vector>

#include "hcs/geometry.hpp"
#include "hcs/quadrature.hpp"

namespace hcs {

// ======================================================================
// Spherical coherent states Phi_{alpha,N}(u) = c_N (alpha . u)^N
// ======================================================================

struct SphericalState {
    AlphaFrame frame;
    int N = 0;
    double c_N = 0.0;
};

inline SphericalState make_spherical_state(const AlphaFrame& f, int N) {
    if (N < 0) throw precondition_error("make_spherical_state: N must be nonnegative");
    return {f, N, std::sqrt(double(N + 1)) / (pi * std::sqrt(2.0))};
}

/// alpha . u with the bilinear (not Hermitian) pairing.
inline cplx frame_pairing(const AlphaFrame& f, const Vec4& u) {
    return {dot(f.re, u), dot(f.im, u)};
}

inline cplx sph_coherent_eval(const SphericalState& st, const Vec4& u) {
    if (std::abs(norm(u) - 1.0) > 1e-10)
        throw precondition_error("sph_coherent_eval: u must lie on S^3");
    return st.c_N * cpow_int(frame_pairing(st.frame, u), st.N);
}

/// L^2(S^3) norm by product quadrature (degree-2N polynomial integrand).
inline double sph_norm(const SphericalState& st) {
    const int n = 2 * st.N + 8;
    const cplx v = s3_integrate(
        [&](const Vec4& u) { return std::norm(st.c_N * cpow_int(frame_pairing(st.frame, u), st.N)); },
        n, n + 1);
    return std::sqrt(v.real());
}

// ======================================================================
// Hydrogen coherent states in momentum representation
// ======================================================================

/// Closed-form momentum-side state: F_hbar(Psi_{alpha,N})(xi) =
///   p0^{-3/2} (2 / (|xi/p0|^2 + 1))^2  Phi_{alpha,N}(omega(xi/p0)).
struct MomentumState {
    AlphaFrame frame;
    SemiclassicalScale scale;
    double c_N = 0.0;
};

inline MomentumState make_momentum_state(const AlphaFrame& f, const SemiclassicalScale& sc) {
    return {f, sc, make_spherical_state(f, sc.N).c_N};
}

inline cplx momentum_eval(const MomentumState& st, const Vec3& xi) {
    const double p0 = st.scale.p0;
    const Vec3 z = (1.0 / p0) * xi;
    const double q = norm2(z);
    const double pref = std::pow(p0, -1.5) * (2.0 / (q + 1.0)) * (2.0 / (q + 1.0));
    const Vec4 u = stereographic_inv(z);
    return pref * st.c_N * cpow_int(frame_pairing(st.frame, u), st.scale.N);
}

/// L^2(R^3) norm of the momentum-side state by direct quadrature in spherical
/// coordinates with the substitution r = p0 tan(chi/2).
inline double momentum_norm(const MomentumState& st) {
    const int N = st.scale.N;
    const int n_chi = 2 * N + 16;
    const int n_s2 = 2 * N + 8;
    const GaussRule& g = gauss_legendre(n_chi);
    KahanSum acc;
    for (int i = 0; i < n_chi; ++i) {
        const double chi = 0.5 * pi * (g.nodes[i] + 1.0);
        const double w = 0.5 * pi * g.weights[i];
        const double tn = std::tan(0.5 * chi);
        const double sec2 = 1.0 + tn * tn;
        const double r = st.scale.p0 * tn;
        const double jac = st.scale.p0 * 0.5 * sec2 * r * r;  // dr * r^2
        const cplx shell = s2_integrate(
            [&](const Vec3& s) { return cplx(std::norm(momentum_eval(st, r * s)), 0.0); },
            n_s2, n_s2 + 1);
        acc.add(w * jac * shell.real());
    }
    return std::sqrt(acc.value());
}

// ======================================================================
// Riesz potential operator on S^3
// ======================================================================

/// T(Phi)(u) = integral over S^3 of Phi(y) / |y-u|^2.
/// The kernel singularity is removed by subtracting Phi(u) and adding back
/// Phi(u) * 2 pi^2 (the constant-function value); the remainder is integrated
/// in polar coordinates around u, where the volume factor cancels the kernel:
/// sin^2(chi) / (2 (1 - cos chi)) = (1 + cos chi) / 2.
inline cplx riesz_apply(const SphericalState& st, const Vec4& u, int order = 0) {
    if (std::abs(norm(u) - 1.0) > 1e-10)
        throw precondition_error("riesz_apply: u must lie on S^3");
    const int n = order > 0 ? order : 2 * st.N + 12;
    const cplx phi_u = sph_coherent_eval(st, u);
    const auto b = basis_perp(u);
    const GaussRule& g = gauss_legendre(n);
    KahanCSum acc;
    for (int i = 0; i < n; ++i) {
        const double chi = 0.5 * pi * (g.nodes[i] + 1.0);
        const double w = 0.5 * pi * g.weights[i];
        const double cc = std::cos(chi), sc = std::sin(chi);
        const cplx ring = s2_integrate(
            [&](const Vec3& s) {
                const Vec4 y = cc * u + sc * (s[0] * b[0] + s[1] * b[1] + s[2] * b[2]);
                return st.c_N * cpow_int(frame_pairing(st.frame, y), st.N) - phi_u;
            },
            n, n + 1);
        acc.add(w * ring * (0.5 * (1.0 + cc)));
    }
    return acc.value() + phi_u * (2.0 * pi * pi);
}

/// Eigenvalue of the Riesz operator on degree-N spherical coherent states,
/// fixed by the momentum-space eigenvalue equation through p0 hbar (N+1) = 1.
inline double riesz_eigenvalue(int N) { return 2.0 * pi * pi / (N + 1); }

// ======================================================================
// Momentum-space eigenvalue equation residual
// ======================================================================

/// Max relative residual of
///   (|xi|^2/2 - E) psi_hat(xi) = (1 / (2 pi^2 hbar)) integral psi_hat(p) / |p - xi|^2 dp
/// over the sample set. The R^3 integral is computed in spherical shells
/// around xi (the shell area cancels the kernel singularity exactly).
inline double hydrogen_residual(const MomentumState& st, const std::vector<Vec3>& xi_samples,
                                int n_radial = 16, int n_sphere = 0) {
    const int N = st.scale.N;
    if (N > 6) throw precondition_error("hydrogen_residual: N too large for the singular integral");
    const int ns = n_sphere > 0 ? n_sphere : 2 * N + 16;
    const double p0 = st.scale.p0;
    const std::vector<double> panels_rel{0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0};

    double worst = 0.0;
    for (const Vec3& xi : xi_samples) {
        std::vector<double> panels;
        panels.reserve(panels_rel.size());
        for (double p : panels_rel) panels.push_back(p * p0);
        const cplx integral = segmented_integrate(
            [&](double rho) {
                return s2_integrate(
                    [&](const Vec3& s) { return momentum_eval(st, xi + rho * s); }, ns, ns + 1);
            },
            panels, n_radial);
        const cplx rhs = integral / (2.0 * pi * pi * st.scale.hbar);
        const cplx lhs = (0.5 * norm2(xi) - st.scale.E) * momentum_eval(st, xi);
        const double scale = std::max(std::abs(lhs), std::abs(rhs));
        if (scale > 1e-300) worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    return worst;
}

}  // namespace hcs
