#pragma once

#include <optional>

#include "hcs/common.hpp"
#include "hcs/quadrature.hpp"

namespace hcs {

// ======================================================================
// Domain types
// ======================================================================

/// Coupled semiclassical scale: E < 0 fixed, hbar tied to the quantum number
/// through p0 * hbar * (N+1) = 1 with p0 = sqrt(-2E).
struct SemiclassicalScale {
    int N = 0;
    double E = -0.5;
    double p0 = 1.0;
    double hbar = 1.0;
};

inline SemiclassicalScale make_scale(double E, int N) {
    if (!(E < 0.0)) throw precondition_error("make_scale: energy must be negative");
    if (N < 0) throw precondition_error("make_scale: N must be nonnegative");
    SemiclassicalScale s;
    s.N = N;
    s.E = E;
    s.p0 = std::sqrt(-2.0 * E);
    s.hbar = 1.0 / (s.p0 * (N + 1));
    return s;
}

inline double orbit_period(const SemiclassicalScale& s) { return two_pi / (s.p0 * s.p0 * s.p0); }

/// A point of T*(R^3 - {0}).
struct PhasePoint {
    Vec3 x{};
    Vec3 xi{};
};

/// A point of T*S^3 (cotangent identified with tangent through the round metric).
struct SpherePoint {
    Vec4 u{};
    Vec4 eta{};
};

inline void check_sphere_point(const SpherePoint& s, double tol = 1e-8) {
    if (std::abs(norm(s.u) - 1.0) > tol)
        throw precondition_error("sphere point: |u| != 1");
    if (std::abs(dot(s.u, s.eta)) > tol * std::max(1.0, norm(s.eta)))
        throw precondition_error("sphere point: eta not tangent");
}

/// alpha = re + i*im with |re| = |im| = 1, re.im = 0; generates the great
/// circle s -> re cos s + im sin s.
struct AlphaFrame {
    Vec4 re{1, 0, 0, 0};
    Vec4 im{0, 1, 0, 0};
};

inline constexpr double frame_tol = 1e-12;

inline AlphaFrame make_frame(const Vec4& re, const Vec4& im) {
    if (std::abs(norm(re) - 1.0) > frame_tol || std::abs(norm(im) - 1.0) > frame_tol ||
        std::abs(dot(re, im)) > frame_tol)
        throw precondition_error("make_frame: frame must be orthonormal");
    return {re, im};
}

/// Gram-Schmidt a raw pair into a valid frame.
inline AlphaFrame orthonormalized_frame(Vec4 a, Vec4 b) {
    const double na = norm(a);
    if (na < 1e-12) throw precondition_error("orthonormalized_frame: zero vector");
    a = (1.0 / na) * a;
    b = b - dot(a, b) * a;
    const double nb = norm(b);
    if (nb < 1e-12) throw precondition_error("orthonormalized_frame: collinear pair");
    b = (1.0 / nb) * b;
    return {a, b};
}

/// alpha(theta0) = e1 + i (cos(theta0) e2 + sin(theta0) e4).
inline AlphaFrame standard_frame(double theta0) {
    return {{1, 0, 0, 0}, {0, std::cos(theta0), 0, std::sin(theta0)}};
}

/// Conjugate frame (time reversal of the generated orbit).
inline AlphaFrame conjugate_frame(const AlphaFrame& f) {
    return {f.re, -1.0 * f.im};
}

inline constexpr double collision_tol = 1e-10;

/// The great circle reaches the north pole iff re4^2 + im4^2 = 1.
inline bool is_collision_frame(const AlphaFrame& f) {
    return f.re[3] * f.re[3] + f.im[3] * f.im[3] >= 1.0 - collision_tol;
}

// ======================================================================
// Stereographic projection and the Moser map
// ======================================================================

/// Inverse stereographic projection R^3 -> S^3 minus the north pole.
inline Vec4 stereographic_inv(const Vec3& x) {
    const double q = norm2(x);
    const double d = 1.0 / (q + 1.0);
    return {2.0 * x[0] * d, 2.0 * x[1] * d, 2.0 * x[2] * d, (q - 1.0) * d};
}

/// Stereographic projection S^3 minus the north pole -> R^3.
inline Vec3 stereographic_fwd(const Vec4& u) {
    if (u[3] >= 1.0 - 1e-12)
        throw precondition_error("stereographic_fwd: north pole excluded");
    const double d = 1.0 / (1.0 - u[3]);
    return {u[0] * d, u[1] * d, u[2] * d};
}

/// Energy-dependent Moser map T*R^3 -> T*S^3.
inline SpherePoint moser_map(const PhasePoint& p, const SemiclassicalScale& sc) {
    const double p0 = sc.p0;
    const Vec4 u = stereographic_inv((1.0 / p0) * p.xi);
    const double xdxi = dot(p.x, p.xi);
    const double c = 0.5 * (norm2(p.xi) + p0 * p0);
    Vec4 eta;
    for (int j = 0; j < 3; ++j) eta[j] = -p.x[j] * c + xdxi * p.xi[j];
    eta[3] = -p0 * xdxi;
    return {u, eta};
}

/// Inverse Moser map; rejects the north pole.
inline PhasePoint moser_inv(const SpherePoint& s, const SemiclassicalScale& sc) {
    const double p0 = sc.p0;
    const Vec3 xi = p0 * stereographic_fwd(s.u);
    Vec3 x;
    const double inv_p02 = 1.0 / (p0 * p0);
    for (int k = 0; k < 3; ++k)
        x[k] = (s.eta[k] * (s.u[3] - 1.0) - s.eta[3] * s.u[k]) * inv_p02;
    return {x, xi};
}

// ======================================================================
// Hamiltonians
// ======================================================================

/// Kepler Hamiltonian |xi|^2/2 - 1/|x|.
inline double hamiltonian(const PhasePoint& p) {
    const double r = norm(p.x);
    if (r < 1e-14) throw precondition_error("hamiltonian: x at the singularity");
    return 0.5 * norm2(p.xi) - 1.0 / r;
}

/// Auxiliary pair (F, G): F = |x|^2 (|xi|^2 + p0^2)^2 / 8, G = sqrt(2F) - 1.
inline std::pair<double, double> aux_hamiltonians(const PhasePoint& p, const SemiclassicalScale& sc) {
    const double r = norm(p.x);
    if (r < 1e-14) throw precondition_error("aux_hamiltonians: x at the singularity");
    const double c = norm2(p.xi) + sc.p0 * sc.p0;
    const double F = r * r * c * c / 8.0;
    const double G = std::sqrt(2.0 * F) - 1.0;
    return {F, G};
}

// ======================================================================
// Great-circle flow and the time change
// ======================================================================

inline SpherePoint great_circle(const AlphaFrame& f, double s) {
    const double c = std::cos(s), sn = std::sin(s);
    return {c * f.re + sn * f.im, -sn * f.re + c * f.im};
}

/// t(s) = [s - re4 sin s + im4 (cos s - 1)] / p0^3, the antiderivative of
/// (1 - u4(s)) / p0^3 with t(0) = 0. Nondecreasing in s.
inline double time_change(const AlphaFrame& f, double s, const SemiclassicalScale& sc) {
    const double p03 = sc.p0 * sc.p0 * sc.p0;
    return (s - f.re[3] * std::sin(s) + f.im[3] * (std::cos(s) - 1.0)) / p03;
}

/// Solve time_change(f, s) = t on s in [0, 2 pi] by safeguarded Newton.
inline double invert_time(const AlphaFrame& f, double t, const SemiclassicalScale& sc) {
    const double period = orbit_period(sc);
    if (t < -1e-12 * period || t > period * (1.0 + 1e-12))
        throw precondition_error("invert_time: t outside one period");
    const double p03 = sc.p0 * sc.p0 * sc.p0;
    double lo = 0.0, hi = two_pi;
    double s = std::clamp(t * p03, lo, hi);
    const double tol = 1e-12 * std::max(1.0, two_pi);
    for (int iter = 0; iter < 200; ++iter) {
        const double resid = time_change(f, s, sc) - t;
        if (resid > 0.0)
            hi = s;
        else
            lo = s;
        const double deriv = (1.0 - f.re[3] * std::cos(s) - f.im[3] * std::sin(s)) / p03;
        double step = deriv > 1e-14 ? resid / deriv : 0.0;
        double next = s - step;
        if (step == 0.0 || next <= lo || next >= hi) next = 0.5 * (lo + hi);  // bisection fallback
        if (std::abs(next - s) < tol && std::abs(resid) < 1e-13 * std::max(1.0, period)) return next;
        s = next;
    }
    if (std::abs(time_change(f, s, sc) - t) < 1e-10 * std::max(1.0, period)) return s;
    throw nonconvergence_error("invert_time: no convergence");
}

/// Great-circle parameter s_phi in (0, 2 pi] at which a collision frame hits
/// the north pole.
inline double collision_parameter(const AlphaFrame& f) {
    if (!is_collision_frame(f))
        throw precondition_error("collision_parameter: frame has nonzero angular momentum");
    double s = std::atan2(f.im[3], f.re[3]);
    if (s <= 0.0) s += two_pi;
    return s;
}

/// Collision time t_gamma = t(s_phi).
inline double collision_time(const AlphaFrame& f, const SemiclassicalScale& sc) {
    return time_change(f, collision_parameter(f), sc);
}

// ======================================================================
// Kepler orbits
// ======================================================================

struct KeplerOrbit {
    AlphaFrame frame;
    SemiclassicalScale scale;
    bool collision = false;
    std::optional<double> t_collision;
};

inline KeplerOrbit make_orbit(const AlphaFrame& f, const SemiclassicalScale& sc) {
    KeplerOrbit o;
    o.frame = f;
    o.scale = sc;
    o.collision = is_collision_frame(f);
    if (o.collision) o.t_collision = collision_time(f, sc);
    return o;
}

/// Kepler flow by exact great-circle flow plus the analytic time change.
/// Collision orbits are 2 pi / p0^3 periodic with the collision instants
/// excluded from the domain.
inline PhasePoint kepler_state(const KeplerOrbit& o, double t) {
    const double period = orbit_period(o.scale);
    double tm = std::fmod(t, period);
    if (tm < 0.0) tm += period;
    const double s = invert_time(o.frame, tm, o.scale);
    const SpherePoint sp = great_circle(o.frame, s);
    if (sp.u[3] >= 1.0 - 1e-12)
        throw collision_time_error("kepler_state: undefined at the collision instant");
    return moser_inv(sp, o.scale);
}

/// Normalized Kepler-orbit average of a phase-space observable:
///   (p0^3 / 2 pi) * integral of a(gamma(t)) over one period,
/// computed in the arc-length variable as
///   (1 / 2 pi) * integral over [0, 2 pi] of a(gamma(t(s))) (1 - u4(s)) ds.
/// For collision orbits this equals the truncated-window average ending at the
/// collision time; the integrand is extended by zero at the north pole.
template <class F>
QuadResult orbit_average(F&& a, const KeplerOrbit& o, double rtol = 1e-8) {
    auto integrand = [&](double s) {
        const SpherePoint sp = great_circle(o.frame, s);
        const double w = 1.0 - sp.u[3];
        if (sp.u[3] >= 1.0 - 1e-12) return 0.0;
        return a(moser_inv(sp, o.scale)) * w;
    };
    QuadResult r = periodic_integrate_auto(integrand, two_pi, rtol, 1e-14);
    r.value /= two_pi;
    r.error_estimate /= two_pi;
    return r;
}

}  // namespace hcs
