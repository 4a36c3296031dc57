#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hcs/geometry.hpp"

namespace hcs {

enum class SymbolKind { momentum_only, position_only, separable_sum, general };

/// Declared compact support: the evaluator is clamped to zero outside the ball.
struct SupportBall {
    Vec3 center{};
    double radius = 0.0;
};

using ScalarField = std::function<double(const Vec3&)>;

struct SeparableTerm {
    ScalarField fx;   // position factor
    ScalarField gxi;  // momentum factor
};

/// A phase-space observable a(x, xi) in one of the evaluable classes.
struct SymbolSpec {
    SymbolKind kind = SymbolKind::momentum_only;
    ScalarField g;                                    // momentum_only
    ScalarField f;                                    // position_only
    std::vector<SeparableTerm> terms;                 // separable_sum
    std::function<double(const Vec3&, const Vec3&)> a;  // general
    std::optional<SupportBall> x_support;
    std::optional<SupportBall> xi_support;
    std::string name;
};

inline bool in_ball(const std::optional<SupportBall>& b, const Vec3& p) {
    if (!b) return true;
    return norm2(p - b->center) <= b->radius * b->radius;
}

/// Evaluate honoring the declared supports.
inline double eval_symbol(const SymbolSpec& s, const Vec3& x, const Vec3& xi) {
    if (!in_ball(s.x_support, x) || !in_ball(s.xi_support, xi)) return 0.0;
    switch (s.kind) {
        case SymbolKind::momentum_only: return s.g(xi);
        case SymbolKind::position_only: return s.f(x);
        case SymbolKind::separable_sum: {
            double v = 0.0;
            for (const auto& t : s.terms) v += t.fx(x) * t.gxi(xi);
            return v;
        }
        case SymbolKind::general: return s.a(x, xi);
    }
    return 0.0;
}

inline double eval_symbol(const SymbolSpec& s, const PhasePoint& p) {
    return eval_symbol(s, p.x, p.xi);
}

// ======================================================================
// Default symbol palette
// ======================================================================

/// Radial momentum bump m((|xi|^2 - center^2) / width2); smooth on all of R^3.
inline SymbolSpec radial_momentum_bump(double center, double width2, const std::string& name = "radial-bump") {
    SymbolSpec s;
    s.kind = SymbolKind::momentum_only;
    const double c2 = center * center;
    s.g = [c2, width2](const Vec3& xi) { return smooth_bump((norm2(xi) - c2) / width2); };
    s.xi_support = SupportBall{{0, 0, 0}, std::sqrt(c2 + width2) * (1.0 + 1e-12)};
    s.name = name;
    return s;
}

/// Plateau in |xi|: identically 1 on |xi| <= r_inner, 0 beyond r_outer.
inline SymbolSpec momentum_plateau(double r_inner, double r_outer, const std::string& name = "plateau") {
    SymbolSpec s;
    s.kind = SymbolKind::momentum_only;
    s.g = [r_inner, r_outer](const Vec3& xi) {
        const double r = norm(xi);
        return smooth_step((r_outer - r) / (r_outer - r_inner));
    };
    s.xi_support = SupportBall{{0, 0, 0}, r_outer * (1.0 + 1e-12)};
    s.name = name;
    return s;
}

/// Angular bump in the momentum direction around axis, with a radial window.
inline SymbolSpec angular_momentum_bump(const Vec3& axis, double angular_width, double p0,
                                        const std::string& name = "angular-bump") {
    SymbolSpec s;
    s.kind = SymbolKind::momentum_only;
    const double an = norm(axis);
    const Vec3 nhat = (1.0 / an) * axis;
    const double c2 = p0 * p0, w2 = 3.0 * p0 * p0;
    s.g = [nhat, angular_width, c2, w2](const Vec3& xi) {
        const double r = norm(xi);
        if (r < 1e-14) return 0.0;
        const double mis = 1.0 - dot(xi, nhat) / r;
        return smooth_bump(mis / angular_width) * smooth_bump((norm2(xi) - c2) / w2);
    };
    s.xi_support = SupportBall{{0, 0, 0}, std::sqrt(c2 + w2) * (1.0 + 1e-12)};
    s.name = name;
    return s;
}

/// Positional tube bump around the configuration-space curve of an orbit.
inline SymbolSpec position_tube_bump(const KeplerOrbit& orbit, double tube_radius,
                                     int curve_samples = 256, const std::string& name = "tube-bump") {
    auto curve = std::make_shared<std::vector<Vec3>>();
    curve->reserve(curve_samples);
    for (int k = 0; k < curve_samples; ++k) {
        const double s = two_pi * (k + 0.5) / curve_samples;
        const SpherePoint sp = great_circle(orbit.frame, s);
        if (sp.u[3] >= 1.0 - 1e-9) continue;
        curve->push_back(moser_inv(sp, orbit.scale).x);
    }
    Vec3 center{0, 0, 0};
    double maxr = 0.0;
    for (const Vec3& p : *curve) center = center + (1.0 / curve->size()) * p;
    for (const Vec3& p : *curve) maxr = std::max(maxr, norm(p - center));

    SymbolSpec s;
    s.kind = SymbolKind::position_only;
    s.f = [curve, tube_radius](const Vec3& x) {
        double d2 = 1e300;
        for (const Vec3& p : *curve) d2 = std::min(d2, norm2(x - p));
        return smooth_bump(std::sqrt(d2) / tube_radius);
    };
    s.x_support = SupportBall{center, maxr + tube_radius + 1e-12};
    s.name = name;
    return s;
}

/// Control bump supported away from a configured orbit (in momentum).
inline SymbolSpec off_orbit_control_bump(double p0, const std::string& name = "off-orbit") {
    return radial_momentum_bump(3.0 * p0, 0.5 * p0 * p0, name);
}

/// Named palette lookup used by the CLI.
inline SymbolSpec make_palette_symbol(const std::string& kind, const SemiclassicalScale& sc,
                                      const KeplerOrbit* orbit = nullptr) {
    const double p0 = sc.p0;
    if (kind == "radial-bump") return radial_momentum_bump(p0, 3.0 * p0 * p0);
    if (kind == "radial-bump-offcenter")
        return radial_momentum_bump(1.3 * p0, 1.5 * p0 * p0, kind);
    if (kind == "plateau") return momentum_plateau(4.0 * p0, 8.0 * p0);
    if (kind == "angular-bump") return angular_momentum_bump({1, 0, 0}, 0.5, p0);
    if (kind == "off-orbit") return off_orbit_control_bump(p0);
    if (kind == "tube-bump") {
        if (!orbit) throw config_error("symbol 'tube-bump' needs an orbit");
        return position_tube_bump(*orbit, 0.5 / (p0 * p0));
    }
    throw config_error("unknown symbol kind '" + kind + "'");
}

}  // namespace hcs
