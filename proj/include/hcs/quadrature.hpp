#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "hcs/common.hpp"

namespace hcs {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

/// Gauss-Legendre rule of order n, cached process-wide.
inline const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton on P_n from the Chebyshev-like initial guess.
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    it = cache.emplace(n, std::move(rule)).first;
    return it->second;
}

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::uint64_t evaluations = 0;
};

struct CQuadResult {
    cplx value{0.0, 0.0};
    double error_estimate = 0.0;
    std::uint64_t evaluations = 0;
};

/// Product quadrature over S^3 with the polar axis along e4:
///   u = (sin(c1) sin(c2) cos(phi), sin(c1) sin(c2) sin(phi), sin(c1) cos(c2), cos(c1)),
/// Gauss-Legendre in c1 and cos(c2), uniform in phi. Exact (up to roundoff) for
/// polynomials of degree < ~2n restricted to the sphere.
template <class F>
cplx s3_integrate(F&& f, int n_polar, int n_phi) {
    const GaussRule& g1 = gauss_legendre(n_polar);
    const GaussRule& g2 = gauss_legendre(n_polar);
    const double wphi = two_pi / n_phi;
    KahanCSum acc;
    for (int i = 0; i < n_polar; ++i) {
        const double c1 = 0.5 * pi * (g1.nodes[i] + 1.0);
        const double w1 = 0.5 * pi * g1.weights[i];
        const double s1 = std::sin(c1), u4 = std::cos(c1);
        const double jac1 = s1 * s1;
        for (int j = 0; j < n_polar; ++j) {
            const double t = g2.nodes[j];  // cos(c2)
            const double w2 = g2.weights[j];
            const double s2 = std::sqrt(std::max(0.0, 1.0 - t * t));
            const double u3 = s1 * t;
            const double rxy = s1 * s2;
            for (int k = 0; k < n_phi; ++k) {
                const double phi = wphi * k;
                const Vec4 u{rxy * std::cos(phi), rxy * std::sin(phi), u3, u4};
                acc.add((w1 * jac1 * w2 * wphi) * f(u));
            }
        }
    }
    return acc.value();
}

/// Adaptive wrapper: increases the order until two successive evaluations agree.
template <class F>
CQuadResult s3_integrate_auto(F&& f, int order0, double rtol, double atol, int max_order = 512) {
    int n = order0;
    cplx prev = s3_integrate(f, n, n + 1);
    std::uint64_t evals = std::uint64_t(n) * n * (n + 1);
    for (;;) {
        const int m = n + n / 2 + 4;
        if (m > max_order)
            throw nonconvergence_error("s3_integrate_auto: order cap " + std::to_string(max_order) +
                                       " reached, last delta " + std::to_string(std::abs(prev)));
        const cplx cur = s3_integrate(f, m, m + 1);
        evals += std::uint64_t(m) * m * (m + 1);
        const double delta = std::abs(cur - prev);
        if (delta <= atol + rtol * std::abs(cur)) return {cur, delta, evals};
        prev = cur;
        n = m;
    }
}

/// Product quadrature over the unit S^2: sigma = (sin(t)cos(p), sin(t)sin(p), cos(t)).
template <class F>
cplx s2_integrate(F&& f, int n_polar, int n_phi) {
    const GaussRule& g = gauss_legendre(n_polar);
    const double wphi = two_pi / n_phi;
    KahanCSum acc;
    for (int i = 0; i < n_polar; ++i) {
        const double ct = g.nodes[i];
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int k = 0; k < n_phi; ++k) {
            const double phi = wphi * k;
            const Vec3 s{st * std::cos(phi), st * std::sin(phi), ct};
            acc.add((g.weights[i] * wphi) * f(s));
        }
    }
    return acc.value();
}

/// Uniform (trapezoid/midpoint) rule for a periodic integrand over [0, period],
/// doubled until converged. Spectrally accurate for smooth periodic functions.
template <class F>
QuadResult periodic_integrate_auto(F&& f, double period, double rtol, double atol,
                                   int n0 = 64, int max_n = 1 << 20) {
    auto eval = [&](int n) {
        KahanSum acc;
        const double h = period / n;
        for (int k = 0; k < n; ++k) acc.add(f(h * (k + 0.5)));
        return acc.value() * h;
    };
    int n = n0;
    double prev = eval(n);
    std::uint64_t evals = n;
    for (;;) {
        n *= 2;
        if (n > max_n)
            throw nonconvergence_error("periodic_integrate_auto: node cap reached, last delta " +
                                       std::to_string(std::abs(prev)));
        const double cur = eval(n);
        evals += n;
        const double delta = std::abs(cur - prev);
        if (delta <= atol + rtol * std::abs(cur)) return {cur, delta, evals};
        prev = cur;
    }
}

/// Composite Gauss-Legendre over consecutive segments [b0,b1], [b1,b2], ...
template <class F>
cplx segmented_integrate(F&& f, const std::vector<double>& breakpoints, int n_per_segment) {
    const GaussRule& g = gauss_legendre(n_per_segment);
    KahanCSum acc;
    for (std::size_t s = 0; s + 1 < breakpoints.size(); ++s) {
        const double a = breakpoints[s], b = breakpoints[s + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int i = 0; i < n_per_segment; ++i)
            acc.add(half * g.weights[i] * f(mid + half * g.nodes[i]));
    }
    return acc.value();
}

/// Orthonormal basis of the hyperplane orthogonal to a unit 4-vector.
inline std::array<Vec4, 3> basis_perp(const Vec4& u) {
    std::array<Vec4, 3> b;
    int found = 0;
    for (int axis = 0; axis < 4 && found < 3; ++axis) {
        Vec4 v{0, 0, 0, 0};
        v[axis] = 1.0;
        v = v - dot(v, u) * u;
        for (int j = 0; j < found; ++j) v = v - dot(v, b[j]) * b[j];
        const double n = norm(v);
        if (n > 1e-6) b[found++] = (1.0 / n) * v;
    }
    if (found < 3) throw error("basis_perp: degenerate input");
    return b;
}

}  // namespace hcs
