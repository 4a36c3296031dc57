#pragma once

#include <chrono>
#include <memory>
#include <random>

#include "hcs/grid.hpp"
#include "hcs/symbols.hpp"

namespace hcs {

enum class MatrixElementMethod { multiplier, grid_wigner, monte_carlo };

inline const char* method_name(MatrixElementMethod m) {
    switch (m) {
        case MatrixElementMethod::multiplier: return "multiplier";
        case MatrixElementMethod::grid_wigner: return "grid_wigner";
        case MatrixElementMethod::monte_carlo: return "monte_carlo";
    }
    return "?";
}

/// Computed matrix element with method provenance and an error estimate.
struct MatrixElementReport {
    cplx value{};
    MatrixElementMethod method = MatrixElementMethod::multiplier;
    double error_estimate = 0.0;
    std::uint64_t evaluations = 0;
    double wall_seconds = 0.0;
};

struct MatrixElementOptions {
    std::optional<MatrixElementMethod> force_method;
    double rtol = 1e-8;           // multiplier quadrature target
    int grid_n = 64;              // grid methods
    double grid_halfwidth = 0.0;  // momentum half-width, 0 = default
    std::uint64_t mc_samples = 400000;
    std::uint64_t seed = 12345;
    int mc_chunks = 8;
    double mc_sigma = 0.0;  // 0 = 1.5 / sqrt(N+1)
};

inline void require_same_scale(const MomentumState& a, const MomentumState& b) {
    if (a.scale.N != b.scale.N || a.scale.E != b.scale.E)
        throw precondition_error("matrix_element: states must share one semiclassical scale");
}

namespace detail {

inline double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

/// Momentum-only Weyl operators act as Fourier multipliers; pushing the
/// xi-integral to S^3 through stereographic projection turns it into
///   int_{S^3} g(p0 w^{-1}(u)) (1 - u4) Phi_A(u) conj(Phi_B(u)) dOmega,
/// a polynomial-degree-2N integrand handled exactly by the product rule.
inline MatrixElementReport multiplier_element(const SymbolSpec& sym, const MomentumState& A,
                                              const MomentumState& B,
                                              const MatrixElementOptions& opt) {
    const double t0 = now_seconds();
    const int N = A.scale.N;
    const double p0 = A.scale.p0;
    const double cc = A.c_N * B.c_N;
    const double sup2 = sym.xi_support ? norm2(Vec3{sym.xi_support->radius, 0, 0}) : -1.0;
    auto integrand = [&](const Vec4& u) -> cplx {
        const double w = 1.0 - u[3];
        if (w < 1e-14) return 0.0;
        if (sup2 >= 0.0) {
            // |xi|^2 = p0^2 (1+u4)/(1-u4); cheap reject before forming xi.
            const double xi2 = p0 * p0 * (1.0 + u[3]) / w;
            const Vec3 c = sym.xi_support->center;
            const double r2 = sup2;
            const double cn = norm(c);
            const double lo = std::max(0.0, std::sqrt(xi2) - cn);
            if (lo * lo > r2) return 0.0;
        }
        const Vec3 xi = p0 * stereographic_fwd(u);
        const double g = eval_symbol(sym, Vec3{0, 0, 0}, xi);
        if (g == 0.0) return 0.0;
        const cplx za = cpow_int(frame_pairing(A.frame, u), N);
        const cplx zb = cpow_int(cplx(dot(B.frame.re, u), -dot(B.frame.im, u)), N);
        return (g * w * cc) * za * zb;
    };
    const CQuadResult q = s3_integrate_auto(integrand, 2 * N + 8, opt.rtol, 1e-13);
    MatrixElementReport r;
    r.value = q.value;
    r.method = MatrixElementMethod::multiplier;
    r.error_estimate = q.error_estimate;
    r.evaluations = q.evaluations;
    r.wall_seconds = now_seconds() - t0;
    return r;
}

/// Riemann sum of g(xi) psihat_A conj(psihat_B) on momentum grids; the halved
/// grid supplies the error estimate.
inline cplx momentum_grid_sum(const SymbolSpec& sym, const MomentumState& A, const MomentumState& B,
                              int n, double hw) {
    const GridState ga = make_momentum_grid(A, n, hw);
    const GridState gb = (&A == &B) ? GridState{} : make_momentum_grid(B, n, hw);
    const std::vector<cplx>& sb = (&A == &B) ? ga.samples : gb.samples;
    KahanCSum acc;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const std::size_t idx = (std::size_t(i) * n + j) * n + k;
                const double g = eval_symbol(sym, Vec3{0, 0, 0}, ga.point(i, j, k));
                if (g != 0.0) acc.add(g * ga.samples[idx] * std::conj(sb[idx]));
            }
    return acc.value() * ga.cell_volume();
}

/// Weyl quantization of a position-only symbol is multiplication by f(x).
inline cplx position_grid_sum(const ScalarField& f, const std::optional<SupportBall>& support,
                              const GridState& pa, const GridState& pb) {
    if (support) {
        for (int d = 0; d < 3; ++d) {
            const double lo = pa.spec.origin[d];
            const double hi = pa.spec.origin[d] + pa.spec.spacing[d] * (pa.spec.extents[d] - 1);
            if (support->center[d] - support->radius < lo || support->center[d] + support->radius > hi)
                throw precondition_error("grid_wigner: position grid does not cover the symbol support");
        }
    }
    const auto n = pa.spec.extents;
    KahanCSum acc;
    for (int i = 0; i < n[0]; ++i)
        for (int j = 0; j < n[1]; ++j)
            for (int k = 0; k < n[2]; ++k) {
                const Vec3 x = pa.point(i, j, k);
                if (support && norm2(x - support->center) > support->radius * support->radius) continue;
                const double v = f(x);
                if (v == 0.0) continue;
                const std::size_t idx = (std::size_t(i) * n[1] + j) * n[2] + k;
                acc.add(v * pa.samples[idx] * std::conj(pb.samples[idx]));
            }
    return acc.value() * pa.cell_volume();
}

/// Semiclassical Fourier transform of the momentum factor on the grid-dual
/// lattice w = m dx:  ghat(w) = (2 pi hbar)^{-3} dxi^3 sum_j g(xi_j) e^{i w.xi_j/hbar}.
inline std::vector<cplx> momentum_factor_kernel(const ScalarField& g, const GridState& mom) {
    const auto n = mom.spec.extents;
    std::vector<cplx> data(mom.size());
    for (int i = 0; i < n[0]; ++i)
        for (int j = 0; j < n[1]; ++j)
            for (int k = 0; k < n[2]; ++k) {
                const double v = g(mom.point(i, j, k));
                const int par = (i + j + k) & 1;
                data[(std::size_t(i) * n[1] + j) * n[2] + k] = par ? -v : v;
            }
    fft3_inplace(data, n[0], n[1], n[2], +1);
    const double pref = mom.cell_volume() * std::pow(two_pi * mom.scale.hbar, -3.0);
    const cplx unit = std::exp(cplx(0.0, 0.5 * pi * (n[0] + n[1] + n[2])));
    for (int i = 0; i < n[0]; ++i)
        for (int j = 0; j < n[1]; ++j)
            for (int k = 0; k < n[2]; ++k) {
                const int par = (i + j + k) & 1;
                data[(std::size_t(i) * n[1] + j) * n[2] + k] *= (par ? -pref : pref) * unit;
            }
    return data;  // index m + n/2 per axis, m in [-n/2, n/2)
}

/// One separable term <Op(f x g) Psi_A, Psi_B> through the Weyl kernel
///   K(z, y) = f((z+y)/2) ghat(z - y),
/// summed over the position lattice with the w = z - y lattice truncated where
/// ghat has decayed.
inline cplx separable_term_sum(const SeparableTerm& term, const std::optional<SupportBall>& xsup,
                               const GridState& mom, const GridState& pa, const GridState& pb,
                               double* truncation_out) {
    const auto n = pa.spec.extents;
    const int nn = n[0];
    const std::vector<cplx> ghat = momentum_factor_kernel(term.gxi, mom);
    const double dx3 = pa.cell_volume();

    // Choose the w-lattice cutoff from the decay of |ghat|.
    std::vector<double> shell(nn / 2 + 1, 0.0);
    for (int i = 0; i < nn; ++i)
        for (int j = 0; j < nn; ++j)
            for (int k = 0; k < nn; ++k) {
                const int s = std::max({std::abs(i - nn / 2), std::abs(j - nn / 2), std::abs(k - nn / 2)});
                shell[s] += std::abs(ghat[(std::size_t(i) * nn + j) * nn + k]) * dx3;
            }
    double total = 0.0;
    for (double s : shell) total += s;
    int K = nn / 2 - 1;
    double tail = shell[nn / 2];
    while (K > 1 && tail + shell[K] <= 1e-10 * total) tail += shell[K--];
    if (truncation_out) *truncation_out += tail;

    // Restrict the y-loop to the inflated support of f when declared.
    std::array<int, 3> lo{0, 0, 0}, hi{nn - 1, nn - 1, nn - 1};
    if (xsup) {
        for (int d = 0; d < 3; ++d) {
            const double infl = xsup->radius + (K + 1) * pa.spec.spacing[d];
            lo[d] = std::max(0, int(std::floor((xsup->center[d] - infl - pa.spec.origin[d]) / pa.spec.spacing[d])));
            hi[d] = std::min(nn - 1, int(std::ceil((xsup->center[d] + infl - pa.spec.origin[d]) / pa.spec.spacing[d])));
        }
    }

    KahanCSum acc;
    for (int yi = lo[0]; yi <= hi[0]; ++yi)
        for (int yj = lo[1]; yj <= hi[1]; ++yj)
            for (int yk = lo[2]; yk <= hi[2]; ++yk) {
                const cplx psi_y = pa.samples[(std::size_t(yi) * nn + yj) * nn + yk];
                if (std::abs(psi_y) < 1e-300) continue;
                const Vec3 y = pa.point(yi, yj, yk);
                for (int wi = -K; wi <= K; ++wi) {
                    const int zi = yi + wi;
                    if (zi < 0 || zi >= nn) continue;
                    for (int wj = -K; wj <= K; ++wj) {
                        const int zj = yj + wj;
                        if (zj < 0 || zj >= nn) continue;
                        for (int wk = -K; wk <= K; ++wk) {
                            const int zk = yk + wk;
                            if (zk < 0 || zk >= nn) continue;
                            const Vec3 mid{y[0] + 0.5 * wi * pa.spec.spacing[0],
                                           y[1] + 0.5 * wj * pa.spec.spacing[1],
                                           y[2] + 0.5 * wk * pa.spec.spacing[2]};
                            if (xsup && norm2(mid - xsup->center) > xsup->radius * xsup->radius) continue;
                            const double fv = term.fx(mid);
                            if (fv == 0.0) continue;
                            const cplx gh = ghat[(std::size_t(wi + nn / 2) * nn + (wj + nn / 2)) * nn + (wk + nn / 2)];
                            const cplx psi_z = pb.samples[(std::size_t(zi) * nn + zj) * nn + zk];
                            acc.add(fv * gh * std::conj(psi_z) * psi_y);
                        }
                    }
                }
            }
    return acc.value() * dx3 * dx3;
}

inline MatrixElementReport grid_wigner_element(const SymbolSpec& sym, const MomentumState& A,
                                               const MomentumState& B,
                                               const MatrixElementOptions& opt) {
    const double t0 = now_seconds();
    require_same_scale(A, B);
    const int n = opt.grid_n;
    const double hw = opt.grid_halfwidth > 0.0 ? opt.grid_halfwidth
                                               : default_momentum_halfwidth(A.scale);
    MatrixElementReport r;
    r.method = MatrixElementMethod::grid_wigner;
    if (sym.kind == SymbolKind::momentum_only) {
        const cplx full = momentum_grid_sum(sym, A, B, n, hw);
        const cplx half = momentum_grid_sum(sym, A, B, n / 2, hw);
        r.value = full;
        r.error_estimate = std::abs(full - half);
        r.evaluations = std::uint64_t(n) * n * n + std::uint64_t(n / 2) * (n / 2) * (n / 2);
    } else if (sym.kind == SymbolKind::position_only || sym.kind == SymbolKind::separable_sum) {
        const GridState ma = make_momentum_grid(A, n, hw);
        const GridState pa = to_position_grid(ma);
        const GridState mb = make_momentum_grid(B, n, hw);
        const GridState pb = to_position_grid(mb);
        if (sym.kind == SymbolKind::position_only) {
            r.value = position_grid_sum(sym.f, sym.x_support, pa, pb);
            // Error from the halved grid.
            const GridState ma2 = make_momentum_grid(A, n / 2, hw);
            const GridState mb2 = make_momentum_grid(B, n / 2, hw);
            const cplx v2 = position_grid_sum(sym.f, sym.x_support, to_position_grid(ma2),
                                              to_position_grid(mb2));
            r.error_estimate = std::abs(r.value - v2);
        } else {
            double trunc = 0.0;
            KahanCSum acc;
            for (const auto& term : sym.terms)
                acc.add(separable_term_sum(term, sym.x_support, ma, pa, pb, &trunc));
            r.value = acc.value();
            r.error_estimate = trunc;
        }
        r.evaluations = 2 * ma.size();
    } else {
        throw precondition_error("grid_wigner: general symbols take the monte_carlo path");
    }
    r.wall_seconds = now_seconds() - t0;
    return r;
}

/// Importance-sampled Monte Carlo on the 9-dimensional oscillatory form
///   (N+1)^4 / (16 pi^5) * int f(x,xi,v) e^{i N P(x,xi,v)} dx dxi dv
/// in the scaled coordinates (x, xi) = (p0^2 x_phys, xi_phys / p0).
/// e^{iNP} is evaluated branch-free as (alpha.w+)^N (conj(beta).w-)^N e^{iN<v,x>};
/// the proposal concentrates (xi, v) on the critical tube where Im P = 0 and
/// draws x uniformly from the (scaled) symbol support.
inline MatrixElementReport monte_carlo_element(const SymbolSpec& sym, const MomentumState& A,
                                               const MomentumState& B,
                                               const MatrixElementOptions& opt) {
    const double t0 = now_seconds();
    require_same_scale(A, B);
    const int N = A.scale.N;
    const double p0 = A.scale.p0;
    const double p02 = p0 * p0;

    // x-support in scaled coordinates; multiplier-type symbols get a plateau
    // cutoff over the orbit-bearing ball (the x-integral needs compactness).
    Vec3 xc{0, 0, 0};
    double xr;
    const bool implicit_cutoff = !sym.x_support.has_value();
    if (sym.x_support) {
        xc = p02 * sym.x_support->center;
        xr = p02 * sym.x_support->radius;
    } else {
        xr = 4.0;  // scaled units: orbits live in |x| <= 2
    }
    const double vol_x = 4.0 / 3.0 * pi * xr * xr * xr;

    const double sigma = opt.mc_sigma > 0.0 ? opt.mc_sigma : 1.5 / std::sqrt(double(N + 1));
    const double xi_sup_scaled = sym.xi_support
                                     ? (norm(sym.xi_support->center) + sym.xi_support->radius) / p0
                                     : 4.0;

    // Tube centers: the alpha and beta great circles pushed to momentum space.
    std::vector<Vec3> centers;
    for (const AlphaFrame* fr : {&A.frame, &B.frame}) {
        for (int k = 0; k < 64; ++k) {
            const double s = two_pi * (k + 0.5) / 64;
            const SpherePoint sp = great_circle(*fr, s);
            if (sp.u[3] > 0.999) continue;
            const Vec3 c = stereographic_fwd(sp.u);
            if (norm(c) <= xi_sup_scaled + 4.0 * sigma) centers.push_back(c);
        }
    }
    const double sigma_broad = std::max(2.0, 0.75 * xi_sup_scaled);
    const double w_tube = centers.empty() ? 0.0 : 0.85;
    const double w_broad = 1.0 - w_tube;

    auto gauss3 = [](const Vec3& d, double s) {
        const double a = 1.0 / (std::sqrt(two_pi) * s);
        return a * a * a * std::exp(-0.5 * norm2(d) / (s * s));
    };
    auto proposal_density = [&](const Vec3& xi, const Vec3& v) {
        double qxi = w_broad * gauss3(xi, sigma_broad);
        if (!centers.empty()) {
            double m = 0.0;
            for (const Vec3& c : centers) m += gauss3(xi - c, sigma);
            qxi += w_tube * m / centers.size();
        }
        return (1.0 / vol_x) * qxi * gauss3(v, sigma);
    };

    const double pref = std::pow(double(N + 1), 4) / (16.0 * std::pow(pi, 5));
    const int chunks = std::max(1, opt.mc_chunks);
    const std::uint64_t per_chunk = opt.mc_samples / chunks;

    std::vector<cplx> chunk_mean(chunks);
    std::vector<double> chunk_m2(chunks);
    auto run_chunk = [&](int ci) {
        std::seed_seq sq{std::uint32_t(opt.seed), std::uint32_t(opt.seed >> 32), std::uint32_t(ci)};
        std::mt19937_64 rng(sq);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        KahanCSum sum;
        KahanSum sum2;
        for (std::uint64_t m = 0; m < per_chunk; ++m) {
            // x uniform in the ball.
            Vec3 x;
            do {
                x = {xr * (2 * unif(rng) - 1), xr * (2 * unif(rng) - 1), xr * (2 * unif(rng) - 1)};
            } while (norm2(x) > xr * xr);
            x = x + xc;
            // xi from the tube/broad mixture, v Gaussian.
            Vec3 xi;
            if (!centers.empty() && unif(rng) < w_tube) {
                const Vec3& c = centers[std::size_t(unif(rng) * centers.size()) % centers.size()];
                xi = {c[0] + sigma * gauss(rng), c[1] + sigma * gauss(rng), c[2] + sigma * gauss(rng)};
            } else {
                xi = {sigma_broad * gauss(rng), sigma_broad * gauss(rng), sigma_broad * gauss(rng)};
            }
            const Vec3 v{sigma * gauss(rng), sigma * gauss(rng), sigma * gauss(rng)};

            const Vec3 xp = xi + 0.5 * v;
            const Vec3 xm = xi - 0.5 * v;
            double aval = eval_symbol(sym, (1.0 / p02) * x, p0 * xi);
            if (implicit_cutoff) aval *= smooth_step((4.0 - norm(x)) / 1.5);
            cplx term = 0.0;
            if (aval != 0.0) {
                const double dp = norm2(xp) + 1.0, dm = norm2(xm) + 1.0;
                const cplx z1 = frame_pairing(A.frame, stereographic_inv(xp));
                const Vec4 um = stereographic_inv(xm);
                const cplx z2{dot(B.frame.re, um), -dot(B.frame.im, um)};
                const double vx = dot(v, x);
                const cplx fval = 16.0 * aval * std::exp(cplx(0.0, vx)) / (dp * dp * dm * dm);
                term = fval * cpow_int(z1, N) * cpow_int(z2, N) * std::exp(cplx(0.0, N * vx));
                term /= proposal_density(xi, v);
            }
            sum.add(term);
            sum2.add(std::norm(term));
        }
        chunk_mean[ci] = sum.value() / double(per_chunk);
        chunk_m2[ci] = sum2.value() / double(per_chunk);
    };

    std::vector<std::future<void>> jobs;
    for (int ci = 0; ci < chunks; ++ci)
        jobs.push_back(std::async(std::launch::async, run_chunk, ci));
    for (auto& j : jobs) j.get();

    KahanCSum mean_acc;
    KahanSum m2_acc;
    for (int ci = 0; ci < chunks; ++ci) {
        mean_acc.add(chunk_mean[ci]);
        m2_acc.add(chunk_m2[ci]);
    }
    const cplx mean = mean_acc.value() / double(chunks);
    const double m2 = m2_acc.value() / double(chunks);
    const std::uint64_t total = per_chunk * chunks;
    const double var = std::max(0.0, m2 - std::norm(mean));

    MatrixElementReport r;
    r.value = pref * mean;
    r.method = MatrixElementMethod::monte_carlo;
    r.error_estimate = pref * std::sqrt(var / double(total));
    r.evaluations = total;
    r.wall_seconds = now_seconds() - t0;
    return r;
}

}  // namespace detail

/// <Op_hbar(a) Psi_A, Psi_B> dispatched by symbol kind (momentum-only symbols
/// reduce exactly to Fourier multipliers; position-only to multiplication;
/// mixed symbols go through grids or the oscillatory integral).
inline MatrixElementReport matrix_element(const SymbolSpec& sym, const MomentumState& A,
                                          const MomentumState& B,
                                          const MatrixElementOptions& opt = {}) {
    require_same_scale(A, B);
    MatrixElementMethod m;
    if (opt.force_method)
        m = *opt.force_method;
    else if (sym.kind == SymbolKind::momentum_only)
        m = MatrixElementMethod::multiplier;
    else if (sym.kind == SymbolKind::general)
        m = MatrixElementMethod::monte_carlo;
    else
        m = MatrixElementMethod::grid_wigner;

    switch (m) {
        case MatrixElementMethod::multiplier:
            if (sym.kind != SymbolKind::momentum_only)
                throw precondition_error("multiplier method requires a momentum-only symbol");
            return detail::multiplier_element(sym, A, B, opt);
        case MatrixElementMethod::grid_wigner:
            return detail::grid_wigner_element(sym, A, B, opt);
        case MatrixElementMethod::monte_carlo:
            return detail::monte_carlo_element(sym, A, B, opt);
    }
    throw error("matrix_element: unreachable");
}

inline MatrixElementReport matrix_element(const SymbolSpec& sym, const MomentumState& psi,
                                          const MatrixElementOptions& opt = {}) {
    return matrix_element(sym, psi, psi, opt);
}

/// Two-frame matrix element <Op(a) Psi_{alpha,N}, Psi_{beta,N}>.
inline MatrixElementReport cross_matrix_element(const SymbolSpec& sym, const AlphaFrame& alpha,
                                                const AlphaFrame& beta, const SemiclassicalScale& sc,
                                                const MatrixElementOptions& opt = {}) {
    const MomentumState A = make_momentum_state(alpha, sc);
    const MomentumState B = make_momentum_state(beta, sc);
    return matrix_element(sym, A, B, opt);
}

// ======================================================================
// Oscillatory form: amplitude f and complex phase P of the matrix-element
// integral, exposed for stationary-phase verification.
// ======================================================================

struct OscillatoryForm {
    std::function<cplx(const Vec3&, const Vec3&, const Vec3&)> amplitude;
    std::function<cplx(const Vec3&, const Vec3&, const Vec3&)> phase;
    double prefactor = 0.0;  // (N+1)^4 / (16 pi^5)
};

/// Build evaluators for f and P. P uses the principal log branch unless
/// reference arguments are supplied (see phase_with_refs for stencils that
/// must stay on one branch). Evaluation within 1e-12 of the branch point
/// alpha . omega = 0 is rejected.
inline OscillatoryForm oscillatory_form(const SymbolSpec& sym, const AlphaFrame& alpha,
                                        const AlphaFrame& beta, const SemiclassicalScale& sc) {
    OscillatoryForm of;
    const double p0 = sc.p0;
    const double p02 = p0 * p0;
    of.prefactor = std::pow(double(sc.N + 1), 4) / (16.0 * std::pow(pi, 5));
    of.amplitude = [sym, p0, p02](const Vec3& x, const Vec3& xi, const Vec3& v) -> cplx {
        const double dp = norm2(xi + 0.5 * v) + 1.0;
        const double dm = norm2(xi - 0.5 * v) + 1.0;
        const double a = eval_symbol(sym, (1.0 / p02) * x, p0 * xi);
        return 16.0 * a * std::exp(cplx(0.0, dot(v, x))) / (dp * dp * dm * dm);
    };
    of.phase = [alpha, beta](const Vec3& x, const Vec3& xi, const Vec3& v) -> cplx {
        const Vec4 up = stereographic_inv(xi + 0.5 * v);
        const Vec4 um = stereographic_inv(xi - 0.5 * v);
        const cplx z1 = frame_pairing(alpha, up);
        const cplx z2{dot(beta.re, um), -dot(beta.im, um)};
        if (std::abs(z1) < 1e-12 || std::abs(z2) < 1e-12)
            throw precondition_error("oscillatory phase: branch point proximity");
        return cplx(0.0, -1.0) * (std::log(z1) + std::log(z2)) + dot(v, x);
    };
    return of;
}

/// Phase with branch references: each log's argument is unwrapped to within
/// pi of the given reference, keeping finite-difference stencils on one branch.
inline cplx oscillatory_phase_ref(const AlphaFrame& alpha, const AlphaFrame& beta, const Vec3& x,
                                  const Vec3& xi, const Vec3& v, double ref1, double ref2) {
    const Vec4 up = stereographic_inv(xi + 0.5 * v);
    const Vec4 um = stereographic_inv(xi - 0.5 * v);
    const cplx z1 = frame_pairing(alpha, up);
    const cplx z2{dot(beta.re, um), -dot(beta.im, um)};
    if (std::abs(z1) < 1e-12 || std::abs(z2) < 1e-12)
        throw precondition_error("oscillatory phase: branch point proximity");
    return cplx(0.0, -1.0) * (log_near(z1, ref1) + log_near(z2, ref2)) + dot(v, x);
}

// ======================================================================
// Wigner slices
// ======================================================================

/// Wigner function of a grid-carried state at one position x over the dual
/// xi-grid:  W(x, xi) = (2 pi hbar)^{-3} int Psi(x+v/2) conj(Psi(x-v/2)) e^{-i v.xi/hbar} dv.
struct WignerSlice {
    GridSpec xi_spec;
    std::vector<cplx> w;
    double position_density = 0.0;  // |Psi(x)|^2 at the slice center
};

/// Core slab transform from position samples around the center. psi[k] must
/// hold Psi(x + (k - n/2) dv/2) per axis; the k=0 planes are zeroed to keep
/// the discrete Hermitian pairing exact.
inline WignerSlice wigner_slice_from_samples(std::vector<cplx> psi, int n, double dv, double hbar) {
    auto idx = [n](int i, int j, int k) { return (std::size_t(i) * n + j) * n + k; };
    std::vector<cplx> h(psi.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                if (i == 0 || j == 0 || k == 0) {
                    h[idx(i, j, k)] = 0.0;
                    continue;
                }
                h[idx(i, j, k)] = psi[idx(i, j, k)] * std::conj(psi[idx(n - i, n - j, n - k)]);
            }
    // Centered DFT with sign -1: pre/post parity twiddles around the grid middle.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                if ((i + j + k) & 1) h[idx(i, j, k)] = -h[idx(i, j, k)];
    fft3_inplace(h, n, n, n, -1);
    const cplx unit = std::exp(cplx(0.0, -0.5 * pi * (3.0 * n)));
    const double pref = dv * dv * dv * std::pow(two_pi * hbar, -3.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const int par = (i + j + k) & 1;
                h[idx(i, j, k)] *= (par ? -pref : pref) * unit;
            }
    WignerSlice ws;
    ws.w = std::move(h);
    const double dxi = two_pi * hbar / (n * dv);
    ws.xi_spec.spacing = {dxi, dxi, dxi};
    ws.xi_spec.origin = {-0.5 * n * dxi, -0.5 * n * dxi, -0.5 * n * dxi};
    ws.xi_spec.extents = {n, n, n};
    ws.position_density = std::norm(psi[idx(n / 2, n / 2, n / 2)]);
    return ws;
}

/// Slice from the closed-form momentum state: builds the position samples
/// around x with one offset Fourier transform.
inline WignerSlice wigner_slice(const MomentumState& st, const Vec3& x, int n = 48,
                                double xi_halfwidth = 0.0) {
    const double hbar = st.scale.hbar;
    const double xihw = xi_halfwidth > 0.0 ? xi_halfwidth : default_momentum_halfwidth(st.scale);
    // Half-spacing of the v-grid = spacing of the dual position grid around x.
    const double dv = two_pi * hbar / xihw;
    const GridState mom = make_momentum_grid(st, n, xihw);
    const GridState pos = to_position_grid(mom, x);
    if (std::abs(pos.spec.spacing[0] - 0.5 * dv) > 1e-9 * dv)
        throw error("wigner_slice: dual grid mismatch");
    return wigner_slice_from_samples(pos.samples, n, dv, hbar);
}

/// Slice pulled from a precomputed position grid at an on-grid center index;
/// v runs over even grid offsets so no interpolation is needed.
inline WignerSlice wigner_slice_from_grid(const GridState& pos, const std::array<int, 3>& center,
                                          int n_v) {
    if (pos.space != Space::position)
        throw precondition_error("wigner_slice_from_grid: position grid required");
    const auto ext = pos.spec.extents;
    std::vector<cplx> psi(std::size_t(n_v) * n_v * n_v, 0.0);
    for (int i = 0; i < n_v; ++i)
        for (int j = 0; j < n_v; ++j)
            for (int k = 0; k < n_v; ++k) {
                const int gi = center[0] + i - n_v / 2;
                const int gj = center[1] + j - n_v / 2;
                const int gk = center[2] + k - n_v / 2;
                if (gi < 0 || gi >= ext[0] || gj < 0 || gj >= ext[1] || gk < 0 || gk >= ext[2])
                    continue;
                psi[(std::size_t(i) * n_v + j) * n_v + k] =
                    pos.samples[(std::size_t(gi) * ext[1] + gj) * ext[2] + gk];
            }
    return wigner_slice_from_samples(std::move(psi), n_v, 2.0 * pos.spec.spacing[0],
                                     pos.scale.hbar);
}

}  // namespace hcs
