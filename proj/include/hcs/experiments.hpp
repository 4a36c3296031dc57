#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hcs/stationary.hpp"

#include <nlohmann/json.hpp>

namespace hcs {

// ======================================================================
// Geodesic measures: finite convex combinations of orbit delta masses
// ======================================================================

struct GeodesicEntry {
    double weight = 1.0;
    AlphaFrame frame;
};

struct GeodesicMeasure {
    std::vector<GeodesicEntry> entries;
};

namespace detail {
/// 2-plane projector re re^T + im im^T, invariant under phase changes of alpha.
inline std::array<std::array<double, 4>, 4> plane_projector(const AlphaFrame& f) {
    std::array<std::array<double, 4>, 4> p{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) p[i][j] = f.re[i] * f.re[j] + f.im[i] * f.im[j];
    return p;
}
/// Orientation bivector re ^ im.
inline std::array<std::array<double, 4>, 4> plane_bivector(const AlphaFrame& f) {
    std::array<std::array<double, 4>, 4> b{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) b[i][j] = f.re[i] * f.im[j] - f.im[i] * f.re[j];
    return b;
}
}  // namespace detail

inline bool same_unoriented_geodesic(const AlphaFrame& a, const AlphaFrame& b) {
    const auto pa = detail::plane_projector(a), pb = detail::plane_projector(b);
    double d2 = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) d2 += (pa[i][j] - pb[i][j]) * (pa[i][j] - pb[i][j]);
    return std::sqrt(d2) < 1e-10;
}

inline bool same_oriented_geodesic(const AlphaFrame& a, const AlphaFrame& b) {
    if (!same_unoriented_geodesic(a, b)) return false;
    const auto la = detail::plane_bivector(a), lb = detail::plane_bivector(b);
    double inner = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) inner += la[i][j] * lb[i][j];
    return inner > 0.0;
}

inline GeodesicMeasure make_geodesic_measure(std::vector<GeodesicEntry> entries) {
    if (entries.empty()) throw precondition_error("geodesic measure: no entries");
    KahanSum total;
    for (const auto& e : entries) {
        if (!(e.weight > 0.0) || e.weight > 1.0)
            throw precondition_error("geodesic measure: weights must lie in (0, 1]");
        total.add(e.weight);
    }
    if (std::abs(total.value() - 1.0) > 1e-12)
        throw precondition_error("geodesic measure: weights must sum to 1");
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (std::size_t j = i + 1; j < entries.size(); ++j)
            if (same_unoriented_geodesic(entries[i].frame, entries[j].frame))
                throw precondition_error("geodesic measure: entries must generate distinct geodesics");
    return {std::move(entries)};
}

// ======================================================================
// Studies
// ======================================================================

/// Radon transform of a symbol over the orbit generated by the frame:
/// the normalized period average (truncated at the collision time for
/// zero-angular-momentum orbits).
inline double radon_transform(const SymbolSpec& sym, const AlphaFrame& frame,
                              const SemiclassicalScale& sc, double rtol = 1e-8) {
    const KeplerOrbit orbit = make_orbit(frame, sc);
    return orbit_average([&](const PhasePoint& p) { return eval_symbol(sym, p); }, orbit, rtol).value;
}

struct ConvergenceRecord {
    std::vector<int> N_values;
    std::vector<cplx> measured;
    double predicted = 0.0;
    std::vector<double> errors;
    std::vector<double> ratios;  // |m(N_{k+1})| / |m(N_k)|
    double fitted_rate = std::numeric_limits<double>::quiet_NaN();
    bool superpolynomial = false;
    std::vector<MatrixElementReport> reports;
};

namespace detail {
/// OLS slope of log(err) against log(N) over the largest three N values;
/// the returned exponent is the negated slope.
inline double fit_rate(const std::vector<int>& Ns, const std::vector<double>& errs) {
    const std::size_t n = Ns.size();
    const std::size_t take = std::min<std::size_t>(3, n);
    if (take < 2) return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = n - take; i < n; ++i) {
        const double x = std::log(double(Ns[i]));
        const double y = std::log(std::max(errs[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double k = double(take);
    return -(k * sxy - sx * sy) / (k * sxx - sx * sx);
}
}  // namespace detail

/// Theorem-1 convergence study: diagonal matrix elements against the Radon
/// transform prediction over an N list at fixed energy.
inline ConvergenceRecord theorem1_study(const AlphaFrame& frame, double E, const SymbolSpec& sym,
                                        const std::vector<int>& N_list,
                                        const MatrixElementOptions& opt = {}) {
    ConvergenceRecord rec;
    rec.predicted = radon_transform(sym, frame, make_scale(E, N_list.empty() ? 0 : N_list.front()));
    for (int N : N_list) {
        const SemiclassicalScale sc = make_scale(E, N);
        const MomentumState psi = make_momentum_state(frame, sc);
        const MatrixElementReport r = matrix_element(sym, psi, psi, opt);
        rec.N_values.push_back(N);
        rec.measured.push_back(r.value);
        rec.errors.push_back(std::abs(r.value - rec.predicted));
        rec.reports.push_back(r);
    }
    rec.fitted_rate = detail::fit_rate(rec.N_values, rec.errors);
    return rec;
}

/// Cross-term decay study for frames generating distinct oriented geodesics.
inline ConvergenceRecord cross_decay_study(const AlphaFrame& alpha, const AlphaFrame& beta,
                                           double E, const SymbolSpec& sym,
                                           const std::vector<int>& N_list,
                                           const MatrixElementOptions& opt = {}) {
    if (same_oriented_geodesic(alpha, beta))
        throw precondition_error("cross_decay_study: frames generate the same oriented geodesic");
    ConvergenceRecord rec;
    rec.predicted = 0.0;
    for (int N : N_list) {
        const SemiclassicalScale sc = make_scale(E, N);
        const MatrixElementReport r = cross_matrix_element(sym, alpha, beta, sc, opt);
        rec.N_values.push_back(N);
        rec.measured.push_back(r.value);
        rec.errors.push_back(std::abs(r.value));
        rec.reports.push_back(r);
    }
    for (std::size_t i = 0; i + 1 < rec.measured.size(); ++i) {
        const double denom = std::abs(rec.measured[i]);
        rec.ratios.push_back(denom > 0.0 ? std::abs(rec.measured[i + 1]) / denom
                                         : std::numeric_limits<double>::infinity());
    }
    rec.superpolynomial = !rec.ratios.empty();
    for (std::size_t i = 0; i + 1 < rec.ratios.size(); ++i)
        if (rec.ratios[i + 1] > rec.ratios[i]) rec.superpolynomial = false;
    rec.fitted_rate = detail::fit_rate(rec.N_values, rec.errors);
    return rec;
}

/// Mixed-measure study: Psi_N = sum_j sqrt(c_j) Psi_{alpha_j, N}; the measured
/// value expands into weighted diagonal and cross terms, the prediction is the
/// weight-linear combination of Radon transforms.
inline ConvergenceRecord mixed_measure_study(const GeodesicMeasure& mu, double E,
                                             const SymbolSpec& sym, const std::vector<int>& N_list,
                                             const MatrixElementOptions& opt = {}) {
    ConvergenceRecord rec;
    {
        KahanSum pred;
        const SemiclassicalScale sc0 = make_scale(E, N_list.empty() ? 0 : N_list.front());
        for (const auto& e : mu.entries)
            pred.add(e.weight * radon_transform(sym, e.frame, sc0));
        rec.predicted = pred.value();
    }
    for (int N : N_list) {
        const SemiclassicalScale sc = make_scale(E, N);
        std::vector<MomentumState> states;
        states.reserve(mu.entries.size());
        for (const auto& e : mu.entries) states.push_back(make_momentum_state(e.frame, sc));
        KahanCSum val;
        std::uint64_t evals = 0;
        double err_budget = 0.0;
        for (std::size_t j = 0; j < states.size(); ++j)
            for (std::size_t k = 0; k < states.size(); ++k) {
                const double w = std::sqrt(mu.entries[j].weight * mu.entries[k].weight);
                const MatrixElementReport r = matrix_element(sym, states[j], states[k], opt);
                val.add(w * r.value);
                evals += r.evaluations;
                err_budget += w * r.error_estimate;
            }
        MatrixElementReport combined;
        combined.value = val.value();
        combined.method = MatrixElementMethod::multiplier;
        combined.error_estimate = err_budget;
        combined.evaluations = evals;
        rec.N_values.push_back(N);
        rec.measured.push_back(combined.value);
        rec.errors.push_back(std::abs(combined.value - rec.predicted));
        rec.reports.push_back(combined);
    }
    rec.fitted_rate = detail::fit_rate(rec.N_values, rec.errors);
    return rec;
}

// ======================================================================
// Report emission
// ======================================================================

/// 17-significant-digit decimal rendering used by every CSV cell.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV with a header row, UNIX line endings, 17-significant-digit floats.
class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (i) body_ += ',';
            body_ += columns_[i];
        }
        body_ += '\n';
    }
    void row(const std::vector<double>& values) {
        if (values.size() != columns_.size()) throw error("CsvWriter: column count mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) body_ += ',';
            body_ += format_g17(values[i]);
        }
        body_ += '\n';
    }
    const std::string& str() const { return body_; }
    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw error("CsvWriter: cannot open " + path);
        f << body_;
    }

  private:
    std::vector<std::string> columns_;
    std::string body_;
};

inline nlohmann::json record_to_json(const ConvergenceRecord& rec) {
    nlohmann::json results = nlohmann::json::array();
    for (std::size_t i = 0; i < rec.N_values.size(); ++i) {
        nlohmann::json row;
        row["N"] = rec.N_values[i];
        row["value_re"] = rec.measured[i].real();
        row["value_im"] = rec.measured[i].imag();
        row["predicted"] = rec.predicted;
        row["error"] = rec.errors[i];
        row["method"] = method_name(rec.reports[i].method);
        row["error_estimate"] = rec.reports[i].error_estimate;
        row["evaluations"] = rec.reports[i].evaluations;
        results.push_back(row);
    }
    nlohmann::json j;
    j["results"] = results;
    j["predicted"] = rec.predicted;
    j["fitted_rate"] = rec.fitted_rate;
    if (!rec.ratios.empty()) {
        j["ratios"] = rec.ratios;
        j["superpolynomial"] = rec.superpolynomial;
    }
    return j;
}

inline CsvWriter record_to_csv(const ConvergenceRecord& rec) {
    CsvWriter csv({"N", "value", "predicted", "error"});
    for (std::size_t i = 0; i < rec.N_values.size(); ++i)
        csv.row({double(rec.N_values[i]), rec.measured[i].real(), rec.predicted, rec.errors[i]});
    return csv;
}

/// Summary envelope: config echo, results, invariant failures, versions.
inline nlohmann::json make_summary(const nlohmann::json& config_echo, const nlohmann::json& results,
                                   const std::vector<std::string>& invariant_failures) {
    nlohmann::json j;
    j["config"] = config_echo;
    j["results"] = results;
    j["invariant_failures"] = invariant_failures;
    j["versions"] = {{"hcs", "0.1.0"}, {"summary_format", 1}};
    return j;
}

// ======================================================================
// Invariant suite (library-level property sweep used by the CLI)
// ======================================================================

struct InvariantResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline std::vector<InvariantResult> run_invariant_suite(std::uint64_t seed = 20260810) {
    std::vector<InvariantResult> out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto rand_vec3 = [&] { return Vec3{unif(rng), unif(rng), unif(rng)}; };
    auto rand_frame = [&] {
        for (;;) {
            const Vec4 a{unif(rng), unif(rng), unif(rng), unif(rng)};
            const Vec4 b{unif(rng), unif(rng), unif(rng), unif(rng)};
            if (norm(a) < 1e-3 || norm(b) < 1e-3) continue;
            try {
                return orthonormalized_frame(a, b);
            } catch (const precondition_error&) {
            }
        }
    };
    auto push = [&](const std::string& name, bool pass, double metric, double tol) {
        std::ostringstream os;
        os << "metric " << metric << " tol " << tol;
        out.push_back({name, pass, os.str()});
    };

    const SemiclassicalScale sc = make_scale(-0.5, 16);

    {  // stereographic round trip
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const Vec3 x = 2.0 * rand_vec3();
            worst = std::max(worst, norm(stereographic_fwd(stereographic_inv(x)) - x));
        }
        push("stereographic round trip", worst < 1e-12, worst, 1e-12);
    }
    {  // Moser round trip and the energy-surface identity
        double worst_rt = 0.0, worst_eta = 0.0, worst_relate = 0.0, worst_chain = 0.0;
        for (int i = 0; i < 100; ++i) {
            Vec3 x = rand_vec3();
            while (norm(x) < 0.2) x = rand_vec3();
            PhasePoint p{x, rand_vec3()};
            const SpherePoint sp = moser_map(p, sc);
            const PhasePoint q = moser_inv(sp, sc);
            worst_rt = std::max(worst_rt, std::max(norm(q.x - p.x), norm(q.xi - p.xi)));
            const auto [F, G] = aux_hamiltonians(p, sc);
            worst_relate = std::max(worst_relate, std::abs(0.5 * norm2(sp.eta) - F));
            worst_chain = std::max(worst_chain,
                                   std::abs(hamiltonian(p) - (G / norm(p.x) - 0.5 * sc.p0 * sc.p0)));
            // point moved onto the energy surface: rescale xi
            const double want = 2.0 * (sc.E + 1.0 / norm(p.x));
            if (want > 1e-8) {
                p.xi = (std::sqrt(want) / norm(p.xi)) * p.xi;
                worst_eta = std::max(worst_eta,
                                     std::abs(norm(moser_map(p, sc).eta) - 1.0));
            }
        }
        push("moser round trip", worst_rt < 1e-10, worst_rt, 1e-10);
        push("energy surface to unit sphere bundle", worst_eta < 1e-10, worst_eta, 1e-10);
        push("eta identity |eta|^2/2 = F", worst_relate < 1e-10, worst_relate, 1e-10);
        push("hamiltonian chain H = G/|x| - p0^2/2", worst_chain < 1e-12, worst_chain, 1e-12);
    }
    {  // time change derivative
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const AlphaFrame f = rand_frame();
            const double s = pi * unif(rng) + pi;
            const double h = 1e-5;
            const double fd =
                (time_change(f, s + h, sc) - time_change(f, s - h, sc)) / (2 * h);
            const double exact = (1.0 - great_circle(f, s).u[3]) / std::pow(sc.p0, 3);
            worst = std::max(worst, std::abs(fd - exact));
        }
        push("time change derivative", worst < 1e-6, worst, 1e-6);
    }
    {  // flow correctness + energy conservation on a generic orbit
        const KeplerOrbit orbit = make_orbit(standard_frame(0.6), sc);
        const double T = orbit_period(sc);
        double worst_flow = 0.0, worst_E = 0.0;
        for (int i = 0; i < 100; ++i) {
            const double t = T * (i + 0.5) / 100.0;
            const PhasePoint p = kepler_state(orbit, t);
            if (norm(p.x) < 0.1) continue;
            worst_E = std::max(worst_E, std::abs(hamiltonian(p) - sc.E));
            const double h = 1e-5;
            const PhasePoint pp = kepler_state(orbit, t + h), pm = kepler_state(orbit, t - h);
            const Vec3 xdot = (1.0 / (2 * h)) * (pp.x - pm.x);
            const Vec3 xidot = (1.0 / (2 * h)) * (pp.xi - pm.xi);
            const double r = norm(p.x);
            const Vec3 force = (-1.0 / (r * r * r)) * p.x;
            worst_flow = std::max({worst_flow, norm(xdot - p.xi), norm(xidot - force)});
        }
        push("kepler flow satisfies hamilton equations", worst_flow < 1e-5, worst_flow, 1e-5);
        push("energy conservation along flow", worst_E < 1e-8, worst_E, 1e-8);
    }
    {  // state normalizations at a small N
        const SemiclassicalScale s8 = make_scale(-0.5, 8);
        const AlphaFrame f = standard_frame(0.4);
        const double n1 = sph_norm(make_spherical_state(f, 8));
        const double n2 = momentum_norm(make_momentum_state(f, s8));
        push("spherical state unit norm", std::abs(n1 - 1.0) < 1e-6, std::abs(n1 - 1.0), 1e-6);
        push("momentum state unit norm", std::abs(n2 - 1.0) < 1e-6, std::abs(n2 - 1.0), 1e-6);
    }
    {  // phase covariance and degree consistency
        const AlphaFrame f = standard_frame(0.3);
        const SphericalState st = make_spherical_state(f, 12);
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const double s = two_pi * (i + 0.25) / 20;
            const SpherePoint gc = great_circle(f, s);
            const cplx want = st.c_N * std::exp(cplx(0.0, 12.0 * s));
            worst = std::max(worst, std::abs(sph_coherent_eval(st, gc.u) - want));
        }
        push("degree consistency along the great circle", worst < 1e-12, worst, 1e-12);
    }
    {  // Im P >= 0 with equality on the manifold
        const AlphaFrame f = standard_frame(0.7);
        const SymbolSpec sym = radial_momentum_bump(1.0, 3.0);
        const OscillatoryForm of = oscillatory_form(sym, f, f, sc);
        double min_im = 1e300, worst_on = 0.0;
        for (int i = 0; i < 20000; ++i) {
            const Vec3 x = 2.0 * rand_vec3(), xi = 2.0 * rand_vec3(), v = rand_vec3();
            try {
                min_im = std::min(min_im, of.phase(x, xi, v).imag());
            } catch (const precondition_error&) {
            }
        }
        for (int i = 0; i < 50; ++i) {
            const double beta = two_pi * (i + 0.5) / 50;
            const CriticalPoint cp = critical_point(beta, 0.7);
            worst_on = std::max(worst_on, std::abs(of.phase(cp.x, cp.xi, cp.v).imag()));
        }
        push("Im P nonnegative", min_im > -1e-12, min_im, -1e-12);
        push("Im P vanishes on the critical manifold", worst_on < 1e-10, worst_on, 1e-10);
    }
    {  // leading-order scalar identity
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const double beta = two_pi * (i + 0.5) / 100;
            const double theta0 = 0.39 + 0.011 * i;
            const double want = 0.5 * (1.0 - std::sin(beta) * std::sin(theta0));
            worst = std::max(worst, std::abs(leading_order_factor(beta, theta0) - want));
        }
        push("leading-order scalar identity", worst < 1e-12, worst, 1e-12);
    }
    {  // Hessian closed form vs finite differences (spot check)
        double worst = 0.0;
        for (const auto& [b, t0] : std::vector<std::pair<double, double>>{
                 {0.3, 0.5}, {2.1, 1.0}, {4.0, pi / 2 - 0.1}}) {
            const double closed = hessian_det_closed(b, t0);
            const double numeric = hessian_numeric(b, t0).sqrt_abs_det;
            worst = std::max(worst, std::abs(numeric - closed) / closed);
        }
        push("hessian determinant closed form", worst < 1e-4, worst, 1e-4);
    }
    return out;
}

}  // namespace hcs
