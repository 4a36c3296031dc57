#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <future>
#include <thread>
#include <vector>

#include "hcs/fft.hpp"
#include "hcs/states.hpp"

#include <nlohmann/json.hpp>

namespace hcs {

static_assert(std::endian::native == std::endian::little,
              "grid container assumes a little-endian host");

enum class Space : std::uint64_t { position = 0, momentum = 1 };

struct GridSpec {
    Vec3 origin{};
    Vec3 spacing{};
    std::array<int, 3> extents{};
};

/// Uniform complex-sampled grid carrier of a wavefunction, immutable once built.
struct GridState {
    GridSpec spec;
    Space space = Space::momentum;
    SemiclassicalScale scale;
    std::vector<cplx> samples;  // row-major, index (i*n1 + j)*n2 + k

    std::size_t size() const {
        return std::size_t(spec.extents[0]) * spec.extents[1] * spec.extents[2];
    }
    Vec3 point(int i, int j, int k) const {
        return {spec.origin[0] + i * spec.spacing[0], spec.origin[1] + j * spec.spacing[1],
                spec.origin[2] + k * spec.spacing[2]};
    }
    double cell_volume() const { return spec.spacing[0] * spec.spacing[1] * spec.spacing[2]; }
};

inline double grid_norm(const GridState& g) {
    KahanSum acc;
    for (const cplx& z : g.samples) acc.add(std::norm(z));
    return std::sqrt(acc.value() * g.cell_volume());
}

/// Default momentum half-width: wide enough that the |xi|^{-8} tail mass stays
/// below 1e-4 down to N = 0.
inline double default_momentum_halfwidth(const SemiclassicalScale& sc) {
    return sc.p0 * (3.0 + 5.0 / (sc.N + 1));
}

/// Sample the closed-form momentum state on a symmetric n^3 grid.
inline GridState make_momentum_grid(const MomentumState& st, int n, double xi_halfwidth = 0.0) {
    if (n < 2 || n % 2 != 0) throw precondition_error("make_momentum_grid: n must be even");
    const double hw = xi_halfwidth > 0.0 ? xi_halfwidth : default_momentum_halfwidth(st.scale);
    const double d = 2.0 * hw / n;
    GridState g;
    g.spec.origin = {-0.5 * n * d, -0.5 * n * d, -0.5 * n * d};
    g.spec.spacing = {d, d, d};
    g.spec.extents = {n, n, n};
    g.space = Space::momentum;
    g.scale = st.scale;
    g.samples.resize(g.size());

    const unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    std::vector<std::future<void>> jobs;
    const int chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const int i0 = int(w) * chunk, i1 = std::min(n, i0 + chunk);
        if (i0 >= i1) break;
        jobs.push_back(std::async(std::launch::async, [&, i0, i1] {
            for (int i = i0; i < i1; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        g.samples[(std::size_t(i) * n + j) * n + k] =
                            momentum_eval(st, g.point(i, j, k));
        }));
    }
    for (auto& j : jobs) j.get();
    return g;
}

/// Captured fraction of the unit L^2 mass on the grid.
inline double captured_mass(const GridState& momentum_grid) {
    KahanSum acc;
    for (const cplx& z : momentum_grid.samples) acc.add(std::norm(z));
    return acc.value() * momentum_grid.cell_volume();
}

/// Discrete semiclassical inverse Fourier transform of a symmetric momentum
/// grid onto its dual position grid (dx * dxi * n = 2 pi hbar per axis), with
/// the (2 pi hbar)^{-3/2} convention. Optionally recenters the position grid
/// at `center`.
inline GridState to_position_grid(const GridState& mom, const Vec3& center = {0, 0, 0},
                                  double min_coverage = 1.0 - 1e-4) {
    if (mom.space != Space::momentum)
        throw precondition_error("to_position_grid: momentum-space input required");
    const double mass = captured_mass(mom);
    if (mass < min_coverage)
        throw precondition_error("to_position_grid: grid captures only " + std::to_string(mass) +
                                 " of the unit mass (need " + std::to_string(min_coverage) + ")");
    const auto n = mom.spec.extents;
    const double hbar = mom.scale.hbar;
    GridState pos;
    pos.space = Space::position;
    pos.scale = mom.scale;
    pos.spec.extents = n;
    for (int d = 0; d < 3; ++d) {
        const double dx = two_pi * hbar / (n[d] * mom.spec.spacing[d]);
        pos.spec.spacing[d] = dx;
        pos.spec.origin[d] = center[d] - 0.5 * n[d] * dx;
    }

    std::vector<cplx> data(mom.samples);
    // Phase folding: x_k . xi_j / hbar = sum_d 2 pi (k - n/2)(j - n/2)/n + center shift.
    for (int i = 0; i < n[0]; ++i)
        for (int j = 0; j < n[1]; ++j)
            for (int k = 0; k < n[2]; ++k) {
                const int par = (i + j + k) & 1;
                cplx f = par ? -1.0 : 1.0;
                if (center[0] != 0.0 || center[1] != 0.0 || center[2] != 0.0) {
                    const Vec3 xi = mom.point(i, j, k);
                    f *= std::exp(cplx(0.0, dot(center, xi) / hbar));
                }
                data[(std::size_t(i) * n[1] + j) * n[2] + k] *= f;
            }
    fft3_inplace(data, n[0], n[1], n[2], +1);

    const double dv = mom.cell_volume();
    const cplx unit = std::exp(cplx(0.0, 0.5 * pi * (n[0] + n[1] + n[2])));
    const cplx pref = unit * dv * std::pow(two_pi * hbar, -1.5);
    for (int i = 0; i < n[0]; ++i)
        for (int j = 0; j < n[1]; ++j)
            for (int k = 0; k < n[2]; ++k) {
                const int par = (i + j + k) & 1;
                data[(std::size_t(i) * n[1] + j) * n[2] + k] *= par ? -pref : pref;
            }
    pos.samples = std::move(data);
    return pos;
}

// ======================================================================
// Serialization: self-describing binary container + JSON sidecar
// ======================================================================

namespace detail {
inline void put_u64(std::ofstream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), 8);
}
inline void put_f64(std::ofstream& f, double v) { f.write(reinterpret_cast<const char*>(&v), 8); }
inline std::uint64_t get_u64(std::ifstream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline double get_f64(std::ifstream& f) {
    double v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
}  // namespace detail

inline constexpr char grid_magic[8] = {'H', 'C', 'S', 'G', 'R', 'D', '0', '1'};

inline void save_grid(const GridState& g, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw error("save_grid: cannot open " + path);
    f.write(grid_magic, 8);
    detail::put_u64(f, 1);  // container version
    detail::put_u64(f, static_cast<std::uint64_t>(g.space));
    detail::put_u64(f, std::uint64_t(g.scale.N));
    detail::put_f64(f, g.scale.E);
    detail::put_f64(f, g.scale.p0);
    detail::put_f64(f, g.scale.hbar);
    for (int d = 0; d < 3; ++d) detail::put_f64(f, g.spec.origin[d]);
    for (int d = 0; d < 3; ++d) detail::put_f64(f, g.spec.spacing[d]);
    for (int d = 0; d < 3; ++d) detail::put_u64(f, std::uint64_t(g.spec.extents[d]));
    for (const cplx& z : g.samples) {
        detail::put_f64(f, z.real());
        detail::put_f64(f, z.imag());
    }
    if (!f) throw error("save_grid: write failed for " + path);

    nlohmann::json side;
    side["container"] = "hcs-grid";
    side["version"] = 1;
    side["space"] = g.space == Space::position ? "position" : "momentum";
    side["scale"] = {{"N", g.scale.N}, {"E", g.scale.E}, {"p0", g.scale.p0}, {"hbar", g.scale.hbar}};
    side["origin"] = g.spec.origin;
    side["spacing"] = g.spec.spacing;
    side["extents"] = g.spec.extents;
    side["samples"] = g.size();
    std::ofstream js(path + ".json");
    js << side.dump(2) << "\n";
}

inline GridState load_grid(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw error("load_grid: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, grid_magic, 8) != 0) throw error("load_grid: bad magic");
    const std::uint64_t version = detail::get_u64(f);
    if (version != 1) throw error("load_grid: unsupported container version");
    GridState g;
    g.space = static_cast<Space>(detail::get_u64(f));
    g.scale.N = int(detail::get_u64(f));
    g.scale.E = detail::get_f64(f);
    g.scale.p0 = detail::get_f64(f);
    g.scale.hbar = detail::get_f64(f);
    for (int d = 0; d < 3; ++d) g.spec.origin[d] = detail::get_f64(f);
    for (int d = 0; d < 3; ++d) g.spec.spacing[d] = detail::get_f64(f);
    for (int d = 0; d < 3; ++d) g.spec.extents[d] = int(detail::get_u64(f));
    g.samples.resize(g.size());
    for (cplx& z : g.samples) {
        const double re = detail::get_f64(f);
        const double im = detail::get_f64(f);
        z = {re, im};
    }
    if (!f) throw error("load_grid: truncated container " + path);
    return g;
}

}  // namespace hcs
