#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hcs {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using Vec4 = std::array<double, 4>;

// ---------------------------------------------------------------- errors

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition.
struct precondition_error : error {
    using error::error;
};

/// Query at an undefined collision instant of a zero-angular-momentum orbit.
struct collision_time_error : precondition_error {
    using precondition_error::precondition_error;
};

/// An iterative or sampled numerical scheme failed to reach its target.
struct nonconvergence_error : error {
    using error::error;
};

/// Malformed configuration (CLI flags or JSON config file).
struct config_error : error {
    using error::error;
};

// ---------------------------------------------------------------- small vectors

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec4 operator+(const Vec4& a, const Vec4& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]}; }
inline Vec4 operator-(const Vec4& a, const Vec4& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]}; }
inline Vec4 operator*(double s, const Vec4& a) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double dot(const Vec4& a, const Vec4& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm2(const Vec4& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }
inline double norm(const Vec4& a) { return std::sqrt(norm2(a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// ---------------------------------------------------------------- summation

/// Compensated (Kahan) accumulator; reduction order independent to ~1 ulp.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0.0;
    double c_ = 0.0;
};

class KahanCSum {
  public:
    void add(const cplx& z) {
        re_.add(z.real());
        im_.add(z.imag());
    }
    cplx value() const { return {re_.value(), im_.value()}; }

  private:
    KahanSum re_, im_;
};

// ---------------------------------------------------------------- misc numerics

/// z^n by binary exponentiation, n >= 0.
inline cplx cpow_int(cplx z, int n) {
    cplx r = 1.0;
    while (n > 0) {
        if (n & 1) r *= z;
        z *= z;
        n >>= 1;
    }
    return r;
}

/// C_c^infinity mollifier: exp(1 - 1/(1-r^2)) on |r|<1, zero outside. Peak value 1 at r=0.
inline double smooth_bump(double r) {
    const double r2 = r * r;
    if (r2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - r2));
}

/// Smooth step: 0 for t<=0, 1 for t>=1.
inline double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

/// Complex log on the branch whose argument lies within pi of ref_arg.
inline cplx log_near(const cplx& z, double ref_arg) {
    double a = std::arg(z);
    a += two_pi * std::round((ref_arg - a) / two_pi);
    return {std::log(std::abs(z)), a};
}

/// Determinant of a dense complex matrix by partially pivoted elimination.
template <std::size_t N>
cplx det_complex(std::array<std::array<cplx, N>, N> m) {
    cplx det = 1.0;
    for (std::size_t k = 0; k < N; ++k) {
        std::size_t piv = k;
        double best = std::abs(m[k][k]);
        for (std::size_t i = k + 1; i < N; ++i) {
            const double v = std::abs(m[i][k]);
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best == 0.0) return 0.0;
        if (piv != k) {
            std::swap(m[piv], m[k]);
            det = -det;
        }
        det *= m[k][k];
        for (std::size_t i = k + 1; i < N; ++i) {
            const cplx f = m[i][k] / m[k][k];
            for (std::size_t j = k; j < N; ++j) m[i][j] -= f * m[k][j];
        }
    }
    return det;
}

}  // namespace hcs
