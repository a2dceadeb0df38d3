/**
 * @file stokes.hpp
 * @brief Normalized Stokes-space primitives: 3-vectors, 3x3 matrices,
 *        exact retarder rotations and singular values.
 *
 * A retarder with retardation delta and eigenmode azimuth psi on the
 * Poincare equator acts on normalized Stokes vectors as the rotation by
 * delta about the axis (cos psi, sin psi, 0):
 *
 *   R = cos(delta) I + sin(delta) [a]x + (1 - cos(delta)) a a^T
 *
 * All angles are radians.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace depol {

struct StokesVector {
    double s1 = 0.0;
    double s2 = 0.0;
    double s3 = 0.0;

    [[nodiscard]] double norm() const noexcept { return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3); }

    [[nodiscard]] double operator[](int i) const noexcept { return i == 0 ? s1 : (i == 1 ? s2 : s3); }

    friend bool operator==(const StokesVector&, const StokesVector&) = default;
};

/**
 * Real 3x3 matrix, row-major. Indices are zero-based: (0,0) is the S1/S1
 * entry.
 */
class Matrix3 {
public:
    constexpr Matrix3() = default;

    constexpr Matrix3(double a00, double a01, double a02,
                      double a10, double a11, double a12,
                      double a20, double a21, double a22) noexcept
        : m_{a00, a01, a02, a10, a11, a12, a20, a21, a22} {}

    static constexpr Matrix3 zero() noexcept { return {}; }

    static constexpr Matrix3 identity() noexcept { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

    static constexpr Matrix3 diagonal(double d0, double d1, double d2) noexcept {
        return {d0, 0, 0, 0, d1, 0, 0, 0, d2};
    }

    [[nodiscard]] constexpr double operator()(int r, int c) const noexcept { return m_[r * 3 + c]; }
    constexpr double& operator()(int r, int c) noexcept { return m_[r * 3 + c]; }

    [[nodiscard]] constexpr const std::array<double, 9>& entries() const noexcept { return m_; }

    [[nodiscard]] constexpr Matrix3 transpose() const noexcept {
        return {m_[0], m_[3], m_[6], m_[1], m_[4], m_[7], m_[2], m_[5], m_[8]};
    }

    [[nodiscard]] constexpr double determinant() const noexcept {
        return m_[0] * (m_[4] * m_[8] - m_[5] * m_[7])
             - m_[1] * (m_[3] * m_[8] - m_[5] * m_[6])
             + m_[2] * (m_[3] * m_[7] - m_[4] * m_[6]);
    }

    constexpr Matrix3& operator+=(const Matrix3& o) noexcept {
        for (int i = 0; i < 9; ++i) m_[i] += o.m_[i];
        return *this;
    }

    constexpr Matrix3& operator-=(const Matrix3& o) noexcept {
        for (int i = 0; i < 9; ++i) m_[i] -= o.m_[i];
        return *this;
    }

    constexpr Matrix3& operator*=(double k) noexcept {
        for (auto& v : m_) v *= k;
        return *this;
    }

    friend constexpr Matrix3 operator+(Matrix3 a, const Matrix3& b) noexcept { return a += b; }
    friend constexpr Matrix3 operator-(Matrix3 a, const Matrix3& b) noexcept { return a -= b; }
    friend constexpr Matrix3 operator*(Matrix3 a, double k) noexcept { return a *= k; }
    friend constexpr Matrix3 operator*(double k, Matrix3 a) noexcept { return a *= k; }

    friend constexpr Matrix3 operator*(const Matrix3& a, const Matrix3& b) noexcept {
        Matrix3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
            }
        }
        return r;
    }

    friend bool operator==(const Matrix3&, const Matrix3&) = default;

private:
    std::array<double, 9> m_{};
};

/// Largest absolute entrywise difference.
[[nodiscard]] inline double max_abs_diff(const Matrix3& a, const Matrix3& b) noexcept {
    double d = 0.0;
    for (int i = 0; i < 9; ++i) d = std::max(d, std::abs(a.entries()[i] - b.entries()[i]));
    return d;
}

[[nodiscard]] inline double max_abs_entry(const Matrix3& a) noexcept { return max_abs_diff(a, Matrix3::zero()); }

[[nodiscard]] constexpr StokesVector apply(const Matrix3& m, const StokesVector& s) noexcept {
    return {m(0, 0) * s.s1 + m(0, 1) * s.s2 + m(0, 2) * s.s3,
            m(1, 0) * s.s1 + m(1, 1) * s.s2 + m(1, 2) * s.s3,
            m(2, 0) * s.s1 + m(2, 1) * s.s2 + m(2, 2) * s.s3};
}

namespace detail {

// Rotation about the equatorial axis (cp, sp, 0) with cos/sin of the
// rotation angle already evaluated.
[[nodiscard]] constexpr Matrix3 equatorial_rotation(double cd, double sd, double cp, double sp) noexcept {
    const double v = 1.0 - cd;
    return {cd + v * cp * cp, v * cp * sp,      sd * sp,
            v * cp * sp,      cd + v * sp * sp, -sd * cp,
            -sd * sp,         sd * cp,          cd};
}

}  // namespace detail

/**
 * Exact retarder rotation matrix for retardation @p delta and eigenmode
 * azimuth @p psi. Entries carry both psi and 2 psi harmonics, so the
 * period in psi is 2 pi.
 */
[[nodiscard]] inline Matrix3 retarder_matrix(double delta, double psi) noexcept {
    return detail::equatorial_rotation(std::cos(delta), std::sin(delta), std::cos(psi), std::sin(psi));
}

// First-order quarterwave plate (delta = pi/2 + xi): sin(xi) ~ xi, cos(xi) ~ 1.
[[nodiscard]] inline Matrix3 qwp_approx_matrix(double xi, double psi) noexcept {
    const double c2 = std::cos(2.0 * psi);
    const double s2 = std::sin(2.0 * psi);
    const double c1 = std::cos(psi);
    const double s1 = std::sin(psi);
    return {(1.0 - xi) / 2.0 + c2 * (1.0 + xi) / 2.0, s2 * (1.0 + xi) / 2.0, s1,
            s2 * (1.0 + xi) / 2.0, (1.0 - xi) / 2.0 - c2 * (1.0 + xi) / 2.0, -c1,
            -s1, c1, -xi};
}

// First-order halfwave plate (delta = pi + xi).
[[nodiscard]] inline Matrix3 hwp_approx_matrix(double xi, double psi) noexcept {
    const double c2 = std::cos(2.0 * psi);
    const double s2 = std::sin(2.0 * psi);
    const double c1 = std::cos(psi);
    const double s1 = std::sin(psi);
    return {c2, s2, -xi * s1,
            s2, -c2, xi * c1,
            xi * s1, -xi * c1, -1.0};
}

/**
 * Singular values of @p m in descending order.
 *
 * One-sided (Hestenes) Jacobi: plane rotations orthogonalize the columns
 * of m, which diagonalizes m^T m without forming it. The singular values
 * are the final column norms, accurate to a few ulps of the largest one,
 * so small values are not lost to the squaring in m^T m.
 */
[[nodiscard]] inline std::array<double, 3> singular_values(const Matrix3& m) {
    std::array<std::array<double, 3>, 3> col{};
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r) col[c][r] = m(r, c);
    }
    auto dot = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    };

    constexpr double eps = 1e-15;
    for (int sweep = 0; sweep < 64; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                const double alpha = dot(col[p], col[p]);
                const double beta = dot(col[q], col[q]);
                const double gamma = dot(col[p], col[q]);
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int r = 0; r < 3; ++r) {
                    const double xp = col[p][r];
                    const double xq = col[q][r];
                    col[p][r] = c * xp - s * xq;
                    col[q][r] = s * xp + c * xq;
                }
            }
        }
        if (!rotated) break;
    }

    std::array<double, 3> sigma{std::sqrt(dot(col[0], col[0])), std::sqrt(dot(col[1], col[1])),
                                std::sqrt(dot(col[2], col[2]))};
    std::sort(sigma.begin(), sigma.end(), std::greater<>{});
    return sigma;
}

/// Tolerance on |s_in| - 1 accepted as "unit".
inline constexpr double unit_tolerance = 1e-9;

/**
 * Degree of polarization |mean_m * s_in| for a fully polarized input.
 * Throws std::invalid_argument if s_in is not a unit vector.
 */
[[nodiscard]] inline double dop_for_input(const Matrix3& mean_m, const StokesVector& s_in) {
    if (!(std::abs(s_in.norm() - 1.0) <= unit_tolerance)) {
        throw std::invalid_argument("input Stokes vector must have unit length");
    }
    return apply(mean_m, s_in).norm();
}

}  // namespace depol
