/**
 * @file cascade.hpp
 * @brief Cascades of rotating waveplates and the exact time average of
 *        their Stokes-space rotation matrix.
 *
 * Plate i rotates its eigenmode azimuth as psi_i(tau) = 2 pi m_i tau + zeta_i
 * with normalized time tau = t / T in [0, 1). Light traverses plate 0 first,
 * so the cascade matrix is R_{p-1} ... R_1 R_0.
 *
 * Every entry of the cascade matrix is a trigonometric polynomial in tau
 * whose harmonics are bounded by H = 2 sum |m_i| (each plate contributes
 * psi and 2 psi terms). Averaging N >= H + 1 uniform samples therefore
 * yields the DC term exactly: a harmonic 0 < |h| <= H < N never aliases
 * onto zero.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stokes.hpp"

namespace depol {

class PlateKind {
public:
    enum class Type { Half, Quarter, Custom };

    static constexpr PlateKind half() noexcept { return PlateKind(Type::Half, std::numbers::pi); }
    static constexpr PlateKind quarter() noexcept { return PlateKind(Type::Quarter, std::numbers::pi / 2.0); }

    static PlateKind custom(double delta0) {
        if (!std::isfinite(delta0)) throw std::invalid_argument("custom retardation must be finite");
        return PlateKind(Type::Custom, delta0);
    }

    [[nodiscard]] constexpr Type type() const noexcept { return type_; }

    /// Nominal retardation in radians.
    [[nodiscard]] constexpr double nominal() const noexcept { return delta0_; }

    /// Single-letter tag: 'H', 'Q' or 'C'.
    [[nodiscard]] constexpr char letter() const noexcept {
        switch (type_) {
            case Type::Half: return 'H';
            case Type::Quarter: return 'Q';
            default: return 'C';
        }
    }

    friend constexpr bool operator==(const PlateKind&, const PlateKind&) = default;

private:
    constexpr PlateKind(Type t, double d) noexcept : type_(t), delta0_(d) {}

    Type type_;
    double delta0_;
};

/// Largest accepted |xi|; the error model assumes |xi| << 1.
inline constexpr double max_retardation_error = 0.5;

struct PlateSpec {
    PlateKind kind = PlateKind::quarter();
    double xi = 0.0;  ///< retardation error, actual delta = nominal + xi
    int m = 1;        ///< relative drive frequency, nonzero
    double zeta = 0.0;  ///< start phase

    [[nodiscard]] double retardation() const noexcept { return kind.nominal() + xi; }

    [[nodiscard]] double azimuth(double tau) const noexcept {
        return 2.0 * std::numbers::pi * static_cast<double>(m) * tau + zeta;
    }
};

struct CascadeSpec {
    std::vector<PlateSpec> plates;

    [[nodiscard]] std::size_t size() const noexcept { return plates.size(); }
};

/// Throws std::invalid_argument on an empty cascade, zero frequency,
/// non-finite values or |xi| above max_retardation_error.
inline void validate(const CascadeSpec& spec) {
    if (spec.plates.empty()) throw std::invalid_argument("cascade must contain at least one plate");
    for (std::size_t i = 0; i < spec.plates.size(); ++i) {
        const auto& p = spec.plates[i];
        const std::string tag = "plate " + std::to_string(i + 1);
        if (p.m == 0) throw std::invalid_argument(tag + ": drive frequency m" + std::to_string(i + 1) + " is zero");
        if (!std::isfinite(p.xi) || !std::isfinite(p.zeta)) throw std::invalid_argument(tag + ": non-finite xi or zeta");
        if (std::abs(p.xi) > max_retardation_error) {
            throw std::invalid_argument(tag + ": |xi| exceeds " + std::to_string(max_retardation_error));
        }
    }
}

/// Harmonic bound H = 2 sum |m_i| of the cascade matrix entries.
[[nodiscard]] inline int harmonic_bound(const CascadeSpec& spec) noexcept {
    int h = 0;
    for (const auto& p : spec.plates) h += 2 * std::abs(p.m);
    return h;
}

/// Default sample count N = 2H + 2.
[[nodiscard]] inline int default_sample_count(const CascadeSpec& spec) noexcept { return 2 * harmonic_bound(spec) + 2; }

/// Rotation matrix of the whole cascade at normalized time @p tau.
[[nodiscard]] inline Matrix3 cascade_matrix_at(const CascadeSpec& spec, double tau) {
    validate(spec);
    Matrix3 r = Matrix3::identity();
    for (const auto& p : spec.plates) r = retarder_matrix(p.retardation(), p.azimuth(tau)) * r;
    return r;
}

/**
 * Uniform-time sampler for a cascade whose frequencies, kinds and start
 * phases are fixed. The eigenmode axes at every sample instant are
 * precomputed, so averaging for another error vector costs one sin/cos
 * pair per plate plus the matrix products.
 */
class CascadeSampler {
public:
    CascadeSampler(const CascadeSpec& spec, int samples) : kinds_(), samples_(samples) {
        validate(spec);
        if (samples <= harmonic_bound(spec)) {
            throw std::invalid_argument("sample count must exceed the harmonic bound 2*sum|m| = "
                                        + std::to_string(harmonic_bound(spec)));
        }
        const std::size_t p = spec.size();
        kinds_.reserve(p);
        axes_.resize(p * static_cast<std::size_t>(samples) * 2);
        for (std::size_t i = 0; i < p; ++i) {
            kinds_.push_back(spec.plates[i].kind);
            for (int k = 0; k < samples; ++k) {
                // Reduce m k mod N before scaling so the phase stays exact for large k.
                const long long turns = (static_cast<long long>(spec.plates[i].m) * k) % samples;
                const double psi = 2.0 * std::numbers::pi * static_cast<double>(turns) / samples + spec.plates[i].zeta;
                const std::size_t at = (i * static_cast<std::size_t>(samples) + static_cast<std::size_t>(k)) * 2;
                axes_[at] = std::cos(psi);
                axes_[at + 1] = std::sin(psi);
            }
        }
    }

    [[nodiscard]] std::size_t plate_count() const noexcept { return kinds_.size(); }
    [[nodiscard]] int samples() const noexcept { return samples_; }

    /// Time-averaged cascade matrix for retardation errors @p xi (one per plate).
    [[nodiscard]] Matrix3 average(std::span<const double> xi) const {
        const std::size_t p = kinds_.size();
        if (xi.size() != p) throw std::invalid_argument("error vector length does not match plate count");
        std::vector<double> cd(p), sd(p);
        for (std::size_t i = 0; i < p; ++i) {
            const double delta = kinds_[i].nominal() + xi[i];
            cd[i] = std::cos(delta);
            sd[i] = std::sin(delta);
        }
        Matrix3 sum = Matrix3::zero();
        for (int k = 0; k < samples_; ++k) {
            Matrix3 r = plate_at(0, k, cd[0], sd[0]);
            for (std::size_t i = 1; i < p; ++i) r = plate_at(i, k, cd[i], sd[i]) * r;
            sum += r;
        }
        return sum * (1.0 / samples_);
    }

private:
    [[nodiscard]] Matrix3 plate_at(std::size_t i, int k, double cd, double sd) const noexcept {
        const std::size_t at = (i * static_cast<std::size_t>(samples_) + static_cast<std::size_t>(k)) * 2;
        return detail::equatorial_rotation(cd, sd, axes_[at], axes_[at + 1]);
    }

    std::vector<PlateKind> kinds_;
    std::vector<double> axes_;
    int samples_;
};

[[nodiscard]] inline std::vector<double> errors_of(const CascadeSpec& spec) {
    std::vector<double> xi;
    xi.reserve(spec.size());
    for (const auto& p : spec.plates) xi.push_back(p.xi);
    return xi;
}

/// Exact time average over one depolarization interval using @p samples
/// uniform instants (must exceed the harmonic bound).
[[nodiscard]] inline Matrix3 time_average(const CascadeSpec& spec, int samples) {
    const CascadeSampler sampler(spec, samples);
    return sampler.average(errors_of(spec));
}

[[nodiscard]] inline Matrix3 time_average(const CascadeSpec& spec) {
    validate(spec);
    return time_average(spec, default_sample_count(spec));
}

/// Worst-case residual DOP over all inputs: largest singular value of the mean.
[[nodiscard]] inline double residual_dop_max(const CascadeSpec& spec) { return singular_values(time_average(spec))[0]; }

[[nodiscard]] inline double residual_dop_for_input(const CascadeSpec& spec, const StokesVector& s_in) {
    return dop_for_input(time_average(spec), s_in);
}

/// Same cascade with every drive frequency negated.
[[nodiscard]] inline CascadeSpec negated(CascadeSpec spec) {
    for (auto& p : spec.plates) p.m = -p.m;
    return spec;
}

/// Same plates traversed in reverse order, each keeping kind, xi, m and zeta.
[[nodiscard]] inline CascadeSpec reversed(CascadeSpec spec) {
    std::reverse(spec.plates.begin(), spec.plates.end());
    return spec;
}

}  // namespace depol
