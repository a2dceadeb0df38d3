/**
 * @file analysis.hpp
 * @brief Residual-DOP analysis: first-order two-plate formulas, worst case
 *        over a retardation-error box, error-scaling fits and the uniform
 *        arccos(-1/3) retarder chain.
 */

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cascade.hpp"
#include "parallel.hpp"
#include "stokes.hpp"

namespace depol {

inline constexpr std::uint64_t default_seed = 0x5eed'0001ULL;

/// |xi_i| <= xi_max for every plate.
struct ErrorBox {
    double xi_max = 0.02;

    static constexpr double upper_limit = 0.3;

    void validate() const {
        if (!(xi_max >= 0.0 && xi_max <= upper_limit)) {
            throw std::invalid_argument("xi_max must lie in [0, 0.3], got " + std::to_string(xi_max));
        }
    }
};

// ---------------------------------------------------------------------------
// Two-plate cascade (halfwave plate at m1, then quarterwave plate at m2)
// ---------------------------------------------------------------------------

enum class ComboClass {
    Degenerate,       ///< ideal plates leave a nonzero mean
    Generic,          ///< mean ~ diag(0, 0, xi2)
    HalfHarmonic,     ///< 2 m2 = m1
    CounterRotating,  ///< m1 = -m2
};

[[nodiscard]] inline const char* to_string(ComboClass c) noexcept {
    switch (c) {
        case ComboClass::Degenerate: return "degenerate";
        case ComboClass::Generic: return "generic";
        case ComboClass::HalfHarmonic: return "half-harmonic";
        case ComboClass::CounterRotating: return "counter-rotating";
    }
    return "?";
}

[[nodiscard]] inline ComboClass classify_two_plate(int m1, int m2) {
    if (m1 == 0 || m2 == 0) throw std::invalid_argument("drive frequencies must be nonzero");
    if (m2 == m1 || m2 == 2 * m1) return ComboClass::Degenerate;
    if (m1 == -m2) return ComboClass::CounterRotating;
    if (2 * m2 == m1) return ComboClass::HalfHarmonic;
    return ComboClass::Generic;
}

[[nodiscard]] inline CascadeSpec two_plate(int m1, int m2, double xi1 = 0.0, double xi2 = 0.0, double zeta1 = 0.0,
                                           double zeta2 = 0.0) {
    return CascadeSpec{{PlateSpec{PlateKind::half(), xi1, m1, zeta1}, PlateSpec{PlateKind::quarter(), xi2, m2, zeta2}}};
}

/// First-order mean matrix of the two-plate cascade for a non-degenerate class.
[[nodiscard]] inline Matrix3 two_plate_mean_approx(ComboClass cls, double xi1, double xi2, double zeta1, double zeta2) {
    switch (cls) {
        case ComboClass::Generic:
            return Matrix3::diagonal(0.0, 0.0, xi2);
        case ComboClass::HalfHarmonic: {
            const double a = 2.0 * zeta2 - zeta1;
            return {0.0, 0.0, xi1 / 2.0 * std::sin(a),
                    0.0, 0.0, -xi1 / 2.0 * std::cos(a),
                    0.0, 0.0, xi2};
        }
        case ComboClass::CounterRotating: {
            const double c = xi1 / 2.0 * std::cos(zeta2 + zeta1);
            const double s = xi1 / 2.0 * std::sin(zeta2 + zeta1);
            return {-c, -s, 0.0,
                    -s, c, 0.0,
                    0.0, 0.0, xi2};
        }
        case ComboClass::Degenerate:
            break;
    }
    throw std::invalid_argument("no first-order closed form for a degenerate combination");
}

/**
 * First-order DOP_max estimate. For the half-harmonic class @c dop is the
 * commonly quoted sqrt(xi1^2/2 + xi2^2); @c alternative holds
 * sqrt(xi1^2/4 + xi2^2), the spectral norm of the half-harmonic mean matrix.
 * resolve_half_harmonic() decides between them numerically.
 */
struct TwoPlateEstimate {
    double dop = 0.0;
    std::optional<double> alternative;
};

[[nodiscard]] inline TwoPlateEstimate two_plate_dop_approx(ComboClass cls, double xi1, double xi2) {
    switch (cls) {
        case ComboClass::Generic:
            return {std::abs(xi2), std::nullopt};
        case ComboClass::HalfHarmonic:
            return {std::sqrt(xi1 * xi1 / 2.0 + xi2 * xi2), std::sqrt(xi1 * xi1 / 4.0 + xi2 * xi2)};
        case ComboClass::CounterRotating:
            return {std::max(std::abs(xi1 / 2.0), std::abs(xi2)), std::nullopt};
        case ComboClass::Degenerate:
            break;
    }
    throw std::invalid_argument("no first-order closed form for a degenerate combination");
}

struct HalfHarmonicResolution {
    enum class Winner { Printed, Alternative };

    double numeric = 0.0;      ///< exact DOP_max of the (2 m2, m2) cascade
    double printed = 0.0;      ///< sqrt(xi1^2/2 + xi2^2)
    double alternative = 0.0;  ///< sqrt(xi1^2/4 + xi2^2)
    double err_printed = 0.0;  ///< |numeric - printed| / numeric
    double err_alternative = 0.0;
    Winner winner = Winner::Alternative;

    [[nodiscard]] int candidates_within(double rel_tol) const noexcept {
        return (err_printed <= rel_tol ? 1 : 0) + (err_alternative <= rel_tol ? 1 : 0);
    }

    [[nodiscard]] const char* winner_formula() const noexcept {
        return winner == Winner::Printed ? "sqrt(xi1^2/2 + xi2^2)" : "sqrt(xi1^2/4 + xi2^2)";
    }
};

[[nodiscard]] inline HalfHarmonicResolution resolve_half_harmonic(double xi1, double xi2, int m2 = 1,
                                                                  double zeta1 = 0.0, double zeta2 = 0.0) {
    HalfHarmonicResolution r;
    r.numeric = residual_dop_max(two_plate(2 * m2, m2, xi1, xi2, zeta1, zeta2));
    const auto est = two_plate_dop_approx(ComboClass::HalfHarmonic, xi1, xi2);
    r.printed = est.dop;
    r.alternative = *est.alternative;
    const double denom = r.numeric > 0.0 ? r.numeric : 1.0;
    r.err_printed = std::abs(r.numeric - r.printed) / denom;
    r.err_alternative = std::abs(r.numeric - r.alternative) / denom;
    r.winner = r.err_printed < r.err_alternative ? HalfHarmonicResolution::Winner::Printed
                                                 : HalfHarmonicResolution::Winner::Alternative;
    return r;
}

// ---------------------------------------------------------------------------
// Worst case over an error box
// ---------------------------------------------------------------------------

/// Which retardation-error vectors to try inside the box.
struct XiPlan {
    bool corners = true;        ///< all 2^p sign patterns (+-xi_max)
    bool axes = true;           ///< one plate at +-xi_max, others 0
    std::size_t interior = 64;  ///< uniform random points
    std::vector<std::vector<double>> extra;  ///< explicit points, used as given
};

/// Materialized sample points. Every vector has one entry per plate.
struct SampleSet {
    std::vector<std::vector<double>> xi_points;
    std::vector<std::vector<double>> zeta_tuples;
};

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
[[nodiscard]] inline double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Random start-phase tuples in [0, 2 pi), preceded by the all-zero tuple
/// when @p include_zero is set. Depends only on (plates, count, seed).
[[nodiscard]] inline std::vector<std::vector<double>> phase_tuples(std::size_t plates, std::size_t random_count,
                                                                  std::uint64_t seed, bool include_zero = true) {
    std::vector<std::vector<double>> out;
    if (include_zero) out.emplace_back(plates, 0.0);
    std::mt19937_64 rng(seed ^ 0x9e37'79b9'7f4a'7c15ULL);
    for (std::size_t k = 0; k < random_count; ++k) {
        std::vector<double> z(plates);
        for (auto& v : z) v = 2.0 * std::numbers::pi * detail::unit_draw(rng);
        out.push_back(std::move(z));
    }
    return out;
}

/// Error vectors from @p plan. Interior points are drawn in the unit box and
/// scaled by xi_max, so boxes of different size share the same pattern.
[[nodiscard]] inline std::vector<std::vector<double>> xi_points(std::size_t plates, const ErrorBox& box,
                                                               const XiPlan& plan, std::uint64_t seed) {
    box.validate();
    std::vector<std::vector<double>> out;
    const double x = box.xi_max;
    if (plan.corners) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << plates); ++mask) {
            std::vector<double> v(plates);
            for (std::size_t i = 0; i < plates; ++i) v[i] = (mask >> i & 1U) ? x : -x;
            out.push_back(std::move(v));
        }
    }
    if (plan.axes) {
        for (std::size_t i = 0; i < plates; ++i) {
            for (double sign : {1.0, -1.0}) {
                std::vector<double> v(plates, 0.0);
                v[i] = sign * x;
                out.push_back(std::move(v));
            }
        }
    }
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < plan.interior; ++k) {
        std::vector<double> v(plates);
        for (auto& e : v) e = x * (2.0 * detail::unit_draw(rng) - 1.0);
        out.push_back(std::move(v));
    }
    for (const auto& e : plan.extra) {
        if (e.size() != plates) throw std::invalid_argument("explicit error vector has wrong length");
        out.push_back(e);
    }
    return out;
}

[[nodiscard]] inline SampleSet make_samples(std::size_t plates, const ErrorBox& box, const XiPlan& plan,
                                            std::size_t zeta_samples, std::uint64_t seed) {
    return {xi_points(plates, box, plan, seed), phase_tuples(plates, zeta_samples, seed)};
}

struct SampleCounts {
    std::size_t xi_points = 0;
    std::size_t zeta_tuples = 0;
    std::size_t evaluations = 0;
};

struct DopReport {
    Matrix3 mean_matrix;            ///< mean at the arg-max
    std::array<double, 3> sigma{};  ///< singular values of mean_matrix
    double dop_max = 0.0;           ///< == sigma[0]
    std::vector<double> worst_xi;
    std::vector<double> worst_zeta;
    /// Max over the error plan at the first phase tuple (all-zero by default).
    double dop_first_phase = 0.0;
    /// Max over the error plan, one entry per phase tuple.
    std::vector<double> per_phase_max;
    SampleCounts samples_used;
};

/**
 * Maximizes the residual DOP_max of @p tmpl over every (xi, zeta) pair of
 * @p samples. The xi and zeta fields of @p tmpl are ignored. Ties resolve
 * to the earliest (zeta, xi) index, so the result does not depend on the
 * thread count.
 */
[[nodiscard]] inline DopReport worst_case_dop(const CascadeSpec& tmpl, const SampleSet& samples, unsigned threads = 0) {
    validate(tmpl);
    if (samples.xi_points.empty() || samples.zeta_tuples.empty()) {
        throw std::invalid_argument("sampling plan is empty");
    }
    const std::size_t p = tmpl.size();
    for (const auto& z : samples.zeta_tuples) {
        if (z.size() != p) throw std::invalid_argument("phase tuple has wrong length");
    }
    for (const auto& x : samples.xi_points) {
        if (x.size() != p) throw std::invalid_argument("error vector has wrong length");
        for (double v : x) {
            if (!(std::abs(v) <= max_retardation_error)) throw std::invalid_argument("error vector outside bounds");
        }
    }

    const std::size_t nx = samples.xi_points.size();
    const std::size_t nz = samples.zeta_tuples.size();
    const int n_samples = default_sample_count(tmpl);
    std::vector<double> dop(nx * nz);

    parallel_for(
        nz,
        [&](std::size_t zi) {
            CascadeSpec spec = tmpl;
            for (std::size_t i = 0; i < p; ++i) spec.plates[i].zeta = samples.zeta_tuples[zi][i];
            const CascadeSampler sampler(spec, n_samples);
            for (std::size_t xi = 0; xi < nx; ++xi) {
                dop[zi * nx + xi] = singular_values(sampler.average(samples.xi_points[xi]))[0];
            }
        },
        threads);

    DopReport report;
    report.per_phase_max.assign(nz, -1.0);
    std::size_t best = 0;
    for (std::size_t k = 0; k < dop.size(); ++k) {
        if (dop[k] > dop[best]) best = k;
        auto& pm = report.per_phase_max[k / nx];
        pm = std::max(pm, dop[k]);
    }
    const std::size_t bz = best / nx;
    const std::size_t bx = best % nx;

    CascadeSpec worst = tmpl;
    for (std::size_t i = 0; i < p; ++i) {
        worst.plates[i].zeta = samples.zeta_tuples[bz][i];
        worst.plates[i].xi = samples.xi_points[bx][i];
    }
    report.mean_matrix = CascadeSampler(worst, n_samples).average(samples.xi_points[bx]);
    report.sigma = singular_values(report.mean_matrix);
    report.dop_max = report.sigma[0];
    report.worst_xi = samples.xi_points[bx];
    report.worst_zeta = samples.zeta_tuples[bz];
    report.dop_first_phase = report.per_phase_max.front();
    report.samples_used = {nx, nz, nx * nz};
    return report;
}

/// Default plan: corners, axes, 64 interior points and 32 random phase tuples
/// plus the all-zero tuple.
[[nodiscard]] inline DopReport worst_case_dop(const CascadeSpec& tmpl, const ErrorBox& box,
                                              std::size_t zeta_samples = 32, const XiPlan& plan = {},
                                              std::uint64_t seed = default_seed, unsigned threads = 0) {
    validate(tmpl);
    return worst_case_dop(tmpl, make_samples(tmpl.size(), box, plan, zeta_samples, seed), threads);
}

// ---------------------------------------------------------------------------
// Error scaling
// ---------------------------------------------------------------------------

/// n points from lo to hi, equally spaced in log.
[[nodiscard]] inline std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0 && hi >= lo) || n == 0) throw std::invalid_argument("geometric grid needs 0 < lo <= hi and n >= 1");
    if (n == 1) return {lo};
    std::vector<double> g(n);
    const double step = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
    g.back() = hi;
    return g;
}

/// Least-squares slope of log(y) against log(x). NaN for fewer than two points.
[[nodiscard]] inline double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("fit needs equally many x and y values");
    const std::size_t n = x.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

/// Below this worst-case DOP a log-log fit is meaningless.
inline constexpr double dop_fit_floor = 1e-14;

struct ScalingFit {
    std::vector<double> xi_max;
    std::vector<double> dop;
    double slope = std::numeric_limits<double>::quiet_NaN();
    bool below_floor = false;  ///< some dop < dop_fit_floor; slope left NaN
};

struct ScalingOptions {
    std::size_t zeta_samples = 32;
    XiPlan plan{};
    std::uint64_t seed = default_seed;
    unsigned threads = 0;
};

/// Worst-case DOP at each grid value, no precondition on the grid beyond
/// valid error boxes.
[[nodiscard]] inline ScalingFit sweep_worst_case(const CascadeSpec& tmpl, std::span<const double> grid,
                                                 const ScalingOptions& opt = {}) {
    ScalingFit fit;
    const auto zetas = phase_tuples(tmpl.size(), opt.zeta_samples, opt.seed);
    for (double x : grid) {
        const SampleSet s{xi_points(tmpl.size(), ErrorBox{x}, opt.plan, opt.seed), zetas};
        fit.xi_max.push_back(x);
        fit.dop.push_back(worst_case_dop(tmpl, s, opt.threads).dop_max);
    }
    for (double d : fit.dop) fit.below_floor = fit.below_floor || d < dop_fit_floor;
    if (!fit.below_floor) fit.slope = fit_loglog_slope(fit.xi_max, fit.dop);
    return fit;
}

/**
 * Exponent k in DOP_max ~ xi_max^k. The grid needs at least four points,
 * spanning at least one decade, all within (0, 0.1].
 */
[[nodiscard]] inline ScalingFit scaling_exponent(const CascadeSpec& tmpl, std::span<const double> grid,
                                                 const ScalingOptions& opt = {}) {
    if (grid.size() < 4) throw std::invalid_argument("scaling fit needs at least 4 grid points");
    double lo = grid.front(), hi = grid.front();
    for (double x : grid) {
        if (!(x > 0.0 && x <= 0.1)) throw std::invalid_argument("scaling grid values must lie in (0, 0.1]");
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (hi < 10.0 * lo * (1.0 - 1e-12)) throw std::invalid_argument("scaling grid must span at least one decade");
    return sweep_worst_case(tmpl, grid, opt);
}

// ---------------------------------------------------------------------------
// Uniform arccos(-1/3) chain
// ---------------------------------------------------------------------------

/// Retardation whose single-plate mean is diag(1/3, 1/3, -1/3).
inline const double chain_retardation = std::acos(-1.0 / 3.0);

/**
 * Searches k in {0, +-1, +-2}^n, k != 0, with sum k_i m_i = 0. Such a
 * combination lets harmonics of different plates cancel into DC, so the
 * mean of the product no longer factors into the product of means.
 */
[[nodiscard]] inline std::optional<std::vector<int>> find_harmonic_collision(std::span<const int> m) {
    const std::size_t n = m.size();
    if (n > 10) throw std::invalid_argument("collision search limited to 10 plates");
    std::vector<int> k(n, -2);
    for (;;) {
        long long sum = 0;
        bool nonzero = false;
        for (std::size_t i = 0; i < n; ++i) {
            sum += static_cast<long long>(k[i]) * m[i];
            nonzero = nonzero || k[i] != 0;
        }
        if (nonzero && sum == 0) return k;
        std::size_t i = 0;
        while (i < n && k[i] == 2) k[i++] = -2;
        if (i == n) break;
        ++k[i];
    }
    return std::nullopt;
}

struct ChainResult {
    double dop = 0.0;     ///< residual DOP_max of the chain
    double target = 0.0;  ///< 3^-n
    bool collision_free = true;
    std::vector<int> collision;  ///< offending k vector when not collision-free
};

[[nodiscard]] inline CascadeSpec uniform_chain(std::span<const int> m) {
    CascadeSpec spec;
    for (int mi : m) spec.plates.push_back(PlateSpec{PlateKind::custom(chain_retardation), 0.0, mi, 0.0});
    return spec;
}

[[nodiscard]] inline ChainResult uniform_chain_dop(std::span<const int> m) {
    if (m.empty()) throw std::invalid_argument("chain needs at least one plate");
    ChainResult r;
    r.dop = residual_dop_max(uniform_chain(m));
    r.target = std::pow(3.0, -static_cast<double>(m.size()));
    if (auto k = find_harmonic_collision(m)) {
        r.collision_free = false;
        r.collision = std::move(*k);
    }
    return r;
}

}  // namespace depol
