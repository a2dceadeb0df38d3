/**
 * @file search.hpp
 * @brief Integer drive-frequency search for three-plate depolarizers and
 *        the reference list of known good combinations.
 *
 * A combination is "quadratic" when ideal plates depolarize completely and
 * the worst-case residual DOP grows like xi_max^2 instead of xi_max.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "cascade.hpp"
#include "parallel.hpp"

namespace depol {

enum class Arrangement {
    HQQ,  ///< halfwave, quarterwave, quarterwave
    QHQ,  ///< quarterwave, halfwave, quarterwave
};

using Triple = std::array<int, 3>;

[[nodiscard]] inline const char* to_string(Arrangement a) noexcept { return a == Arrangement::HQQ ? "hqq" : "qhq"; }

[[nodiscard]] inline std::array<PlateKind, 3> plate_kinds(Arrangement a) noexcept {
    if (a == Arrangement::HQQ) return {PlateKind::half(), PlateKind::quarter(), PlateKind::quarter()};
    return {PlateKind::quarter(), PlateKind::half(), PlateKind::quarter()};
}

/// Position of the halfwave plate in light-path order.
[[nodiscard]] constexpr std::size_t hwp_index(Arrangement a) noexcept { return a == Arrangement::HQQ ? 0 : 1; }

/// Ideal cascade (xi = 0, zeta = 0) for an arrangement and drive frequencies.
[[nodiscard]] inline CascadeSpec make_cascade(Arrangement a, const Triple& m) {
    const auto kinds = plate_kinds(a);
    CascadeSpec spec;
    for (std::size_t i = 0; i < 3; ++i) spec.plates.push_back(PlateSpec{kinds[i], 0.0, m[i], 0.0});
    return spec;
}

/// Verdict thresholds for the quadratic error law.
struct QuadraticCriteria {
    double slope_min = 1.8;
    double slope_max = 2.2;
    double ideal_floor = 1e-10;  ///< worst DOP with ideal plates must stay below
    double level_factor = 3.0;   ///< DOP_max <= level_factor * xi_max^2 at the box edge
    double grid_lo = 1e-3;
    double grid_hi = 0.031622776601683794;  ///< 10^-1.5
    std::size_t grid_points = 5;

    [[nodiscard]] std::vector<double> grid() const { return geometric_grid(grid_lo, grid_hi, grid_points); }
    [[nodiscard]] bool slope_ok(double s) const noexcept { return s >= slope_min && s <= slope_max; }
};

struct SearchOptions {
    QuadraticCriteria criteria{};
    std::size_t zeta_samples = 32;
    XiPlan plan{};
    std::uint64_t seed = default_seed;
    unsigned threads = 0;
    /// Run the slope sweep even when the ideal or level check already failed.
    bool always_sweep = false;
};

struct ComboResult {
    Arrangement arrangement = Arrangement::HQQ;
    Triple m{};
    std::vector<std::pair<double, double>> dop_at;  ///< (xi_max, worst-case DOP) over the slope grid
    double dop_ideal = 0.0;  ///< worst over phases with xi = 0
    double dop_level = 0.0;  ///< worst over the box passed to the search
    double slope = std::numeric_limits<double>::quiet_NaN();
    bool quadratic = false;
    std::string failure;  ///< empty when quadratic; otherwise "ideal", "level" or "slope"

    [[nodiscard]] int max_abs_m() const noexcept {
        return std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])});
    }
    [[nodiscard]] int sum_abs_m() const noexcept { return std::abs(m[0]) + std::abs(m[1]) + std::abs(m[2]); }
    [[nodiscard]] int abs_m_hwp() const noexcept { return std::abs(m[hwp_index(arrangement)]); }
};

/**
 * Evaluates one combination against the quadratic criteria. The level check
 * uses @p box; the slope is fitted over criteria.grid(). Phase tuples are
 * shared by all checks.
 */
[[nodiscard]] inline ComboResult evaluate_combo(Arrangement a, const Triple& m, const ErrorBox& box,
                                                const SearchOptions& opt = {}) {
    box.validate();
    ComboResult r;
    r.arrangement = a;
    r.m = m;
    const CascadeSpec tmpl = make_cascade(a, m);
    const auto zetas = phase_tuples(3, opt.zeta_samples, opt.seed);
    const auto& c = opt.criteria;

    // One zero-phase evaluation rules out most degenerate triples cheaply.
    r.dop_ideal = residual_dop_max(tmpl);
    if (r.dop_ideal <= c.ideal_floor) {
        const SampleSet ideal{{std::vector<double>(3, 0.0)}, zetas};
        r.dop_ideal = worst_case_dop(tmpl, ideal, opt.threads).dop_max;
    }

    const SampleSet level{xi_points(3, box, opt.plan, opt.seed), zetas};
    r.dop_level = worst_case_dop(tmpl, level, opt.threads).dop_max;

    const bool ideal_ok = r.dop_ideal < c.ideal_floor;
    const bool level_ok = r.dop_level <= c.level_factor * box.xi_max * box.xi_max;
    if ((ideal_ok && level_ok) || opt.always_sweep) {
        ScalingOptions so;
        so.zeta_samples = opt.zeta_samples;
        so.plan = opt.plan;
        so.seed = opt.seed;
        so.threads = opt.threads;
        const auto grid = c.grid();
        const auto fit = sweep_worst_case(tmpl, grid, so);
        for (std::size_t i = 0; i < grid.size(); ++i) r.dop_at.emplace_back(fit.xi_max[i], fit.dop[i]);
        r.slope = fit.slope;
    }
    const bool slope_ok = c.slope_ok(r.slope);

    r.quadratic = ideal_ok && level_ok && slope_ok;
    if (!ideal_ok) {
        r.failure = "ideal";
    } else if (!level_ok) {
        r.failure = "level";
    } else if (!slope_ok) {
        r.failure = "slope";
    }
    return r;
}

/// Upper bound accepted by enumerate_combos.
inline constexpr int max_search_bound = 12;

/// Nonzero triples with |m_i| <= max_m whose first entry is positive
/// (one representative per global negation), in lexicographic order.
[[nodiscard]] inline std::vector<Triple> canonical_triples(int max_m) {
    std::vector<Triple> out;
    for (int a = 1; a <= max_m; ++a) {
        for (int b = -max_m; b <= max_m; ++b) {
            for (int c = -max_m; c <= max_m; ++c) {
                if (b != 0 && c != 0) out.push_back({a, b, c});
            }
        }
    }
    return out;
}

/// Output order: max|m_i|, then sum |m_i|, then m lexicographically.
[[nodiscard]] inline bool combo_order(const ComboResult& x, const ComboResult& y) noexcept {
    return std::make_tuple(x.max_abs_m(), x.sum_abs_m(), x.m) < std::make_tuple(y.max_abs_m(), y.sum_abs_m(), y.m);
}

[[nodiscard]] inline std::vector<ComboResult> enumerate_combos(Arrangement a, int max_m, const ErrorBox& box,
                                                               const SearchOptions& opt = {}) {
    if (max_m < 1 || max_m > max_search_bound) {
        throw std::invalid_argument("max_m must lie in [1, " + std::to_string(max_search_bound) + "], got "
                                    + std::to_string(max_m));
    }
    box.validate();
    const auto triples = canonical_triples(max_m);
    std::vector<ComboResult> results(triples.size());
    SearchOptions inner = opt;
    inner.threads = 1;
    parallel_for(
        triples.size(), [&](std::size_t i) { results[i] = evaluate_combo(a, triples[i], box, inner); }, opt.threads);
    std::sort(results.begin(), results.end(), combo_order);
    return results;
}

struct QuadraticSummary {
    std::size_t evaluated = 0;
    std::size_t quadratic = 0;
    int min_max_abs_m = 0;  ///< 0 when no quadratic combo exists
    int min_sum_abs_m = 0;
    int min_abs_m_hwp = 0;
};

[[nodiscard]] inline QuadraticSummary summarize(std::span<const ComboResult> results) {
    QuadraticSummary s;
    s.evaluated = results.size();
    for (const auto& r : results) {
        if (!r.quadratic) continue;
        auto take_min = [first = s.quadratic == 0](int& slot, int v) { slot = first ? v : std::min(slot, v); };
        take_min(s.min_max_abs_m, r.max_abs_m());
        take_min(s.min_sum_abs_m, r.sum_abs_m());
        take_min(s.min_abs_m_hwp, r.abs_m_hwp());
        ++s.quadratic;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Reference combinations
// ---------------------------------------------------------------------------

inline constexpr std::array<Triple, 15> table1_hqq{{
    {1, -3, 3}, {1, 3, -3}, {2, 3, -2}, {2, -3, -2}, {3, 1, -3},
    {3, -1, -3}, {3, -2, 2}, {3, 2, -3}, {3, -2, -3}, {1, 4, -1},
    {4, -1, 1}, {3, -4, -3}, {1, 5, -1}, {5, -1, 1}, {4, -5, -4},
}};

inline constexpr std::array<Triple, 10> table1_qhq{{
    {1, -3, 2}, {1, -4, 2}, {1, -4, 3}, {2, -4, 3}, {2, -1, 4},
    {2, -3, 4}, {3, -2, 4}, {4, 1, -5}, {1, -5, 2}, {4, -5, 3},
}};

[[nodiscard]] inline std::span<const Triple> table1_rows(Arrangement a) noexcept {
    if (a == Arrangement::HQQ) return table1_hqq;
    return table1_qhq;
}

struct Table1Report {
    std::vector<ComboResult> rows;  ///< HQQ rows first, then QHQ, in table order

    [[nodiscard]] bool all_pass() const noexcept {
        return std::all_of(rows.begin(), rows.end(), [](const ComboResult& r) { return r.quadratic; });
    }
    [[nodiscard]] std::size_t failures() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(rows.begin(), rows.end(), [](const ComboResult& r) { return !r.quadratic; }));
    }
};

/// Checks every reference row against the quadratic criteria.
[[nodiscard]] inline Table1Report verify_table1(const ErrorBox& box, const SearchOptions& opt = {}) {
    if (!(box.xi_max >= 0.005 && box.xi_max <= 0.05)) {
        throw std::invalid_argument("reference check needs xi_max in [0.005, 0.05]");
    }
    std::vector<std::pair<Arrangement, Triple>> todo;
    for (auto a : {Arrangement::HQQ, Arrangement::QHQ}) {
        for (const auto& m : table1_rows(a)) todo.emplace_back(a, m);
    }
    Table1Report report;
    report.rows.resize(todo.size());
    SearchOptions inner = opt;
    inner.threads = 1;
    parallel_for(
        todo.size(), [&](std::size_t i) { report.rows[i] = evaluate_combo(todo[i].first, todo[i].second, box, inner); },
        opt.threads);
    return report;
}

// ---------------------------------------------------------------------------
// Symmetry checks
// ---------------------------------------------------------------------------

struct EquivalenceReport {
    Arrangement arrangement = Arrangement::HQQ;
    Triple m{};
    double dop = 0.0;           ///< worst case of the combination itself
    double dop_negated = 0.0;   ///< all m_i -> -m_i
    double dop_inverted = 0.0;  ///< plate order reversed, each plate keeps its frequency
    double phase_min = 0.0;     ///< per-phase worst case over the error plan, min over phases
    double phase_max = 0.0;
    double tolerance = 1e-10;
    double phase_tolerance = 0.1;

    [[nodiscard]] bool negation_ok() const noexcept { return std::abs(dop_negated - dop) < tolerance; }
    [[nodiscard]] bool inversion_ok() const noexcept { return std::abs(dop_inverted - dop) < tolerance; }
    [[nodiscard]] double phase_spread() const noexcept { return phase_max > 0.0 ? (phase_max - phase_min) / phase_max : 0.0; }
    [[nodiscard]] bool phase_ok() const noexcept { return phase_spread() < phase_tolerance; }
    [[nodiscard]] bool ok() const noexcept { return negation_ok() && inversion_ok() && phase_ok(); }
};

namespace detail {

[[nodiscard]] inline std::vector<std::vector<double>> reversed_each(std::vector<std::vector<double>> v) {
    for (auto& e : v) std::reverse(e.begin(), e.end());
    return v;
}

}  // namespace detail

/**
 * Compares the worst-case DOP of a combination with its negated and its
 * order-inverted counterpart over identical (permuted) samples, and measures
 * how much the per-phase worst case moves across random start phases.
 */
[[nodiscard]] inline EquivalenceReport equivalence_check(const Triple& m, Arrangement a, const ErrorBox& box,
                                                         const SearchOptions& opt = {}) {
    EquivalenceReport r;
    r.arrangement = a;
    r.m = m;
    const CascadeSpec base = make_cascade(a, m);
    const SampleSet s{xi_points(3, box, opt.plan, opt.seed), phase_tuples(3, opt.zeta_samples, opt.seed, false)};
    const SampleSet s_rev{detail::reversed_each(s.xi_points), detail::reversed_each(s.zeta_tuples)};

    const DopReport rep = worst_case_dop(base, s, opt.threads);
    r.dop = rep.dop_max;
    r.dop_negated = worst_case_dop(negated(base), s, opt.threads).dop_max;
    r.dop_inverted = worst_case_dop(reversed(base), s_rev, opt.threads).dop_max;
    r.phase_min = *std::min_element(rep.per_phase_max.begin(), rep.per_phase_max.end());
    r.phase_max = *std::max_element(rep.per_phase_max.begin(), rep.per_phase_max.end());
    return r;
}

}  // namespace depol
