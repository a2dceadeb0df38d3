// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "depol/cli.hpp"
#include "depol/depol.hpp"
#include "oracles.hpp"

using namespace depol;

namespace {

// Tolerances, fixed here so a change shows up in review.
constexpr double ideal_zero_tol = 1e-12;
constexpr double linear_law_rel = 0.15;
constexpr double linear_slope_min = 0.9, linear_slope_max = 1.1;
constexpr double counter_law_rel = 0.15;
constexpr double half_harmonic_rel = 0.10;
constexpr double averaging_tol = 1e-12;
constexpr double sigma_oracle_tol = 1e-8;
constexpr double chain_tol = 1e-9;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Outcome zero_mean_ideal() {
    const double d = residual_dop_max(two_plate(1, 3));
    return {d < ideal_zero_tol, fmt("dop_max=%.3g", d)};
}

Outcome two_plate_linear() {
    double worst = 0.0;
    for (double xi2 : {0.005, 0.01, 0.02}) {
        for (double xi1 : {0.0, 0.02, -0.02}) {
            const double d = residual_dop_max(two_plate(1, 3, xi1, xi2));
            worst = std::max(worst, std::abs(d - xi2) / xi2);
        }
    }
    const QuadraticCriteria c;
    const auto grid = c.grid();
    const ScalingFit fit = scaling_exponent(two_plate(1, 3), grid);
    const bool ok = worst <= linear_law_rel && fit.slope >= linear_slope_min && fit.slope <= linear_slope_max;
    return {ok, fmt("max rel err=%.4f slope=%.4f", worst, fit.slope)};
}

Outcome counter_rotating() {
    std::mt19937_64 rng(default_seed);
    double worst = 0.0;
    const std::pair<double, double> cases[] = {{0.02, 0.005}, {0.01, 0.02}, {0.02, 0.01}};
    for (const auto& [xi1, xi2] : cases) {
        const double expect = std::max(std::abs(xi1) / 2, std::abs(xi2));
        for (int k = 0; k < 8; ++k) {
            const double z1 = test::uniform(rng, 0, 2 * std::numbers::pi);
            const double z2 = test::uniform(rng, 0, 2 * std::numbers::pi);
            const double d = residual_dop_max(two_plate(1, -1, xi1, xi2, z1, z2));
            worst = std::max(worst, std::abs(d - expect) / expect);
        }
    }
    return {worst <= counter_law_rel, fmt("max rel err=%.4f over 24 phase pairs", worst)};
}

Outcome half_harmonic() {
    const auto r = resolve_half_harmonic(0.01, 0.01);
    const int n = r.candidates_within(half_harmonic_rel);
    std::string detail = fmt("numeric=%.6g err(/2)=%.4f err(/4)=%.4f", r.numeric, r.err_printed, r.err_alternative);
    detail += " candidates within 10%=" + std::to_string(n) + " winner " + r.winner_formula();
    return {n == 1, detail};
}

Outcome quadratic_law() {
    const auto rep = verify_table1(ErrorBox{0.02});
    double worst_level = 0.0, slope_lo = 10.0, slope_hi = 0.0, worst_ideal = 0.0;
    for (const auto& r : rep.rows) {
        worst_level = std::max(worst_level, r.dop_level);
        worst_ideal = std::max(worst_ideal, r.dop_ideal);
        slope_lo = std::min(slope_lo, r.slope);
        slope_hi = std::max(slope_hi, r.slope);
    }
    std::string detail = std::to_string(rep.rows.size()) + " rows, "
                       + fmt("max level=%.4g ideal=%.3g slope in [%.4f, ", worst_level, worst_ideal, slope_lo)
                       + fmt("%.4f]", slope_hi);
    return {rep.rows.size() == 25 && rep.all_pass(), detail};
}

Outcome minimal_frequencies() {
    std::size_t small = 0;
    for (auto a : {Arrangement::HQQ, Arrangement::QHQ}) small += summarize(enumerate_combos(a, 2, ErrorBox{0.02})).quadratic;
    auto found = [](Arrangement a, const Triple& m) {
        const auto rs = enumerate_combos(a, 3, ErrorBox{0.02});
        return std::any_of(rs.begin(), rs.end(), [&](const ComboResult& r) { return r.quadratic && r.m == m; });
    };
    const bool f1 = found(Arrangement::HQQ, {2, 3, -2});
    const bool f2 = found(Arrangement::QHQ, {1, -3, 2});
    int min_sum = 1 << 30;
    for (auto a : {Arrangement::HQQ, Arrangement::QHQ}) {
        const auto s = summarize(enumerate_combos(a, 5, ErrorBox{0.02}));
        if (s.quadratic > 0) min_sum = std::min(min_sum, s.min_sum_abs_m);
    }
    const bool ok = small == 0 && f1 && f2 && min_sum == 6;
    const std::string detail = "quadratic at max_m=2: " + std::to_string(small) + ", HQQ [2,3,-2] " + (f1 ? "found" : "missing")
           + ", QHQ [1,-3,2] " + (f2 ? "found" : "missing") + ", min sum |m| (max_m 5)=" + std::to_string(min_sum);
    return {ok, detail};
}

Outcome symmetries() {
    double neg = 0.0, inv = 0.0, spread = 0.0;
    bool ok = true;
    for (auto a : {Arrangement::HQQ, Arrangement::QHQ}) {
        for (const auto& m : table1_rows(a)) {
            const auto r = equivalence_check(m, a, ErrorBox{0.02});
            ok = ok && r.ok();
            neg = std::max(neg, std::abs(r.dop_negated - r.dop));
            inv = std::max(inv, std::abs(r.dop_inverted - r.dop));
            spread = std::max(spread, r.phase_spread());
        }
    }
    return {ok, fmt("negation diff=%.3g inversion diff=%.3g phase spread=%.4f", neg, inv, spread)};
}

Outcome averaging_exactness() {
    std::mt19937_64 rng(default_seed + 8);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const CascadeSpec spec = test::random_cascade(rng, 4, 6);
        const int n = 2 * harmonic_bound(spec) + 2;
        worst = std::max(worst, max_abs_diff(time_average(spec, n), test::dense_time_average(spec, 10000)));
    }
    return {worst <= averaging_tol, fmt("max entry diff=%.3g", worst)};
}

Outcome singular_value_oracle() {
    std::mt19937_64 rng(default_seed + 9);
    double worst = 0.0;
    bool bounded = true;
    for (int i = 0; i < 1000; ++i) {
        const Matrix3 m = test::random_matrix(rng);
        const auto got = singular_values(m);
        const auto ref = test::power_iteration_singular_values(m);
        for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(got[k] - ref[k]));
        if (i < 10) {
            for (int j = 0; j < 1000; ++j) bounded = bounded && apply(m, test::random_unit(rng)).norm() <= got[0] + 1e-12;
        }
    }
    return {worst <= sigma_oracle_tol && bounded, fmt("max diff=%.3g", worst) + (bounded ? ", gain bounded" : ", gain exceeded")};
}

Outcome uniform_chain_check() {
    double worst = 0.0;
    const std::vector<int> m{1, 3, 9};
    for (std::size_t n = 1; n <= 3; ++n) {
        const auto r = uniform_chain_dop(std::span(m).first(n));
        worst = std::max(worst, std::abs(r.dop - r.target));
        if (!r.collision_free) worst = 1.0;
    }
    const std::vector<int> bad{1, 2};
    const auto rb = uniform_chain_dop(bad);
    const bool flagged = !rb.collision_free && std::abs(rb.dop - rb.target) > chain_tol;
    return {worst <= chain_tol && flagged, fmt("max |dop - 3^-n|=%.3g, [1,2] dop=%.6g", worst, rb.dop)
                                               + (flagged ? " flagged" : " not flagged")};
}

Outcome determinism() {
    auto report = [] {
        std::ostringstream out, err;
        const int code = cli::run({"verify", "--seed", "12345"}, out, err);
        return std::to_string(code) + "\n" + out.str();
    };
    const std::string a = report();
    const std::string b = report();
    return {a == b, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"1 zero-mean ideal cascade", zero_mean_ideal},
        {"2 two-plate linear law", two_plate_linear},
        {"3 counter-rotating law", counter_rotating},
        {"4 half-harmonic single candidate", half_harmonic},
        {"5 quadratic law for reference rows", quadratic_law},
        {"6 minimal-frequency claims", minimal_frequencies},
        {"7 symmetry properties", symmetries},
        {"8 averaging exactness", averaging_exactness},
        {"9 singular-value oracle", singular_value_oracle},
        {"10 uniform chain", uniform_chain_check},
        {"11 deterministic verify report", determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
