/**
 * @file cli.hpp
 * @brief Command-line front end for the depolarizer toolkit.
 *
 *   depol eval   --arrangement hqq --m 1,3,-3 --xi 0.02,0.02,0.02 --zeta-samples 32
 *   depol sweep  --arrangement hqq --m 1,3,-3 --grid 1e-3:0.0316:5 --out sweep.csv
 *   depol search --arrangement qhq --max-m 3 --out qhq.csv
 *   depol verify [--only table1,chain] [--out report.txt]
 *   depol chain  --m 1,3,9
 *
 * Every subcommand accepts --config <path>: a `key = value` file whose keys
 * are flag names without the leading dashes. Flags on the command line win.
 *
 * Exit codes: 0 success, 1 verification failure, 2 usage or input error.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "depol/depol.hpp"

namespace depol::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_verify_failed = 1;
inline constexpr int exit_usage = 2;

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    std::string subcommand;
    std::string arrangement = "hqq";
    std::string m;
    std::string xi;
    std::optional<double> xi_max;
    std::string zeta;
    std::optional<std::size_t> zeta_samples;
    std::string grid = "1e-3:0.0316227766016838:5";
    std::string out;
    std::uint64_t seed = default_seed;
    unsigned threads = 0;
    bool degrees = false;
    int max_m = 3;
    bool expect_table1 = false;
    bool quadratic_only = false;
    std::string only;
    std::string slope_band;
    std::size_t interior = 64;
};

// ---------------------------------------------------------------------------
// Formatting and parsing helpers
// ---------------------------------------------------------------------------

/// Fixed 12 significant digits.
[[nodiscard]] inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v);
    return buf;
}

template <class Seq>
[[nodiscard]] std::string join(const Seq& values, const char* sep = ",") {
    std::string s;
    bool first = true;
    for (const auto& v : values) {
        if (!first) s += sep;
        first = false;
        if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
            s += num(v);
        } else {
            s += std::to_string(v);
        }
    }
    return s;
}

[[nodiscard]] inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

[[nodiscard]] inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

[[nodiscard]] inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError(what + ": '" + s + "' is not a number");
    }
}

[[nodiscard]] inline int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError(what + ": '" + s + "' is not an integer");
    }
}

[[nodiscard]] inline std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> v;
    for (const auto& tok : split(s, ',')) v.push_back(parse_double(tok, what));
    return v;
}

[[nodiscard]] inline std::vector<int> parse_ints(const std::string& s, const std::string& what) {
    std::vector<int> v;
    for (const auto& tok : split(s, ',')) v.push_back(parse_int(tok, what));
    return v;
}

/// Plate kinds from a letter string such as "hqq" or "qqh".
[[nodiscard]] inline std::vector<PlateKind> parse_kinds(const std::string& s) {
    if (s.empty()) throw UsageError("--arrangement is empty");
    std::vector<PlateKind> kinds;
    for (char c : s) {
        if (c == 'h' || c == 'H') {
            kinds.push_back(PlateKind::half());
        } else if (c == 'q' || c == 'Q') {
            kinds.push_back(PlateKind::quarter());
        } else {
            throw UsageError("--arrangement: unknown plate letter '" + std::string(1, c) + "' (use h or q)");
        }
    }
    return kinds;
}

[[nodiscard]] inline std::vector<Arrangement> parse_search_arrangements(const std::string& s) {
    if (s == "hqq") return {Arrangement::HQQ};
    if (s == "qhq") return {Arrangement::QHQ};
    if (s == "both") return {Arrangement::HQQ, Arrangement::QHQ};
    throw UsageError("--arrangement must be hqq, qhq or both for search");
}

struct Grid {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t points = 0;
};

[[nodiscard]] inline Grid parse_grid(const std::string& s) {
    const auto parts = split(s, ':');
    if (parts.size() != 3) throw UsageError("--grid must be lo:hi:points");
    Grid g{parse_double(parts[0], "--grid"), parse_double(parts[1], "--grid"), 0};
    const int n = parse_int(parts[2], "--grid");
    if (n < 1) throw UsageError("--grid: empty grid");
    g.points = static_cast<std::size_t>(n);
    if (!(g.lo > 0.0 && g.hi >= g.lo && g.hi <= ErrorBox::upper_limit)) {
        throw UsageError("--grid: need 0 < lo <= hi <= " + num(ErrorBox::upper_limit));
    }
    return g;
}

[[nodiscard]] inline std::pair<double, double> parse_band(const std::string& s) {
    const auto parts = split(s, ':');
    if (parts.size() != 2) throw UsageError("--slope-band must be lo:hi");
    const double lo = parse_double(parts[0], "--slope-band");
    const double hi = parse_double(parts[1], "--slope-band");
    if (!(lo <= hi)) throw UsageError("--slope-band: lo must not exceed hi");
    return {lo, hi};
}

/**
 * Reads a `key = value` file. Blank lines and lines starting with '#' are
 * skipped; a '#' after the value starts a comment. Keys may use '_' or '-'.
 */
[[nodiscard]] inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = trim(std::string_view(t).substr(0, eq));
        std::string value = trim(std::string_view(t).substr(eq + 1));
        for (auto& c : key) {
            if (c == '_') c = '-';
        }
        if (key.empty()) throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared setup
// ---------------------------------------------------------------------------

struct Context {
    const RunConfig& cfg;
    std::ostream& out;
    std::ostream& err;
};

[[nodiscard]] inline double angle_scale(const RunConfig& cfg) { return cfg.degrees ? std::numbers::pi / 180.0 : 1.0; }

/// Cascade template (xi = zeta = 0) from --arrangement and --m.
[[nodiscard]] inline CascadeSpec template_from(const RunConfig& cfg) {
    const auto kinds = parse_kinds(cfg.arrangement);
    if (cfg.m.empty()) throw UsageError("--m is required");
    const auto m = parse_ints(cfg.m, "--m");
    if (m.size() != kinds.size()) {
        throw UsageError("--m has " + std::to_string(m.size()) + " entries but arrangement '" + cfg.arrangement
                         + "' has " + std::to_string(kinds.size()) + " plates");
    }
    CascadeSpec spec;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] == 0) throw UsageError("--m: drive frequency m" + std::to_string(i + 1) + " is zero");
        spec.plates.push_back(PlateSpec{kinds[i], 0.0, m[i], 0.0});
    }
    return spec;
}

[[nodiscard]] inline std::vector<double> angle_list(const std::string& s, std::size_t n, double scale,
                                                    const std::string& what) {
    auto v = parse_doubles(s, what);
    if (v.size() != n) throw UsageError(what + " needs " + std::to_string(n) + " entries");
    for (auto& x : v) x *= scale;
    return v;
}

[[nodiscard]] inline ErrorBox box_from(double xi_max) {
    if (!(xi_max >= 0.0 && xi_max <= ErrorBox::upper_limit)) {
        throw UsageError("--xi-max must lie in [0, " + num(ErrorBox::upper_limit) + "]");
    }
    return ErrorBox{xi_max};
}

[[nodiscard]] inline SearchOptions search_options(const RunConfig& cfg) {
    SearchOptions o;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    o.zeta_samples = cfg.zeta_samples.value_or(32);
    o.plan.interior = cfg.interior;
    if (!cfg.slope_band.empty()) {
        const auto [lo, hi] = parse_band(cfg.slope_band);
        o.criteria.slope_min = lo;
        o.criteria.slope_max = hi;
    }
    return o;
}

/// Writes to --out when given, else to the context stream.
template <class Fn>
void emit(const Context& ctx, Fn&& write) {
    if (ctx.cfg.out.empty()) {
        write(ctx.out);
        return;
    }
    std::ofstream f(ctx.cfg.out, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + ctx.cfg.out + "'");
    write(f);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

inline int cmd_eval(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const CascadeSpec tmpl = template_from(cfg);
    const std::size_t p = tmpl.size();
    const double scale = angle_scale(cfg);

    if (!cfg.xi.empty() && cfg.xi_max) throw UsageError("give either --xi or --xi-max, not both");
    if (!cfg.zeta.empty() && cfg.zeta_samples) throw UsageError("give either --zeta or --zeta-samples, not both");

    SampleSet samples;
    if (cfg.xi_max) {
        XiPlan plan;
        plan.interior = cfg.interior;
        samples.xi_points = xi_points(p, box_from(*cfg.xi_max * scale), plan, cfg.seed);
    } else {
        auto xi = cfg.xi.empty() ? std::vector<double>(p, 0.0) : angle_list(cfg.xi, p, scale, "--xi");
        for (std::size_t i = 0; i < p; ++i) {
            if (std::abs(xi[i]) > max_retardation_error) {
                throw UsageError("--xi: |xi" + std::to_string(i + 1) + "| exceeds " + num(max_retardation_error));
            }
        }
        samples.xi_points.push_back(std::move(xi));
    }
    if (cfg.zeta_samples) {
        samples.zeta_tuples = phase_tuples(p, *cfg.zeta_samples, cfg.seed);
    } else {
        samples.zeta_tuples.push_back(cfg.zeta.empty() ? std::vector<double>(p, 0.0)
                                                       : angle_list(cfg.zeta, p, scale, "--zeta"));
    }

    const DopReport rep = worst_case_dop(tmpl, samples, cfg.threads);
    const std::array<std::pair<const char*, StokesVector>, 6> inputs{{
        {"+S1", {1, 0, 0}}, {"-S1", {-1, 0, 0}}, {"+S2", {0, 1, 0}},
        {"-S2", {0, -1, 0}}, {"+S3", {0, 0, 1}}, {"-S3", {0, 0, -1}},
    }};

    auto& o = ctx.out;
    o << "arrangement: " << cfg.arrangement << "\n";
    o << "m: " << cfg.m << "\n";
    o << "samples: xi_points=" << rep.samples_used.xi_points << " zeta_tuples=" << rep.samples_used.zeta_tuples << "\n";
    o << "worst xi: " << join(rep.worst_xi) << "\n";
    o << "worst zeta: " << join(rep.worst_zeta) << "\n";
    o << "mean matrix:\n";
    for (int r = 0; r < 3; ++r) {
        o << "  " << num(rep.mean_matrix(r, 0)) << " " << num(rep.mean_matrix(r, 1)) << " "
          << num(rep.mean_matrix(r, 2)) << "\n";
    }
    o << "singular values: " << join(rep.sigma, " ") << "\n";
    o << "dop_max: " << num(rep.dop_max) << "\n";
    o << "dop per input:\n";
    for (const auto& [name, s] : inputs) o << "  " << name << " " << num(dop_for_input(rep.mean_matrix, s)) << "\n";

    if (!cfg.out.empty()) {
        emit(ctx, [&](std::ostream& f) {
            f << "quantity,value\n";
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) f << "mean_" << r + 1 << c + 1 << "," << num(rep.mean_matrix(r, c)) << "\n";
            }
            for (int i = 0; i < 3; ++i) f << "sigma_" << i + 1 << "," << num(rep.sigma[i]) << "\n";
            f << "dop_max," << num(rep.dop_max) << "\n";
            for (const auto& [name, s] : inputs) f << "dop_" << name << "," << num(dop_for_input(rep.mean_matrix, s)) << "\n";
        });
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

inline int cmd_sweep(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const CascadeSpec tmpl = template_from(cfg);
    const Grid g = parse_grid(cfg.grid);
    const double scale = angle_scale(cfg);
    const auto grid = geometric_grid(g.lo * scale, g.hi * scale, g.points);

    ScalingOptions so;
    so.zeta_samples = cfg.zeta_samples.value_or(32);
    so.plan.interior = cfg.interior;
    so.seed = cfg.seed;
    so.threads = cfg.threads;
    const ScalingFit fit = sweep_worst_case(tmpl, grid, so);

    emit(ctx, [&](std::ostream& f) {
        f << "xi_max,dop_max,slope_running\n";
        for (std::size_t i = 0; i < fit.xi_max.size(); ++i) {
            const double running = fit_loglog_slope(std::span(fit.xi_max).first(i + 1), std::span(fit.dop).first(i + 1));
            f << num(fit.xi_max[i]) << "," << num(fit.dop[i]) << "," << num(running) << "\n";
        }
        f << "# slope=" << num(fit.slope) << "\n";
    });
    if (!cfg.out.empty()) ctx.out << "slope=" << num(fit.slope) << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

inline int cmd_search(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto arrangements = parse_search_arrangements(cfg.arrangement);
    if (cfg.max_m < 1 || cfg.max_m > max_search_bound) {
        throw UsageError("--max-m must lie in [1, " + std::to_string(max_search_bound) + "]");
    }
    const ErrorBox box = box_from(cfg.xi_max.value_or(0.02) * angle_scale(cfg));
    const SearchOptions opt = search_options(cfg);

    std::vector<std::string> missing;
    std::vector<std::string> summaries;
    std::ostringstream csv;
    csv << "arrangement,m1,m2,m3,max_abs_m,sum_abs_m,slope,dop_at_" << num(box.xi_max) << ",quadratic\n";
    for (auto a : arrangements) {
        const auto results = enumerate_combos(a, cfg.max_m, box, opt);
        for (const auto& r : results) {
            if (cfg.quadratic_only && !r.quadratic) continue;
            csv << to_string(a) << "," << r.m[0] << "," << r.m[1] << "," << r.m[2] << "," << r.max_abs_m() << ","
                << r.sum_abs_m() << "," << num(r.slope) << "," << num(r.dop_level) << "," << (r.quadratic ? 1 : 0)
                << "\n";
        }
        const auto s = summarize(results);
        summaries.push_back(std::string("arrangement=") + to_string(a) + " evaluated=" + std::to_string(s.evaluated)
                            + " quadratic=" + std::to_string(s.quadratic) + " min_max_abs_m="
                            + std::to_string(s.min_max_abs_m) + " min_sum_abs_m=" + std::to_string(s.min_sum_abs_m)
                            + " min_abs_m_hwp=" + std::to_string(s.min_abs_m_hwp));
        if (cfg.expect_table1) {
            for (const auto& m : table1_rows(a)) {
                const int mx = std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])});
                if (mx > cfg.max_m) continue;
                const bool found = std::any_of(results.begin(), results.end(),
                                               [&](const ComboResult& r) { return r.quadratic && r.m == m; });
                if (!found) missing.push_back(std::string(to_string(a)) + " [" + join(m) + "]");
            }
        }
    }
    for (const auto& s : summaries) csv << "# summary: " << s << "\n";

    emit(ctx, [&](std::ostream& f) { f << csv.str(); });
    if (!cfg.out.empty()) {
        for (const auto& s : summaries) ctx.out << "summary: " << s << "\n";
    }
    if (!missing.empty()) {
        for (const auto& m : missing) ctx.err << "reference row not found as quadratic: " << m << "\n";
        return exit_verify_failed;
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// chain
// ---------------------------------------------------------------------------

inline std::string chain_line(std::span<const int> m) {
    const ChainResult r = uniform_chain_dop(m);
    std::string s = "n=" + std::to_string(m.size()) + " dop=" + num(r.dop) + " target=" + num(r.target) + " m=["
                    + join(m) + "]";
    s += r.collision_free ? " collision-free" : " collision k=[" + join(r.collision) + "]";
    return s;
}

inline int cmd_chain(const Context& ctx) {
    const auto m = parse_ints(ctx.cfg.m.empty() ? std::string("1,3,9") : ctx.cfg.m, "--m");
    if (m.size() > 10) throw UsageError("--m: at most 10 plates");
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] == 0) throw UsageError("--m: drive frequency m" + std::to_string(i + 1) + " is zero");
    }
    emit(ctx, [&](std::ostream& f) {
        for (std::size_t n = 1; n <= m.size(); ++n) f << chain_line(std::span(m).first(n)) << "\n";
    });
    return exit_ok;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& verify_sections() {
    static const std::vector<std::string> names{"table1", "minimality", "equivalence", "phase", "chain", "half-harmonic"};
    return names;
}

/// Runs the selected verification sections; returns the number of failed checks.
inline std::size_t run_verify(const RunConfig& cfg, std::ostream& o) {
    std::vector<std::string> only;
    if (!cfg.only.empty()) {
        only = split(cfg.only, ',');
        for (const auto& s : only) {
            if (std::find(verify_sections().begin(), verify_sections().end(), s) == verify_sections().end()) {
                throw UsageError("--only: unknown section '" + s + "'");
            }
        }
    }
    auto wanted = [&](const std::string& s) { return only.empty() || std::find(only.begin(), only.end(), s) != only.end(); };

    const ErrorBox box = box_from(cfg.xi_max.value_or(0.02) * angle_scale(cfg));
    const SearchOptions opt = search_options(cfg);
    std::vector<std::pair<std::string, bool>> table;
    auto mark = [](bool ok) { return ok ? "PASS" : "FAIL"; };

    o << "seed=" << cfg.seed << " xi_max=" << num(box.xi_max) << " zeta_samples=" << opt.zeta_samples
      << " interior=" << opt.plan.interior << " slope_band=[" << num(opt.criteria.slope_min) << ","
      << num(opt.criteria.slope_max) << "]\n";

    if (wanted("table1")) {
        o << "== table1 ==\n";
        const auto rep = verify_table1(box, opt);
        for (const auto& r : rep.rows) {
            o << mark(r.quadratic) << " " << to_string(r.arrangement) << " [" << join(r.m) << "] slope=" << num(r.slope)
              << " dop_ideal=" << num(r.dop_ideal) << " dop_level=" << num(r.dop_level)
              << " sum_abs_m=" << r.sum_abs_m() << " abs_m_hwp=" << r.abs_m_hwp();
            if (!r.quadratic) o << " failed=" << r.failure;
            o << "\n";
        }
        table.emplace_back("table1 (" + std::to_string(rep.rows.size() - rep.failures()) + "/"
                               + std::to_string(rep.rows.size()) + " rows)",
                           rep.all_pass());
    }

    if (wanted("minimality")) {
        o << "== minimality ==\n";
        for (auto a : {Arrangement::HQQ, Arrangement::QHQ}) {
            const auto at2 = summarize(enumerate_combos(a, 2, box, opt));
            const bool none2 = at2.quadratic == 0;
            o << mark(none2) << " " << to_string(a) << " max_m=2 quadratic=" << at2.quadratic << "\n";
            table.emplace_back(std::string(to_string(a)) + " none with max|m|<=2", none2);

            const auto r3 = enumerate_combos(a, 3, box, opt);
            const Triple probe = a == Arrangement::HQQ ? Triple{2, 3, -2} : Triple{1, -3, 2};
            const bool found = std::any_of(r3.begin(), r3.end(),
                                           [&](const ComboResult& r) { return r.quadratic && r.m == probe; });
            o << mark(found) << " " << to_string(a) << " max_m=3 contains [" << join(probe) << "]\n";
            table.emplace_back(std::string(to_string(a)) + " max|m|=3 finds [" + join(probe) + "]", found);

            const auto s5 = summarize(enumerate_combos(a, 5, box, opt));
            const bool sum_ok = s5.min_sum_abs_m == 6;
            const bool hwp_ok = s5.min_abs_m_hwp == 1;
            const bool max_ok = s5.min_max_abs_m == 3;
            o << mark(sum_ok && hwp_ok && max_ok) << " " << to_string(a) << " max_m=5 quadratic=" << s5.quadratic
              << " min_sum_abs_m=" << s5.min_sum_abs_m << " min_abs_m_hwp=" << s5.min_abs_m_hwp
              << " min_max_abs_m=" << s5.min_max_abs_m << "\n";
            table.emplace_back(std::string(to_string(a)) + " min sum|m|=6, min |m_hwp|=1, min max|m|=3",
                               sum_ok && hwp_ok && max_ok);
        }
    }

    const bool eq = wanted("equivalence");
    const bool ph = wanted("phase");
    if (eq || ph) {
        std::vector<std::pair<Arrangement, Triple>> rows;
        for (auto a : {Arrangement::HQQ, Arrangement::QHQ}) {
            for (const auto& m : table1_rows(a)) rows.emplace_back(a, m);
        }
        std::vector<EquivalenceReport> reps(rows.size());
        SearchOptions inner = opt;
        inner.threads = 1;
        parallel_for(
            rows.size(), [&](std::size_t i) { reps[i] = equivalence_check(rows[i].second, rows[i].first, box, inner); },
            opt.threads);
        if (eq) {
            o << "== equivalence ==\n";
            bool all = true;
            for (const auto& r : reps) {
                const bool ok = r.negation_ok() && r.inversion_ok();
                all = all && ok;
                o << mark(ok) << " " << to_string(r.arrangement) << " [" << join(r.m) << "] dop=" << num(r.dop)
                  << " negated_diff=" << num(std::abs(r.dop_negated - r.dop))
                  << " inverted_diff=" << num(std::abs(r.dop_inverted - r.dop)) << "\n";
            }
            table.emplace_back("negation and order inversion", all);
        }
        if (ph) {
            o << "== phase ==\n";
            bool all = true;
            for (const auto& r : reps) {
                all = all && r.phase_ok();
                o << mark(r.phase_ok()) << " " << to_string(r.arrangement) << " [" << join(r.m)
                  << "] min=" << num(r.phase_min) << " max=" << num(r.phase_max)
                  << " spread=" << num(r.phase_spread()) << "\n";
            }
            table.emplace_back("start-phase invariance (<10%)", all);
        }
    }

    if (wanted("chain")) {
        o << "== chain ==\n";
        const std::vector<int> m{1, 3, 9};
        bool all = true;
        for (std::size_t n = 1; n <= m.size(); ++n) {
            const auto r = uniform_chain_dop(std::span(m).first(n));
            all = all && r.collision_free && std::abs(r.dop - r.target) <= 1e-9;
            o << chain_line(std::span(m).first(n)) << "\n";
        }
        const std::vector<int> bad{1, 2};
        const auto rb = uniform_chain_dop(bad);
        const bool flagged = !rb.collision_free && std::abs(rb.dop - rb.target) > 1e-9;
        o << chain_line(bad) << "\n";
        table.emplace_back("chain 3^-n for [1], [1,3], [1,3,9]", all);
        table.emplace_back("chain collision [1,2] flagged", flagged);
    }

    if (wanted("half-harmonic")) {
        o << "== half-harmonic ==\n";
        const auto r = resolve_half_harmonic(0.01, 0.01);
        o << "xi=(0.01,0.01) numeric=" << num(r.numeric) << " sqrt(xi1^2/2+xi2^2)=" << num(r.printed)
          << " rel_err=" << num(r.err_printed) << " sqrt(xi1^2/4+xi2^2)=" << num(r.alternative)
          << " rel_err=" << num(r.err_alternative) << "\n";
        o << "winner: " << r.winner_formula() << "\n";
        o << "candidates within 10%: " << r.candidates_within(0.1) << "\n";
        const double best = std::min(r.err_printed, r.err_alternative);
        table.emplace_back(std::string("half-harmonic closest formula ") + r.winner_formula() + " within 10%", best <= 0.1);
    }

    std::size_t failed = 0;
    o << "== summary ==\n";
    for (const auto& [name, ok] : table) {
        o << mark(ok) << " " << name << "\n";
        failed += ok ? 0 : 1;
    }
    o << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " CHECK(S) FAILED") << "\n";
    return failed;
}

inline int cmd_verify(const Context& ctx) {
    std::ostringstream report;
    const std::size_t failed = run_verify(ctx.cfg, report);
    emit(ctx, [&](std::ostream& f) { f << report.str(); });
    if (!ctx.cfg.out.empty()) ctx.out << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " CHECK(S) FAILED") << "\n";
    return failed == 0 ? exit_ok : exit_verify_failed;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Parses @p args (without the program name) and runs the subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Rotating-waveplate depolarizer analysis"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    std::map<std::string, CLI::App*> subs;
    auto add = [&](const char* name, const char* desc) {
        auto* s = app.add_subcommand(name, desc);
        subs[name] = s;
        s->add_option("--config", "key = value file; flags override it");
        s->add_option("--seed", cfg.seed, "seed for phase and interior sampling");
        s->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
        s->add_option("--out", cfg.out, "output file");
        s->add_flag("--degrees", cfg.degrees, "angles and errors given in degrees");
        return s;
    };

    auto* eval = add("eval", "evaluate one cascade");
    eval->add_option("--arrangement", cfg.arrangement, "plate letters, e.g. hqq, qhq, hq");
    eval->add_option("--m", cfg.m, "drive frequencies, comma separated");
    eval->add_option("--xi", cfg.xi, "retardation errors, comma separated");
    eval->add_option("--xi-max", cfg.xi_max, "worst case over |xi_i| <= xi_max instead of fixed --xi");
    eval->add_option("--zeta", cfg.zeta, "start phases, comma separated");
    eval->add_option("--zeta-samples", cfg.zeta_samples, "random phase tuples (plus zero) to maximize over");
    eval->add_option("--interior", cfg.interior, "random interior points with --xi-max");

    auto* sweep = add("sweep", "worst-case DOP over a geometric xi_max grid");
    sweep->add_option("--arrangement", cfg.arrangement, "plate letters");
    sweep->add_option("--m", cfg.m, "drive frequencies");
    sweep->add_option("--grid", cfg.grid, "lo:hi:points");
    sweep->add_option("--zeta-samples", cfg.zeta_samples, "random phase tuples (plus zero)");
    sweep->add_option("--interior", cfg.interior, "random interior error points");

    auto* search = add("search", "enumerate three-plate frequency combinations");
    search->add_option("--arrangement", cfg.arrangement, "hqq, qhq or both");
    search->add_option("--max-m", cfg.max_m, "bound on |m_i|");
    search->add_option("--xi-max", cfg.xi_max, "error box for the level check (default 0.02)");
    search->add_option("--zeta-samples", cfg.zeta_samples, "random phase tuples (plus zero)");
    search->add_option("--interior", cfg.interior, "random interior error points");
    search->add_option("--slope-band", cfg.slope_band, "accepted slope range lo:hi");
    search->add_flag("--expect-table1", cfg.expect_table1, "exit 1 unless every reference row is found");
    search->add_flag("--quadratic-only", cfg.quadratic_only, "list only quadratic combinations");

    auto* verify = add("verify", "check reference combinations and scaling laws");
    verify->add_option("--only", cfg.only, "comma list of sections: table1, minimality, equivalence, phase, chain, half-harmonic");
    verify->add_option("--xi-max", cfg.xi_max, "error box (default 0.02)");
    verify->add_option("--zeta-samples", cfg.zeta_samples, "random phase tuples");
    verify->add_option("--interior", cfg.interior, "random interior error points");
    verify->add_option("--slope-band", cfg.slope_band, "accepted slope range lo:hi");

    auto* chain = add("chain", "uniform arccos(-1/3) retarder chain");
    chain->add_option("--m", cfg.m, "drive frequencies (default 1,3,9)");

    try {
        // The config file is spliced in ahead of the user's flags, so with
        // TakeLast the command line wins.
        std::vector<std::string> argv = args;
        if (!argv.empty() && subs.count(argv.front()) != 0) {
            CLI::App* sub = subs[argv.front()];
            std::optional<std::string> config_path;
            for (std::size_t i = 1; i < argv.size(); ++i) {
                if (argv[i] == "--config" && i + 1 < argv.size()) config_path = argv[i + 1];
                if (argv[i].rfind("--config=", 0) == 0) config_path = argv[i].substr(9);
            }
            if (config_path) {
                std::vector<std::string> injected;
                for (const auto& [key, value] : read_config_file(*config_path)) {
                    if (key == "config") continue;
                    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
                    if (opt == nullptr) {
                        const bool known = std::any_of(subs.begin(), subs.end(), [&](const auto& kv) {
                            return kv.second->get_option_no_throw("--" + key) != nullptr;
                        });
                        if (!known) throw UsageError("config file: unknown key '" + key + "'");
                        continue;
                    }
                    injected.push_back("--" + key + "=" + value);
                }
                argv.insert(argv.begin() + 1, injected.begin(), injected.end());
            }
        }
        // CLI11 consumes arguments back to front.
        std::vector<std::string> reversed(argv.rbegin(), argv.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    for (const auto& [name, sub] : subs) {
        if (sub->parsed()) cfg.subcommand = name;
    }
    if (cfg.threads > 1024) {
        err << "error: --threads must not exceed 1024\n";
        return exit_usage;
    }

    const Context ctx{cfg, out, err};
    try {
        if (cfg.subcommand == "eval") return cmd_eval(ctx);
        if (cfg.subcommand == "sweep") return cmd_sweep(ctx);
        if (cfg.subcommand == "search") return cmd_search(ctx);
        if (cfg.subcommand == "verify") return cmd_verify(ctx);
        if (cfg.subcommand == "chain") return cmd_chain(ctx);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_verify_failed;
    }
    err << "error: unknown subcommand\n";
    return exit_usage;
}

}  // namespace depol::cli
