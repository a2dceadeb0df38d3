#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "depol/search.hpp"

namespace depol {
namespace {

bool has_quadratic(const std::vector<ComboResult>& rs, const Triple& m) {
    return std::any_of(rs.begin(), rs.end(), [&](const ComboResult& r) { return r.quadratic && r.m == m; });
}

TEST(CanonicalTriples, OneRepresentativePerNegation) {
    EXPECT_EQ(canonical_triples(1).size(), 4u);
    const auto t = canonical_triples(3);
    EXPECT_EQ(t.size(), 3u * 6u * 6u);
    for (const auto& m : t) {
        EXPECT_GT(m[0], 0);
        EXPECT_NE(m[1], 0);
        EXPECT_NE(m[2], 0);
    }
    EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
}

TEST(Enumerate, RejectsBound) {
    EXPECT_THROW((void)enumerate_combos(Arrangement::HQQ, 0, ErrorBox{0.02}), std::invalid_argument);
    EXPECT_THROW((void)enumerate_combos(Arrangement::HQQ, 13, ErrorBox{0.02}), std::invalid_argument);
}

TEST(Enumerate, NothingQuadraticBelowFrequencyThree) {
    for (auto a : {Arrangement::HQQ, Arrangement::QHQ}) {
        for (int mx : {1, 2}) {
            const auto rs = enumerate_combos(a, mx, ErrorBox{0.02});
            EXPECT_EQ(summarize(rs).quadratic, 0u) << to_string(a) << " max_m=" << mx;
        }
    }
}

TEST(Enumerate, FindsReferenceRowsUpToThree) {
    const auto hqq = enumerate_combos(Arrangement::HQQ, 3, ErrorBox{0.02});
    for (const auto& m : table1_rows(Arrangement::HQQ)) {
        if (std::max({std::abs(m[0]), std::abs(m[1]), std::abs(m[2])}) <= 3) {
            EXPECT_TRUE(has_quadratic(hqq, m)) << m[0] << "," << m[1] << "," << m[2];
        }
    }
    const auto qhq = enumerate_combos(Arrangement::QHQ, 3, ErrorBox{0.02});
    EXPECT_TRUE(has_quadratic(qhq, {1, -3, 2}));

    const auto s = summarize(hqq);
    EXPECT_EQ(s.min_max_abs_m, 3);
    EXPECT_EQ(s.min_abs_m_hwp, 1);
}

TEST(Enumerate, SortedAndScheduleIndependent) {
    SearchOptions one;
    one.threads = 1;
    SearchOptions many;
    many.threads = 6;
    const auto a = enumerate_combos(Arrangement::QHQ, 3, ErrorBox{0.02}, one);
    const auto b = enumerate_combos(Arrangement::QHQ, 3, ErrorBox{0.02}, many);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), combo_order));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].m, b[i].m);
        EXPECT_EQ(a[i].dop_level, b[i].dop_level);
        EXPECT_EQ(std::isnan(a[i].slope), std::isnan(b[i].slope));
        if (!std::isnan(a[i].slope)) {
            EXPECT_EQ(a[i].slope, b[i].slope);
        }
        EXPECT_EQ(a[i].quadratic, b[i].quadratic);
    }
}

TEST(EvaluateCombo, VerdictsAndFailureReasons) {
    const auto good = evaluate_combo(Arrangement::HQQ, {1, 3, -3}, ErrorBox{0.02});
    EXPECT_TRUE(good.quadratic);
    EXPECT_TRUE(good.failure.empty());
    EXPECT_EQ(good.dop_at.size(), 5u);
    EXPECT_EQ(good.sum_abs_m(), 7);
    EXPECT_EQ(good.abs_m_hwp(), 1);

    const auto degenerate = evaluate_combo(Arrangement::HQQ, {1, 1, 1}, ErrorBox{0.02});
    EXPECT_FALSE(degenerate.quadratic);
    EXPECT_EQ(degenerate.failure, "ideal");

    // [1, 3] depolarizes, the extra plate at the same frequency as the
    // halfwave plate keeps the linear error term
    const auto linear = evaluate_combo(Arrangement::HQQ, {1, 3, 2}, ErrorBox{0.02});
    EXPECT_FALSE(linear.quadratic);

    SearchOptions tight;
    tight.criteria.slope_min = 2.1;
    tight.criteria.slope_max = 2.2;
    const auto banded = evaluate_combo(Arrangement::HQQ, {1, 3, -3}, ErrorBox{0.02}, tight);
    EXPECT_FALSE(banded.quadratic);
    EXPECT_EQ(banded.failure, "slope");
}

TEST(VerifyTable1, AllRowsQuadratic) {
    const auto rep = verify_table1(ErrorBox{0.02});
    ASSERT_EQ(rep.rows.size(), 25u);
    for (const auto& r : rep.rows) {
        EXPECT_TRUE(r.quadratic) << to_string(r.arrangement) << " " << r.m[0] << "," << r.m[1] << "," << r.m[2]
                                 << " failure=" << r.failure << " slope=" << r.slope;
    }
    EXPECT_TRUE(rep.all_pass());
    // [1, 4, -1] sums to 6
    EXPECT_EQ(rep.rows[9].m, (Triple{1, 4, -1}));
    EXPECT_EQ(rep.rows[9].sum_abs_m(), 6);
}

TEST(VerifyTable1, RejectsBoxOutsideRange) {
    EXPECT_THROW((void)verify_table1(ErrorBox{0.001}), std::invalid_argument);
    EXPECT_THROW((void)verify_table1(ErrorBox{0.06}), std::invalid_argument);
}

TEST(Equivalence, NegationInversionAndPhase) {
    const auto r = equivalence_check({1, 3, -3}, Arrangement::HQQ, ErrorBox{0.02});
    EXPECT_TRUE(r.negation_ok()) << r.dop_negated - r.dop;
    EXPECT_TRUE(r.inversion_ok()) << r.dop_inverted - r.dop;
    EXPECT_TRUE(r.phase_ok()) << r.phase_spread();
    EXPECT_TRUE(r.ok());
}

TEST(Equivalence, InvertedSequenceMatchesExplicitQQH) {
    // QWP, QWP, HWP driven with [-3, 3, 1]
    const CascadeSpec qqh{{PlateSpec{PlateKind::quarter(), 0, -3, 0}, PlateSpec{PlateKind::quarter(), 0, 3, 0},
                           PlateSpec{PlateKind::half(), 0, 1, 0}}};
    const CascadeSpec hqq = make_cascade(Arrangement::HQQ, {1, 3, -3});
    EXPECT_EQ(reversed(hqq).plates[0].m, -3);
    const double a = worst_case_dop(qqh, ErrorBox{0.02}, 8).dop_max;
    const double b = worst_case_dop(hqq, ErrorBox{0.02}, 8).dop_max;
    EXPECT_NEAR(a, b, 0.1 * b);
}

TEST(Equivalence, TwoPhaseTuplesAgree) {
    const CascadeSpec tmpl = make_cascade(Arrangement::HQQ, {1, 3, -3});
    const auto xs = xi_points(3, ErrorBox{0.02}, {}, 5);
    const SampleSet a{xs, {{0.3, 2.0, -1.1}}};
    const SampleSet b{xs, {{4.1, -0.7, 0.9}}};
    const double da = worst_case_dop(tmpl, a).dop_max;
    const double db = worst_case_dop(tmpl, b).dop_max;
    EXPECT_LT(std::abs(da - db), 0.1 * std::max(da, db));
}

}  // namespace
}  // namespace depol
