#include <gtest/gtest.h>

#include <set>

#include "cshc/selection.hpp"
#include "selection_fixtures.hpp"

using namespace cshc;
using selection_fixtures::bundle_from_counts;

TEST(Vote, SupportAndWeightTie)
{
    std::vector<double> w{5, 3, 3};
    std::vector<int> labels{1, 2, 2};
    std::set<std::size_t> picked;
    for (std::uint64_t s = 0; s < 64; ++s) {
        Rng rng(s);
        auto v = vote(w, labels, 3, rng);
        EXPECT_EQ(v.profile.support, (std::vector<double>{0, 5, 6}));
        EXPECT_EQ(v.profile.top_class, 2u);
        EXPECT_DOUBLE_EQ(v.profile.ratio, 5.0 / 6.0);
        picked.insert(v.chosen_classifier);
    }
    EXPECT_EQ(picked, (std::set<std::size_t>{1, 2}));
}

TEST(Vote, SameSeedSamePick)
{
    std::vector<double> w{3, 3, 3, 3};
    std::vector<int> labels{0, 0, 0, 0};
    Rng a(9), b(9);
    EXPECT_EQ(vote(w, labels, 2, a).chosen_classifier, vote(w, labels, 2, b).chosen_classifier);
}

TEST(Vote, Unanimous)
{
    Rng rng(1);
    auto v = vote(std::vector<double>{10, 1, 1}, std::vector<int>{1, 1, 1}, 3, rng);
    EXPECT_EQ(v.profile.top_class, 1u);
    EXPECT_EQ(v.chosen_classifier, 0u);
    EXPECT_DOUBLE_EQ(v.profile.ratio, 0.0);
}

TEST(Vote, RatioOfTwo)
{
    Rng rng(1);
    auto v = vote(std::vector<double>{4, 3}, std::vector<int>{0, 1}, 2, rng);
    EXPECT_EQ(v.profile.top_class, 0u);
    EXPECT_EQ(v.chosen_classifier, 0u);
    EXPECT_DOUBLE_EQ(v.profile.ratio, 0.75);
}

TEST(Vote, ClassTieGoesToLowerIndex)
{
    Rng rng(1);
    auto v = vote(std::vector<double>{3, 2, 1}, std::vector<int>{1, 0, 0}, 2, rng);
    EXPECT_EQ(v.profile.top_class, 0u);
    EXPECT_DOUBLE_EQ(v.profile.ratio, 1.0);
    EXPECT_EQ(v.chosen_classifier, 1u);
}

TEST(Vote, Errors)
{
    Rng rng(1);
    EXPECT_THROW(vote(std::vector<double>{0, 0}, std::vector<int>{0, 1}, 2, rng), Error);
    EXPECT_THROW(vote(std::vector<double>{-1, 2}, std::vector<int>{0, 1}, 2, rng), Error);
    EXPECT_THROW(vote(std::vector<double>{1}, std::vector<int>{0, 1}, 2, rng), Error);
}

TEST(Vote, ScaleInvariant)
{
    Rng gen(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + uniform_index(gen, 5), c = 2 + uniform_index(gen, 3);
        std::vector<double> w(n);
        std::vector<int> labels(n);
        for (std::size_t a = 0; a < n; ++a) {
            w[a] = 1.0 + static_cast<double>(uniform_index(gen, 10));
            labels[a] = static_cast<int>(uniform_index(gen, c));
        }
        auto scaled = w;
        for (auto& x : scaled)
            x *= 7.5;
        Rng r1(trial), r2(trial);
        auto a = vote(w, labels, c, r1);
        auto b = vote(scaled, labels, c, r2);
        EXPECT_EQ(a.profile.top_class, b.profile.top_class);
        EXPECT_NEAR(a.profile.ratio, b.profile.ratio, 1e-12);
        EXPECT_LE(a.profile.ratio, 1.0);
        EXPECT_GE(a.profile.ratio, 0.0);
    }
}

TEST(SelectCshc, RankTieUsesValidationAccuracy)
{
    // two leaves ranked (3,1,2) and (2,1,3): cumulative (5,2,5)
    auto bundle = bundle_from_counts({{3, 1, 2}, {2, 1, 3}}, 2);
    std::vector<double> acc{0.9, 0.5, 0.8};
    EXPECT_EQ(cshc_choice(bundle, acc), 0u);
    acc = {0.7, 0.5, 0.8};
    EXPECT_EQ(cshc_choice(bundle, acc), 2u);
    acc = {0.8, 0.5, 0.8};
    EXPECT_EQ(cshc_choice(bundle, acc), 0u);
}

TEST(SelectCshc, ArgmaxAndSinglePool)
{
    auto bundle = bundle_from_counts({{3, 1, 2}}, 2);
    EXPECT_EQ(cshc_choice(bundle, {}), 0u);
    auto single = bundle_from_counts({{4}}, 2);
    EXPECT_EQ(cshc_choice(single, {}), 0u);

    SelectionInput in;
    in.bundle = &bundle;
    auto out = select_cshc(in);
    EXPECT_EQ(out.predicted_class, -1);  // nothing ran yet
    std::vector<int> labels{1, 0, 0};
    in.test_labels = labels;
    out = select_cshc(in);
    EXPECT_EQ(out.predicted_class, 1);
    EXPECT_EQ(out.method_used, DecidedBy::cshc);
}

TEST(SelectRr, RankWeightedVote)
{
    auto bundle = bundle_from_counts({{3, 1, 2}, {2, 1, 3}}, 2);
    std::vector<int> labels{0, 1, 0};
    SelectionInput in;
    in.bundle = &bundle;
    in.test_labels = labels;
    in.n_classes = 2;
    std::set<std::size_t> picked;
    for (std::uint64_t s = 0; s < 32; ++s) {
        in.tie_seed = s;
        auto out = select_rr(in);
        EXPECT_EQ(out.predicted_class, 0);
        EXPECT_DOUBLE_EQ(out.rr_ratio, 0.2);
        EXPECT_DOUBLE_EQ(out.confidence_ratio, 0.2);
        picked.insert(out.chosen_classifier);
    }
    EXPECT_EQ(picked, (std::set<std::size_t>{0, 2}));
}

TEST(SelectRr, SupportTieFavorsLowerClass)
{
    auto bundle = bundle_from_counts({{3, 2, 1}}, 2);
    std::vector<int> labels{0, 1, 1};
    SelectionInput in;
    in.bundle = &bundle;
    in.test_labels = labels;
    in.n_classes = 2;
    auto out = select_rr(in);
    EXPECT_EQ(out.chosen_classifier, 0u);
    EXPECT_EQ(out.predicted_class, 0);
    EXPECT_DOUBLE_EQ(out.rr_ratio, 1.0);
}

TEST(SelectRr, UnanimousPicksHighestRank)
{
    auto bundle = bundle_from_counts({{1, 3, 2}}, 2);
    std::vector<int> labels{1, 1, 1};
    SelectionInput in;
    in.bundle = &bundle;
    in.test_labels = labels;
    in.n_classes = 2;
    auto out = select_rr(in);
    EXPECT_EQ(out.chosen_classifier, 1u);
    EXPECT_DOUBLE_EQ(out.rr_ratio, 0.0);
}

TEST(SelectLp, PerfectClassifierWins)
{
    // rows 0..3; classifier 0 always right, 1 and 2 always wrong
    std::vector<int> truth{0, 1, 0, 1};
    std::vector<std::size_t> rows{0, 1, 2, 3};
    std::vector<std::vector<int>> preds{{0, 1, 0, 1}, {1, 0, 1, 0}, {1, 0, 1, 0}};
    auto cm = make_correctness(truth, rows, preds, 2);
    ClusterNode leaf;
    leaf.members = {{0, 1}, {1, 2}, {2, 1}, {3, 1}};
    leaf.correct_counts = {5, 0, 0};
    leaf.class_counts = {2, 3};
    auto bundle = make_bundle({{0, 0}}, {&leaf}, 3, 2);
    std::vector<int> labels{1, 0, 0};
    SelectionInput in;
    in.bundle = &bundle;
    in.cm = &cm;
    in.test_labels = labels;
    in.n_classes = 2;
    auto w = lp_weights(in, SelectionParams{});
    EXPECT_GE(w[0], 90.0 - 1e-6);
    auto out = select_lp(in, SelectionParams{});
    EXPECT_EQ(out.chosen_classifier, 0u);
    EXPECT_EQ(out.predicted_class, 1);
    EXPECT_EQ(out.method_used, DecidedBy::lp);
}

TEST(SelectLp, SingleClassifier)
{
    std::vector<int> truth{0};
    std::vector<std::size_t> rows{0};
    auto cm = make_correctness(truth, rows, {{1}}, 2);
    ClusterNode leaf;
    leaf.members = {{0, 1}};
    leaf.correct_counts = {0};
    leaf.class_counts = {1, 0};
    auto bundle = make_bundle({{0, 0}}, {&leaf}, 1, 2);
    std::vector<int> labels{1};
    SelectionInput in;
    in.bundle = &bundle;
    in.cm = &cm;
    in.test_labels = labels;
    in.n_classes = 2;
    EXPECT_EQ(lp_weights(in, SelectionParams{}), std::vector<double>{100.0});
    EXPECT_EQ(select_lp(in, SelectionParams{}).chosen_classifier, 0u);
}

namespace {

SelectionOutcome stage(std::size_t chosen, int cls, double ratio, DecidedBy how)
{
    SelectionOutcome o;
    o.chosen_classifier = chosen;
    o.predicted_class = cls;
    o.method_used = how;
    o.confidence_ratio = ratio;
    if (how == DecidedBy::rr)
        o.rr_ratio = ratio;
    if (how == DecidedBy::lp)
        o.lp_ratio = ratio;
    return o;
}

} // namespace

TEST(RecourseChain, ConfidentRankRegressionReturnsDirectly)
{
    auto out = recourse_chain(stage(1, 0, 0.4, DecidedBy::rr), std::nullopt, stage(2, 1, 0, DecidedBy::cshc), 0, 0.5);
    EXPECT_EQ(out.chosen_classifier, 1u);
    EXPECT_EQ(out.method_used, DecidedBy::rr);
    EXPECT_FALSE(out.recourse_invoked);
}

TEST(RecourseChain, ConfidentLp)
{
    auto out = recourse_chain(stage(1, 0, 0.8, DecidedBy::rr), stage(2, 1, 0.3, DecidedBy::lp),
                              stage(0, 2, 0, DecidedBy::cshc), 0, 0.5);
    EXPECT_EQ(out.chosen_classifier, 2u);
    EXPECT_EQ(out.method_used, DecidedBy::lp);
    EXPECT_TRUE(out.recourse_invoked);
}

TEST(RecourseChain, AgreementPrefersLowerRatio)
{
    auto rr = stage(1, 2, 0.7, DecidedBy::rr);
    auto lp = stage(3, 2, 0.8, DecidedBy::lp);
    auto cs = stage(0, 0, 0, DecidedBy::cshc);
    auto out = recourse_chain(rr, lp, cs, 0, 0.5);
    EXPECT_EQ(out.chosen_classifier, 1u);
    EXPECT_EQ(out.method_used, DecidedBy::lpr_agree);
    EXPECT_DOUBLE_EQ(out.confidence_ratio, 0.7);

    lp.lp_ratio = 0.7;  // tie goes to LP
    out = recourse_chain(rr, lp, cs, 0, 0.5);
    EXPECT_EQ(out.chosen_classifier, 3u);
}

TEST(RecourseChain, CshcMatch)
{
    auto out = recourse_chain(stage(1, 0, 0.9, DecidedBy::rr), stage(2, 1, 0.9, DecidedBy::lp),
                              stage(4, 1, 0, DecidedBy::cshc), 2, 0.5);
    EXPECT_EQ(out.chosen_classifier, 4u);
    EXPECT_EQ(out.method_used, DecidedBy::lpr_cshc_match);
}

TEST(RecourseChain, DominantClassPrecedence)
{
    auto rr = stage(1, 0, 0.9, DecidedBy::rr);
    auto lp = stage(2, 1, 0.9, DecidedBy::lp);
    auto cs = stage(4, 2, 0, DecidedBy::cshc);
    EXPECT_EQ(recourse_chain(rr, lp, cs, 0, 0.5).chosen_classifier, 1u);
    EXPECT_EQ(recourse_chain(rr, lp, cs, 1, 0.5).chosen_classifier, 2u);
    auto out = recourse_chain(rr, lp, cs, 2, 0.5);
    EXPECT_EQ(out.chosen_classifier, 4u);
    EXPECT_EQ(out.method_used, DecidedBy::lpr_dominant);
}

TEST(RecourseChain, FallbackToLp)
{
    auto out = recourse_chain(stage(1, 0, 0.9, DecidedBy::rr), stage(2, 1, 0.9, DecidedBy::lp),
                              stage(4, 2, 0, DecidedBy::cshc), 3, 0.5);
    EXPECT_EQ(out.chosen_classifier, 2u);
    EXPECT_EQ(out.method_used, DecidedBy::lpr_fallback);
    EXPECT_TRUE(out.recourse_invoked);
}

TEST(SelectLpr, RhoOneIsRankRegression)
{
    Rng rng(21);
    for (int trial = 0; trial < 250; ++trial) {
        auto q = selection_fixtures::random_query(rng);
        SelectionParams p;
        p.rho = 1.0;
        auto in = q.input();
        auto rr = select_rr(in);
        auto lpr = select_lpr(in, p);
        EXPECT_EQ(lpr.chosen_classifier, rr.chosen_classifier);
        EXPECT_EQ(lpr.predicted_class, rr.predicted_class);
        EXPECT_FALSE(lpr.recourse_invoked);
    }
}

TEST(SelectLpr, RhoZeroRecoursesOnAnySplitVote)
{
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        auto q = selection_fixtures::random_query(rng);
        SelectionParams p;
        p.rho = 0.0;
        auto in = q.input();
        const auto rr = select_rr(in);
        const auto lpr = select_lpr(in, p);
        EXPECT_EQ(lpr.recourse_invoked, rr.rr_ratio > 0.0);
    }
}

TEST(SelectLpr, EveryExitReachedAndPredictionsConsistent)
{
    Rng rng(23);
    std::set<DecidedBy> exits;
    for (int trial = 0; trial < 600; ++trial) {
        auto q = selection_fixtures::random_query(rng, trial % 2 == 1);
        SelectionParams p;
        p.rho = 0.5;
        auto in = q.input();
        for (const auto& out : {select_rr(in), select_lp(in, p), select_lpr(in, p)}) {
            EXPECT_EQ(out.predicted_class, q.test_labels[out.chosen_classifier]);
            EXPECT_GE(out.confidence_ratio, 0.0);
        }
        exits.insert(select_lpr(in, p).method_used);
    }
    for (auto d : {DecidedBy::rr, DecidedBy::lp, DecidedBy::lpr_agree, DecidedBy::lpr_cshc_match,
                   DecidedBy::lpr_dominant, DecidedBy::lpr_fallback})
        EXPECT_TRUE(exits.count(d)) << to_string(d);
}

TEST(Selection, ConsistentWinnerChosenByEveryStrategy)
{
    // classifier 1 is strictly best in every leaf and labels are distinct
    std::vector<int> truth{0, 1, 2, 0};
    std::vector<std::size_t> rows{0, 1, 2, 3};
    std::vector<std::vector<int>> preds{{1, 2, 0, 1}, {0, 1, 2, 0}, {2, 0, 1, 1}};
    auto cm = make_correctness(truth, rows, preds, 3);
    ClusterNode a, b;
    a.members = {{0, 1}, {1, 1}};
    b.members = {{2, 2}, {3, 1}};
    a.correct_counts = {0, 2, 0};
    b.correct_counts = {0, 3, 0};
    a.class_counts = {1, 1, 0};
    b.class_counts = {1, 0, 2};
    auto bundle = make_bundle({{0, 0}, {1, 0}}, {&a, &b}, 3, 3);
    std::vector<int> labels{0, 1, 2};
    SelectionInput in;
    in.bundle = &bundle;
    in.cm = &cm;
    in.test_labels = labels;
    in.n_classes = 3;
    EXPECT_EQ(select_cshc(in).chosen_classifier, 1u);
    EXPECT_EQ(select_rr(in).chosen_classifier, 1u);
    EXPECT_EQ(select_lp(in, SelectionParams{}).chosen_classifier, 1u);
}
