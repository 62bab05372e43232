#include <gtest/gtest.h>

#include <numeric>

#include "baseline_fixtures.hpp"

using namespace cshc;
using namespace baseline_fixtures;

namespace {

Region region_over(std::vector<std::size_t> rows)
{
    Region r;
    r.neighbors = std::move(rows);
    r.distances.assign(r.neighbors.size(), 1.0);
    r.k = r.neighbors.size();
    return r;
}

} // namespace

TEST(Region, NearestFirstWithIndexTies)
{
    auto pts = points({{0, 0}, {3, 0}, {1, 0}, {1, 0}, {-1, 0}});
    std::vector<double> x{1, 0};
    auto r = region_of(x, 3, pts);
    EXPECT_EQ(r.neighbors, (std::vector<std::size_t>{2, 3, 0}));
    EXPECT_DOUBLE_EQ(r.distances[0], 0.0);
    EXPECT_DOUBLE_EQ(r.distances[2], 1.0);
    EXPECT_FALSE(r.clamped);

    auto one = region_of(x, 1, pts);
    EXPECT_EQ(one.neighbors, (std::vector<std::size_t>{2}));

    std::vector<double> mid{0, 0};
    auto tie = region_of(mid, 3, pts);
    // rows 2, 3 and 4 are all at distance 1; lower rows first
    EXPECT_EQ(tie.neighbors, (std::vector<std::size_t>{0, 2, 3}));
}

TEST(Region, ClampsAndValidates)
{
    auto pts = points({{0.0}, {1.0}});
    std::vector<double> x{0.2};
    auto r = region_of(x, 7, pts);
    EXPECT_TRUE(r.clamped);
    EXPECT_EQ(r.k, 2u);
    EXPECT_THROW(region_of(x, 0, pts), ConfigError);
    std::vector<double> bad{0.0, 1.0};
    EXPECT_THROW(region_of(bad, 1, pts), DataError);
}

TEST(Ola, Scores)
{
    // 7 neighbors; classifier 0 perfect, 1 correct on 3, 2 never
    std::vector<int> truth(7, 0);
    auto cm = matrix(truth, {{0, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1, 1}}, 2);
    auto s = ola(region_over({0, 1, 2, 3, 4, 5, 6}), cm);
    EXPECT_DOUBLE_EQ(s[0], 1.0);
    EXPECT_DOUBLE_EQ(s[1], 3.0 / 7.0);
    EXPECT_DOUBLE_EQ(s[2], 0.0);
}

TEST(Ola, AllZeroPicksFirst)
{
    auto cm = matrix({0, 0}, {{1, 1}, {1, 1}}, 2);
    auto pts = points({{0.0}, {1.0}});
    std::vector<double> x{0.0};
    std::vector<int> labels{1, 0};
    auto out = select_baseline(Baseline::ola, {&cm, &pts}, x, labels, BaselineParams{});
    EXPECT_EQ(out.chosen_classifier, 0u);
    EXPECT_EQ(out.predicted_class, 1);
}

TEST(Lca, RestrictsToPredictedClass)
{
    // region truths: four of class 2, two of class 0
    std::vector<int> truth{2, 2, 2, 2, 0, 0};
    auto cm = matrix(truth, {{2, 2, 2, 0, 0, 0}, {2, 2, 2, 2, 1, 1}, {0, 0, 0, 0, 0, 0}}, 3);
    auto r = region_over({0, 1, 2, 3, 4, 5});
    std::vector<int> labels{2, 2, 1};
    auto s = lca(r, cm, labels);
    EXPECT_DOUBLE_EQ(s[0], 0.75);
    EXPECT_DOUBLE_EQ(s[1], 1.0);
    EXPECT_DOUBLE_EQ(s[2], 0.0);  // no class-1 neighbors
}

TEST(Apriori, SoftScores)
{
    std::vector<int> truth{0, 1};
    Matrix<double> p(2, 2);
    p(0, 0) = 0.8, p(0, 1) = 0.2;
    p(1, 0) = 0.4, p(1, 1) = 0.6;
    Matrix<double> u(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            u(i, c) = 0.5;
    auto cm = matrix(truth, {{0, 1}, {0, 0}}, 2, {p, u});
    auto s = apriori(region_over({0, 1}), cm);
    EXPECT_DOUBLE_EQ(s[0], 0.7);
    EXPECT_DOUBLE_EQ(s[1], 0.5);
}

TEST(Apriori, DistanceWeightingIsOptIn)
{
    std::vector<int> truth{0, 0};
    Matrix<double> p(2, 2);
    p(0, 0) = 1.0;
    p(1, 1) = 1.0;
    auto cm = matrix(truth, {{0, 1}}, 2, {p});
    Region r;
    r.neighbors = {0, 1};
    r.distances = {1.0, 3.0};
    EXPECT_DOUBLE_EQ(apriori(r, cm)[0], 0.5);
    EXPECT_NEAR(apriori(r, cm, true)[0], 0.75, 1e-9);
}

TEST(Aposteriori, RestrictionArithmetic)
{
    std::vector<int> truth{1, 1, 0};
    Matrix<double> p(3, 2);
    p(0, 1) = 0.9, p(0, 0) = 0.1;
    p(1, 1) = 0.5, p(1, 0) = 0.5;
    p(2, 0) = 1.0;
    auto cm = matrix(truth, {{1, 1, 0}}, 2, {p});
    auto r = region_over({0, 1, 2});
    EXPECT_DOUBLE_EQ(aposteriori(r, cm, std::vector<int>{1})[0], 0.7);
    EXPECT_DOUBLE_EQ(aposteriori(r, cm, std::vector<int>{0})[0], 1.0);
    auto cm3 = matrix(truth, {{1, 1, 0}}, 3, {[] {
                                                   Matrix<double> q(3, 3);
                                                   q(0, 1) = q(1, 1) = q(2, 0) = 1.0;
                                                   return q;
                                               }()});
    EXPECT_DOUBLE_EQ(aposteriori(r, cm3, std::vector<int>{2})[0], 0.0);
}

TEST(Mcb, SimilarityFilter)
{
    EXPECT_DOUBLE_EQ(profile_similarity(std::vector<int>{0, 1, 2, 3, 4}, std::vector<int>{0, 1, 2, 0, 0}), 0.6);
    // neighbor 0 shares 3 of 5 outputs with the query and is dropped; 1 is identical
    std::vector<int> truth{0, 1};
    std::vector<std::vector<int>> preds{{0, 1}, {1, 1}, {2, 1}, {0, 1}, {0, 1}};
    auto cm = matrix(truth, preds, 3);
    std::vector<int> query{1, 1, 1, 1, 1};
    auto r = region_over({0, 1});
    auto kept = mcb(r, cm, query, 0.7);
    EXPECT_EQ(kept, ola(region_over({1}), cm));
    EXPECT_EQ(mcb(r, cm, query, 0.0), ola(r, cm));
    // nobody survives a threshold of 1 against a foreign profile: full region
    std::vector<int> foreign{2, 2, 2, 2, 2};
    EXPECT_EQ(mcb(r, cm, foreign, 1.0), ola(r, cm));
}

TEST(KnoraE, ShrinksUntilSomeoneIsPerfect)
{
    std::vector<int> truth{0, 0, 0};
    // classifier 1 is perfect at full k
    auto full = matrix(truth, {{0, 1, 0}, {0, 0, 0}, {1, 0, 0}}, 2);
    auto v = knora_e(region_over({0, 1, 2}), full, std::vector<int>{0, 1, 0});
    EXPECT_EQ(v.committee, (std::vector<std::size_t>{1}));
    EXPECT_EQ(v.k_used, 3u);
    EXPECT_EQ(v.predicted_class, 1);

    // only classifier 2 gets the nearest neighbor right
    auto shrink = matrix(truth, {{1, 0, 0}, {1, 1, 0}, {0, 1, 1}}, 2);
    v = knora_e(region_over({0, 1, 2}), shrink, std::vector<int>{0, 0, 1});
    EXPECT_EQ(v.committee, (std::vector<std::size_t>{2}));
    EXPECT_EQ(v.k_used, 1u);
    EXPECT_EQ(v.chosen_classifier, 2u);

    // all wrong on the nearest neighbor: everyone votes
    auto none = matrix(truth, {{1, 0, 0}, {1, 0, 0}}, 2);
    v = knora_e(region_over({0, 1, 2}), none, std::vector<int>{1, 0});
    EXPECT_TRUE(v.fallback);
    EXPECT_EQ(v.committee.size(), 2u);
    EXPECT_EQ(v.predicted_class, 0);
}

TEST(KnoraU, WeightedVote)
{
    // correct counts (3, 0, 2)
    std::vector<int> truth{0, 0, 0};
    auto cm = matrix(truth, {{0, 0, 0}, {1, 1, 1}, {0, 0, 1}}, 3);
    auto v = knora_u(region_over({0, 1, 2}), cm, std::vector<int>{1, 2, 1});
    EXPECT_EQ(v.weights, (std::vector<double>{3, 0, 2}));
    EXPECT_EQ(v.predicted_class, 1);
    EXPECT_EQ(v.chosen_classifier, 0u);

    auto zero = matrix(truth, {{1, 1, 1}, {1, 1, 1}}, 3);
    v = knora_u(region_over({0, 1, 2}), zero, std::vector<int>{2, 1});
    EXPECT_TRUE(v.fallback);
    EXPECT_EQ(v.predicted_class, 1);

    auto tie = matrix({0, 0}, {{0, 0}, {0, 0}}, 3);
    v = knora_u(region_over({0, 1}), tie, std::vector<int>{2, 1});
    EXPECT_EQ(v.predicted_class, 1);
    EXPECT_EQ(v.chosen_classifier, 1u);
}

TEST(MajorityVote, Plurality)
{
    EXPECT_EQ(majority_vote(std::vector<int>{1, 1, 2}, 3), 1);
    EXPECT_EQ(majority_vote(std::vector<int>{2, 1}, 3), 1);
    EXPECT_EQ(majority_vote(std::vector<int>{2, 2, 2}, 3), 2);
}

TEST(BaselineEquivalences, OneHotAndThresholdZero)
{
    Rng rng(31);
    for (int trial = 0; trial < 250; ++trial) {
        auto rc = random_case(rng);
        const auto r = region_of(rc.query, 1 + uniform_index(rng, 7), rc.pts);
        EXPECT_EQ(apriori(r, rc.soft), ola(r, rc.hard));
        EXPECT_EQ(aposteriori(r, rc.soft, rc.query_labels), lca(r, rc.hard, rc.query_labels));
        EXPECT_EQ(mcb(r, rc.hard, rc.query_labels, 0.0), ola(r, rc.hard));
    }
}

TEST(BaselineEquivalences, KnoraUWithPerfectPoolIsMajorityVote)
{
    Rng rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + uniform_index(rng, 5), c = 2 + uniform_index(rng, 3);
        std::vector<int> truth{0, 1, 0};
        std::vector<std::vector<int>> preds(n, truth);
        auto cm = matrix(truth, preds, c);
        std::vector<int> labels(n);
        for (auto& l : labels)
            l = static_cast<int>(uniform_index(rng, c));
        EXPECT_EQ(knora_u(region_over({0, 1, 2}), cm, labels).predicted_class, majority_vote(labels, c));
    }
}

TEST(SelectBaseline, PredictionMatchesChosenLabelForSelectors)
{
    Rng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        auto rc = random_case(rng);
        for (auto b : {Baseline::ola, Baseline::lca, Baseline::apriori, Baseline::aposteriori, Baseline::mcb}) {
            auto out = select_baseline(b, {&rc.soft, &rc.pts}, rc.query, rc.query_labels, BaselineParams{});
            EXPECT_EQ(out.predicted_class, rc.query_labels[out.chosen_classifier]);
            EXPECT_EQ(out.method_used, DecidedBy::baseline);
        }
        for (auto b : {Baseline::knora_e, Baseline::knora_u, Baseline::majority_vote}) {
            auto out = select_baseline(b, {&rc.soft, &rc.pts}, rc.query, rc.query_labels, BaselineParams{});
            EXPECT_EQ(out.predicted_class, rc.query_labels[out.chosen_classifier]);
        }
        auto mv = select_baseline(Baseline::majority_vote, {&rc.soft, &rc.pts}, rc.query, rc.query_labels,
                                  BaselineParams{});
        EXPECT_EQ(mv.predicted_class, majority_vote(rc.query_labels, rc.c));
    }
}
