#include <gtest/gtest.h>

#include <cmath>

#include "cshc/metrics.hpp"
#include "reference_tables.hpp"

using namespace cshc;

namespace {

/// Two-sided p-value of Student's t by Simpson integration of the density.
double t_pvalue_by_integration(double t, double df)
{
    const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
    auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
    const int steps = 20000;
    const double h = std::abs(t) / steps;
    double s = pdf(0) + pdf(std::abs(t));
    for (int i = 1; i < steps; ++i)
        s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
    return 1.0 - 2.0 * s * h / 3.0;
}

std::vector<int> indicators(int wins, int losses, int ties)
{
    std::vector<int> v;
    v.insert(v.end(), static_cast<std::size_t>(wins), 1);
    v.insert(v.end(), static_cast<std::size_t>(losses), -1);
    v.insert(v.end(), static_cast<std::size_t>(ties), 0);
    return v;
}

} // namespace

TEST(OracleAccuracy, Coverage)
{
    std::vector<std::size_t> rows{0, 1, 2, 3};
    std::vector<int> truth{0, 1, 1, 0};
    // complementary pair
    auto pair = make_correctness(truth, rows, {{0, 0, 1, 1}, {1, 1, 0, 0}}, 2);
    EXPECT_DOUBLE_EQ(oracle_accuracy(pair), 100.0);
    // nobody right on sample 3
    auto gap = make_correctness(truth, rows, {{0, 1, 1, 1}, {1, 1, 1, 1}}, 2);
    EXPECT_DOUBLE_EQ(oracle_accuracy(gap), 75.0);
}

TEST(Mgi, Examples)
{
    std::vector<double> a{90, 80, 70};
    EXPECT_DOUBLE_EQ(mgi(a, a), 0.0);
    EXPECT_NEAR(mgi(std::vector<double>{100, 100}, std::vector<double>{50, 50}), 100.0, 1e-12);
    EXPECT_THROW(mgi(std::vector<double>{100, 0}, std::vector<double>{50, 50}), Error);
    EXPECT_THROW(mgi(std::vector<double>{100}, std::vector<double>{50, 50}), Error);
}

TEST(Mgi, Antisymmetric)
{
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(1 + uniform_index(rng, 40)), b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = 1.0 + 99.0 * uniform_real(rng);
            b[i] = 1.0 + 99.0 * uniform_real(rng);
        }
        EXPECT_NEAR((1.0 + mgi(a, b) / 100.0) * (1.0 + mgi(b, a) / 100.0), 1.0, 1e-9);
    }
}

TEST(Mgi, ReferenceCshcColumn)
{
    std::vector<double> lpr, cshc;
    for (const auto& r : reference_tables::table2) {
        lpr.push_back(r.lpr);
        cshc.push_back(r.cshc);
    }
    EXPECT_NEAR(mgi(lpr, cshc), 0.8, 0.05);
}

TEST(WinsLosses, Examples)
{
    std::vector<double> a{1, 2, 3};
    EXPECT_EQ(wins_losses(a, a), (WinLoss{0, 0, 3}));
    EXPECT_EQ(wins_losses(std::vector<double>{2, 3, 4}, a), (WinLoss{3, 0, 0}));
    EXPECT_THROW(wins_losses(a, std::vector<double>{1}), Error);
}

TEST(WinsLosses, ReferenceCshcColumn)
{
    std::vector<double> lpr, cshc;
    for (const auto& r : reference_tables::table2) {
        lpr.push_back(r.lpr);
        cshc.push_back(r.cshc);
    }
    const auto wl = wins_losses(lpr, cshc);
    EXPECT_EQ(wl.wins, 27u);  // the "losses/LPR" entry of CSHC
    EXPECT_EQ(wl.losses, 6u);
}

TEST(AverageRanks, Examples)
{
    EXPECT_EQ(average_ranks({{2, 3, 4}, {1, 2, 3}}), (std::vector<double>{2.0, 1.0}));
    EXPECT_EQ(average_ranks({{5, 5}, {5, 5}, {5, 5}}), (std::vector<double>{2.0, 2.0, 2.0}));
    // mixed: dataset 0 ranks (3, 1.5, 1.5), dataset 1 ranks (1, 2, 3)
    auto r = average_ranks({{9, 1}, {4, 2}, {4, 3}});
    EXPECT_DOUBLE_EQ(r[0], 2.0);
    EXPECT_DOUBLE_EQ(r[1], 1.75);
    EXPECT_DOUBLE_EQ(r[2], 2.25);
}

TEST(AverageRanks, SumToMeanRankTotal)
{
    Rng rng(42);
    std::vector<std::vector<double>> table(6, std::vector<double>(30));
    for (auto& row : table)
        for (auto& v : row)
            v = static_cast<double>(uniform_index(rng, 5));
    auto r = average_ranks(table);
    double sum = 0.0;
    for (double v : r)
        sum += v;
    EXPECT_NEAR(sum, 6.0 * 7.0 / 2.0, 1e-12);
}

TEST(TTest, TwentySixWinsThirteenLossesOneTie)
{
    // 26 wins, 13 losses, 1 tie over 40 benchmarks
    const auto v = indicators(26, 13, 1);
    const auto r = paired_sign_ttest(v);
    // closed form: mean 13/40, sample variance (39 - 40 * 0.325^2) / 39
    const double mean = 13.0 / 40.0;
    const double sd = std::sqrt((39.0 - 40.0 * mean * mean) / 39.0);
    EXPECT_NEAR(r.t, mean / (sd / std::sqrt(40.0)), 1e-12);
    EXPECT_NEAR(r.t, 2.176768, 1e-6);
    EXPECT_EQ(r.df, 39u);
    EXPECT_NEAR(r.p_value, t_pvalue_by_integration(r.t, 39), 1e-7);
    EXPECT_NEAR(r.p_value, 0.035615, 1e-6);
    EXPECT_FALSE(r.degenerate);
}

TEST(TTest, MatchesIntegrationOracle)
{
    Rng rng(43);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = static_cast<int>(uniform_index(rng, 20)), l = static_cast<int>(uniform_index(rng, 20));
        const int t = static_cast<int>(1 + uniform_index(rng, 5));
        auto v = indicators(w, l, t);
        auto r = paired_sign_ttest(v);
        if (r.degenerate)
            continue;
        EXPECT_NEAR(r.p_value, t_pvalue_by_integration(r.t, static_cast<double>(r.df)), 1e-6);
        // sign of the statistic follows the reference's side
        EXPECT_EQ(r.t > 0, w > l);
    }
}

TEST(TTest, DegenerateCases)
{
    auto zeros = paired_sign_ttest(indicators(0, 0, 40));
    EXPECT_TRUE(zeros.degenerate);
    EXPECT_DOUBLE_EQ(zeros.p_value, 1.0);

    auto sweep = paired_sign_ttest(indicators(40, 0, 0));
    EXPECT_TRUE(sweep.degenerate);
    EXPECT_LT(sweep.p_value, 1e-6);
    EXPECT_TRUE(std::isinf(sweep.t) && sweep.t > 0);

    auto nearly = paired_sign_ttest(indicators(39, 0, 1));
    EXPECT_FALSE(nearly.degenerate);
    EXPECT_LT(nearly.p_value, 1e-6);

    EXPECT_TRUE(paired_sign_ttest(std::vector<int>{1}).degenerate);
}

TEST(OutcomeIndicators, Signs)
{
    EXPECT_EQ(outcome_indicators(std::vector<double>{2, 1, 1}, std::vector<double>{1, 2, 1}),
              (std::vector<int>{1, -1, 0}));
}
