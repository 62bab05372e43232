#ifndef CSHC_METRICS_HPP
#define CSHC_METRICS_HPP

#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "core.hpp"
#include "dataset.hpp"

namespace cshc {

/// Percentage of samples on which at least one classifier is correct.
inline double oracle_accuracy(const CorrectnessMatrix& cm)
{
    if (cm.size() == 0)
        return 0.0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < cm.size(); ++i) {
        const auto row = cm.correct.row(i);
        covered += std::any_of(row.begin(), row.end(), [](std::uint8_t c) { return c != 0; });
    }
    return 100.0 * static_cast<double>(covered) / static_cast<double>(cm.size());
}

/// Geometric mean of reference/method accuracy ratios, minus one, in percent.
/// Positive means the method is on average less accurate than the reference.
inline double mgi(std::span<const double> reference, std::span<const double> method)
{
    if (reference.size() != method.size() || reference.empty())
        throw Error("mgi: vectors must be non-empty and of equal length");
    double log_sum = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (!(reference[i] > 0.0) || !(method[i] > 0.0))
            throw Error("mgi: accuracy entries must be positive (entry " + std::to_string(i) + ")");
        log_sum += std::log(reference[i] / method[i]);
    }
    return (std::exp(log_sum / static_cast<double>(reference.size())) - 1.0) * 100.0;
}

/// Head-to-head counts from the reference's point of view: `wins` counts
/// entries where the reference is strictly better. In a "losses / wins vs
/// reference" table row for a method, losses = wins here and vice versa.
struct WinLoss {
    std::size_t wins = 0;
    std::size_t losses = 0;
    std::size_t ties = 0;

    friend bool operator==(const WinLoss&, const WinLoss&) = default;
};

inline WinLoss wins_losses(std::span<const double> reference, std::span<const double> method)
{
    if (reference.size() != method.size())
        throw Error("wins_losses: vectors must have equal length");
    WinLoss out;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (reference[i] > method[i])
            ++out.wins;
        else if (reference[i] < method[i])
            ++out.losses;
        else
            ++out.ties;
    }
    return out;
}

/// table[m][d] = accuracy of method m on dataset d. Per dataset the best
/// method gets rank M, ties share the mean rank; returns the mean over datasets.
inline std::vector<double> average_ranks(const std::vector<std::vector<double>>& table)
{
    if (table.empty())
        return {};
    const std::size_t methods = table.size();
    const std::size_t datasets = table.front().size();
    std::vector<double> mean(methods, 0.0);
    std::vector<double> column(methods);
    for (std::size_t d = 0; d < datasets; ++d) {
        for (std::size_t m = 0; m < methods; ++m)
            column[m] = table[m][d];
        const auto r = average_ranks_ascending(column);
        for (std::size_t m = 0; m < methods; ++m)
            mean[m] += r[m];
    }
    for (auto& v : mean)
        v /= static_cast<double>(datasets);
    return mean;
}

struct TTestResult {
    double t = 0.0;
    double p_value = 1.0;
    std::size_t df = 0;
    bool degenerate = false;
};

/// Two-sided one-sample Student t-test of per-dataset outcome indicators
/// (+1 win, -1 loss, 0 tie) against mean 0, with N-1 degrees of freedom.
/// Zero variance sets `degenerate`: p = 1 when every entry is 0, otherwise
/// (one side won everywhere) the limit t = +-inf, p = 0.
inline TTestResult paired_sign_ttest(std::span<const int> outcomes)
{
    TTestResult out;
    const std::size_t n = outcomes.size();
    out.df = n > 0 ? n - 1 : 0;
    if (n < 2) {
        out.degenerate = true;
        return out;
    }
    double mean = 0.0;
    for (int v : outcomes)
        mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (int v : outcomes)
        ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) {
        out.degenerate = true;
        out.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
        out.p_value = mean == 0.0 ? 1.0 : 0.0;
        return out;
    }
    out.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const boost::math::students_t dist(static_cast<double>(out.df));
    out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
    return out;
}

/// +1 where the reference is better, -1 where it is worse, 0 on ties.
inline std::vector<int> outcome_indicators(std::span<const double> reference, std::span<const double> method)
{
    std::vector<int> out(reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i)
        out[i] = reference[i] > method[i] ? 1 : (reference[i] < method[i] ? -1 : 0);
    return out;
}

} // namespace cshc

#endif
