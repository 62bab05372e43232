#ifndef CSHC_BASELINES_HPP
#define CSHC_BASELINES_HPP

#include <cmath>
#include <vector>

#include "core.hpp"
#include "dataset.hpp"
#include "selection.hpp"

namespace cshc {

/// k nearest DCS-training samples of a query, nearest first.
struct Region {
    std::vector<std::size_t> neighbors;  // rows of the DCS correctness matrix
    std::vector<double> distances;
    std::size_t k = 0;
    bool clamped = false;  // k exceeded the pool and was reduced
};

using CompetenceVector = std::vector<double>;

/// Exact k-NN under Euclidean distance over `points` (already standardized);
/// distance ties go to the lower row. k larger than the pool is clamped.
inline Region region_of(std::span<const double> x, std::size_t k, const Matrix<double>& points)
{
    if (k == 0)
        throw ConfigError("region size k must be >= 1");
    if (points.rows() == 0)
        throw DataError(DataError::Kind::empty, "region pool is empty");
    if (x.size() != points.cols())
        throw DataError(DataError::Kind::dimension, "query dimension differs from the region pool");
    Region r;
    r.clamped = k > points.rows();
    r.k = std::min(k, points.rows());
    std::vector<std::pair<double, std::size_t>> d(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double s = 0.0;
        const auto p = points.row(i);
        for (std::size_t f = 0; f < x.size(); ++f)
            s += (p[f] - x[f]) * (p[f] - x[f]);
        d[i] = {s, i};
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(r.k), d.end());
    for (std::size_t i = 0; i < r.k; ++i) {
        r.neighbors.push_back(d[i].second);
        r.distances.push_back(std::sqrt(d[i].first));
    }
    return r;
}

/// Overall local accuracy.
inline CompetenceVector ola(const Region& region, const CorrectnessMatrix& cm)
{
    CompetenceVector score(cm.n_classifiers(), 0.0);
    for (auto i : region.neighbors)
        for (std::size_t a = 0; a < score.size(); ++a)
            score[a] += cm.correct(i, a);
    for (auto& s : score)
        s /= static_cast<double>(region.neighbors.size());
    return score;
}

/// Local class accuracy: accuracy restricted to neighbors whose true class is
/// the classifier's prediction on the query; 0 when there are none.
inline CompetenceVector lca(const Region& region, const CorrectnessMatrix& cm, std::span<const int> query_labels)
{
    CompetenceVector score(cm.n_classifiers(), 0.0);
    for (std::size_t a = 0; a < score.size(); ++a) {
        double hits = 0.0, total = 0.0;
        for (auto i : region.neighbors) {
            if (cm.truth[i] != query_labels[a])
                continue;
            total += 1.0;
            hits += cm.correct(i, a);
        }
        score[a] = total > 0.0 ? hits / total : 0.0;
    }
    return score;
}

namespace detail {

inline std::vector<double> neighbor_weights(const Region& region, bool distance_weighted)
{
    std::vector<double> w(region.neighbors.size(), 1.0);
    if (distance_weighted)
        for (std::size_t j = 0; j < w.size(); ++j)
            w[j] = 1.0 / (region.distances[j] + 1e-12);
    return w;
}

inline double true_class_proba(const CorrectnessMatrix& cm, std::size_t i, std::size_t a)
{
    if (cm.has_proba())
        return cm.proba_of(i, a)[static_cast<std::size_t>(cm.truth[i])];
    return cm.correct(i, a);
}

} // namespace detail

/// A priori: mean probability each classifier assigns to the neighbors' true
/// classes. With `distance_weighted` (not the default), neighbors are
/// weighted by inverse distance.
inline CompetenceVector apriori(const Region& region, const CorrectnessMatrix& cm, bool distance_weighted = false)
{
    const auto w = detail::neighbor_weights(region, distance_weighted);
    CompetenceVector score(cm.n_classifiers(), 0.0);
    for (std::size_t a = 0; a < score.size(); ++a) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < region.neighbors.size(); ++j) {
            num += w[j] * detail::true_class_proba(cm, region.neighbors[j], a);
            den += w[j];
        }
        score[a] = num / den;
    }
    return score;
}

/// A posteriori: like apriori but only over neighbors whose true class is the
/// classifier's prediction on the query; 0 when there are none.
inline CompetenceVector aposteriori(const Region& region, const CorrectnessMatrix& cm, std::span<const int> query_labels,
                                    bool distance_weighted = false)
{
    const auto w = detail::neighbor_weights(region, distance_weighted);
    CompetenceVector score(cm.n_classifiers(), 0.0);
    for (std::size_t a = 0; a < score.size(); ++a) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < region.neighbors.size(); ++j) {
            const auto i = region.neighbors[j];
            if (cm.truth[i] != query_labels[a])
                continue;
            num += w[j] * detail::true_class_proba(cm, i, a);
            den += w[j];
        }
        score[a] = den > 0.0 ? num / den : 0.0;
    }
    return score;
}

/// Fraction of positions on which two output profiles agree.
inline double profile_similarity(std::span<const int> a, std::span<const int> b)
{
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        same += a[i] == b[i];
    return a.empty() ? 1.0 : static_cast<double>(same) / static_cast<double>(a.size());
}

/// Multiple classifier behavior: keep neighbors whose output profile is at
/// least `threshold`-similar to the query's, falling back to the full region
/// when none survive, then score as OLA.
inline CompetenceVector mcb(const Region& region, const CorrectnessMatrix& cm, std::span<const int> query_labels,
                            double threshold = 0.7)
{
    Region kept = region;
    kept.neighbors.clear();
    kept.distances.clear();
    for (std::size_t j = 0; j < region.neighbors.size(); ++j) {
        const auto i = region.neighbors[j];
        if (profile_similarity(cm.predicted.row(i), query_labels) >= threshold) {
            kept.neighbors.push_back(i);
            kept.distances.push_back(region.distances[j]);
        }
    }
    return ola(kept.neighbors.empty() ? region : kept, cm);
}

/// Plurality over labels with optional weights; ties toward the lower class.
inline std::vector<double> class_support(std::span<const int> labels, std::span<const double> weights,
                                         std::size_t n_classes)
{
    std::vector<double> s(n_classes, 0.0);
    for (std::size_t a = 0; a < labels.size(); ++a)
        s[static_cast<std::size_t>(labels[a])] += weights.empty() ? 1.0 : weights[a];
    return s;
}

/// Static majority vote over all classifiers; ties toward the lower class.
inline int majority_vote(std::span<const int> labels, std::size_t n_classes)
{
    const auto s = class_support(labels, {}, n_classes);
    return static_cast<int>(argmax_lowest<double>(s));
}

struct CommitteeVote {
    std::vector<std::size_t> committee;
    std::vector<double> weights;  // per classifier; 0 = not voting
    int predicted_class = 0;
    std::size_t chosen_classifier = 0;
    std::size_t k_used = 0;
    bool fallback = false;
};

namespace detail {

/// Winning class and its highest-weight voter (ties to the lower index).
inline void settle(CommitteeVote& v, std::span<const int> labels, std::size_t n_classes)
{
    const auto s = class_support(labels, v.weights, n_classes);
    v.predicted_class = static_cast<int>(argmax_lowest<double>(s));
    double best = -1.0;
    for (std::size_t a = 0; a < labels.size(); ++a)
        if (labels[a] == v.predicted_class && v.weights[a] > best) {
            best = v.weights[a];
            v.chosen_classifier = a;
        }
}

} // namespace detail

/// KNORA-Eliminate: shrink the region until some classifier is correct on all
/// of it; those classifiers vote with equal weight. If none is perfect even at
/// k = 1, every classifier votes.
inline CommitteeVote knora_e(const Region& region, const CorrectnessMatrix& cm, std::span<const int> query_labels)
{
    CommitteeVote v;
    const std::size_t n = cm.n_classifiers();
    v.weights.assign(n, 0.0);
    for (std::size_t k = region.neighbors.size(); k >= 1; --k) {
        for (std::size_t a = 0; a < n; ++a) {
            bool perfect = true;
            for (std::size_t j = 0; j < k && perfect; ++j)
                perfect = cm.correct(region.neighbors[j], a) != 0;
            if (perfect)
                v.committee.push_back(a);
        }
        if (!v.committee.empty()) {
            v.k_used = k;
            break;
        }
    }
    if (v.committee.empty()) {
        v.fallback = true;
        for (std::size_t a = 0; a < n; ++a)
            v.committee.push_back(a);
    }
    for (auto a : v.committee)
        v.weights[a] = 1.0;
    detail::settle(v, query_labels, cm.n_classes);
    return v;
}

/// KNORA-Union: every classifier votes with weight equal to its number of
/// correct region samples. All-zero weights fall back to an unweighted vote.
inline CommitteeVote knora_u(const Region& region, const CorrectnessMatrix& cm, std::span<const int> query_labels)
{
    CommitteeVote v;
    const std::size_t n = cm.n_classifiers();
    v.weights.assign(n, 0.0);
    v.k_used = region.neighbors.size();
    for (auto i : region.neighbors)
        for (std::size_t a = 0; a < n; ++a)
            v.weights[a] += cm.correct(i, a);
    for (std::size_t a = 0; a < n; ++a)
        if (v.weights[a] > 0.0)
            v.committee.push_back(a);
    if (v.committee.empty()) {
        v.fallback = true;
        std::fill(v.weights.begin(), v.weights.end(), 1.0);
        for (std::size_t a = 0; a < n; ++a)
            v.committee.push_back(a);
    }
    detail::settle(v, query_labels, cm.n_classes);
    return v;
}

// Common selector interface --------------------------------------------------

enum class Baseline { ola, lca, apriori, aposteriori, mcb, knora_e, knora_u, majority_vote };

struct BaselineParams {
    std::size_t k = 7;
    double mcb_threshold = 0.7;
    bool distance_weighted = false;
};

/// DCS training material: the correctness matrix and its rows' standardized
/// features (row i of `points` is row i of `cm`).
struct BaselinePool {
    const CorrectnessMatrix* cm = nullptr;
    const Matrix<double>* points = nullptr;
};

/// Runs one baseline on a (standardized) query and reports it the same way the
/// CSHC strategies do.
inline SelectionOutcome select_baseline(Baseline method, const BaselinePool& pool, std::span<const double> x,
                                        std::span<const int> query_labels, const BaselineParams& params)
{
    SelectionOutcome out;
    out.method_used = DecidedBy::baseline;
    const auto& cm = *pool.cm;
    auto pick = [&](const CompetenceVector& score) {
        out.chosen_classifier = argmax_lowest<double>(score);
        out.predicted_class = query_labels[out.chosen_classifier];
    };
    auto committee = [&](const CommitteeVote& v) {
        out.chosen_classifier = v.chosen_classifier;
        out.predicted_class = v.predicted_class;
    };
    if (method == Baseline::majority_vote) {
        CommitteeVote v;
        v.weights.assign(query_labels.size(), 1.0);
        detail::settle(v, query_labels, cm.n_classes);
        committee(v);
        return out;
    }
    const Region region = region_of(x, params.k, *pool.points);
    switch (method) {
    case Baseline::ola: pick(ola(region, cm)); break;
    case Baseline::lca: pick(lca(region, cm, query_labels)); break;
    case Baseline::apriori: pick(apriori(region, cm, params.distance_weighted)); break;
    case Baseline::aposteriori: pick(aposteriori(region, cm, query_labels, params.distance_weighted)); break;
    case Baseline::mcb: pick(mcb(region, cm, query_labels, params.mcb_threshold)); break;
    case Baseline::knora_e: committee(knora_e(region, cm, query_labels)); break;
    case Baseline::knora_u: committee(knora_u(region, cm, query_labels)); break;
    case Baseline::majority_vote: break;
    }
    return out;
}

} // namespace cshc

#endif
