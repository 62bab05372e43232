#ifndef CSHC_FOREST_HPP
#define CSHC_FOREST_HPP

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "core.hpp"
#include "dataset.hpp"

namespace cshc {

/// Forest hyperparameters. Defaults are the values used for every benchmark
/// in the original evaluation.
struct CshcConfig {
    std::size_t n_trees = 50;
    double bootstrap_fraction = 0.8;
    std::size_t min_cluster_size = 2;
    std::size_t max_depth = 15;
    /// A split is kept only if its gain is at least this fraction of the
    /// parent's best weighted correct count.
    double min_improvement = 0.02;
    std::uint64_t seed = 0;
    /// Worker threads for tree construction; 0 = hardware concurrency.
    std::size_t threads = 1;

    void validate() const
    {
        if (n_trees < 1)
            throw ConfigError("n_trees must be >= 1");
        if (!(bootstrap_fraction > 0.0 && bootstrap_fraction <= 1.0))
            throw ConfigError("bootstrap_fraction must lie in (0, 1]");
        if (min_cluster_size < 1)
            throw ConfigError("min_cluster_size must be >= 1");
        if (max_depth < 1)
            throw ConfigError("max_depth must be >= 1");
        if (!(min_improvement >= 0.0 && min_improvement < 1.0))
            throw ConfigError("min_improvement must lie in [0, 1)");
    }

    /// round(2 * sqrt(F)) with halves rounded up, capped at F.
    static std::size_t feature_subset_size(std::size_t n_features)
    {
        const auto wanted = static_cast<std::size_t>(std::floor(2.0 * std::sqrt(static_cast<double>(n_features)) + 0.5));
        return std::clamp<std::size_t>(wanted, 1, n_features);
    }

    std::size_t bootstrap_draws(std::size_t m) const
    {
        return static_cast<std::size_t>(std::ceil(bootstrap_fraction * static_cast<double>(m) - 1e-9));
    }
};

/// A sample of the correctness matrix (row index) with its bootstrap multiplicity.
struct Member {
    std::size_t row = 0;
    std::uint32_t multiplicity = 0;

    friend bool operator==(const Member&, const Member&) = default;
};

/// Internal nodes route x[feature] <= threshold to the left child. Leaves keep
/// their member multiset with per-classifier weighted correct counts and
/// per-class weighted truth counts.
struct ClusterNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<Member> members;
    std::vector<double> correct_counts;
    std::vector<double> class_counts;
    double size = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const ClusterNode&, const ClusterNode&) = default;
};

struct ClusterTree {
    std::vector<ClusterNode> nodes;  // nodes[0] is the root
    std::vector<std::size_t> features;
    std::vector<std::size_t> bootstrap;  // drawn rows, in draw order

    friend bool operator==(const ClusterTree&, const ClusterTree&) = default;
};

struct Forest {
    CshcConfig config;
    std::size_t n_features = 0;
    std::size_t n_classifiers = 0;
    std::size_t n_classes = 0;
    std::vector<ClusterTree> trees;
};

/// Correctness matrix rows joined with their feature vectors.
class ClusterData {
public:
    ClusterData(const CorrectnessMatrix& cm, const Dataset& ds) : cm_(cm), ds_(ds)
    {
        if (cm.size() != 0 && ds.n_features() == 0)
            throw DataError(DataError::Kind::dimension, "dataset has no features");
        for (auto idx : cm.sample_indices)
            if (idx >= ds.size())
                throw DataError(DataError::Kind::dimension, "correctness row refers past the end of the dataset");
    }

    double value(std::size_t row, std::size_t feature) const { return ds_.features(cm_.sample_indices[row], feature); }
    bool correct(std::size_t row, std::size_t a) const { return cm_.correct(row, a) != 0; }
    int truth(std::size_t row) const { return cm_.truth[row]; }
    std::size_t n_classifiers() const { return cm_.n_classifiers(); }
    std::size_t n_classes() const { return std::max(cm_.n_classes, ds_.n_classes()); }
    std::size_t n_features() const { return ds_.n_features(); }
    std::size_t size() const { return cm_.size(); }

    std::vector<double> correct_counts(std::span<const Member> members) const
    {
        std::vector<double> counts(n_classifiers(), 0.0);
        for (const auto& m : members)
            for (std::size_t a = 0; a < counts.size(); ++a)
                if (correct(m.row, a))
                    counts[a] += m.multiplicity;
        return counts;
    }

private:
    const CorrectnessMatrix& cm_;
    const Dataset& ds_;
};

inline double total_multiplicity(std::span<const Member> members)
{
    double s = 0.0;
    for (const auto& m : members)
        s += m.multiplicity;
    return s;
}

inline double max_of(std::span<const double> v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

/// Gain of splitting `members` at (feature, threshold): the sum of each
/// child's best weighted correct count minus the parent's. nullopt when one
/// side would be empty.
inline std::optional<double> split_gain(std::span<const Member> members, std::size_t feature, double threshold,
                                        const ClusterData& data)
{
    std::vector<Member> left, right;
    for (const auto& m : members)
        (data.value(m.row, feature) <= threshold ? left : right).push_back(m);
    if (left.empty() || right.empty())
        return std::nullopt;
    return max_of(data.correct_counts(left)) + max_of(data.correct_counts(right)) -
           max_of(data.correct_counts(members));
}

struct SplitCandidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

/// Midpoint of two adjacent distinct values that still separates them.
inline double separating_midpoint(double lo, double hi)
{
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

/// Best (feature, midpoint threshold) over `features` such that both children
/// keep total multiplicity >= min_cluster_size. Ties: lowest feature index,
/// then lowest threshold.
inline std::optional<SplitCandidate> find_best_split(std::span<const Member> members, const ClusterData& data,
                                                     std::span<const std::size_t> features,
                                                     std::size_t min_cluster_size)
{
    const std::size_t n = data.n_classifiers();
    const auto parent = data.correct_counts(members);
    const double parent_best = max_of(parent);
    const double total = total_multiplicity(members);
    if (total < 2.0 * static_cast<double>(min_cluster_size))
        return std::nullopt;

    std::vector<std::size_t> sorted_features(features.begin(), features.end());
    std::sort(sorted_features.begin(), sorted_features.end());

    std::optional<SplitCandidate> best;
    std::vector<Member> order(members.begin(), members.end());
    std::vector<double> left(n), right(n);
    for (auto f : sorted_features) {
        std::stable_sort(order.begin(), order.end(),
                         [&](const Member& a, const Member& b) { return data.value(a.row, f) < data.value(b.row, f); });
        std::fill(left.begin(), left.end(), 0.0);
        double left_size = 0.0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const auto& m = order[i];
            for (std::size_t a = 0; a < n; ++a)
                if (data.correct(m.row, a))
                    left[a] += m.multiplicity;
            left_size += m.multiplicity;
            const double lo = data.value(m.row, f);
            const double hi = data.value(order[i + 1].row, f);
            if (!(lo < hi))
                continue;
            if (left_size < static_cast<double>(min_cluster_size) ||
                total - left_size < static_cast<double>(min_cluster_size))
                continue;
            for (std::size_t a = 0; a < n; ++a)
                right[a] = parent[a] - left[a];
            const double gain = max_of(left) + max_of(right) - parent_best;
            if (!best || gain > best->gain)
                best = SplitCandidate{f, separating_midpoint(lo, hi), gain};
        }
    }
    return best;
}

namespace detail {

inline ClusterNode make_leaf(std::vector<Member> members, const ClusterData& data)
{
    ClusterNode leaf;
    leaf.correct_counts = data.correct_counts(members);
    leaf.class_counts.assign(data.n_classes(), 0.0);
    for (const auto& m : members)
        leaf.class_counts[static_cast<std::size_t>(data.truth(m.row))] += m.multiplicity;
    leaf.size = total_multiplicity(members);
    leaf.members = std::move(members);
    return leaf;
}

} // namespace detail

/// Recursively partitions `members`, appending nodes to `tree`; returns the
/// index of the subtree root. A cluster becomes a leaf at max_depth, when no
/// split keeps both children at min_cluster_size, or when the best gain is
/// not positive or falls below min_improvement times the parent's best count.
inline int grow_tree(ClusterTree& tree, std::vector<Member> members, std::size_t depth, const CshcConfig& cfg,
                     const ClusterData& data, std::span<const std::size_t> allowed_features)
{
    const int id = static_cast<int>(tree.nodes.size());
    std::optional<SplitCandidate> split;
    if (depth < cfg.max_depth)
        split = find_best_split(members, data, allowed_features, cfg.min_cluster_size);
    if (split) {
        const double parent_best = max_of(data.correct_counts(members));
        if (split->gain <= 0.0 || split->gain < cfg.min_improvement * parent_best)
            split.reset();
    }
    if (!split) {
        tree.nodes.push_back(detail::make_leaf(std::move(members), data));
        return id;
    }

    std::vector<Member> left, right;
    for (const auto& m : members)
        (data.value(m.row, split->feature) <= split->threshold ? left : right).push_back(m);
    members.clear();
    members.shrink_to_fit();

    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(id)].feature = static_cast<int>(split->feature);
    tree.nodes[static_cast<std::size_t>(id)].threshold = split->threshold;
    const int l = grow_tree(tree, std::move(left), depth + 1, cfg, data, allowed_features);
    const int r = grow_tree(tree, std::move(right), depth + 1, cfg, data, allowed_features);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
}

/// Collapses a list of drawn rows into a multiset ordered by row.
inline std::vector<Member> to_multiset(std::span<const std::size_t> draws)
{
    std::map<std::size_t, std::uint32_t> counts;
    for (auto r : draws)
        ++counts[r];
    std::vector<Member> out;
    out.reserve(counts.size());
    for (auto [row, mult] : counts)
        out.push_back({row, mult});
    return out;
}

/// Builds one tree: bootstrap draws and feature subset come from substreams
/// of (seed, tree index), so trees are independent of build order.
inline ClusterTree build_tree(const ClusterData& data, const CshcConfig& cfg, std::size_t tree_index)
{
    ClusterTree tree;
    const std::size_t m = data.size();
    const std::size_t f_count = data.n_features();

    Rng feature_rng(derive_seed(cfg.seed, tree_index, 1));
    std::vector<std::size_t> all(f_count);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const std::size_t take = CshcConfig::feature_subset_size(f_count);
    for (std::size_t i = 0; i < take; ++i)
        std::swap(all[i], all[i + uniform_index(feature_rng, f_count - i)]);
    tree.features.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(tree.features.begin(), tree.features.end());

    Rng sample_rng(derive_seed(cfg.seed, tree_index, 2));
    const std::size_t draws = cfg.bootstrap_draws(m);
    tree.bootstrap.reserve(draws);
    for (std::size_t i = 0; i < draws; ++i)
        tree.bootstrap.push_back(uniform_index(sample_rng, m));

    grow_tree(tree, to_multiset(tree.bootstrap), 0, cfg, data, tree.features);
    return tree;
}

/// Builds the forest of cost-sensitive clusterings over the rows of `cm`,
/// whose sample_indices point into `ds`.
inline Forest build_forest(const CorrectnessMatrix& cm, const Dataset& ds, const CshcConfig& cfg)
{
    cfg.validate();
    if (cm.size() == 0)
        throw DataError(DataError::Kind::empty, "correctness matrix is empty");
    if (cm.n_classifiers() == 0)
        throw DataError(DataError::Kind::dimension, "correctness matrix has no classifiers");
    const ClusterData data(cm, ds);
    Forest forest;
    forest.config = cfg;
    forest.n_features = ds.n_features();
    forest.n_classifiers = cm.n_classifiers();
    forest.n_classes = data.n_classes();
    forest.trees.resize(cfg.n_trees);
    parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) { forest.trees[t] = build_tree(data, cfg, t); });
    return forest;
}

// Query ----------------------------------------------------------------------

struct LeafRef {
    std::size_t tree = 0;
    std::size_t node = 0;
};

/// The leaves a query lands in, one per tree, with their union multiset.
struct LeafBundle {
    std::vector<LeafRef> leaves;
    std::vector<std::vector<double>> leaf_counts;  // per tree, per classifier
    std::vector<Member> multiset;                  // union over leaves, ordered by row
    std::vector<double> correct_counts;
    std::vector<double> class_counts;
    int dominant_true_class = 0;

    std::size_t n_classifiers() const noexcept { return correct_counts.size(); }
};

/// Assembles a bundle from per-tree leaves. Exposed for tests that build
/// bundles by hand.
inline LeafBundle make_bundle(std::vector<LeafRef> refs, const std::vector<const ClusterNode*>& leaves,
                              std::size_t n_classifiers, std::size_t n_classes)
{
    LeafBundle b;
    b.leaves = std::move(refs);
    b.correct_counts.assign(n_classifiers, 0.0);
    b.class_counts.assign(n_classes, 0.0);
    std::map<std::size_t, std::uint32_t> merged;
    for (const auto* leaf : leaves) {
        b.leaf_counts.push_back(leaf->correct_counts);
        for (std::size_t a = 0; a < n_classifiers; ++a)
            b.correct_counts[a] += leaf->correct_counts[a];
        for (std::size_t c = 0; c < n_classes && c < leaf->class_counts.size(); ++c)
            b.class_counts[c] += leaf->class_counts[c];
        for (const auto& m : leaf->members)
            merged[m.row] += m.multiplicity;
    }
    for (auto [row, mult] : merged)
        b.multiset.push_back({row, mult});
    b.dominant_true_class = static_cast<int>(argmax_lowest<double>(b.class_counts));
    return b;
}

inline LeafBundle query(const Forest& forest, std::span<const double> x)
{
    if (x.size() != forest.n_features)
        throw DataError(DataError::Kind::dimension, "query has " + std::to_string(x.size()) +
                                                        " features, forest expects " +
                                                        std::to_string(forest.n_features));
    std::vector<LeafRef> refs;
    std::vector<const ClusterNode*> leaves;
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        const auto& nodes = forest.trees[t].nodes;
        std::size_t at = 0;
        while (!nodes[at].is_leaf())
            at = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[at].feature)] <= nodes[at].threshold
                                              ? nodes[at].left
                                              : nodes[at].right);
        refs.push_back({t, at});
        leaves.push_back(&nodes[at]);
    }
    return make_bundle(std::move(refs), leaves, forest.n_classifiers, forest.n_classes);
}

struct RankTable {
    std::vector<std::vector<double>> per_tree;
    std::vector<double> cumulative;
};

/// Within-leaf ranks by correct count: best = n, worst = 1, ties averaged.
inline std::vector<double> rank_counts(std::span<const double> counts) { return average_ranks_ascending(counts); }

inline RankTable leaf_ranks(const LeafBundle& bundle)
{
    RankTable out;
    out.cumulative.assign(bundle.n_classifiers(), 0.0);
    for (const auto& counts : bundle.leaf_counts) {
        auto r = rank_counts(counts);
        for (std::size_t a = 0; a < r.size(); ++a)
            out.cumulative[a] += r[a];
        out.per_tree.push_back(std::move(r));
    }
    return out;
}

} // namespace cshc

#endif
