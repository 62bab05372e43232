#ifndef CSHC_TEST_SELECTION_FIXTURES_HPP
#define CSHC_TEST_SELECTION_FIXTURES_HPP

#include <memory>
#include <vector>

#include "cshc/selection.hpp"

namespace selection_fixtures {

/// Bundle with one leaf per entry of `counts`, no members, all truth class 0.
inline cshc::LeafBundle bundle_from_counts(const std::vector<std::vector<double>>& counts, std::size_t n_classes)
{
    std::vector<cshc::ClusterNode> leaves(counts.size());
    std::vector<const cshc::ClusterNode*> ptrs;
    std::vector<cshc::LeafRef> refs;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        leaves[t].correct_counts = counts[t];
        leaves[t].class_counts.assign(n_classes, 0.0);
        ptrs.push_back(&leaves[t]);
        refs.push_back({t, 0});
    }
    return cshc::make_bundle(refs, ptrs, counts.front().size(), n_classes);
}

/// A self-contained random query: a validation matrix, a bundle of leaves
/// drawn from it, and test-time labels. The adversarial variant gives every
/// classifier a different test label over more classes than classifiers, which
/// is what the last recourse exits need.
struct Query {
    cshc::CorrectnessMatrix cm;
    cshc::LeafBundle bundle;
    std::vector<int> test_labels;
    std::vector<double> accuracy;
    std::size_t n_classes = 0;
    std::uint64_t seed = 0;

    cshc::SelectionInput input() const
    {
        cshc::SelectionInput in;
        in.bundle = &bundle;
        in.cm = &cm;
        in.test_labels = test_labels;
        in.validation_accuracy = accuracy;
        in.n_classes = n_classes;
        in.tie_seed = seed;
        return in;
    }
};

inline Query random_query(cshc::Rng& rng, bool adversarial = false)
{
    using cshc::uniform_index;
    Query q;
    const std::size_t n = adversarial ? 3 : 2 + uniform_index(rng, 3);
    q.n_classes = adversarial ? 4 + uniform_index(rng, 2) : 2 + uniform_index(rng, 3);
    const std::size_t m = 4 + uniform_index(rng, 8);
    std::vector<int> truth(m);
    std::vector<std::size_t> rows(m);
    std::vector<std::vector<int>> preds(n, std::vector<int>(m));
    for (std::size_t i = 0; i < m; ++i) {
        truth[i] = static_cast<int>(uniform_index(rng, q.n_classes));
        rows[i] = i;
        for (std::size_t a = 0; a < n; ++a)
            preds[a][i] = cshc::uniform_real(rng) < 0.5 ? truth[i] : static_cast<int>(uniform_index(rng, q.n_classes));
    }
    q.cm = cshc::make_correctness(truth, rows, preds, q.n_classes);

    const std::size_t trees = 1 + uniform_index(rng, 5);
    std::vector<cshc::ClusterNode> leaves(trees);
    std::vector<const cshc::ClusterNode*> ptrs;
    std::vector<cshc::LeafRef> refs;
    for (std::size_t t = 0; t < trees; ++t) {
        auto& leaf = leaves[t];
        leaf.correct_counts.assign(n, 0.0);
        leaf.class_counts.assign(q.n_classes, 0.0);
        const std::size_t size = 1 + uniform_index(rng, 4);
        std::vector<std::uint32_t> mult(m, 0);
        for (std::size_t d = 0; d < size; ++d)
            ++mult[uniform_index(rng, m)];
        for (std::size_t i = 0; i < m; ++i) {
            if (!mult[i])
                continue;
            leaf.members.push_back({i, mult[i]});
            leaf.class_counts[static_cast<std::size_t>(truth[i])] += mult[i];
            for (std::size_t a = 0; a < n; ++a)
                if (q.cm.correct(i, a))
                    leaf.correct_counts[a] += mult[i];
            leaf.size += mult[i];
        }
        ptrs.push_back(&leaf);
        refs.push_back({t, 0});
    }
    q.bundle = cshc::make_bundle(refs, ptrs, n, q.n_classes);
    std::vector<int> classes(q.n_classes);
    for (std::size_t c = 0; c < q.n_classes; ++c)
        classes[c] = static_cast<int>(c);
    for (std::size_t a = 0; a < n; ++a) {
        if (adversarial) {
            std::swap(classes[a], classes[a + uniform_index(rng, q.n_classes - a)]);
            q.test_labels.push_back(classes[a]);
        } else {
            q.test_labels.push_back(static_cast<int>(uniform_index(rng, q.n_classes)));
        }
        q.accuracy.push_back(cshc::uniform_real(rng));
    }
    q.seed = rng();
    return q;
}

} // namespace selection_fixtures

#endif
