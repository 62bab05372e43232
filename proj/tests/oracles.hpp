#ifndef CSHC_TEST_ORACLES_HPP
#define CSHC_TEST_ORACLES_HPP

// Independent reference computations used by unit and acceptance tests. They
// share no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <vector>

namespace oracles {

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

/// A cluster member for the split oracle: feature values, correctness bits,
/// multiplicity.
struct Item {
    std::vector<double> x;
    std::vector<bool> correct;
    double mult = 1.0;
};

inline double best_count(const std::vector<const Item*>& items, std::size_t n)
{
    double best = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        double s = 0.0;
        for (const auto* it : items)
            s += it->correct[a] ? it->mult : 0.0;
        best = std::max(best, s);
    }
    return best;
}

/// Enumerates every (feature, midpoint between adjacent distinct values) and
/// recomputes both children from scratch. Ties keep the first candidate in
/// (feature ascending, threshold ascending) order.
inline std::optional<Split> best_split(const std::vector<Item>& items, const std::vector<std::size_t>& features,
                                       double min_size)
{
    if (items.empty())
        return std::nullopt;
    const std::size_t n = items.front().correct.size();
    std::vector<const Item*> all;
    for (const auto& it : items)
        all.push_back(&it);
    const double parent = best_count(all, n);

    auto feats = features;
    std::sort(feats.begin(), feats.end());
    std::optional<Split> best;
    for (auto f : feats) {
        std::set<double> values;
        for (const auto& it : items)
            values.insert(it.x[f]);
        std::vector<double> v(values.begin(), values.end());
        for (std::size_t j = 0; j + 1 < v.size(); ++j) {
            const double t = (v[j] + v[j + 1]) / 2.0;
            std::vector<const Item*> l, r;
            double ls = 0.0, rs = 0.0;
            for (const auto& it : items) {
                if (it.x[f] <= t) {
                    l.push_back(&it);
                    ls += it.mult;
                } else {
                    r.push_back(&it);
                    rs += it.mult;
                }
            }
            if (ls < min_size || rs < min_size)
                continue;
            const double gain = best_count(l, n) + best_count(r, n) - parent;
            if (!best || gain > best->gain)
                best = Split{f, t, gain};
        }
    }
    return best;
}

/// Closed-form penalty objective of the weighting program at fixed weights:
/// each example pays m (g + 2f) with g = max(0, gamma - d), f = max(0, 1 - d),
/// d the smallest margin of the true class over any other class.
inline double lp_objective_at(const std::vector<double>& w, const std::vector<double>& mult,
                              const std::vector<int>& truth, const std::vector<std::vector<int>>& labels,
                              std::size_t n_classes, double gamma)
{
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        std::vector<double> support(n_classes, 0.0);
        for (std::size_t a = 0; a < w.size(); ++a)
            support[static_cast<std::size_t>(labels[i][a])] += w[a];
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_classes; ++c)
            if (static_cast<int>(c) != truth[i])
                d = std::min(d, support[static_cast<std::size_t>(truth[i])] - support[c]);
        if (!std::isfinite(d))
            continue;
        total += mult[i] * (std::max(0.0, gamma - d) + 2.0 * std::max(0.0, 1.0 - d));
    }
    return total;
}

/// Minimum of lp_objective_at over integer weight vectors summing to 100.
inline double lp_grid_minimum(std::size_t n, const std::vector<double>& mult, const std::vector<int>& truth,
                              const std::vector<std::vector<int>>& labels, std::size_t n_classes, double gamma)
{
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> w(n, 0.0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t a, int left) {
        if (a + 1 == n) {
            w[a] = left;
            best = std::min(best, lp_objective_at(w, mult, truth, labels, n_classes, gamma));
            return;
        }
        for (int v = 0; v <= left; ++v) {
            w[a] = v;
            rec(a + 1, left - v);
        }
    };
    rec(0, 100);
    return best;
}

/// Exact minimum of lp_objective_at over the weight simplex for n <= 3. The
/// objective is convex and piecewise linear, so its minimum sits at a vertex of
/// the arrangement formed by the simplex facets, the kinks d = gamma and d = 1
/// of every margin, and the ties between two margins of one example. Every
/// choice of n - 1 such hyperplanes plus the weight-sum equality is solved by
/// Cramer's rule and the feasible points are evaluated.
inline double lp_vertex_minimum(std::size_t n, const std::vector<double>& mult, const std::vector<int>& truth,
                                const std::vector<std::vector<int>>& labels, std::size_t n_classes, double gamma)
{
    struct Plane {
        std::vector<double> h;
        double r;
    };
    std::vector<Plane> planes;
    for (std::size_t a = 0; a < n; ++a) {
        std::vector<double> h(n, 0.0);
        h[a] = 1.0;
        planes.push_back({h, 0.0});
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
        std::vector<std::vector<double>> margins;
        for (std::size_t c = 0; c < n_classes; ++c) {
            if (static_cast<int>(c) == truth[i])
                continue;
            std::vector<double> h(n, 0.0);
            for (std::size_t a = 0; a < n; ++a)
                h[a] = labels[i][a] == truth[i] ? 1.0 : (labels[i][a] == static_cast<int>(c) ? -1.0 : 0.0);
            planes.push_back({h, gamma});
            planes.push_back({h, 1.0});
            margins.push_back(h);
        }
        for (std::size_t p = 0; p < margins.size(); ++p)
            for (std::size_t q = p + 1; q < margins.size(); ++q) {
                std::vector<double> h(n);
                for (std::size_t a = 0; a < n; ++a)
                    h[a] = margins[p][a] - margins[q][a];
                planes.push_back({h, 0.0});
            }
    }

    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<double>& w) {
        double sum = 0.0;
        for (double v : w) {
            if (v < -1e-9)
                return;
            sum += v;
        }
        if (std::abs(sum - 100.0) > 1e-6)
            return;
        best = std::min(best, lp_objective_at(w, mult, truth, labels, n_classes, gamma));
    };
    auto det3 = [](const double m[3][3]) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    if (n == 1) {
        consider({100.0});
    } else if (n == 2) {
        for (const auto& p : planes) {
            // p.h . w = r, w0 + w1 = 100
            const double det = p.h[0] - p.h[1];
            if (std::abs(det) < 1e-12)
                continue;
            const double w0 = (p.r - 100.0 * p.h[1]) / det;
            consider({w0, 100.0 - w0});
        }
    } else if (n == 3) {
        for (std::size_t p = 0; p < planes.size(); ++p)
            for (std::size_t q = p + 1; q < planes.size(); ++q) {
                const double m[3][3] = {{planes[p].h[0], planes[p].h[1], planes[p].h[2]},
                                        {planes[q].h[0], planes[q].h[1], planes[q].h[2]},
                                        {1.0, 1.0, 1.0}};
                const double det = det3(m);
                if (std::abs(det) < 1e-12)
                    continue;
                const double rhs[3] = {planes[p].r, planes[q].r, 100.0};
                std::vector<double> w(3);
                for (std::size_t col = 0; col < 3; ++col) {
                    double mc[3][3];
                    for (std::size_t r = 0; r < 3; ++r)
                        for (std::size_t c = 0; c < 3; ++c)
                            mc[r][c] = c == col ? rhs[r] : m[r][c];
                    w[col] = det3(mc) / det;
                }
                consider(w);
            }
    }
    return best;
}

/// Average ranks of `values`, lowest = 1, computed by counting.
inline std::vector<double> ranks_by_counting(const std::vector<double>& values)
{
    std::vector<double> r(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        double below = 0.0, equal = 0.0;
        for (double v : values) {
            below += v < values[i];
            equal += v == values[i];
        }
        r[i] = below + (equal + 1.0) / 2.0;
    }
    return r;
}

} // namespace oracles

#endif
