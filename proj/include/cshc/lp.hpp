#ifndef CSHC_LP_HPP
#define CSHC_LP_HPP

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "csv.hpp"
#include "dataset.hpp"
#include "forest.hpp"

namespace cshc {

class LpError : public Error {
public:
    LpError(const std::string& what, std::string dump) : Error(what + "\n" + dump), dump_(std::move(dump)) {}
    const std::string& dump() const noexcept { return dump_; }

private:
    std::string dump_;
};

// Dense simplex --------------------------------------------------------------

struct SimplexResult {
    std::vector<double> x;
    std::vector<double> reduced_costs;  // at the optimum, one per column of A
    double objective = 0.0;
    std::size_t iterations = 0;
};

/// Minimizes c.x subject to A x = b, x >= 0, with b >= 0. Two-phase tableau
/// method. The entering column is the most negative reduced cost (lowest index
/// on ties); after a run of degenerate pivots it switches to Bland's rule for
/// the rest of the phase, which rules out cycling. Every choice is a fixed
/// function of the input, so the optimum reported among ties is reproducible.
/// Rows that already own a unit column of A start with it in the basis; the
/// others get an artificial variable. Throws Error on infeasibility,
/// unboundedness or when the iteration limit is reached.
inline SimplexResult simplex_minimize(const Matrix<double>& a, std::span<const double> b, std::span<const double> c,
                                      std::size_t max_iterations = 100000)
{
    constexpr double eps = 1e-9;
    const std::size_t rows = a.rows();
    const std::size_t nv = a.cols();
    const std::size_t cols = nv + rows;  // originals then artificials

    Matrix<double> t(rows, cols);
    std::vector<double> rhs(b.begin(), b.end());
    std::vector<std::size_t> basis(rows);
    std::vector<bool> active(rows, true);
    for (std::size_t i = 0; i < rows; ++i) {
        if (rhs[i] < 0.0)
            throw Error("simplex: negative right-hand side");
        for (std::size_t j = 0; j < nv; ++j)
            t(i, j) = a(i, j);
        t(i, nv + i) = 1.0;
        basis[i] = nv + i;
    }
    std::vector<bool> row_taken(rows, false);
    for (std::size_t j = 0; j < nv; ++j) {
        std::size_t one = rows;
        bool unit = true;
        for (std::size_t i = 0; i < rows && unit; ++i) {
            if (a(i, j) == 0.0)
                continue;
            if (a(i, j) == 1.0 && one == rows)
                one = i;
            else
                unit = false;
        }
        if (unit && one < rows && !row_taken[one]) {
            row_taken[one] = true;
            basis[one] = j;
        }
    }

    std::size_t iterations = 0;
    std::vector<double> d(cols);
    std::size_t live_cols = cols;  // artificial columns stop mattering after phase 1

    auto pivot = [&](std::size_t r, std::size_t col) {
        const double p = t(r, col);
        for (std::size_t j = 0; j < live_cols; ++j)
            t(r, j) /= p;
        rhs[r] /= p;
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == r || !active[i])
                continue;
            const double factor = t(i, col);
            if (factor == 0.0)
                continue;
            for (std::size_t j = 0; j < live_cols; ++j)
                t(i, j) -= factor * t(r, j);
            rhs[i] -= factor * rhs[r];
            if (std::abs(rhs[i]) < 1e-12)
                rhs[i] = 0.0;
        }
        const double factor = d[col];
        if (factor != 0.0)
            for (std::size_t j = 0; j < live_cols; ++j)
                d[j] -= factor * t(r, j);
        basis[r] = col;
    };

    const std::size_t stall_limit = 50 + rows;
    auto run = [&](std::size_t allowed_cols) {
        bool bland = false;
        std::size_t stalled = 0;
        for (;;) {
            std::size_t enter = cols;
            for (std::size_t j = 0; j < allowed_cols; ++j) {
                if (d[j] >= -eps)
                    continue;
                if (bland) {
                    enter = j;
                    break;
                }
                if (enter == cols || d[j] < d[enter])
                    enter = j;
            }
            if (enter == cols)
                return;
            if (++iterations > max_iterations)
                throw Error("simplex: iteration limit of " + std::to_string(max_iterations) + " reached");
            std::size_t leave = rows;
            double best_ratio = 0.0;
            for (std::size_t i = 0; i < rows; ++i) {
                if (!active[i] || t(i, enter) <= eps)
                    continue;
                const double ratio = rhs[i] / t(i, enter);
                if (leave == rows || ratio < best_ratio - 1e-12 ||
                    (std::abs(ratio - best_ratio) <= 1e-12 && basis[i] < basis[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave == rows)
                throw Error("simplex: problem is unbounded");
            stalled = best_ratio > 0.0 ? 0 : stalled + 1;
            bland = bland || stalled > stall_limit;
            pivot(leave, enter);
        }
    };

    // Phase 1: minimize the sum of artificials.
    std::fill(d.begin(), d.end(), 0.0);
    for (std::size_t j = 0; j < nv; ++j)
        for (std::size_t i = 0; i < rows; ++i)
            if (basis[i] >= nv)
                d[j] -= t(i, j);
    run(nv);
    double infeasibility = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
        if (basis[i] >= nv)
            infeasibility += rhs[i];
    if (infeasibility > 1e-7)
        throw Error("simplex: problem is infeasible (phase-one residual " + csv::format_double(infeasibility) + ")");

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    for (std::size_t i = 0; i < rows; ++i) {
        if (basis[i] < nv)
            continue;
        std::size_t col = nv;
        for (std::size_t j = 0; j < nv; ++j)
            if (std::abs(t(i, j)) > eps) {
                col = j;
                break;
            }
        if (col == nv)
            active[i] = false;
        else
            pivot(i, col);
    }

    // Phase 2 reduced costs.
    live_cols = nv;
    for (std::size_t j = 0; j < nv; ++j) {
        double z = 0.0;
        for (std::size_t i = 0; i < rows; ++i)
            if (active[i])
                z += c[basis[i]] * t(i, j);
        d[j] = c[j] - z;
    }
    run(nv);

    SimplexResult out;
    out.x.assign(nv, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        if (active[i] && basis[i] < nv)
            out.x[basis[i]] = std::max(0.0, rhs[i]);
    for (std::size_t j = 0; j < nv; ++j)
        out.objective += c[j] * out.x[j];
    out.reduced_costs.assign(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(nv));
    out.iterations = iterations;
    return out;
}

// Weighting program ----------------------------------------------------------

/// Per-query weighting program over the unique examples of a leaf bundle:
///
///   min  sum_i m_i (g_i + 2 f_i)
///   s.t. sum_a w_a = 100,  0 <= w_a <= 100,  g_i, f_i >= 0
///        g_i + S_i(y_i) - S_i(c) >= gamma   for every c != y_i
///        f_i + S_i(y_i) - S_i(c) >= 1       for every c != y_i
///
/// where S_i(c) is the total weight of classifiers labeling example i as c.
struct LpInstance {
    std::size_t n_classifiers = 0;
    std::size_t n_classes = 0;
    double gamma = 80.0;
    std::vector<double> multiplicity;
    std::vector<int> truth;
    Matrix<int> labels;  // k x n

    std::size_t size() const noexcept { return truth.size(); }
    std::size_t penalty_constraint_count() const noexcept { return 2 * size() * (n_classes - 1); }
    /// Penalty constraints plus the weight-sum equality.
    std::size_t constraint_count() const noexcept { return penalty_constraint_count() + 1; }
};

struct LpSolution {
    std::vector<double> weights;
    std::vector<double> g;
    std::vector<double> f;
    double objective = 0.0;
    std::size_t iterations = 0;
};

inline LpInstance build_instance(const LeafBundle& bundle, const CorrectnessMatrix& cm, double gamma)
{
    if (bundle.multiset.empty())
        throw Error("cannot build a weighting program from an empty bundle");
    LpInstance inst;
    inst.n_classifiers = cm.n_classifiers();
    inst.n_classes = cm.n_classes;
    inst.gamma = gamma;
    inst.labels = Matrix<int>(bundle.multiset.size(), cm.n_classifiers());
    for (std::size_t i = 0; i < bundle.multiset.size(); ++i) {
        const auto& m = bundle.multiset[i];
        inst.multiplicity.push_back(m.multiplicity);
        inst.truth.push_back(cm.truth[m.row]);
        for (std::size_t a = 0; a < cm.n_classifiers(); ++a)
            inst.labels(i, a) = cm.predicted(m.row, a);
    }
    return inst;
}

/// S_i(y_i) - S_i(c) for weights w.
inline double support_margin(const LpInstance& inst, std::size_t i, int c, std::span<const double> w)
{
    double diff = 0.0;
    for (std::size_t a = 0; a < inst.n_classifiers; ++a) {
        const int l = inst.labels(i, a);
        if (l == inst.truth[i])
            diff += w[a];
        else if (l == c)
            diff -= w[a];
    }
    return diff;
}

/// Largest constraint violation of `sol` (0 when feasible), checked by direct
/// substitution, independently of how the solution was produced.
inline double max_violation(const LpInstance& inst, const LpSolution& sol)
{
    double worst = 0.0;
    double sum = 0.0;
    for (double w : sol.weights) {
        worst = std::max({worst, -w, w - 100.0});
        sum += w;
    }
    worst = std::max(worst, std::abs(sum - 100.0));
    for (std::size_t i = 0; i < inst.size(); ++i) {
        worst = std::max({worst, -sol.g[i], -sol.f[i]});
        for (std::size_t c = 0; c < inst.n_classes; ++c) {
            if (static_cast<int>(c) == inst.truth[i])
                continue;
            const double diff = support_margin(inst, i, static_cast<int>(c), sol.weights);
            worst = std::max(worst, inst.gamma - (sol.g[i] + diff));
            worst = std::max(worst, 1.0 - (sol.f[i] + diff));
        }
    }
    return worst;
}

inline double penalty_objective(const LpInstance& inst, std::span<const double> g, std::span<const double> f)
{
    double obj = 0.0;
    for (std::size_t i = 0; i < inst.size(); ++i)
        obj += inst.multiplicity[i] * (g[i] + 2.0 * f[i]);
    return obj;
}

// Text dump ------------------------------------------------------------------

inline void write_dump(std::ostream& out, const LpInstance& inst, const LpSolution* sol = nullptr)
{
    out << "cshc-lp 1\n";
    out << "classifiers " << inst.n_classifiers << "\n";
    out << "classes " << inst.n_classes << "\n";
    out << "gamma " << csv::format_double(inst.gamma) << "\n";
    out << "examples " << inst.size() << "\n";
    for (std::size_t i = 0; i < inst.size(); ++i) {
        out << csv::format_double(inst.multiplicity[i]) << ' ' << inst.truth[i];
        for (std::size_t a = 0; a < inst.n_classifiers; ++a)
            out << ' ' << inst.labels(i, a);
        out << '\n';
    }
    if (sol) {
        auto vec = [&](const char* name, const std::vector<double>& v) {
            out << name;
            for (double x : v)
                out << ' ' << csv::format_double(x);
            out << '\n';
        };
        vec("weights", sol->weights);
        vec("g", sol->g);
        vec("f", sol->f);
        out << "objective " << csv::format_double(sol->objective) << "\n";
    }
}

inline std::string dump_string(const LpInstance& inst, const LpSolution* sol = nullptr)
{
    std::ostringstream s;
    write_dump(s, inst, sol);
    return s.str();
}

/// Reads the instance part of a dump written by write_dump.
inline LpInstance read_instance(std::istream& in)
{
    auto expect = [&](const std::string& key) {
        std::string word;
        if (!(in >> word) || word != key)
            throw Error("lp dump: expected '" + key + "', found '" + word + "'");
    };
    LpInstance inst;
    int version = 0;
    expect("cshc-lp");
    in >> version;
    if (version != 1)
        throw Error("lp dump: unsupported version " + std::to_string(version));
    std::size_t k = 0;
    expect("classifiers");
    in >> inst.n_classifiers;
    expect("classes");
    in >> inst.n_classes;
    expect("gamma");
    in >> inst.gamma;
    expect("examples");
    in >> k;
    inst.labels = Matrix<int>(k, inst.n_classifiers);
    for (std::size_t i = 0; i < k; ++i) {
        double m = 0;
        int y = 0;
        in >> m >> y;
        inst.multiplicity.push_back(m);
        inst.truth.push_back(y);
        for (std::size_t a = 0; a < inst.n_classifiers; ++a)
            in >> inst.labels(i, a);
    }
    if (!in)
        throw Error("lp dump: truncated");
    return inst;
}

// Solve ----------------------------------------------------------------------

struct LpOptions {
    /// Merge examples with identical (truth, label row) and drop duplicate
    /// constraints for classes nobody votes for. Exact; only shrinks the program.
    bool reduce = true;
    std::size_t max_iterations = 100000;
    double feasibility_tolerance = 1e-6;
};

/// Throws LpError when the instance breaks its own invariants.
inline void check_instance(const LpInstance& inst)
{
    auto fail = [&](const std::string& why) { throw LpError("malformed weighting program: " + why, dump_string(inst)); };
    if (inst.n_classifiers == 0)
        fail("no classifiers");
    if (inst.n_classes == 0)
        fail("no classes");
    if (!std::isfinite(inst.gamma) || inst.gamma < 0.0)
        fail("gamma must be finite and non-negative");
    if (inst.multiplicity.size() != inst.size() || inst.labels.rows() != inst.size() ||
        inst.labels.cols() != inst.n_classifiers)
        fail("inconsistent sizes");
    auto in_range = [&](int c) { return c >= 0 && static_cast<std::size_t>(c) < inst.n_classes; };
    for (std::size_t i = 0; i < inst.size(); ++i) {
        if (!(inst.multiplicity[i] >= 1.0))
            fail("example " + std::to_string(i) + " has multiplicity below 1");
        if (!in_range(inst.truth[i]))
            fail("example " + std::to_string(i) + " has an out-of-range class");
        for (std::size_t a = 0; a < inst.n_classifiers; ++a)
            if (!in_range(inst.labels(i, a)))
                fail("example " + std::to_string(i) + " has an out-of-range label");
    }
}

inline LpSolution solve(const LpInstance& inst, const LpOptions& opt = {})
{
    const std::size_t n = inst.n_classifiers;
    const std::size_t k = inst.size();
    check_instance(inst);

    // Units: groups of examples sharing one pair of penalty variables.
    std::vector<std::size_t> representative;
    std::vector<double> unit_mult;
    if (opt.reduce) {
        std::map<std::vector<int>, std::size_t> seen;
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<int> key{inst.truth[i]};
            for (std::size_t a = 0; a < n; ++a)
                key.push_back(inst.labels(i, a));
            auto [it, inserted] = seen.try_emplace(std::move(key), representative.size());
            if (inserted) {
                representative.push_back(i);
                unit_mult.push_back(0.0);
            }
            unit_mult[it->second] += inst.multiplicity[i];
        }
    } else {
        for (std::size_t i = 0; i < k; ++i) {
            representative.push_back(i);
            unit_mult.push_back(inst.multiplicity[i]);
        }
    }
    const std::size_t units = representative.size();

    // Competitor classes per unit.
    std::vector<std::vector<int>> competitors(units);
    for (std::size_t u = 0; u < units; ++u) {
        const std::size_t i = representative[u];
        std::vector<bool> voted(inst.n_classes, false);
        for (std::size_t a = 0; a < n; ++a)
            voted[static_cast<std::size_t>(inst.labels(i, a))] = true;
        bool silent_added = false;
        for (std::size_t c = 0; c < inst.n_classes; ++c) {
            if (static_cast<int>(c) == inst.truth[i])
                continue;
            if (voted[c] || !opt.reduce)
                competitors[u].push_back(static_cast<int>(c));
            else if (!silent_added) {
                competitors[u].push_back(static_cast<int>(c));
                silent_added = true;
            }
        }
    }

    // The program is solved through its dual, which has one row per primal
    // variable (w, g, f) instead of one per penalty constraint and starts from
    // a feasible slack basis:
    //
    //   max  100 z + sum_r b_r y_r
    //   s.t. z + sum_r M_ra y_r <= 0          for every classifier a
    //        sum_{r in g-rows of u} y_r <= m_u,  sum_{r in f-rows of u} y_r <= 2 m_u
    //        y >= 0, z free (z = z+ - z-)
    //
    // M_ra is +1 when a votes for the truth, -1 when it votes for the
    // competitor. The primal optimum is read off the slack reduced costs.
    std::size_t penalty_rows = 0;
    for (const auto& cs : competitors)
        penalty_rows += 2 * cs.size();
    const std::size_t rows = n + 2 * units;
    const std::size_t z_plus = penalty_rows, z_minus = penalty_rows + 1, slack0 = penalty_rows + 2;
    const std::size_t vars = slack0 + rows;

    Matrix<double> a(rows, vars);
    std::vector<double> b(rows, 0.0), cost(vars, 0.0);
    for (std::size_t w = 0; w < n; ++w) {
        a(w, z_plus) = 1.0;
        a(w, z_minus) = -1.0;
    }
    cost[z_plus] = -100.0;
    cost[z_minus] = 100.0;
    for (std::size_t row = 0; row < rows; ++row)
        a(row, slack0 + row) = 1.0;
    std::size_t r = 0;
    for (std::size_t u = 0; u < units; ++u) {
        const std::size_t i = representative[u];
        b[n + u] = unit_mult[u];
        b[n + units + u] = 2.0 * unit_mult[u];
        for (int c : competitors[u]) {
            for (int family = 0; family < 2; ++family, ++r) {
                for (std::size_t w = 0; w < n; ++w) {
                    const int l = inst.labels(i, w);
                    a(w, r) = l == inst.truth[i] ? 1.0 : (l == c ? -1.0 : 0.0);
                }
                a(n + (family == 0 ? 0 : units) + u, r) = 1.0;
                cost[r] = family == 0 ? -inst.gamma : -1.0;
            }
        }
    }

    SimplexResult res;
    try {
        res = simplex_minimize(a, b, cost, opt.max_iterations);
    } catch (const Error& e) {
        throw LpError(std::string("weighting program failed: ") + e.what(), dump_string(inst));
    }

    // Weights from the dual prices of the classifier rows, cleaned of rounding
    // noise; the penalties then follow in closed form.
    LpSolution sol;
    sol.weights.resize(n);
    double total = 0.0;
    for (std::size_t w = 0; w < n; ++w) {
        sol.weights[w] = std::max(0.0, res.reduced_costs[slack0 + w]);
        total += sol.weights[w];
    }
    if (!(total > 0.0))
        throw LpError("weighting program returned no weight", dump_string(inst));
    for (auto& w : sol.weights)
        w *= 100.0 / total;
    sol.g.resize(k);
    sol.f.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        double margin = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < inst.n_classes; ++c)
            if (static_cast<int>(c) != inst.truth[i])
                margin = std::min(margin, support_margin(inst, i, static_cast<int>(c), sol.weights));
        sol.g[i] = std::max(0.0, inst.gamma - margin);
        sol.f[i] = std::max(0.0, 1.0 - margin);
    }
    sol.objective = penalty_objective(inst, sol.g, sol.f);
    sol.iterations = res.iterations;
    if (const double v = max_violation(inst, sol); v > opt.feasibility_tolerance)
        throw LpError("weighting program solution violates constraints by " + csv::format_double(v),
                      dump_string(inst, &sol));
    return sol;
}

} // namespace cshc

#endif
