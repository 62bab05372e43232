#ifndef CSHC_DATASET_HPP
#define CSHC_DATASET_HPP

#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "csv.hpp"

namespace cshc {

/// Numeric features with integer class labels.
///
/// `ids` holds each row's sample index in the file it was loaded from, so
/// subsets can still be matched against externally computed predictions and
/// audit exports.
struct Dataset {
    Matrix<double> features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::vector<std::size_t> ids;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t n_features() const noexcept { return features.cols(); }
    std::size_t n_classes() const noexcept { return class_names.size(); }

    std::vector<std::size_t> class_counts() const
    {
        std::vector<std::size_t> counts(n_classes(), 0);
        for (int y : labels)
            ++counts[static_cast<std::size_t>(y)];
        return counts;
    }

    Dataset subset(std::span<const std::size_t> rows) const
    {
        Dataset out;
        out.features = features.select_rows(rows);
        out.labels.reserve(rows.size());
        out.ids.reserve(rows.size());
        for (auto r : rows) {
            out.labels.push_back(labels[r]);
            out.ids.push_back(ids[r]);
        }
        out.feature_names = feature_names;
        out.class_names = class_names;
        return out;
    }
};

/// Throws DataError unless the dataset satisfies its invariants.
inline void validate(const Dataset& ds)
{
    using K = DataError::Kind;
    if (ds.size() == 0)
        throw DataError(K::empty, "dataset has no rows");
    if (ds.n_features() == 0)
        throw DataError(K::dimension, "dataset has no feature columns");
    if (ds.n_classes() < 2)
        throw DataError(K::single_class, "dataset has fewer than two classes");
    if (ds.features.rows() != ds.size() || ds.ids.size() != ds.size())
        throw DataError(K::dimension, "dataset row bookkeeping is inconsistent");
    for (int y : ds.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= ds.n_classes())
            throw DataError(K::other, "label " + std::to_string(y) + " outside [0, C)");
    for (double v : ds.features.data())
        if (!std::isfinite(v))
            throw DataError(K::non_finite, "non-finite feature value");
}

/// Loads a CSV with a header row. Labels are encoded 0..C-1 in order of first
/// appearance; every other column must be numeric and finite.
inline Dataset load_csv(const std::string& path, const std::string& label_column)
{
    using K = DataError::Kind;
    const csv::Table table = csv::read(path);
    const auto label_col = table.column(label_column);
    if (!label_col)
        throw DataError(K::missing_column, path + ": label column '" + label_column + "' not found");
    if (table.rows.empty())
        throw DataError(K::empty, path + ": no data rows");
    if (table.header.size() < 2)
        throw DataError(K::dimension, path + ": no feature columns");

    Dataset ds;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != *label_col)
            ds.feature_names.push_back(table.header[c]);

    std::map<std::string, int> codes;
    std::vector<double> values(ds.feature_names.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& fields = table.rows[r];
        std::size_t f = 0;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (c == *label_col)
                continue;
            const auto where = path + ": row " + std::to_string(r) + " (line " + std::to_string(table.line_numbers[r]) +
                               "), column '" + table.header[c] + "'";
            const auto value = csv::parse_double(fields[c]);
            if (!value)
                throw DataError(K::non_numeric, where + ": non-numeric value '" + fields[c] + "'");
            if (!std::isfinite(*value))
                throw DataError(K::non_finite, where + ": non-finite value '" + fields[c] + "'");
            values[f++] = *value;
        }
        ds.features.append_row(values);
        const auto& name = fields[*label_col];
        auto [it, inserted] = codes.try_emplace(name, static_cast<int>(ds.class_names.size()));
        if (inserted)
            ds.class_names.push_back(name);
        ds.labels.push_back(it->second);
        ds.ids.push_back(r);
    }
    if (ds.class_names.size() < 2)
        throw DataError(K::single_class, path + ": only one class ('" + ds.class_names.front() + "') present");
    return ds;
}

// Splits and folds -----------------------------------------------------------

enum class Protocol { split50, cv3 };

inline std::string to_string(Protocol p) { return p == Protocol::split50 ? "split50" : "cv3"; }

inline Protocol parse_protocol(const std::string& s)
{
    if (s == "split50")
        return Protocol::split50;
    if (s == "cv3")
        return Protocol::cv3;
    throw ConfigError("unknown protocol '" + s + "' (expected split50 or cv3)");
}

struct SplitPlan {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    Protocol protocol = Protocol::split50;
    std::uint64_t seed = 0;
};

namespace detail {

/// Per-class counts that sum to round(total * fraction) exactly, each within
/// one sample of n_c * fraction (largest-remainder apportionment).
inline std::vector<std::size_t> apportion(std::span<const std::size_t> class_sizes, double fraction)
{
    const std::size_t total = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
    const auto target = static_cast<std::size_t>(std::floor(static_cast<double>(total) * fraction + 0.5));
    std::vector<std::size_t> take(class_sizes.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < class_sizes.size(); ++c) {
        const double exact = static_cast<double>(class_sizes[c]) * fraction;
        take[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += take[c];
        remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i) {
        const auto c = remainders[i].second;
        if (take[c] < class_sizes[c]) {
            ++take[c];
            ++assigned;
        }
    }
    return take;
}

inline std::vector<std::vector<std::size_t>> rows_by_class(std::span<const int> labels, std::size_t n_classes)
{
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    return by_class;
}

} // namespace detail

/// Stratified train/test split over the rows of `ds`.
inline SplitPlan make_split(const Dataset& ds, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test fraction must lie in (0, 1)");
    auto by_class = detail::rows_by_class(ds.labels, ds.n_classes());
    std::vector<std::size_t> sizes;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (!by_class[c].empty() && by_class[c].size() < 2)
            throw DataError(DataError::Kind::too_few_samples,
                            "class '" + ds.class_names[c] + "' has a single sample; cannot stratify");
        sizes.push_back(by_class[c].size());
    }
    const auto take = detail::apportion(sizes, test_fraction);
    Rng rng(derive_seed(seed, 0x5b117));
    SplitPlan plan;
    plan.seed = seed;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rows = by_class[c];
        shuffle(rows, rng);
        plan.test.insert(plan.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take[c]));
        plan.train.insert(plan.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(take[c]), rows.end());
    }
    std::sort(plan.train.begin(), plan.train.end());
    std::sort(plan.test.begin(), plan.test.end());
    if (plan.train.empty() || plan.test.empty())
        throw DataError(DataError::Kind::too_few_samples, "split leaves an empty partition");
    return plan;
}

/// Stratified fold assignment: fold id in [0, k) per row. Classes are dealt
/// round-robin with a counter that carries across classes, so fold sizes
/// differ by at most one.
inline std::vector<int> stratified_folds(std::span<const int> labels, std::size_t n_classes, std::size_t k,
                                         std::uint64_t seed)
{
    auto by_class = detail::rows_by_class(labels, n_classes);
    Rng rng(derive_seed(seed, 0xf01d5));
    std::vector<int> fold(labels.size(), -1);
    std::size_t next = 0;
    for (auto& rows : by_class) {
        shuffle(rows, rng);
        for (auto r : rows)
            fold[r] = static_cast<int>(next++ % k);
    }
    return fold;
}

/// Writes the (sample_index, role, fold) audit table. `fold` may be empty.
inline void write_split_csv(std::ostream& out, const Dataset& ds, const SplitPlan& plan,
                            std::span<const std::size_t> dcs_rows = {}, std::span<const int> train_folds = {})
{
    // dcs_rows: rows of `ds` (subset of plan.train) used to train the selector
    // when the training split is halved; empty means the whole training split.
    std::vector<std::string> role(ds.size());
    std::vector<int> fold(ds.size(), -1);
    for (std::size_t i = 0; i < plan.train.size(); ++i) {
        role[plan.train[i]] = dcs_rows.empty() ? "train" : "base";
        if (!train_folds.empty())
            fold[plan.train[i]] = train_folds[i];
    }
    for (auto r : dcs_rows)
        role[r] = "selector";
    for (auto r : plan.test)
        role[r] = "test";
    out << "sample_index,role,fold\n";
    for (std::size_t r = 0; r < ds.size(); ++r)
        out << ds.ids[r] << ',' << role[r] << ',' << fold[r] << '\n';
}

// Standardization ------------------------------------------------------------

/// Zero-mean unit-variance scaling fitted on training rows only. Constant
/// features keep scale 1.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const Matrix<double>& x)
    {
        Standardizer s;
        s.mean.assign(x.cols(), 0.0);
        s.scale.assign(x.cols(), 1.0);
        if (x.rows() == 0)
            return s;
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
                s.mean[c] += x(r, c);
        for (auto& m : s.mean)
            m /= static_cast<double>(x.rows());
        std::vector<double> var(x.cols(), 0.0);
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
                var[c] += (x(r, c) - s.mean[c]) * (x(r, c) - s.mean[c]);
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double sd = std::sqrt(var[c] / static_cast<double>(x.rows()));
            s.scale[c] = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    std::vector<double> apply(std::span<const double> x) const
    {
        std::vector<double> out(x.size());
        for (std::size_t c = 0; c < x.size(); ++c)
            out[c] = (x[c] - mean[c]) / scale[c];
        return out;
    }

    Matrix<double> apply(const Matrix<double>& x) const
    {
        Matrix<double> out(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
                out(r, c) = (x(r, c) - mean[c]) / scale[c];
        return out;
    }
};

// Correctness matrix ---------------------------------------------------------

/// Per-sample, per-classifier predictions and their 0/1 correctness: the cost
/// data the selector trains on. `proba` is optional (rows x n*C, classifier-major).
struct CorrectnessMatrix {
    Matrix<int> predicted;
    Matrix<std::uint8_t> correct;
    std::vector<int> truth;
    std::vector<std::size_t> sample_indices;
    std::size_t n_classes = 0;
    Matrix<double> proba;

    std::size_t size() const noexcept { return truth.size(); }
    std::size_t n_classifiers() const noexcept { return predicted.cols(); }
    bool has_proba() const noexcept { return !proba.empty(); }

    /// Probability row of classifier `a` on sample `i`.
    std::span<const double> proba_of(std::size_t i, std::size_t a) const
    {
        return proba.row(i).subspan(a * n_classes, n_classes);
    }

    /// Fraction of samples each classifier gets right.
    std::vector<double> accuracies() const
    {
        std::vector<double> acc(n_classifiers(), 0.0);
        if (size() == 0)
            return acc;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t a = 0; a < n_classifiers(); ++a)
                acc[a] += correct(i, a);
        for (auto& v : acc)
            v /= static_cast<double>(size());
        return acc;
    }
};

/// Recomputes every correctness bit from predictions and truth.
inline bool is_consistent(const CorrectnessMatrix& cm)
{
    if (cm.correct.rows() != cm.size() || cm.predicted.rows() != cm.size() || cm.sample_indices.size() != cm.size())
        return false;
    for (std::size_t i = 0; i < cm.size(); ++i)
        for (std::size_t a = 0; a < cm.n_classifiers(); ++a)
            if ((cm.predicted(i, a) == cm.truth[i]) != (cm.correct(i, a) == 1))
                return false;
    return true;
}

/// Assembles a matrix from prediction columns (one vector per classifier).
inline CorrectnessMatrix make_correctness(std::span<const int> truth, std::span<const std::size_t> sample_indices,
                                          const std::vector<std::vector<int>>& predictions, std::size_t n_classes,
                                          const std::vector<Matrix<double>>& probas = {})
{
    CorrectnessMatrix cm;
    const std::size_t m = truth.size();
    const std::size_t n = predictions.size();
    cm.truth.assign(truth.begin(), truth.end());
    cm.sample_indices.assign(sample_indices.begin(), sample_indices.end());
    cm.n_classes = n_classes;
    cm.predicted = Matrix<int>(m, n);
    cm.correct = Matrix<std::uint8_t>(m, n);
    for (std::size_t a = 0; a < n; ++a) {
        if (predictions[a].size() != m)
            throw DataError(DataError::Kind::dimension, "prediction column length differs from sample count");
        for (std::size_t i = 0; i < m; ++i) {
            cm.predicted(i, a) = predictions[a][i];
            cm.correct(i, a) = predictions[a][i] == truth[i] ? 1 : 0;
        }
    }
    if (!probas.empty()) {
        cm.proba = Matrix<double>(m, n * n_classes);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t c = 0; c < n_classes; ++c)
                    cm.proba(i, a * n_classes + c) = probas[a](i, c);
    }
    return cm;
}

} // namespace cshc

#endif
