#ifndef CSHC_CLASSIFIERS_HPP
#define CSHC_CLASSIFIERS_HPP

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "core.hpp"
#include "csv.hpp"
#include "dataset.hpp"

namespace cshc {

enum class ClassifierKind { gaussian_nb, one_nn, decision_tree_gini, perceptron, external };

inline std::string to_string(ClassifierKind kind)
{
    switch (kind) {
    case ClassifierKind::gaussian_nb: return "gaussian_nb";
    case ClassifierKind::one_nn: return "one_nn";
    case ClassifierKind::decision_tree_gini: return "decision_tree_gini";
    case ClassifierKind::perceptron: return "perceptron";
    case ClassifierKind::external: return "external";
    }
    return "?";
}

inline ClassifierKind parse_classifier_kind(const std::string& s)
{
    for (auto k : {ClassifierKind::gaussian_nb, ClassifierKind::one_nn, ClassifierKind::decision_tree_gini,
                   ClassifierKind::perceptron, ClassifierKind::external})
        if (to_string(k) == s)
            return k;
    throw ConfigError("unknown classifier kind '" + s + "'");
}

/// Predictions produced outside this library, keyed by sample index.
struct ExternalPredictions {
    std::size_t n_classes = 0;
    std::unordered_map<std::size_t, int> label;
    std::unordered_map<std::size_t, std::vector<double>> proba;

    bool has_proba() const noexcept { return !proba.empty(); }
};

/// Reads an external-prediction CSV: sample_index, predicted_class and
/// optionally one probability column per class (any header names after the
/// first two). Every index in `required` must be present.
inline ExternalPredictions load_external_predictions(const std::string& path, std::size_t n_classes,
                                                     std::span<const std::size_t> required)
{
    using K = DataError::Kind;
    const csv::Table table = csv::read(path);
    const auto idx_col = table.column("sample_index");
    const auto cls_col = table.column("predicted_class");
    if (!idx_col || !cls_col)
        throw DataError(K::missing_column, path + ": needs 'sample_index' and 'predicted_class' columns");
    std::vector<std::size_t> proba_cols;
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (c != *idx_col && c != *cls_col)
            proba_cols.push_back(c);
    if (!proba_cols.empty() && proba_cols.size() != n_classes)
        throw DataError(K::dimension, path + ": expected " + std::to_string(n_classes) + " probability columns, found " +
                                          std::to_string(proba_cols.size()));

    ExternalPredictions ext;
    ext.n_classes = n_classes;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& fields = table.rows[r];
        const auto where = path + ":" + std::to_string(table.line_numbers[r]);
        const auto index = csv::parse_int(fields[*idx_col]);
        const auto cls = csv::parse_int(fields[*cls_col]);
        if (!index || *index < 0)
            throw DataError(K::non_numeric, where + ": bad sample_index '" + fields[*idx_col] + "'");
        if (!cls || *cls < 0 || static_cast<std::size_t>(*cls) >= n_classes)
            throw DataError(K::other, where + ": predicted_class '" + fields[*cls_col] + "' outside [0, " +
                                          std::to_string(n_classes) + ")");
        const auto key = static_cast<std::size_t>(*index);
        ext.label[key] = static_cast<int>(*cls);
        if (!proba_cols.empty()) {
            std::vector<double> p;
            double sum = 0.0;
            for (auto c : proba_cols) {
                const auto v = csv::parse_double(fields[c]);
                if (!v || !std::isfinite(*v) || *v < 0.0)
                    throw DataError(K::non_numeric, where + ": bad probability '" + fields[c] + "'");
                p.push_back(*v);
                sum += *v;
            }
            if (std::abs(sum - 1.0) > 1e-6)
                throw DataError(K::other, where + ": probabilities for sample " + std::to_string(key) + " sum to " +
                                              csv::format_double(sum) + ", not 1");
            ext.proba[key] = std::move(p);
        }
    }
    for (auto idx : required)
        if (!ext.label.contains(idx))
            throw DataError(K::other, path + ": no prediction for sample index " + std::to_string(idx));
    return ext;
}

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::gaussian_nb;
    std::string name;
    std::map<std::string, std::string> hyperparams;
    /// Required when kind == external.
    std::shared_ptr<const ExternalPredictions> external;

    double param(const std::string& key, double fallback) const
    {
        auto it = hyperparams.find(key);
        if (it == hyperparams.end())
            return fallback;
        auto v = csv::parse_double(it->second);
        if (!v)
            throw ConfigError("classifier '" + name + "': hyperparameter " + key + "='" + it->second +
                              "' is not a number");
        return *v;
    }
};

/// Softmax with max-shift; the result sums to 1.
inline std::vector<double> softmax(std::span<const double> scores)
{
    std::vector<double> out(scores.size());
    if (scores.empty())
        return out;
    const double top = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] - top);
        sum += out[i];
    }
    for (auto& v : out)
        v /= sum;
    return out;
}

// Models ---------------------------------------------------------------------

/// Gaussian naive Bayes with class-frequency priors. Variances are smoothed by
/// 1e-9 times the largest feature variance.
struct GaussianNb {
    std::vector<double> log_prior;  // -inf for classes absent from training
    Matrix<double> mean;            // C x F
    Matrix<double> var;             // C x F

    static GaussianNb fit(const Dataset& ds, double smoothing_factor = 1e-9)
    {
        const std::size_t c_count = ds.n_classes();
        const std::size_t f_count = ds.n_features();
        GaussianNb nb;
        nb.mean = Matrix<double>(c_count, f_count);
        nb.var = Matrix<double>(c_count, f_count);
        const auto counts = ds.class_counts();
        for (std::size_t r = 0; r < ds.size(); ++r)
            for (std::size_t f = 0; f < f_count; ++f)
                nb.mean(static_cast<std::size_t>(ds.labels[r]), f) += ds.features(r, f);
        for (std::size_t c = 0; c < c_count; ++c)
            for (std::size_t f = 0; f < f_count; ++f)
                if (counts[c] > 0)
                    nb.mean(c, f) /= static_cast<double>(counts[c]);
        for (std::size_t r = 0; r < ds.size(); ++r)
            for (std::size_t f = 0; f < f_count; ++f) {
                const auto c = static_cast<std::size_t>(ds.labels[r]);
                const double d = ds.features(r, f) - nb.mean(c, f);
                nb.var(c, f) += d * d;
            }
        double max_var = 0.0;
        for (std::size_t f = 0; f < f_count; ++f) {
            double mu = 0.0, v = 0.0;
            for (std::size_t r = 0; r < ds.size(); ++r)
                mu += ds.features(r, f);
            mu /= static_cast<double>(ds.size());
            for (std::size_t r = 0; r < ds.size(); ++r)
                v += (ds.features(r, f) - mu) * (ds.features(r, f) - mu);
            max_var = std::max(max_var, v / static_cast<double>(ds.size()));
        }
        const double epsilon = smoothing_factor * (max_var > 0.0 ? max_var : 1.0);
        nb.log_prior.assign(c_count, -std::numeric_limits<double>::infinity());
        for (std::size_t c = 0; c < c_count; ++c) {
            if (counts[c] > 0)
                nb.log_prior[c] = std::log(static_cast<double>(counts[c]) / static_cast<double>(ds.size()));
            for (std::size_t f = 0; f < f_count; ++f)
                nb.var(c, f) = (counts[c] > 0 ? nb.var(c, f) / static_cast<double>(counts[c]) : 0.0) + epsilon;
        }
        return nb;
    }

    std::vector<double> log_joint(std::span<const double> x) const
    {
        std::vector<double> out(log_prior.size());
        for (std::size_t c = 0; c < out.size(); ++c) {
            double s = log_prior[c];
            if (std::isfinite(s))
                for (std::size_t f = 0; f < x.size(); ++f) {
                    const double d = x[f] - mean(c, f);
                    s += -0.5 * std::log(2.0 * std::numbers::pi * var(c, f)) - d * d / (2.0 * var(c, f));
                }
            out[c] = s;
        }
        return out;
    }

    std::vector<double> predict_proba(std::span<const double> x) const { return softmax(log_joint(x)); }
};

/// One-nearest-neighbor on standardized features; distance ties go to the
/// earlier training row.
struct NearestNeighbor {
    Standardizer scaler;
    Matrix<double> points;  // standardized
    std::vector<int> labels;
    std::size_t n_classes = 0;

    static NearestNeighbor fit(const Dataset& ds, bool standardize = true)
    {
        NearestNeighbor nn;
        if (standardize) {
            nn.scaler = Standardizer::fit(ds.features);
        } else {
            nn.scaler.mean.assign(ds.n_features(), 0.0);
            nn.scaler.scale.assign(ds.n_features(), 1.0);
        }
        nn.points = nn.scaler.apply(ds.features);
        nn.labels = ds.labels;
        nn.n_classes = ds.n_classes();
        return nn;
    }

    std::vector<double> predict_proba(std::span<const double> x) const
    {
        const auto q = scaler.apply(x);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < points.rows(); ++r) {
            double d = 0.0;
            const auto p = points.row(r);
            for (std::size_t f = 0; f < q.size(); ++f)
                d += (p[f] - q[f]) * (p[f] - q[f]);
            if (d < best_d) {
                best_d = d;
                best = r;
            }
        }
        std::vector<double> out(n_classes, 0.0);
        out[static_cast<std::size_t>(labels[best])] = 1.0;
        return out;
    }
};

/// Unpruned CART tree with Gini impurity. Leaves hold class frequencies.
struct GiniTree {
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        std::vector<double> class_counts;
    };
    std::vector<Node> nodes;
    std::size_t n_classes = 0;

    static GiniTree fit(const Dataset& ds, int max_depth = -1)
    {
        GiniTree tree;
        tree.n_classes = ds.n_classes();
        std::vector<std::size_t> rows(ds.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        tree.grow(ds, rows, 0, max_depth);
        return tree;
    }

    std::vector<double> predict_proba(std::span<const double> x) const
    {
        std::size_t at = 0;
        while (nodes[at].feature >= 0)
            at = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[at].feature)] <= nodes[at].threshold
                                              ? nodes[at].left
                                              : nodes[at].right);
        const auto& counts = nodes[at].class_counts;
        double total = 0.0;
        for (double c : counts)
            total += c;
        std::vector<double> out(counts.size());
        for (std::size_t c = 0; c < counts.size(); ++c)
            out[c] = counts[c] / total;
        return out;
    }

private:
    static double gini(std::span<const double> counts, double total)
    {
        if (total <= 0.0)
            return 0.0;
        double s = 1.0;
        for (double c : counts)
            s -= (c / total) * (c / total);
        return s;
    }

    int grow(const Dataset& ds, std::vector<std::size_t>& rows, int depth, int max_depth)
    {
        Node node;
        node.class_counts.assign(n_classes, 0.0);
        for (auto r : rows)
            node.class_counts[static_cast<std::size_t>(ds.labels[r])] += 1.0;
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(node);

        const double total = static_cast<double>(rows.size());
        const double parent = gini(node.class_counts, total);
        if (parent <= 0.0 || rows.size() < 2 || (max_depth >= 0 && depth >= max_depth))
            return id;

        // Best split by weighted child impurity; even a zero-gain split is
        // taken while the node is impure so consistent data is fit exactly.
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_impurity = std::numeric_limits<double>::infinity();
        std::vector<std::size_t> order(rows);
        std::vector<double> left(n_classes);
        for (std::size_t f = 0; f < ds.n_features(); ++f) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return ds.features(a, f) < ds.features(b, f); });
            std::fill(left.begin(), left.end(), 0.0);
            std::vector<double> right = node.class_counts;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                const auto y = static_cast<std::size_t>(ds.labels[order[i]]);
                left[y] += 1.0;
                right[y] -= 1.0;
                const double lo = ds.features(order[i], f);
                const double hi = ds.features(order[i + 1], f);
                if (!(lo < hi))
                    continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = total - nl;
                const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
                if (impurity < best_impurity) {
                    best_impurity = impurity;
                    best_feature = static_cast<int>(f);
                    double mid = lo + (hi - lo) / 2.0;
                    if (!(mid < hi))
                        mid = lo;
                    best_threshold = mid;
                }
            }
        }
        if (best_feature < 0)
            return id;

        std::vector<std::size_t> lrows, rrows;
        for (auto r : rows)
            (ds.features(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? lrows : rrows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(ds, lrows, depth + 1, max_depth);
        const int r = grow(ds, rrows, depth + 1, max_depth);
        nodes[static_cast<std::size_t>(id)].feature = best_feature;
        nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
        nodes[static_cast<std::size_t>(id)].left = l;
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

/// Averaged one-vs-rest perceptron; probabilities are the softmax of the
/// per-class scores.
struct Perceptron {
    Matrix<double> weights;  // C x F
    std::vector<double> bias;

    struct Options {
        int epochs = 10;
        double learning_rate = 1.0;
        std::uint64_t seed = 0;
    };

    static Perceptron fit(const Dataset& ds, const Options& opt)
    {
        const std::size_t c_count = ds.n_classes();
        const std::size_t f_count = ds.n_features();
        Matrix<double> w(c_count, f_count), w_sum(c_count, f_count);
        std::vector<double> b(c_count, 0.0), b_sum(c_count, 0.0);
        std::vector<std::size_t> order(ds.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(opt.seed, 0x9e7c));
        std::size_t steps = 0;
        for (int epoch = 0; epoch < opt.epochs; ++epoch) {
            shuffle(order, rng);
            for (auto r : order) {
                const auto x = ds.features.row(r);
                for (std::size_t c = 0; c < c_count; ++c) {
                    double s = b[c];
                    for (std::size_t f = 0; f < f_count; ++f)
                        s += w(c, f) * x[f];
                    const double target = ds.labels[r] == static_cast<int>(c) ? 1.0 : -1.0;
                    if (target * s <= 0.0) {
                        for (std::size_t f = 0; f < f_count; ++f)
                            w(c, f) += opt.learning_rate * target * x[f];
                        b[c] += opt.learning_rate * target;
                    }
                    for (std::size_t f = 0; f < f_count; ++f)
                        w_sum(c, f) += w(c, f);
                    b_sum[c] += b[c];
                }
                ++steps;
            }
        }
        Perceptron p;
        p.weights = Matrix<double>(c_count, f_count);
        p.bias.assign(c_count, 0.0);
        if (steps > 0) {
            for (std::size_t c = 0; c < c_count; ++c) {
                for (std::size_t f = 0; f < f_count; ++f)
                    p.weights(c, f) = w_sum(c, f) / static_cast<double>(steps);
                p.bias[c] = b_sum[c] / static_cast<double>(steps);
            }
        }
        return p;
    }

    std::vector<double> scores(std::span<const double> x) const
    {
        std::vector<double> s(bias);
        for (std::size_t c = 0; c < s.size(); ++c)
            for (std::size_t f = 0; f < x.size(); ++f)
                s[c] += weights(c, f) * x[f];
        return s;
    }

    std::vector<double> predict_proba(std::span<const double> x) const { return softmax(scores(x)); }
};

/// Lookup into externally computed predictions by sample index.
struct ExternalModel {
    std::shared_ptr<const ExternalPredictions> table;

    int predict(std::size_t sample_index) const
    {
        auto it = table->label.find(sample_index);
        if (it == table->label.end())
            throw DataError(DataError::Kind::other,
                            "external predictions have no entry for sample index " + std::to_string(sample_index));
        return it->second;
    }

    /// Stored probabilities, or a one-hot vector of the stored label.
    std::vector<double> predict_proba(std::size_t sample_index) const
    {
        const int label = predict(sample_index);
        if (auto it = table->proba.find(sample_index); it != table->proba.end())
            return it->second;
        std::vector<double> out(table->n_classes, 0.0);
        out[static_cast<std::size_t>(label)] = 1.0;
        return out;
    }
};

/// A fitted base classifier. For every input, predict() equals the argmax of
/// predict_proba() with ties toward the lower class index; external models
/// keep the label they were given.
class TrainedClassifier {
public:
    using Model = std::variant<GaussianNb, NearestNeighbor, GiniTree, Perceptron, ExternalModel>;

    TrainedClassifier(ClassifierSpec spec, Model model, std::size_t n_classes, std::size_t n_features)
        : spec_(std::move(spec)), model_(std::move(model)), n_classes_(n_classes), n_features_(n_features)
    {
    }

    const ClassifierSpec& spec() const noexcept { return spec_; }
    const Model& model() const noexcept { return model_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    std::size_t n_features() const noexcept { return n_features_; }
    bool is_external() const noexcept { return std::holds_alternative<ExternalModel>(model_); }

    std::vector<double> predict_proba(std::span<const double> x) const
    {
        if (x.size() != n_features_)
            throw DataError(DataError::Kind::dimension, "classifier '" + spec_.name + "' expects " +
                                                            std::to_string(n_features_) + " features, got " +
                                                            std::to_string(x.size()));
        return std::visit(
            [&](const auto& m) -> std::vector<double> {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ExternalModel>)
                    throw Error("classifier '" + spec_.name + "' is external; query it by sample index");
                else
                    return m.predict_proba(x);
            },
            model_);
    }

    int predict(std::span<const double> x) const
    {
        const auto p = predict_proba(x);
        return static_cast<int>(argmax_lowest<double>(p));
    }

    /// Row-aware prediction: external models look up ds.ids[row].
    int predict_row(const Dataset& ds, std::size_t row) const
    {
        if (const auto* ext = std::get_if<ExternalModel>(&model_))
            return ext->predict(ds.ids[row]);
        return predict(ds.features.row(row));
    }

    std::vector<double> predict_proba_row(const Dataset& ds, std::size_t row) const
    {
        if (const auto* ext = std::get_if<ExternalModel>(&model_))
            return ext->predict_proba(ds.ids[row]);
        return predict_proba(ds.features.row(row));
    }

private:
    ClassifierSpec spec_;
    Model model_;
    std::size_t n_classes_;
    std::size_t n_features_;
};

/// Fits `spec` on `ds`. Deterministic given (spec, ds).
inline TrainedClassifier train(const ClassifierSpec& spec, const Dataset& ds)
{
    if (ds.size() == 0)
        throw DataError(DataError::Kind::empty, "cannot train '" + spec.name + "' on an empty dataset");
    const std::size_t c = ds.n_classes();
    const std::size_t f = ds.n_features();
    switch (spec.kind) {
    case ClassifierKind::gaussian_nb:
        return {spec, GaussianNb::fit(ds, spec.param("var_smoothing", 1e-9)), c, f};
    case ClassifierKind::one_nn:
        return {spec, NearestNeighbor::fit(ds, spec.param("standardize", 1.0) != 0.0), c, f};
    case ClassifierKind::decision_tree_gini:
        return {spec, GiniTree::fit(ds, static_cast<int>(spec.param("max_depth", -1))), c, f};
    case ClassifierKind::perceptron: {
        Perceptron::Options opt;
        opt.epochs = static_cast<int>(spec.param("epochs", 10));
        opt.learning_rate = spec.param("learning_rate", 1.0);
        opt.seed = static_cast<std::uint64_t>(spec.param("seed", 0));
        return {spec, Perceptron::fit(ds, opt), c, f};
    }
    case ClassifierKind::external:
        if (!spec.external)
            throw ConfigError("external classifier '" + spec.name + "' has no predictions file");
        return {spec, ExternalModel{spec.external}, c, f};
    }
    throw ConfigError("unknown classifier kind");
}

/// Labels (and probabilities, C columns) of `model` on every row of `ds`.
struct PredictionColumn {
    std::vector<int> labels;
    Matrix<double> proba;
};

inline PredictionColumn predict_all(const TrainedClassifier& model, const Dataset& ds)
{
    PredictionColumn out;
    out.labels.resize(ds.size());
    out.proba = Matrix<double>(ds.size(), model.n_classes());
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const auto p = model.predict_proba_row(ds, r);
        std::copy(p.begin(), p.end(), out.proba.row(r).begin());
        out.labels[r] = model.is_external() ? model.predict_row(ds, r) : static_cast<int>(argmax_lowest<double>(p));
    }
    return out;
}

} // namespace cshc

#endif
