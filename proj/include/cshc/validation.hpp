#ifndef CSHC_VALIDATION_HPP
#define CSHC_VALIDATION_HPP

#include <optional>
#include <string>
#include <vector>

#include "classifiers.hpp"
#include "dataset.hpp"

namespace cshc {

/// Correctness data for the selector plus the base classifiers to use at test
/// time. `cm.sample_indices` index rows of the dataset the matrix was built on.
struct ValidationResult {
    CorrectnessMatrix cm;
    std::vector<TrainedClassifier> models;
    std::vector<int> folds;  // cv3 only: fold id per row
};

namespace detail {

inline TrainedClassifier train_or_explain(const ClassifierSpec& spec, const Dataset& ds, const std::string& context)
{
    try {
        return train(spec, ds);
    } catch (const std::exception& e) {
        throw Error("training '" + spec.name + "' " + context + " failed: " + e.what());
    }
}

} // namespace detail

/// Three-fold stratified cross validation: every row is predicted by models
/// that never saw it. The returned models are refit on all of `ds_train`.
inline ValidationResult build_correctness_cv3(const Dataset& ds_train, const std::vector<ClassifierSpec>& pool,
                                              std::uint64_t seed, std::size_t threads = 1)
{
    constexpr std::size_t k = 3;
    const auto counts = ds_train.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] > 0 && counts[c] < k)
            throw DataError(DataError::Kind::too_few_samples, "class '" + ds_train.class_names[c] + "' has " +
                                                                  std::to_string(counts[c]) +
                                                                  " training samples; three-fold CV needs at least 3");
    if (pool.empty())
        throw ConfigError("classifier pool is empty");

    ValidationResult out;
    out.folds = stratified_folds(ds_train.labels, ds_train.n_classes(), k, seed);

    const std::size_t n = pool.size();
    const std::size_t m = ds_train.size();
    const std::size_t c_count = ds_train.n_classes();
    std::vector<std::vector<int>> predictions(n, std::vector<int>(m, -1));
    std::vector<Matrix<double>> probas(n, Matrix<double>(m, c_count));

    std::vector<std::vector<std::size_t>> held(k), kept(k);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t f = 0; f < k; ++f)
            (static_cast<std::size_t>(out.folds[r]) == f ? held[f] : kept[f]).push_back(r);

    parallel_for(k * n, threads, [&](std::size_t job) {
        const std::size_t f = job / n;
        const std::size_t a = job % n;
        const Dataset fit_on = ds_train.subset(kept[f]);
        const auto model = detail::train_or_explain(pool[a], fit_on, "on fold " + std::to_string(f));
        for (auto r : held[f]) {
            const auto p = model.predict_proba_row(ds_train, r);
            std::copy(p.begin(), p.end(), probas[a].row(r).begin());
            predictions[a][r] = model.is_external() ? model.predict_row(ds_train, r)
                                                    : static_cast<int>(argmax_lowest<double>(p));
        }
    });

    std::vector<std::size_t> rows(m);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    out.cm = make_correctness(ds_train.labels, rows, predictions, c_count, probas);

    std::vector<std::optional<TrainedClassifier>> finals(n);
    parallel_for(n, threads, [&](std::size_t a) {
        finals[a].emplace(detail::train_or_explain(pool[a], ds_train, "on the full training set"));
    });
    for (auto& f : finals)
        out.models.push_back(std::move(*f));
    return out;
}

/// Classifiers fit on `ds_a`; the matrix covers the rows of `ds_b` only.
inline ValidationResult build_correctness_holdout(const Dataset& ds_a, const Dataset& ds_b,
                                                  const std::vector<ClassifierSpec>& pool, std::size_t threads = 1)
{
    if (ds_b.size() == 0)
        throw DataError(DataError::Kind::empty, "selector half of the training data is empty");
    if (ds_a.size() == 0)
        throw DataError(DataError::Kind::empty, "base-classifier half of the training data is empty");
    if (pool.empty())
        throw ConfigError("classifier pool is empty");

    const std::size_t n = pool.size();
    std::vector<std::optional<TrainedClassifier>> models(n);
    std::vector<std::vector<int>> predictions(n);
    std::vector<Matrix<double>> probas(n);
    parallel_for(n, threads, [&](std::size_t a) {
        models[a].emplace(detail::train_or_explain(pool[a], ds_a, "on the base-classifier half"));
        auto column = predict_all(*models[a], ds_b);
        predictions[a] = std::move(column.labels);
        probas[a] = std::move(column.proba);
    });

    ValidationResult out;
    std::vector<std::size_t> rows(ds_b.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    out.cm = make_correctness(ds_b.labels, rows, predictions, ds_b.n_classes(), probas);
    for (auto& m : models)
        out.models.push_back(std::move(*m));
    return out;
}

/// Correctness of already-trained models on every row of `ds` (used for test
/// partitions and oracle accounting).
inline CorrectnessMatrix evaluate_models(const std::vector<TrainedClassifier>& models, const Dataset& ds,
                                         std::size_t threads = 1)
{
    std::vector<std::vector<int>> predictions(models.size());
    std::vector<Matrix<double>> probas(models.size());
    parallel_for(models.size(), threads, [&](std::size_t a) {
        auto column = predict_all(models[a], ds);
        predictions[a] = std::move(column.labels);
        probas[a] = std::move(column.proba);
    });
    std::vector<std::size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return make_correctness(ds.labels, rows, predictions, ds.n_classes(), probas);
}

} // namespace cshc

#endif
