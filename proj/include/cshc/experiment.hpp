#ifndef CSHC_EXPERIMENT_HPP
#define CSHC_EXPERIMENT_HPP

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "forest.hpp"
#include "metrics.hpp"
#include "pca.hpp"
#include "selection.hpp"
#include "serialize.hpp"
#include "validation.hpp"

namespace cshc {

// Shared per-dataset artifacts ----------------------------------------------

/// Everything built once per dataset and shared read-only by all methods.
struct PreparedDataset {
    std::string name;
    std::uint64_t seed = 0;  // dataset stream of the run seed
    Dataset full;
    SplitPlan plan;
    Dataset train;
    Dataset test;
    Dataset selector;                        // rows covered by the correctness matrix
    std::vector<std::size_t> selector_rows;  // rows of `full`; empty under cv3
    ValidationResult validation;
    CorrectnessMatrix test_cm;
    Forest forest;
    Standardizer scaler;  // fitted on selector features, used by the baselines
    Matrix<double> region_points;
    Matrix<double> test_points;
    std::vector<double> validation_accuracy;
    std::vector<std::string> classifier_names;
};

namespace detail {

inline std::shared_ptr<const ExternalPredictions> load_external_for(const DatasetEntry& entry,
                                                                    const ClassifierSpec& spec, const Dataset& ds)
{
    auto it = entry.external.find(spec.name);
    if (it == entry.external.end())
        throw ConfigError("dataset '" + entry.name + "' gives no external." + spec.name + " predictions file");
    return std::make_shared<const ExternalPredictions>(
        load_external_predictions(it->second, ds.n_classes(), ds.ids));
}

// Stream ids below the dataset seed.
inline constexpr std::uint64_t stream_split = 1;
inline constexpr std::uint64_t stream_half = 2;
inline constexpr std::uint64_t stream_folds = 3;
inline constexpr std::uint64_t stream_forest = 4;
inline constexpr std::uint64_t stream_ties = 5;

} // namespace detail

inline std::uint64_t dataset_seed(std::uint64_t run_seed, const std::string& name)
{
    return derive_seed(run_seed, fnv1a64(name));
}

inline PreparedDataset prepare_dataset(const ExperimentConfig& cfg, const DatasetEntry& entry, std::size_t threads)
{
    PreparedDataset p;
    p.name = entry.name;
    p.seed = dataset_seed(cfg.seed, entry.name);
    p.full = load_csv(entry.path, entry.label_column);
    validate(p.full);

    auto pool = cfg.pool;
    for (auto& spec : pool) {
        p.classifier_names.push_back(spec.name);
        if (spec.kind == ClassifierKind::external)
            spec.external = detail::load_external_for(entry, spec, p.full);
    }

    p.plan = make_split(p.full, cfg.test_fraction, derive_seed(p.seed, detail::stream_split));
    p.plan.protocol = cfg.protocol;
    p.train = p.full.subset(p.plan.train);
    p.test = p.full.subset(p.plan.test);

    if (cfg.protocol == Protocol::split50) {
        const auto half = make_split(p.train, 0.5, derive_seed(p.seed, detail::stream_half));
        const Dataset base = p.train.subset(half.train);
        p.selector = p.train.subset(half.test);
        for (auto r : half.test)
            p.selector_rows.push_back(p.plan.train[r]);
        p.validation = build_correctness_holdout(base, p.selector, pool, threads);
    } else {
        p.selector = p.train;
        p.validation = build_correctness_cv3(p.train, pool, derive_seed(p.seed, detail::stream_folds), threads);
    }
    p.test_cm = evaluate_models(p.validation.models, p.test, threads);

    CshcConfig forest_cfg = cfg.cshc;
    forest_cfg.seed = derive_seed(p.seed, detail::stream_forest);
    forest_cfg.threads = threads;
    p.forest = build_forest(p.validation.cm, p.selector, forest_cfg);

    p.scaler = Standardizer::fit(p.selector.features);
    p.region_points = p.scaler.apply(p.selector.features);
    p.test_points = p.scaler.apply(p.test.features);
    p.validation_accuracy = p.validation.cm.accuracies();
    return p;
}

// Per-method evaluation ------------------------------------------------------

struct MethodResult {
    Method method = Method::cshc;
    bool ok = false;
    std::string error;
    std::string lp_dump;  // instance that broke the LP solver, if any
    std::vector<SelectionOutcome> outcomes;
    double accuracy = 0.0;       // percent
    double recourse_rate = 0.0;  // percent of test samples; LPR only
};

inline Baseline baseline_of(Method m)
{
    switch (m) {
    case Method::ola: return Baseline::ola;
    case Method::lca: return Baseline::lca;
    case Method::apr: return Baseline::apriori;
    case Method::apo: return Baseline::aposteriori;
    case Method::mcb: return Baseline::mcb;
    case Method::ke: return Baseline::knora_e;
    case Method::ku: return Baseline::knora_u;
    case Method::mv: return Baseline::majority_vote;
    default: throw Error("method " + to_string(m) + " is not a baseline");
    }
}

/// Selection for one test row of a prepared dataset.
inline SelectionOutcome select_one(const PreparedDataset& p, Method method, std::size_t row,
                                   const ExperimentConfig& cfg)
{
    const auto labels = p.test_cm.predicted.row(row);
    if (!is_cshc_variant(method)) {
        const BaselinePool pool{&p.validation.cm, &p.region_points};
        return select_baseline(baseline_of(method), pool, p.test_points.row(row), labels, cfg.baselines);
    }
    const auto bundle = query(p.forest, p.test.features.row(row));
    SelectionInput in;
    in.bundle = &bundle;
    in.test_labels = labels;
    in.validation_accuracy = p.validation_accuracy;
    in.cm = &p.validation.cm;
    in.n_classes = p.full.n_classes();
    in.tie_seed = derive_seed(p.seed, detail::stream_ties, p.test.ids[row]);
    switch (method) {
    case Method::cshc: return select_cshc(in);
    case Method::rr: return select_rr(in);
    case Method::lp: return select_lp(in, cfg.selection);
    default: return select_lpr(in, cfg.selection);
    }
}

inline MethodResult run_method(const PreparedDataset& p, Method method, const ExperimentConfig& cfg,
                               std::size_t threads)
{
    MethodResult r;
    r.method = method;
    const std::size_t m = p.test.size();
    r.outcomes.resize(m);
    std::vector<std::string> errors(m), dumps(m);
    parallel_for(m, threads, [&](std::size_t i) {
        try {
            r.outcomes[i] = select_one(p, method, i, cfg);
        } catch (const LpError& e) {
            errors[i] = e.what();
            dumps[i] = e.dump();
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    // Report the lowest failing row so diagnostics do not depend on scheduling.
    for (std::size_t i = 0; i < m; ++i)
        if (!errors[i].empty()) {
            r.error = "test sample " + std::to_string(p.test.ids[i]) + ": " + errors[i];
            r.lp_dump = dumps[i];
            r.outcomes.clear();
            return r;
        }
    std::size_t correct = 0, recourse = 0;
    for (std::size_t i = 0; i < m; ++i) {
        correct += r.outcomes[i].predicted_class == p.test.labels[i];
        recourse += r.outcomes[i].recourse_invoked;
    }
    r.ok = true;
    r.accuracy = m ? 100.0 * static_cast<double>(correct) / static_cast<double>(m) : 0.0;
    r.recourse_rate = m ? 100.0 * static_cast<double>(recourse) / static_cast<double>(m) : 0.0;
    return r;
}

// Whole runs -----------------------------------------------------------------

struct DatasetResult {
    std::string name;
    bool ok = false;
    std::string error;  // dataset-level failure (loading, training, forest)
    std::vector<std::size_t> test_ids;
    std::vector<int> test_truth;
    std::vector<std::string> classifier_names;
    std::vector<double> static_accuracy;  // percent, on the test split
    double oracle = 0.0;                  // percent
    std::string split_csv;
    std::vector<MethodResult> methods;  // in config order

    const MethodResult* find(Method m) const
    {
        for (const auto& r : methods)
            if (r.method == m)
                return &r;
        return nullptr;
    }
};

struct ExperimentResult {
    std::vector<DatasetResult> datasets;
    std::vector<Method> methods;
    Method reference = Method::lpr;
    std::string config_hash;
};

inline std::string hex64(std::uint64_t v)
{
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << v;
    return out.str();
}

inline DatasetResult evaluate_dataset(const ExperimentConfig& cfg, const DatasetEntry& entry, std::size_t threads)
{
    DatasetResult d;
    d.name = entry.name;
    std::optional<PreparedDataset> prepared;
    try {
        prepared.emplace(prepare_dataset(cfg, entry, threads));
    } catch (const std::exception& e) {
        d.error = e.what();
        for (auto m : cfg.methods) {
            MethodResult r;
            r.method = m;
            r.error = "dataset preparation failed: " + d.error;
            d.methods.push_back(std::move(r));
        }
        return d;
    }
    const auto& p = *prepared;
    d.ok = true;
    d.test_ids = p.test.ids;
    d.test_truth = p.test.labels;
    d.classifier_names = p.classifier_names;
    for (double a : p.test_cm.accuracies())
        d.static_accuracy.push_back(100.0 * a);
    d.oracle = oracle_accuracy(p.test_cm);
    std::ostringstream split;
    write_split_csv(split, p.full, p.plan, p.selector_rows, p.validation.folds);
    d.split_csv = split.str();
    for (auto m : cfg.methods)
        d.methods.push_back(run_method(p, m, cfg, threads));
    return d;
}

/// Runs every (dataset, method) cell. Datasets run concurrently; a failing
/// cell records its diagnostic and leaves the others intact.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    validate(cfg);
    ExperimentResult out;
    out.methods = cfg.methods;
    out.reference = cfg.reference;
    out.config_hash = hex64(fnv1a64(canonical_text(cfg)));
    const std::size_t threads = resolve_threads(cfg.threads);
    const std::size_t outer = std::min(threads, cfg.datasets.size());
    const std::size_t inner = std::max<std::size_t>(1, threads / std::max<std::size_t>(1, outer));
    out.datasets.resize(cfg.datasets.size());
    parallel_for(cfg.datasets.size(), outer,
                 [&](std::size_t i) { out.datasets[i] = evaluate_dataset(cfg, cfg.datasets[i], inner); });
    return out;
}

// Reporting ------------------------------------------------------------------

struct ComparisonRow {
    Method method = Method::cshc;
    bool oracle = false;
    std::size_t datasets = 0;  // datasets where both cells succeeded
    WinLoss vs_reference;      // reference's perspective
    std::optional<double> mgi;
    std::optional<TTestResult> ttest;
};

struct ExperimentSummary {
    std::vector<ComparisonRow> rows;          // one per method, then the oracle
    std::vector<double> ranks;                // per method, over complete datasets
    std::size_t ranked_datasets = 0;
    std::optional<double> mean_recourse_rate;  // LPR, percent
    bool partial = false;
};

inline ExperimentSummary summarize(const ExperimentResult& res)
{
    ExperimentSummary s;
    for (const auto& d : res.datasets)
        for (const auto& m : d.methods)
            s.partial = s.partial || !m.ok;

    auto compare = [&](Method method, bool oracle) {
        ComparisonRow row;
        row.method = method;
        row.oracle = oracle;
        std::vector<double> ref, other;
        for (const auto& d : res.datasets) {
            const auto* r = d.find(res.reference);
            const auto* m = oracle ? nullptr : d.find(method);
            if (!r || !r->ok || (!oracle && (!m || !m->ok)))
                continue;
            ref.push_back(r->accuracy);
            other.push_back(oracle ? d.oracle : m->accuracy);
        }
        row.datasets = ref.size();
        row.vs_reference = wins_losses(ref, other);
        const bool positive = std::all_of(ref.begin(), ref.end(), [](double v) { return v > 0.0; }) &&
                              std::all_of(other.begin(), other.end(), [](double v) { return v > 0.0; });
        if (!ref.empty() && positive)
            row.mgi = mgi(ref, other);
        if (ref.size() >= 2)
            row.ttest = paired_sign_ttest(outcome_indicators(ref, other));
        return row;
    };
    for (auto m : res.methods)
        s.rows.push_back(compare(m, false));
    s.rows.push_back(compare(res.reference, true));

    std::vector<std::vector<double>> table(res.methods.size());
    for (const auto& d : res.datasets) {
        const bool complete = std::all_of(d.methods.begin(), d.methods.end(), [](const auto& m) { return m.ok; });
        if (!complete || d.methods.empty())
            continue;
        ++s.ranked_datasets;
        for (std::size_t k = 0; k < res.methods.size(); ++k)
            table[k].push_back(d.methods[k].accuracy);
    }
    if (s.ranked_datasets > 0)
        s.ranks = average_ranks(table);

    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& d : res.datasets)
        if (const auto* r = d.find(Method::lpr); r && r->ok) {
            total += r->recourse_rate;
            ++counted;
        }
    if (counted)
        s.mean_recourse_rate = total / static_cast<double>(counted);
    return s;
}

namespace detail {

inline std::string cell(const std::string& s, std::size_t width) { return std::string(width > s.size() ? width - s.size() : 0, ' ') + s; }

inline std::string ratio_field(double v) { return std::isnan(v) ? "" : csv::format_double(v); }

} // namespace detail

/// Printed tables: accuracies rounded to 0.1; every statistic is computed
/// from unrounded values.
inline std::string format_report(const ExperimentResult& res)
{
    const auto s = summarize(res);
    const auto ref = to_string(res.reference);
    std::size_t name_w = 14;
    for (const auto& d : res.datasets)
        name_w = std::max(name_w, d.name.size() + 2);
    constexpr std::size_t w = 9;
    std::ostringstream out;
    out << "config " << res.config_hash << "\n\n";
    out << "test accuracy [%]\n" << std::left << std::setw(static_cast<int>(name_w)) << "dataset" << std::right;
    for (auto m : res.methods)
        out << detail::cell(to_string(m), w);
    out << detail::cell("Oracle", w) << '\n';
    for (const auto& d : res.datasets) {
        out << std::left << std::setw(static_cast<int>(name_w)) << d.name << std::right;
        for (const auto& m : d.methods)
            out << detail::cell(m.ok ? csv::format_fixed(m.accuracy, 1) : "fail", w);
        out << detail::cell(d.ok ? csv::format_fixed(d.oracle, 1) : "fail", w) << '\n';
    }
    out << '\n';

    auto stat_line = [&](const std::string& label, auto&& field) {
        out << std::left << std::setw(static_cast<int>(name_w)) << label << std::right;
        for (const auto& row : s.rows)
            out << detail::cell(field(row), w);
        out << '\n';
    };
    stat_line("# losses/*-" + ref, [](const ComparisonRow& r) { return std::to_string(r.vs_reference.wins); });
    stat_line("# wins/*-" + ref, [](const ComparisonRow& r) { return std::to_string(r.vs_reference.losses); });
    stat_line("# ties/*-" + ref, [](const ComparisonRow& r) { return std::to_string(r.vs_reference.ties); });
    stat_line("MGI [%]", [](const ComparisonRow& r) { return r.mgi ? csv::format_fixed(*r.mgi, 1) : "n/a"; });
    stat_line("t-test p [%]", [&](const ComparisonRow& r) -> std::string {
        if (!r.oracle && r.method == res.reference)
            return "-";
        return r.ttest ? csv::format_fixed(100.0 * r.ttest->p_value, 2) : "n/a";
    });
    out << std::left << std::setw(static_cast<int>(name_w)) << "rank" << std::right;
    for (std::size_t k = 0; k < res.methods.size(); ++k)
        out << detail::cell(s.ranks.empty() ? "n/a" : csv::format_fixed(s.ranks[k], 2), w);
    out << "\n\n";
    if (s.mean_recourse_rate)
        out << "LPR recourse rate [%]: " << csv::format_fixed(*s.mean_recourse_rate, 2) << " (mean over datasets)\n";
    out << "ranked datasets: " << s.ranked_datasets << " of " << res.datasets.size() << '\n';
    std::vector<std::string> degenerate;
    for (const auto& row : s.rows)
        if (row.ttest && row.ttest->degenerate && (row.oracle || row.method != res.reference))
            degenerate.push_back((row.oracle ? std::string("Oracle") : to_string(row.method)) + " (p " +
                                 csv::format_fixed(100.0 * row.ttest->p_value, 0) + "%)");
    if (!degenerate.empty())
        out << "warning: t-test degenerate (zero variance), p set to its limit for: " << detail::join(degenerate, ", ")
            << '\n';

    out << "\nbase classifiers, test accuracy [%]\n";
    for (const auto& d : res.datasets) {
        if (!d.ok)
            continue;
        out << std::left << std::setw(static_cast<int>(name_w)) << d.name << std::right;
        for (std::size_t a = 0; a < d.classifier_names.size(); ++a)
            out << "  " << d.classifier_names[a] << '=' << csv::format_fixed(d.static_accuracy[a], 1);
        out << '\n';
    }

    if (s.partial) {
        out << "\nPARTIAL: failed cells\n";
        for (const auto& d : res.datasets)
            for (const auto& m : d.methods)
                if (!m.ok)
                    out << "  " << d.name << " / " << to_string(m.method) << ": " << m.error << '\n';
    }
    return out.str();
}

inline void write_results_csv(std::ostream& out, const ExperimentResult& res)
{
    out << "dataset,kind,method,accuracy,recourse_rate,status,detail\n";
    for (const auto& d : res.datasets) {
        for (const auto& m : d.methods)
            csv::write_row(out, {d.name, "method", to_string(m.method), m.ok ? csv::format_double(m.accuracy) : "",
                                 m.ok && m.method == Method::lpr ? csv::format_double(m.recourse_rate) : "",
                                 m.ok ? "ok" : "failed", m.error});
        if (!d.ok) {
            csv::write_row(out, {d.name, "oracle", "Oracle", "", "", "failed", d.error});
            continue;
        }
        csv::write_row(out, {d.name, "oracle", "Oracle", csv::format_double(d.oracle), "", "ok", ""});
        for (std::size_t a = 0; a < d.classifier_names.size(); ++a)
            csv::write_row(out, {d.name, "static", d.classifier_names[a], csv::format_double(d.static_accuracy[a]), "",
                                 "ok", ""});
    }
}

/// Per-sample trace of every successful method on one dataset.
inline void write_trace_csv(std::ostream& out, const DatasetResult& d)
{
    out << "sample_index,method,method_used,chosen_classifier,classifier_name,predicted_class,true_class,correct,"
           "confidence_ratio,rr_ratio,lp_ratio,recourse_invoked\n";
    for (const auto& m : d.methods) {
        if (!m.ok)
            continue;
        for (std::size_t i = 0; i < m.outcomes.size(); ++i) {
            const auto& o = m.outcomes[i];
            csv::write_row(out, {std::to_string(d.test_ids[i]), to_string(m.method), to_string(o.method_used),
                                 std::to_string(o.chosen_classifier), d.classifier_names.at(o.chosen_classifier),
                                 std::to_string(o.predicted_class), std::to_string(d.test_truth[i]),
                                 o.predicted_class == d.test_truth[i] ? "1" : "0",
                                 csv::format_double(o.confidence_ratio), detail::ratio_field(o.rr_ratio),
                                 detail::ratio_field(o.lp_ratio), o.recourse_invoked ? "1" : "0"});
        }
    }
}

inline std::string ledger_line(const ExperimentConfig& cfg, const ExperimentResult& res)
{
    std::ostringstream out;
    std::size_t failed = 0;
    for (const auto& d : res.datasets)
        for (const auto& m : d.methods)
            failed += !m.ok;
    out << "config=" << res.config_hash << " seed=" << cfg.seed << " protocol=" << to_string(cfg.protocol)
        << " datasets=" << res.datasets.size() << " failed_cells=" << failed;
    for (std::size_t k = 0; k < res.methods.size(); ++k) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& d : res.datasets)
            if (d.methods[k].ok) {
                sum += d.methods[k].accuracy;
                ++n;
            }
        out << ' ' << to_string(res.methods[k]) << '=' << (n ? csv::format_fixed(sum / static_cast<double>(n), 3) : "n/a");
    }
    return out.str();
}

/// Writes results.csv, report.txt, one trace_<dataset>.csv and split_<dataset>.csv
/// per dataset, LP failure dumps, and appends to the ledger.
inline void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto open = [&](const std::filesystem::path& path) {
        std::ofstream f(path);
        if (!f)
            throw Error("cannot write '" + path.string() + "'");
        return f;
    };
    {
        auto f = open(dir / "results.csv");
        write_results_csv(f, res);
    }
    {
        auto f = open(dir / "report.txt");
        f << format_report(res);
    }
    for (const auto& d : res.datasets) {
        if (!d.ok)
            continue;
        {
            auto f = open(dir / ("trace_" + d.name + ".csv"));
            write_trace_csv(f, d);
        }
        {
            auto f = open(dir / ("split_" + d.name + ".csv"));
            f << d.split_csv;
        }
        for (const auto& m : d.methods)
            if (!m.lp_dump.empty()) {
                auto f = open(dir / ("lp_failure_" + d.name + "_" + to_string(m.method) + ".txt"));
                f << m.lp_dump;
            }
    }
    if (!cfg.ledger.empty()) {
        const std::filesystem::path ledger(cfg.ledger);
        std::ofstream f(ledger.is_absolute() ? ledger : dir / ledger, std::ios::app);
        if (!f)
            throw Error("cannot append to ledger '" + cfg.ledger + "'");
        f << ledger_line(cfg, res) << '\n';
    }
}

// Model bundles (train / select) ---------------------------------------------

inline constexpr const char* model_format = "cshc-model";

inline Json model_to_json(const ExperimentConfig& cfg, const PreparedDataset& p)
{
    Json classifiers = Json::array();
    for (const auto& m : p.validation.models)
        classifiers.push_back(classifier_to_json(m));
    return Json{{"format", model_format},
                {"version", model_format_version},
                {"dataset", p.name},
                {"feature_names", p.full.feature_names},
                {"class_names", p.full.class_names},
                {"protocol", to_string(cfg.protocol)},
                {"seed", p.seed},
                {"selection", {{"gamma", cfg.selection.gamma}, {"rho", cfg.selection.rho}}},
                {"baselines",
                 {{"k", cfg.baselines.k},
                  {"mcb_threshold", cfg.baselines.mcb_threshold},
                  {"distance_weighted", cfg.baselines.distance_weighted}}},
                {"classifiers", classifiers},
                {"validation", correctness_to_json(p.validation.cm)},
                {"validation_accuracy", p.validation_accuracy},
                {"selector_features", detail::matrix_to_json(p.selector.features)},
                {"forest", forest_to_json(p.forest)}};
}

/// A trained selector loaded back from disk.
struct SelectorModel {
    std::string dataset;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::uint64_t seed = 0;
    SelectionParams selection;
    BaselineParams baselines;
    std::vector<TrainedClassifier> models;
    CorrectnessMatrix validation;
    std::vector<double> validation_accuracy;
    Standardizer scaler;
    Matrix<double> region_points;
    Forest forest;

    std::vector<std::string> classifier_names() const
    {
        std::vector<std::string> out;
        for (const auto& m : models)
            out.push_back(m.spec().name);
        return out;
    }
};

/// Names of the external classifiers a model file needs predictions for.
inline std::vector<std::string> external_classifiers(const Json& j)
{
    std::vector<std::string> out;
    for (const auto& c : j.at("classifiers"))
        if (c.at("kind").get<std::string>() == to_string(ClassifierKind::external))
            out.push_back(c.at("name").get<std::string>());
    return out;
}

inline SelectorModel model_from_json(const Json& j,
                                     const std::map<std::string, std::shared_ptr<const ExternalPredictions>>& external)
{
    if (j.value("format", "") != model_format)
        throw Error("not a serialized selector model");
    if (j.at("version").get<int>() != model_format_version)
        throw Error("unsupported model format version");
    SelectorModel m;
    m.dataset = j.at("dataset").get<std::string>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.selection.gamma = j.at("selection").at("gamma").get<double>();
    m.selection.rho = j.at("selection").at("rho").get<double>();
    m.baselines.k = j.at("baselines").at("k").get<std::size_t>();
    m.baselines.mcb_threshold = j.at("baselines").at("mcb_threshold").get<double>();
    m.baselines.distance_weighted = j.at("baselines").at("distance_weighted").get<bool>();
    for (const auto& c : j.at("classifiers"))
        m.models.push_back(classifier_from_json(c, external));
    m.validation = correctness_from_json(j.at("validation"));
    m.validation_accuracy = j.at("validation_accuracy").get<std::vector<double>>();
    const auto selector = detail::matrix_from_json<double>(j.at("selector_features"));
    m.scaler = Standardizer::fit(selector);
    m.region_points = m.scaler.apply(selector);
    m.forest = forest_from_json(j.at("forest"));
    return m;
}

/// Reads query rows: every model feature must be present as a column (extra
/// columns are ignored). Labels are unknown, so `labels` is all zero and
/// `class_names` is copied from the model.
inline Dataset load_queries(const std::string& path, const SelectorModel& model)
{
    using K = DataError::Kind;
    const auto table = csv::read(path);
    std::vector<std::size_t> cols;
    for (const auto& name : model.feature_names) {
        const auto c = table.column(name);
        if (!c)
            throw DataError(K::missing_column, path + ": feature column '" + name + "' not found");
        cols.push_back(*c);
    }
    Dataset ds;
    ds.feature_names = model.feature_names;
    ds.class_names = model.class_names;
    ds.features = Matrix<double>(0, cols.size());
    std::vector<double> row(cols.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto v = csv::parse_double(table.rows[r][cols[k]]);
            if (!v || !std::isfinite(*v))
                throw DataError(K::non_numeric, path + ": line " + std::to_string(table.line_numbers[r]) + ", column '" +
                                                    model.feature_names[k] + "': bad value '" + table.rows[r][cols[k]] +
                                                    "'");
            row[k] = *v;
        }
        ds.features.append_row(row);
        ds.labels.push_back(0);
        ds.ids.push_back(r);
    }
    return ds;
}

/// Applies a trained selector to every query row. Vanilla CSHC runs only the
/// classifier it picks; the other methods need every classifier's label.
inline std::vector<SelectionOutcome> select_queries(const SelectorModel& model, const Dataset& queries, Method method,
                                                    std::size_t threads)
{
    std::vector<SelectionOutcome> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t r) {
        const auto x = queries.features.row(r);
        if (method == Method::cshc) {
            const auto bundle = query(model.forest, x);
            SelectionOutcome o;
            o.chosen_classifier = cshc_choice(bundle, model.validation_accuracy);
            o.predicted_class = model.models[o.chosen_classifier].predict_row(queries, r);
            o.method_used = DecidedBy::cshc;
            out[r] = o;
            return;
        }
        std::vector<int> labels;
        for (const auto& m : model.models)
            labels.push_back(m.predict_row(queries, r));
        if (!is_cshc_variant(method)) {
            const BaselinePool pool{&model.validation, &model.region_points};
            out[r] = select_baseline(baseline_of(method), pool, model.scaler.apply(x), labels, model.baselines);
            return;
        }
        const auto bundle = query(model.forest, x);
        SelectionInput in;
        in.bundle = &bundle;
        in.test_labels = labels;
        in.validation_accuracy = model.validation_accuracy;
        in.cm = &model.validation;
        in.n_classes = model.class_names.size();
        in.tie_seed = derive_seed(model.seed, detail::stream_ties, queries.ids[r]);
        switch (method) {
        case Method::rr: out[r] = select_rr(in); break;
        case Method::lp: out[r] = select_lp(in, model.selection); break;
        default: out[r] = select_lpr(in, model.selection); break;
        }
    });
    return out;
}

inline void write_selection_csv(std::ostream& out, const SelectorModel& model, const Dataset& queries,
                                std::span<const SelectionOutcome> outcomes)
{
    const auto names = model.classifier_names();
    out << "sample_index,chosen_classifier,classifier_name,predicted_class,predicted_label,method_used,"
           "confidence_ratio,recourse_invoked\n";
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& o = outcomes[r];
        csv::write_row(out, {std::to_string(queries.ids[r]), std::to_string(o.chosen_classifier),
                             names[o.chosen_classifier], std::to_string(o.predicted_class),
                             model.class_names.at(static_cast<std::size_t>(o.predicted_class)),
                             to_string(o.method_used), csv::format_double(o.confidence_ratio),
                             o.recourse_invoked ? "1" : "0"});
    }
}

} // namespace cshc

#endif
