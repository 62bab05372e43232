#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cshc/experiment.hpp"
#include "cshc/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cshc;

/// Options shared by the config-driven subcommands. Flags become overrides
/// applied after any --set entries.
struct CommonOptions {
    std::string config;
    std::vector<std::string> sets;
    std::string seed, threads, protocol, methods, output;

    void attach(CLI::App* app)
    {
        app->add_option("-c,--config", config, "experiment config (INI)")->required()->check(CLI::ExistingFile);
        app->add_option("--set", sets, "override a config value: section.key=value (repeatable)");
        app->add_option("--seed", seed, "run seed");
        app->add_option("--threads", threads, "worker threads (0 = all cores)");
        app->add_option("--protocol", protocol, "split50 or cv3");
        app->add_option("--methods", methods, "comma-separated method list");
        app->add_option("-o,--output", output, "output directory");
    }

    ExperimentConfig load() const
    {
        auto overrides = sets;
        auto flag = [&](const std::string& key, const std::string& value) {
            if (!value.empty())
                overrides.push_back("experiment." + key + "=" + value);
        };
        flag("seed", seed);
        flag("threads", threads);
        flag("protocol", protocol);
        flag("methods", methods);
        flag("output_dir", output);
        return load_config(config, overrides);
    }
};

const DatasetEntry& find_dataset(const ExperimentConfig& cfg, const std::string& name)
{
    for (const auto& d : cfg.datasets)
        if (d.name == name)
            return d;
    throw ConfigError("no [dataset:" + name + "] in the config");
}

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f)
        throw Error("cannot write '" + path.string() + "'");
    return f;
}

void print_summary(const ExperimentResult& res, const fs::path& dir)
{
    std::cout << format_report(res) << "\noutputs written to " << dir.string() << '\n';
}

int run_compare(const ExperimentConfig& cfg)
{
    const auto res = run_experiment(cfg);
    write_outputs(cfg, res, cfg.output_dir);
    print_summary(res, cfg.output_dir);
    return summarize(res).partial ? 2 : 0;
}

std::map<std::string, std::shared_ptr<const ExternalPredictions>>
parse_externals(const std::vector<std::string>& items, const Json& model_json)
{
    std::map<std::string, std::string> paths;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--external expects NAME=PATH, got '" + item + "'");
        paths[item.substr(0, eq)] = item.substr(eq + 1);
    }
    const auto n_classes = model_json.at("class_names").size();
    std::map<std::string, std::shared_ptr<const ExternalPredictions>> out;
    for (const auto& name : external_classifiers(model_json)) {
        auto it = paths.find(name);
        if (it == paths.end())
            throw ConfigError("classifier '" + name + "' is external; pass --external " + name + "=PATH");
        out[name] = std::make_shared<const ExternalPredictions>(load_external_predictions(it->second, n_classes, {}));
    }
    return out;
}

void write_synthetic_suite(const fs::path& dir, std::size_t count, std::size_t samples, std::uint64_t seed,
                           bool with_builtin)
{
    fs::create_directories(dir);
    std::ofstream cfg(dir / "config.ini");
    cfg << "[experiment]\nseed = " << seed << "\nprotocol = split50\ntest_fraction = 0.3333333333333333\n"
        << "output_dir = results\nmethods = CSHC,RR,LP,LPR,OLA,LCA,APR,MCB,KU,MV\nreference = LPR\n\n"
        << "[pool]\nmembers = expert0:external,expert1:external,expert2:external"
        << (with_builtin ? ",nb:gaussian_nb,dt:decision_tree_gini" : "") << "\n";
    for (std::size_t i = 0; i < count; ++i) {
        RegionBenchmarkSpec spec;
        spec.n_samples = samples;
        spec.seed = derive_seed(seed, i);
        const auto stem = "regions" + std::to_string(i);
        const auto bench = make_region_benchmark(spec);
        const auto preds = write_region_benchmark(bench, dir, stem);
        cfg << "\n[dataset:" << stem << "]\npath = " << stem << ".csv\nlabel_column = label\n";
        for (std::size_t a = 0; a < preds.size(); ++a)
            cfg << "external." << bench.classifier_names[a] << " = " << fs::path(preds[a]).filename().string() << '\n';
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cost-sensitive hierarchical clustering for dynamic classifier selection"};
    app.require_subcommand(1);

    CommonOptions train_opt;
    std::string train_dataset, train_model;
    auto* train_cmd = app.add_subcommand("train", "build and save the forest and base classifiers for one dataset");
    train_opt.attach(train_cmd);
    train_cmd->add_option("-d,--dataset", train_dataset, "dataset section name")->required();
    train_cmd->add_option("-m,--model", train_model, "model file to write (JSON)")->required();

    std::string sel_model, sel_input, sel_out, sel_method = "LPR";
    std::vector<std::string> sel_external;
    std::size_t sel_threads = 0;
    auto* select_cmd = app.add_subcommand("select", "pick a classifier for every row of a feature file");
    select_cmd->add_option("-m,--model", sel_model, "model file from 'train'")->required()->check(CLI::ExistingFile);
    select_cmd->add_option("-i,--input", sel_input, "feature CSV (header names the features)")
        ->required()
        ->check(CLI::ExistingFile);
    select_cmd->add_option("-o,--output", sel_out, "selection CSV to write")->required();
    select_cmd->add_option("--method", sel_method, "CSHC, RR, LP, LPR or a baseline");
    select_cmd->add_option("--external", sel_external, "NAME=PATH predictions for an external classifier");
    select_cmd->add_option("--threads", sel_threads, "worker threads (0 = all cores)");

    CommonOptions eval_opt;
    std::string eval_dataset;
    auto* eval_cmd = app.add_subcommand("evaluate", "run every configured method on one dataset");
    eval_opt.attach(eval_cmd);
    eval_cmd->add_option("-d,--dataset", eval_dataset, "dataset section name")->required();

    CommonOptions cmp_opt;
    auto* cmp_cmd = app.add_subcommand("compare", "sweep all datasets and methods; write tables and report");
    cmp_opt.attach(cmp_cmd);

    CommonOptions viz_opt;
    std::string viz_dataset, viz_method = "LPR", viz_out;
    auto* viz_cmd = app.add_subcommand("export-viz", "2-D PCA coordinates of test samples with their selections");
    viz_opt.attach(viz_cmd);
    viz_cmd->add_option("-d,--dataset", viz_dataset, "dataset section name")->required();
    viz_cmd->add_option("--method", viz_method, "selection method to plot");
    viz_cmd->add_option("--csv", viz_out, "CSV to write")->required();

    std::string syn_dir;
    std::size_t syn_count = 3, syn_samples = 2250;
    std::uint64_t syn_seed = 7;
    bool syn_builtin = false;
    auto* syn_cmd = app.add_subcommand("make-synthetic", "write region benchmarks and a matching config");
    syn_cmd->add_option("-o,--output", syn_dir, "directory to create")->required();
    syn_cmd->add_option("--datasets", syn_count, "number of benchmarks")->check(CLI::PositiveNumber);
    syn_cmd->add_option("--samples", syn_samples, "rows per benchmark")->check(CLI::PositiveNumber);
    syn_cmd->add_option("--seed", syn_seed, "generator seed");
    syn_cmd->add_flag("--with-builtin", syn_builtin, "add naive Bayes and a decision tree to the pool");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            const auto cfg = train_opt.load();
            validate(cfg);
            const auto p = prepare_dataset(cfg, find_dataset(cfg, train_dataset), resolve_threads(cfg.threads));
            write_json_file(train_model, model_to_json(cfg, p));
            std::cout << "trained " << p.forest.trees.size() << " trees over " << p.selector.size()
                      << " selector samples; model written to " << train_model << '\n';
        } else if (*select_cmd) {
            const auto j = read_json_file(sel_model);
            const auto model = model_from_json(j, parse_externals(sel_external, j));
            const auto queries = load_queries(sel_input, model);
            const auto outcomes = select_queries(model, queries, parse_method(sel_method), sel_threads);
            auto f = open_out(sel_out);
            write_selection_csv(f, model, queries, outcomes);
            std::cout << "selected for " << outcomes.size() << " rows; written to " << sel_out << '\n';
        } else if (*eval_cmd) {
            auto cfg = eval_opt.load();
            const auto entry = find_dataset(cfg, eval_dataset);
            cfg.datasets = {entry};
            return run_compare(cfg);
        } else if (*cmp_cmd) {
            return run_compare(cmp_opt.load());
        } else if (*viz_cmd) {
            const auto cfg = viz_opt.load();
            validate(cfg);
            const auto threads = resolve_threads(cfg.threads);
            const auto p = prepare_dataset(cfg, find_dataset(cfg, viz_dataset), threads);
            const auto r = run_method(p, parse_method(viz_method), cfg, threads);
            if (!r.ok)
                throw Error(r.error);
            const auto viz = export_viz(p.train, p.test, r.outcomes, p.classifier_names);
            for (const auto& w : viz.warnings)
                std::cerr << "warning: " << w << '\n';
            auto f = open_out(viz_out);
            write_viz_csv(f, viz);
            std::cout << viz.rows.size() << " test samples written to " << viz_out << '\n';
        } else if (*syn_cmd) {
            write_synthetic_suite(syn_dir, syn_count, syn_samples, syn_seed, syn_builtin);
            std::cout << syn_count << " benchmarks and config.ini written to " << syn_dir << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
