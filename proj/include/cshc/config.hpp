#ifndef CSHC_CONFIG_HPP
#define CSHC_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "baselines.hpp"
#include "classifiers.hpp"
#include "core.hpp"
#include "csv.hpp"
#include "dataset.hpp"
#include "forest.hpp"
#include "selection.hpp"

namespace cshc {

// Methods --------------------------------------------------------------------

enum class Method { cshc, rr, lp, lpr, ola, lca, apr, apo, mcb, ke, ku, mv };

inline const std::vector<std::pair<Method, std::string>>& method_names()
{
    static const std::vector<std::pair<Method, std::string>> names = {
        {Method::cshc, "CSHC"}, {Method::rr, "RR"},   {Method::lp, "LP"},   {Method::lpr, "LPR"},
        {Method::ola, "OLA"},   {Method::lca, "LCA"}, {Method::apr, "APR"}, {Method::apo, "APO"},
        {Method::mcb, "MCB"},   {Method::ke, "KE"},   {Method::ku, "KU"},   {Method::mv, "MV"}};
    return names;
}

inline std::string to_string(Method m)
{
    for (const auto& [method, name] : method_names())
        if (method == m)
            return name;
    return "?";
}

inline Method parse_method(const std::string& s)
{
    std::string upper;
    for (char c : s)
        upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& [method, name] : method_names())
        if (name == upper)
            return method;
    std::string known;
    for (const auto& [method, name] : method_names())
        known += (known.empty() ? "" : ", ") + name;
    throw ConfigError("unknown method '" + s + "' (known: " + known + ")");
}

inline bool is_cshc_variant(Method m)
{
    return m == Method::cshc || m == Method::rr || m == Method::lp || m == Method::lpr;
}

// Config ---------------------------------------------------------------------

struct DatasetEntry {
    std::string name;
    std::string path;
    std::string label_column = "label";
    std::map<std::string, std::string> external;  // classifier name -> predictions CSV
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    Protocol protocol = Protocol::split50;
    double test_fraction = 0.5;
    std::string output_dir = "results";
    std::vector<Method> methods = {Method::cshc, Method::rr,  Method::lp,  Method::lpr, Method::ola,
                                   Method::lca,  Method::apr, Method::mcb, Method::ku,  Method::mv};
    Method reference = Method::lpr;
    std::size_t threads = 0;
    std::string ledger = "ledger.txt";  // relative to output_dir
    std::vector<ClassifierSpec> pool = default_pool();
    std::vector<DatasetEntry> datasets;
    CshcConfig cshc;
    SelectionParams selection;
    BaselineParams baselines;

    static std::vector<ClassifierSpec> default_pool()
    {
        return {{ClassifierKind::gaussian_nb, "nb", {}, nullptr},
                {ClassifierKind::one_nn, "knn", {}, nullptr},
                {ClassifierKind::decision_tree_gini, "dt", {}, nullptr},
                {ClassifierKind::perceptron, "perceptron", {}, nullptr}};
    }
};

namespace detail {

inline std::string join(const std::vector<std::string>& parts, const std::string& sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i)
        out += (i ? sep : "") + parts[i];
    return out;
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (auto t = std::string(csv::trim(item)); !t.empty())
            out.push_back(t);
    return out;
}

inline double to_double(const std::string& where, const std::string& v)
{
    const auto d = csv::parse_double(v);
    if (!d || !std::isfinite(*d))
        throw ConfigError(where + ": '" + v + "' is not a finite number");
    return *d;
}

inline std::uint64_t to_uint(const std::string& where, const std::string& v)
{
    const auto d = csv::parse_int(v);
    if (!d || *d < 0)
        throw ConfigError(where + ": '" + v + "' is not a non-negative integer");
    return static_cast<std::uint64_t>(*d);
}

inline bool to_bool(const std::string& where, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ConfigError(where + ": '" + v + "' is not a boolean");
}

inline bool valid_name(const std::string& s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

} // namespace detail

using Ptree = boost::property_tree::ptree;

/// Applies "section.key=value" overrides (split at the first '.' and '=').
inline void apply_overrides(Ptree& tree, const std::vector<std::string>& overrides)
{
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        const auto dot = o.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq || dot == 0 || dot + 1 == eq)
            throw ConfigError("override '" + o + "' must look like section.key=value");
        const auto section = o.substr(0, dot);
        const auto key = o.substr(dot + 1, eq - dot - 1);
        const auto value = o.substr(eq + 1);
        auto found = tree.find(section);
        auto& sec = found == tree.not_found() ? tree.push_back({section, Ptree{}})->second : found->second;
        auto kit = sec.find(key);
        if (kit == sec.not_found())
            sec.push_back({key, Ptree(value)});
        else
            kit->second.data() = value;
    }
}

/// Builds a config from a parsed INI tree. Relative dataset and prediction
/// paths resolve against `base_dir`.
inline ExperimentConfig config_from_tree(const Ptree& tree, const std::filesystem::path& base_dir = {})
{
    using detail::to_bool;
    using detail::to_double;
    using detail::to_uint;
    ExperimentConfig cfg;
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return (path.is_absolute() || base_dir.empty() ? path : base_dir / path).lexically_normal().string();
    };
    std::map<std::string, std::map<std::string, std::string>> hyper;
    std::vector<std::pair<std::string, std::string>> members;

    for (const auto& [section, body] : tree) {
        auto where = [&](const std::string& key) { return "[" + section + "] " + key; };
        if (!body.data().empty())
            throw ConfigError("top-level key '" + section + "' outside any section");
        if (section == "experiment") {
            for (const auto& [key, node] : body) {
                const auto& v = node.data();
                if (key == "seed")
                    cfg.seed = to_uint(where(key), v);
                else if (key == "protocol")
                    cfg.protocol = parse_protocol(v);
                else if (key == "test_fraction")
                    cfg.test_fraction = to_double(where(key), v);
                else if (key == "output_dir")
                    cfg.output_dir = v;
                else if (key == "methods") {
                    cfg.methods.clear();
                    for (const auto& m : detail::split_list(v))
                        cfg.methods.push_back(parse_method(m));
                } else if (key == "reference")
                    cfg.reference = parse_method(v);
                else if (key == "threads")
                    cfg.threads = to_uint(where(key), v);
                else if (key == "ledger")
                    cfg.ledger = v;
                else
                    throw ConfigError("unknown key " + where(key));
            }
        } else if (section == "pool") {
            for (const auto& [key, node] : body) {
                if (key != "members")
                    throw ConfigError("unknown key " + where(key));
                for (const auto& item : detail::split_list(node.data())) {
                    const auto colon = item.find(':');
                    if (colon == std::string::npos)
                        throw ConfigError(where(key) + ": member '" + item + "' must be name:kind");
                    members.emplace_back(std::string(csv::trim(item.substr(0, colon))),
                                         std::string(csv::trim(item.substr(colon + 1))));
                }
            }
        } else if (section.starts_with("pool:")) {
            for (const auto& [key, node] : body)
                hyper[section.substr(5)][key] = node.data();
        } else if (section == "cshc") {
            for (const auto& [key, node] : body) {
                const auto& v = node.data();
                if (key == "n_trees")
                    cfg.cshc.n_trees = to_uint(where(key), v);
                else if (key == "bootstrap_fraction")
                    cfg.cshc.bootstrap_fraction = to_double(where(key), v);
                else if (key == "min_cluster_size")
                    cfg.cshc.min_cluster_size = to_uint(where(key), v);
                else if (key == "max_depth")
                    cfg.cshc.max_depth = to_uint(where(key), v);
                else if (key == "min_improvement")
                    cfg.cshc.min_improvement = to_double(where(key), v);
                else
                    throw ConfigError("unknown key " + where(key));
            }
        } else if (section == "selection") {
            for (const auto& [key, node] : body) {
                const auto& v = node.data();
                if (key == "gamma")
                    cfg.selection.gamma = to_double(where(key), v);
                else if (key == "rho")
                    cfg.selection.rho = to_double(where(key), v);
                else if (key == "lp_max_iterations")
                    cfg.selection.lp.max_iterations = to_uint(where(key), v);
                else
                    throw ConfigError("unknown key " + where(key));
            }
        } else if (section == "baselines") {
            for (const auto& [key, node] : body) {
                const auto& v = node.data();
                if (key == "k")
                    cfg.baselines.k = to_uint(where(key), v);
                else if (key == "mcb_threshold")
                    cfg.baselines.mcb_threshold = to_double(where(key), v);
                else if (key == "distance_weighted")
                    cfg.baselines.distance_weighted = to_bool(where(key), v);
                else
                    throw ConfigError("unknown key " + where(key));
            }
        } else if (section.starts_with("dataset:")) {
            DatasetEntry d;
            d.name = section.substr(8);
            if (!detail::valid_name(d.name))
                throw ConfigError("dataset name '" + d.name + "' may only use letters, digits, '_', '-' and '.'");
            for (const auto& [key, node] : body) {
                const auto& v = node.data();
                if (key == "path")
                    d.path = resolve(v);
                else if (key == "label_column")
                    d.label_column = v;
                else if (key.starts_with("external."))
                    d.external[key.substr(9)] = resolve(v);
                else
                    throw ConfigError("unknown key " + where(key));
            }
            if (d.path.empty())
                throw ConfigError("[" + section + "] needs a path");
            cfg.datasets.push_back(std::move(d));
        } else {
            throw ConfigError("unknown section [" + section + "]");
        }
    }

    if (!members.empty()) {
        cfg.pool.clear();
        for (const auto& [name, kind] : members) {
            if (!detail::valid_name(name))
                throw ConfigError("pool member name '" + name + "' may only use letters, digits, '_', '-' and '.'");
            cfg.pool.push_back({parse_classifier_kind(kind), name, {}, nullptr});
        }
    }
    for (const auto& [name, params] : hyper) {
        auto it = std::find_if(cfg.pool.begin(), cfg.pool.end(), [&](const auto& s) { return s.name == name; });
        if (it == cfg.pool.end())
            throw ConfigError("[pool:" + name + "] refers to no pool member");
        it->hyperparams = params;
    }
    return cfg;
}

/// Checks cross-field invariants and that every referenced file exists.
inline void validate(const ExperimentConfig& cfg, bool require_datasets = true)
{
    cfg.cshc.validate();
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw ConfigError("[experiment] test_fraction must lie in (0, 1)");
    if (cfg.methods.empty())
        throw ConfigError("[experiment] methods is empty");
    if (!(cfg.selection.rho >= 0.0 && cfg.selection.rho <= 1.0))
        throw ConfigError("[selection] rho must lie in [0, 1]");
    if (!(cfg.selection.gamma > 0.0 && cfg.selection.gamma <= 100.0))
        throw ConfigError("[selection] gamma must lie in (0, 100]");
    if (cfg.baselines.k == 0)
        throw ConfigError("[baselines] k must be >= 1");
    if (cfg.pool.empty())
        throw ConfigError("[pool] is empty");
    std::set<std::string> names;
    for (const auto& s : cfg.pool)
        if (!names.insert(s.name).second)
            throw ConfigError("duplicate pool member '" + s.name + "'");
    if (require_datasets && cfg.datasets.empty())
        throw ConfigError("no [dataset:NAME] sections");
    std::set<std::string> seen;
    for (const auto& d : cfg.datasets) {
        if (!seen.insert(d.name).second)
            throw ConfigError("duplicate dataset '" + d.name + "'");
        if (!std::filesystem::exists(d.path))
            throw ConfigError("dataset '" + d.name + "': file '" + d.path + "' does not exist");
        for (const auto& s : cfg.pool) {
            if (s.kind != ClassifierKind::external)
                continue;
            auto it = d.external.find(s.name);
            if (it == d.external.end())
                throw ConfigError("dataset '" + d.name + "' gives no external." + s.name + " predictions file");
            if (!std::filesystem::exists(it->second))
                throw ConfigError("dataset '" + d.name + "': file '" + it->second + "' does not exist");
        }
        for (const auto& [name, path] : d.external)
            if (!names.contains(name))
                throw ConfigError("dataset '" + d.name + "': external." + name + " names no pool member");
    }
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {})
{
    if (!std::filesystem::exists(path))
        throw ConfigError("config file '" + path + "' does not exist");
    Ptree tree;
    try {
        boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot parse config: ") + e.what());
    }
    apply_overrides(tree, overrides);
    return config_from_tree(tree, std::filesystem::path(path).parent_path());
}

/// Canonical text of every setting; identical configs give identical text.
inline std::string canonical_text(const ExperimentConfig& cfg)
{
    std::ostringstream out;
    std::vector<std::string> methods;
    for (auto m : cfg.methods)
        methods.push_back(to_string(m));
    out << "[experiment]\nseed = " << cfg.seed << "\nprotocol = " << to_string(cfg.protocol)
        << "\ntest_fraction = " << csv::format_double(cfg.test_fraction) << "\nmethods = " << detail::join(methods, ",")
        << "\nreference = " << to_string(cfg.reference) << "\n\n[pool]\nmembers = ";
    std::vector<std::string> members;
    for (const auto& s : cfg.pool)
        members.push_back(s.name + ":" + to_string(s.kind));
    out << detail::join(members, ",") << "\n";
    for (const auto& s : cfg.pool) {
        if (s.hyperparams.empty())
            continue;
        out << "\n[pool:" << s.name << "]\n";
        for (const auto& [k, v] : s.hyperparams)
            out << k << " = " << v << "\n";
    }
    out << "\n[cshc]\nn_trees = " << cfg.cshc.n_trees
        << "\nbootstrap_fraction = " << csv::format_double(cfg.cshc.bootstrap_fraction)
        << "\nmin_cluster_size = " << cfg.cshc.min_cluster_size << "\nmax_depth = " << cfg.cshc.max_depth
        << "\nmin_improvement = " << csv::format_double(cfg.cshc.min_improvement)
        << "\n\n[selection]\ngamma = " << csv::format_double(cfg.selection.gamma)
        << "\nrho = " << csv::format_double(cfg.selection.rho)
        << "\nlp_max_iterations = " << cfg.selection.lp.max_iterations << "\n\n[baselines]\nk = " << cfg.baselines.k
        << "\nmcb_threshold = " << csv::format_double(cfg.baselines.mcb_threshold)
        << "\ndistance_weighted = " << (cfg.baselines.distance_weighted ? "true" : "false") << "\n";
    for (const auto& d : cfg.datasets) {
        out << "\n[dataset:" << d.name << "]\npath = " << d.path << "\nlabel_column = " << d.label_column << "\n";
        for (const auto& [k, v] : d.external)
            out << "external." << k << " = " << v << "\n";
    }
    return out.str();
}

/// 64-bit FNV-1a; used for config hashes and per-dataset seed streams.
inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace cshc

#endif
