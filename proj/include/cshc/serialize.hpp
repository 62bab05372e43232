#ifndef CSHC_SERIALIZE_HPP
#define CSHC_SERIALIZE_HPP

#include <fstream>
#include <string>

#include <json.hpp>

#include "classifiers.hpp"
#include "forest.hpp"

namespace cshc {

using Json = nlohmann::json;

inline constexpr int forest_format_version = 1;
inline constexpr int model_format_version = 1;

namespace detail {

template <class T>
Json matrix_to_json(const Matrix<T>& m)
{
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

template <class T>
Matrix<T> matrix_from_json(const Json& j)
{
    Matrix<T> m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data() = j.at("data").get<std::vector<T>>();
    if (m.data().size() != m.rows() * m.cols())
        throw Error("matrix payload size does not match its shape");
    return m;
}

// JSON has no infinities; absent classes carry a null log prior.
inline Json finite_or_null(const std::vector<double>& v)
{
    Json out = Json::array();
    for (double x : v)
        out.push_back(std::isfinite(x) ? Json(x) : Json(nullptr));
    return out;
}

inline std::vector<double> null_as_neg_inf(const Json& j)
{
    std::vector<double> out;
    for (const auto& x : j)
        out.push_back(x.is_null() ? -std::numeric_limits<double>::infinity() : x.get<double>());
    return out;
}

} // namespace detail

// Forest ---------------------------------------------------------------------

inline Json config_to_json(const CshcConfig& c)
{
    return Json{{"n_trees", c.n_trees},
                {"bootstrap_fraction", c.bootstrap_fraction},
                {"min_cluster_size", c.min_cluster_size},
                {"max_depth", c.max_depth},
                {"min_improvement", c.min_improvement},
                {"seed", c.seed}};
}

inline CshcConfig config_from_json(const Json& j)
{
    CshcConfig c;
    c.n_trees = j.at("n_trees").get<std::size_t>();
    c.bootstrap_fraction = j.at("bootstrap_fraction").get<double>();
    c.min_cluster_size = j.at("min_cluster_size").get<std::size_t>();
    c.max_depth = j.at("max_depth").get<std::size_t>();
    c.min_improvement = j.at("min_improvement").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline Json forest_to_json(const Forest& forest)
{
    Json trees = Json::array();
    for (const auto& tree : forest.trees) {
        Json nodes = Json::array();
        for (const auto& n : tree.nodes) {
            if (!n.is_leaf()) {
                nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
                continue;
            }
            Json members = Json::array();
            for (const auto& m : n.members)
                members.push_back({m.row, m.multiplicity});
            nodes.push_back({{"members", members},
                             {"correct_counts", n.correct_counts},
                             {"class_counts", n.class_counts},
                             {"size", n.size}});
        }
        trees.push_back({{"features", tree.features}, {"bootstrap", tree.bootstrap}, {"nodes", nodes}});
    }
    return Json{{"format", "cshc-forest"},
                {"version", forest_format_version},
                {"config", config_to_json(forest.config)},
                {"n_features", forest.n_features},
                {"n_classifiers", forest.n_classifiers},
                {"n_classes", forest.n_classes},
                {"trees", trees}};
}

inline Forest forest_from_json(const Json& j)
{
    if (j.value("format", "") != "cshc-forest")
        throw Error("not a serialized forest");
    if (j.at("version").get<int>() != forest_format_version)
        throw Error("unsupported forest format version " + std::to_string(j.at("version").get<int>()));
    Forest f;
    f.config = config_from_json(j.at("config"));
    f.n_features = j.at("n_features").get<std::size_t>();
    f.n_classifiers = j.at("n_classifiers").get<std::size_t>();
    f.n_classes = j.at("n_classes").get<std::size_t>();
    for (const auto& jt : j.at("trees")) {
        ClusterTree tree;
        tree.features = jt.at("features").get<std::vector<std::size_t>>();
        tree.bootstrap = jt.at("bootstrap").get<std::vector<std::size_t>>();
        for (const auto& jn : jt.at("nodes")) {
            ClusterNode n;
            if (jn.contains("feature")) {
                n.feature = jn.at("feature").get<int>();
                n.threshold = jn.at("threshold").get<double>();
                n.left = jn.at("left").get<int>();
                n.right = jn.at("right").get<int>();
            } else {
                for (const auto& m : jn.at("members"))
                    n.members.push_back({m.at(0).get<std::size_t>(), m.at(1).get<std::uint32_t>()});
                n.correct_counts = jn.at("correct_counts").get<std::vector<double>>();
                n.class_counts = jn.at("class_counts").get<std::vector<double>>();
                n.size = jn.at("size").get<double>();
            }
            tree.nodes.push_back(std::move(n));
        }
        const auto count = static_cast<int>(tree.nodes.size());
        for (const auto& n : tree.nodes)
            if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
                throw Error("serialized forest has a dangling child reference");
        f.trees.push_back(std::move(tree));
    }
    return f;
}

// Classifiers ----------------------------------------------------------------

inline Json classifier_to_json(const TrainedClassifier& c)
{
    Json j{{"name", c.spec().name},
           {"kind", to_string(c.spec().kind)},
           {"hyperparams", c.spec().hyperparams},
           {"n_classes", c.n_classes()},
           {"n_features", c.n_features()}};
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, GaussianNb>) {
                j["model"] = {{"log_prior", detail::finite_or_null(m.log_prior)},
                              {"mean", detail::matrix_to_json(m.mean)},
                              {"var", detail::matrix_to_json(m.var)}};
            } else if constexpr (std::is_same_v<M, NearestNeighbor>) {
                j["model"] = {{"mean", m.scaler.mean},
                              {"scale", m.scaler.scale},
                              {"points", detail::matrix_to_json(m.points)},
                              {"labels", m.labels}};
            } else if constexpr (std::is_same_v<M, GiniTree>) {
                Json nodes = Json::array();
                for (const auto& n : m.nodes)
                    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.class_counts});
                j["model"] = {{"nodes", nodes}};
            } else if constexpr (std::is_same_v<M, Perceptron>) {
                j["model"] = {{"weights", detail::matrix_to_json(m.weights)}, {"bias", m.bias}};
            } else {
                j["model"] = Json::object();
            }
        },
        c.model());
    return j;
}

/// `external` supplies the predictions for kind=external entries (by name).
inline TrainedClassifier classifier_from_json(
    const Json& j, const std::map<std::string, std::shared_ptr<const ExternalPredictions>>& external = {})
{
    ClassifierSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.kind = parse_classifier_kind(j.at("kind").get<std::string>());
    spec.hyperparams = j.at("hyperparams").get<std::map<std::string, std::string>>();
    const auto c = j.at("n_classes").get<std::size_t>();
    const auto f = j.at("n_features").get<std::size_t>();
    const auto& m = j.at("model");
    switch (spec.kind) {
    case ClassifierKind::gaussian_nb: {
        GaussianNb nb;
        nb.log_prior = detail::null_as_neg_inf(m.at("log_prior"));
        nb.mean = detail::matrix_from_json<double>(m.at("mean"));
        nb.var = detail::matrix_from_json<double>(m.at("var"));
        return {spec, nb, c, f};
    }
    case ClassifierKind::one_nn: {
        NearestNeighbor nn;
        nn.scaler.mean = m.at("mean").get<std::vector<double>>();
        nn.scaler.scale = m.at("scale").get<std::vector<double>>();
        nn.points = detail::matrix_from_json<double>(m.at("points"));
        nn.labels = m.at("labels").get<std::vector<int>>();
        nn.n_classes = c;
        return {spec, nn, c, f};
    }
    case ClassifierKind::decision_tree_gini: {
        GiniTree tree;
        tree.n_classes = c;
        for (const auto& n : m.at("nodes"))
            tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                                  n.at(4).get<std::vector<double>>()});
        return {spec, tree, c, f};
    }
    case ClassifierKind::perceptron: {
        Perceptron p;
        p.weights = detail::matrix_from_json<double>(m.at("weights"));
        p.bias = m.at("bias").get<std::vector<double>>();
        return {spec, p, c, f};
    }
    case ClassifierKind::external: {
        auto it = external.find(spec.name);
        if (it == external.end())
            throw ConfigError("external classifier '" + spec.name + "' needs a predictions file (--external " +
                              spec.name + "=PATH)");
        spec.external = it->second;
        return {spec, ExternalModel{it->second}, c, f};
    }
    }
    throw Error("unknown classifier kind in model file");
}

inline Json correctness_to_json(const CorrectnessMatrix& cm)
{
    Json j{{"predicted", detail::matrix_to_json(cm.predicted)},
           {"truth", cm.truth},
           {"sample_indices", cm.sample_indices},
           {"n_classes", cm.n_classes}};
    if (cm.has_proba())
        j["proba"] = detail::matrix_to_json(cm.proba);
    return j;
}

inline CorrectnessMatrix correctness_from_json(const Json& j)
{
    CorrectnessMatrix cm;
    cm.predicted = detail::matrix_from_json<int>(j.at("predicted"));
    cm.truth = j.at("truth").get<std::vector<int>>();
    cm.sample_indices = j.at("sample_indices").get<std::vector<std::size_t>>();
    cm.n_classes = j.at("n_classes").get<std::size_t>();
    cm.correct = Matrix<std::uint8_t>(cm.predicted.rows(), cm.predicted.cols());
    for (std::size_t i = 0; i < cm.size(); ++i)
        for (std::size_t a = 0; a < cm.n_classifiers(); ++a)
            cm.correct(i, a) = cm.predicted(i, a) == cm.truth[i] ? 1 : 0;
    if (j.contains("proba")) {
        cm.proba = detail::matrix_from_json<double>(j.at("proba"));
        if (cm.proba.rows() != cm.size() || cm.proba.cols() != cm.n_classifiers() * cm.n_classes)
            throw Error("serialized probabilities do not match the correctness matrix");
    }
    return cm;
}

inline Json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open '" + path + "'");
    return Json::parse(in);
}

inline void write_json_file(const std::string& path, const Json& j)
{
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write '" + path + "'");
    out << j.dump(1) << '\n';
}

} // namespace cshc

#endif
