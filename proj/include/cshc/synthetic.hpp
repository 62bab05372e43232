#ifndef CSHC_SYNTHETIC_HPP
#define CSHC_SYNTHETIC_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "classifiers.hpp"
#include "core.hpp"
#include "csv.hpp"
#include "dataset.hpp"

namespace cshc {

/// Region benchmark: feature x0 in [0, R) selects region floor(x0), x1 is
/// noise. Classifier r is an expert inside region r and weak elsewhere.
/// Correctness is assigned by per-region occurrence counters rather than
/// drawn, so the accuracies below hold by construction:
///   expert in its region: wrong only on every `expert_error_period`-th sample;
///   outside its region: correct on 3 of every 10 consecutive samples.
/// Wrong answers of different classifiers never coincide, so wrong labels do
/// not pool support in a vote.
struct RegionBenchmarkSpec {
    std::size_t n_samples = 2250;
    std::size_t n_regions = 3;
    std::size_t n_classes = 4;
    std::size_t expert_error_period = 100;
    std::size_t outside_correct_per_10 = 3;
    std::uint64_t seed = 7;
};

struct RegionBenchmark {
    Dataset data;
    std::vector<std::string> classifier_names;
    std::vector<ExternalPredictions> predictions;  // one per classifier, keyed by row index
};

inline RegionBenchmark make_region_benchmark(const RegionBenchmarkSpec& spec)
{
    if (spec.n_regions < 1 || spec.n_classes < spec.n_regions + 1 || spec.n_classes < 2)
        throw ConfigError("region benchmark needs n_classes > n_regions >= 1 so wrong answers stay distinct");
    if (spec.expert_error_period < 2 || spec.outside_correct_per_10 > 10)
        throw ConfigError("region benchmark: invalid accuracy parameters");

    RegionBenchmark out;
    auto& ds = out.data;
    ds.features = Matrix<double>(0, 2);
    ds.feature_names = {"x0", "x1"};
    for (std::size_t c = 0; c < spec.n_classes; ++c)
        ds.class_names.push_back("c" + std::to_string(c));
    out.predictions.resize(spec.n_regions);
    for (std::size_t a = 0; a < spec.n_regions; ++a) {
        out.classifier_names.push_back("expert" + std::to_string(a));
        out.predictions[a].n_classes = spec.n_classes;
    }

    Rng rng(derive_seed(spec.seed, 0x5e17));
    std::vector<std::size_t> seen(spec.n_regions, 0);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        const std::size_t region = i % spec.n_regions;
        const double x0 = static_cast<double>(region) + uniform_real(rng);
        const double x1 = uniform_real(rng);
        // The first C rows cover the classes in order, so a CSV reader that
        // encodes labels by first appearance recovers the same class indices.
        const auto draw = uniform_index(rng, spec.n_classes);
        const auto y = static_cast<int>(i < spec.n_classes ? i : draw);
        const double row[2] = {x0, x1};
        ds.features.append_row(row);
        ds.labels.push_back(y);
        ds.ids.push_back(i);

        const std::size_t j = seen[region]++;
        for (std::size_t a = 0; a < spec.n_regions; ++a) {
            const bool correct = a == region ? (j % spec.expert_error_period) != spec.expert_error_period - 1
                                             : (j * 7 + a) % 10 < spec.outside_correct_per_10;
            const int wrong = static_cast<int>((static_cast<std::size_t>(y) + 1 + a) % spec.n_classes);
            out.predictions[a].label[i] = correct ? y : wrong;
        }
    }
    return out;
}

/// Writes `<stem>.csv` (x0, x1, label) and `<stem>_<classifier>.csv`
/// (sample_index, predicted_class) into `dir`; returns the prediction paths.
inline std::vector<std::string> write_region_benchmark(const RegionBenchmark& bench, const std::filesystem::path& dir,
                                                       const std::string& stem)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / (stem + ".csv"));
        if (!out)
            throw Error("cannot write into '" + dir.string() + "'");
        out << "x0,x1,label\n";
        for (std::size_t r = 0; r < bench.data.size(); ++r)
            out << csv::format_double(bench.data.features(r, 0)) << ',' << csv::format_double(bench.data.features(r, 1))
                << ',' << bench.data.class_names[static_cast<std::size_t>(bench.data.labels[r])] << '\n';
    }
    std::vector<std::string> paths;
    for (std::size_t a = 0; a < bench.predictions.size(); ++a) {
        const auto path = dir / (stem + "_" + bench.classifier_names[a] + ".csv");
        std::ofstream out(path);
        out << "sample_index,predicted_class\n";
        for (std::size_t r = 0; r < bench.data.size(); ++r)
            out << r << ',' << bench.predictions[a].label.at(r) << '\n';
        paths.push_back(path.string());
    }
    return paths;
}

} // namespace cshc

#endif
