#ifndef CSHC_PCA_HPP
#define CSHC_PCA_HPP

#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "csv.hpp"
#include "dataset.hpp"
#include "selection.hpp"

namespace cshc {

/// Principal axes of centered (unscaled) training features.
struct Pca {
    std::vector<double> mean;
    Matrix<double> axes;  // components x F, unit rows, by decreasing variance
    std::vector<double> explained_variance;

    static Pca fit(const Matrix<double>& x, std::size_t components)
    {
        const auto rows = static_cast<Eigen::Index>(x.rows());
        const auto cols = static_cast<Eigen::Index>(x.cols());
        Eigen::MatrixXd data(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                data(r, c) = x(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        const Eigen::RowVectorXd mu = data.colwise().mean();
        data.rowwise() -= mu;
        const Eigen::MatrixXd cov = (data.transpose() * data) / std::max<double>(1.0, static_cast<double>(rows - 1));
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

        Pca p;
        p.mean.assign(mu.data(), mu.data() + cols);
        const double top = eig.eigenvalues().size() ? std::max(0.0, eig.eigenvalues()(cols - 1)) : 0.0;
        const double cutoff = std::max(1e-12, 1e-10 * top);
        std::vector<std::vector<double>> kept;
        for (Eigen::Index k = cols - 1; k >= 0 && kept.size() < components; --k) {
            const double value = eig.eigenvalues()(k);
            if (value <= cutoff)
                break;
            Eigen::VectorXd v = eig.eigenvectors().col(k);
            // Sign convention: largest-magnitude loading positive.
            Eigen::Index arg = 0;
            v.cwiseAbs().maxCoeff(&arg);
            if (v(arg) < 0)
                v = -v;
            kept.emplace_back(v.data(), v.data() + cols);
            p.explained_variance.push_back(value);
        }
        p.axes = Matrix<double>(kept.size(), x.cols());
        for (std::size_t k = 0; k < kept.size(); ++k)
            std::copy(kept[k].begin(), kept[k].end(), p.axes.row(k).begin());
        return p;
    }

    std::size_t components() const noexcept { return axes.rows(); }

    std::vector<double> project(std::span<const double> x) const
    {
        std::vector<double> out(components(), 0.0);
        for (std::size_t k = 0; k < components(); ++k)
            for (std::size_t f = 0; f < x.size(); ++f)
                out[k] += axes(k, f) * (x[f] - mean[f]);
        return out;
    }
};

struct VizRow {
    std::size_t sample_index = 0;
    std::vector<double> coords;
    std::size_t chosen_classifier = 0;
    std::string classifier_name;
    int predicted_class = 0;
    int true_class = 0;
};

struct VizExport {
    std::vector<VizRow> rows;
    std::size_t components = 0;
    std::vector<std::string> warnings;
};

/// Projects each test sample onto the two leading principal components of
/// the training features and pairs it with the classifier selected for it.
inline VizExport export_viz(const Dataset& train, const Dataset& test, std::span<const SelectionOutcome> outcomes,
                            std::span<const std::string> classifier_names)
{
    if (train.n_features() < 2)
        throw DataError(DataError::Kind::dimension, "a 2-D projection needs at least two features");
    if (outcomes.size() != test.size())
        throw Error("export_viz: one outcome per test sample is required");
    VizExport out;
    const auto pca = Pca::fit(train.features, 2);
    out.components = pca.components();
    if (out.components < 2)
        out.warnings.push_back("training features have rank " + std::to_string(out.components) +
                               "; emitting fewer than two components");
    for (std::size_t r = 0; r < test.size(); ++r) {
        VizRow row;
        row.sample_index = test.ids[r];
        row.coords = pca.project(test.features.row(r));
        row.chosen_classifier = outcomes[r].chosen_classifier;
        row.classifier_name = row.chosen_classifier < classifier_names.size()
                                  ? classifier_names[row.chosen_classifier]
                                  : std::to_string(row.chosen_classifier);
        row.predicted_class = outcomes[r].predicted_class;
        row.true_class = test.labels[r];
        out.rows.push_back(std::move(row));
    }
    return out;
}

inline void write_viz_csv(std::ostream& out, const VizExport& viz)
{
    out << "sample_index";
    for (std::size_t k = 0; k < viz.components; ++k)
        out << ",pc" << (k + 1);
    out << ",chosen_classifier,classifier_name,predicted_class,true_class,correct\n";
    for (const auto& r : viz.rows) {
        out << r.sample_index;
        for (double c : r.coords)
            out << ',' << csv::format_double(c);
        out << ',' << r.chosen_classifier << ',' << csv::quote_if_needed(r.classifier_name) << ','
            << r.predicted_class << ',' << r.true_class << ',' << (r.predicted_class == r.true_class ? 1 : 0) << '\n';
    }
}

} // namespace cshc

#endif
