#ifndef CSHC_SELECTION_HPP
#define CSHC_SELECTION_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "forest.hpp"
#include "lp.hpp"

namespace cshc {

/// Which rule produced a selection. Baseline selectors report `baseline`.
enum class DecidedBy { cshc, rr, lp, lpr_agree, lpr_cshc_match, lpr_dominant, lpr_fallback, baseline };

inline std::string to_string(DecidedBy d)
{
    switch (d) {
    case DecidedBy::cshc: return "cshc";
    case DecidedBy::rr: return "rr";
    case DecidedBy::lp: return "lp";
    case DecidedBy::lpr_agree: return "lpr-agree";
    case DecidedBy::lpr_cshc_match: return "lpr-cshc-match";
    case DecidedBy::lpr_dominant: return "lpr-dominant";
    case DecidedBy::lpr_fallback: return "lpr-fallback";
    case DecidedBy::baseline: return "baseline";
    }
    return "?";
}

inline constexpr double not_computed = std::numeric_limits<double>::quiet_NaN();

struct SelectionOutcome {
    std::size_t chosen_classifier = 0;
    int predicted_class = 0;
    DecidedBy method_used = DecidedBy::cshc;
    /// second/top support ratio of the stage whose pick was returned; 0 for
    /// vanilla CSHC, which does not vote.
    double confidence_ratio = 0.0;
    bool recourse_invoked = false;
    double rr_ratio = not_computed;
    double lp_ratio = not_computed;
};

struct SupportProfile {
    std::vector<double> support;
    std::size_t top_class = 0;
    std::size_t second_class = 0;
    double ratio = 0.0;
};

struct VoteResult {
    SupportProfile profile;
    std::size_t chosen_classifier = 0;
};

/// Weighted plurality vote. Each classifier adds its weight to the class it
/// predicts; the class with most support wins (ties toward the lower class
/// index, within `tolerance`), and among its voters the largest weight is
/// chosen with exact ties broken by a draw from `rng`.
inline VoteResult vote(std::span<const double> weights, std::span<const int> labels, std::size_t n_classes, Rng& rng,
                       double tolerance = 0.0)
{
    if (weights.size() != labels.size() || weights.empty())
        throw Error("vote: weights and labels must be non-empty and of equal length");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0)
            throw Error("vote: negative weight");
        total += w;
    }
    if (total <= 0.0)
        throw Error("vote: all weights are zero");

    VoteResult out;
    auto& p = out.profile;
    p.support.assign(n_classes, 0.0);
    for (std::size_t a = 0; a < weights.size(); ++a)
        p.support[static_cast<std::size_t>(labels[a])] += weights[a];

    std::size_t top = 0;
    for (std::size_t c = 1; c < n_classes; ++c)
        if (p.support[c] > p.support[top] + tolerance)
            top = c;
    std::size_t second = top == 0 ? 1 : 0;
    for (std::size_t c = 0; c < n_classes; ++c)
        if (c != top && p.support[c] > p.support[second])
            second = c;
    p.top_class = top;
    p.second_class = n_classes > 1 ? second : top;
    p.ratio = n_classes > 1 ? std::min(1.0, p.support[second] / p.support[top]) : 0.0;

    double best = -1.0;
    for (std::size_t a = 0; a < weights.size(); ++a)
        if (static_cast<std::size_t>(labels[a]) == top)
            best = std::max(best, weights[a]);
    std::vector<std::size_t> tied;
    for (std::size_t a = 0; a < weights.size(); ++a)
        if (static_cast<std::size_t>(labels[a]) == top && weights[a] >= best - tolerance)
            tied.push_back(a);
    out.chosen_classifier = tied.size() == 1 ? tied.front() : tied[uniform_index(rng, tied.size())];
    return out;
}

/// Everything the CSHC strategies need for one query.
struct SelectionInput {
    const LeafBundle* bundle = nullptr;
    /// Test-time label of every classifier on the query; may be empty for
    /// select_cshc when only the chosen classifier is going to run.
    std::span<const int> test_labels;
    /// Validation accuracy of each classifier (select_cshc tie-break).
    std::span<const double> validation_accuracy;
    /// Validation-time predictions and truth (LP labels).
    const CorrectnessMatrix* cm = nullptr;
    std::size_t n_classes = 0;
    /// Seed of this query's tie-break stream.
    std::uint64_t tie_seed = 0;
};

struct SelectionParams {
    double gamma = 80.0;
    double rho = 0.5;
    LpOptions lp;
};

namespace detail {

// Tie-break streams per stage, so a stage draws the same numbers whether it
// runs alone or inside the recourse chain.
inline Rng stage_rng(const SelectionInput& in, std::uint64_t stage) { return Rng(derive_seed(in.tie_seed, stage)); }

inline constexpr double lp_vote_tolerance = 1e-9;

} // namespace detail

/// Vanilla CSHC: highest cumulative rank; ties by higher validation
/// accuracy, then lower index. Only the chosen classifier has to run; if
/// test labels are supplied, the prediction is taken from them.
inline std::size_t cshc_choice(const LeafBundle& bundle, std::span<const double> validation_accuracy)
{
    const auto ranks = leaf_ranks(bundle);
    std::size_t best = 0;
    for (std::size_t a = 1; a < ranks.cumulative.size(); ++a) {
        const double ra = ranks.cumulative[a], rb = ranks.cumulative[best];
        if (ra > rb)
            best = a;
        else if (ra == rb && !validation_accuracy.empty() && validation_accuracy[a] > validation_accuracy[best])
            best = a;
    }
    return best;
}

inline SelectionOutcome select_cshc(const SelectionInput& in)
{
    SelectionOutcome out;
    out.chosen_classifier = cshc_choice(*in.bundle, in.validation_accuracy);
    out.predicted_class = in.test_labels.empty() ? -1 : in.test_labels[out.chosen_classifier];
    out.method_used = DecidedBy::cshc;
    out.confidence_ratio = 0.0;
    return out;
}

/// Rank regression: vote weighted by cumulative ranks.
inline SelectionOutcome select_rr(const SelectionInput& in)
{
    const auto ranks = leaf_ranks(*in.bundle);
    auto rng = detail::stage_rng(in, 1);
    const auto v = vote(ranks.cumulative, in.test_labels, in.n_classes, rng);
    SelectionOutcome out;
    out.chosen_classifier = v.chosen_classifier;
    out.predicted_class = in.test_labels[v.chosen_classifier];
    out.method_used = DecidedBy::rr;
    out.confidence_ratio = v.profile.ratio;
    out.rr_ratio = v.profile.ratio;
    return out;
}

/// Weights from the per-query weighting program over the bundle's multiset.
inline std::vector<double> lp_weights(const SelectionInput& in, const SelectionParams& params)
{
    if (in.bundle->n_classifiers() == 1)
        return {100.0};
    const auto inst = build_instance(*in.bundle, *in.cm, params.gamma);
    return solve(inst, params.lp).weights;
}

inline SelectionOutcome select_lp(const SelectionInput& in, const SelectionParams& params)
{
    const auto w = lp_weights(in, params);
    auto rng = detail::stage_rng(in, 2);
    const auto v = vote(w, in.test_labels, in.n_classes, rng, detail::lp_vote_tolerance);
    SelectionOutcome out;
    out.chosen_classifier = v.chosen_classifier;
    out.predicted_class = in.test_labels[v.chosen_classifier];
    out.method_used = DecidedBy::lp;
    out.confidence_ratio = v.profile.ratio;
    out.lp_ratio = v.profile.ratio;
    return out;
}

/// Confidence-gated recourse chain:
///  1. rank regression, returned if its ratio <= rho;
///  2. LP weighting, returned if its ratio <= rho;
///  3. if both predict the same class, the more confident one (lower ratio,
///     ties to LP);
///  4. else vanilla CSHC's classifier if it agrees with either;
///  5. else whichever of RR, LP, CSHC (in that order) predicts the dominant
///     true class of the bundle;
///  6. else LP's classifier.
/// Takes precomputed stage outcomes so callers that already ran the stages
/// do not pay for them twice.
inline SelectionOutcome recourse_chain(const SelectionOutcome& rr, const std::optional<SelectionOutcome>& lp_stage,
                                       const SelectionOutcome& cshc, int dominant_class, double rho)
{
    SelectionOutcome out = rr;
    out.rr_ratio = rr.rr_ratio;
    if (rr.rr_ratio <= rho) {
        out.method_used = DecidedBy::rr;
        out.recourse_invoked = false;
        return out;
    }
    const SelectionOutcome& lp = *lp_stage;
    auto finish = [&](const SelectionOutcome& pick, DecidedBy how, double ratio) {
        SelectionOutcome o;
        o.chosen_classifier = pick.chosen_classifier;
        o.predicted_class = pick.predicted_class;
        o.method_used = how;
        o.confidence_ratio = ratio;
        o.recourse_invoked = true;
        o.rr_ratio = rr.rr_ratio;
        o.lp_ratio = lp.lp_ratio;
        return o;
    };
    if (lp.lp_ratio <= rho)
        return finish(lp, DecidedBy::lp, lp.lp_ratio);
    if (rr.predicted_class == lp.predicted_class) {
        if (rr.rr_ratio < lp.lp_ratio)
            return finish(rr, DecidedBy::lpr_agree, rr.rr_ratio);
        return finish(lp, DecidedBy::lpr_agree, lp.lp_ratio);
    }
    if (cshc.predicted_class == rr.predicted_class || cshc.predicted_class == lp.predicted_class)
        return finish(cshc, DecidedBy::lpr_cshc_match, lp.lp_ratio);
    if (rr.predicted_class == dominant_class)
        return finish(rr, DecidedBy::lpr_dominant, rr.rr_ratio);
    if (lp.predicted_class == dominant_class)
        return finish(lp, DecidedBy::lpr_dominant, lp.lp_ratio);
    if (cshc.predicted_class == dominant_class)
        return finish(cshc, DecidedBy::lpr_dominant, lp.lp_ratio);
    return finish(lp, DecidedBy::lpr_fallback, lp.lp_ratio);
}

inline SelectionOutcome select_lpr(const SelectionInput& in, const SelectionParams& params)
{
    const auto rr = select_rr(in);
    std::optional<SelectionOutcome> lp;
    if (rr.rr_ratio > params.rho)
        lp = select_lp(in, params);
    return recourse_chain(rr, lp, select_cshc(in), in.bundle->dominant_true_class, params.rho);
}

} // namespace cshc

#endif
