#pragma once

#include <cstdint>
#include <span>

namespace mlet {

struct EvalResult {
    double auc = 0.0;
    double pr_auc = 0.0;
    double logloss = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

/// Rank-based (Mann-Whitney) ROC-AUC with midrank handling of ties.
/// Throws ValueError when either class is absent.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Average precision: sum over distinct-score groups of precision at the
/// group boundary weighted by the recall increment. Throws ValueError
/// when there are no positives.
double pr_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Mean binary cross-entropy; probabilities clamped to
/// [1e-15, 1 - 1e-15] first.
double logloss(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// All three metrics plus class counts in one pass.
EvalResult evaluate_scores(std::span<const double> scores,
                           std::span<const std::uint8_t> labels);

}  // namespace mlet
