#include "mlet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mlet/errors.hpp"

namespace mlet {

namespace {

void check_lengths(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("metrics: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    }
    if (scores.empty()) {
        throw ValueError("metrics: empty input");
    }
}

// Indices sorted ascending by score; stable, so ties keep input order.
std::vector<std::size_t> sorted_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    return order;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_lengths(scores, labels);
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (auto y : labels) {
        n_pos += y ? 1 : 0;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw ValueError("roc_auc needs at least one positive and one negative");
    }

    const auto order = sorted_order(scores);
    // Midranks: every member of a tie group gets the average 1-based rank.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) {
            if (labels[order[t]]) {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    const double u = rank_sum_pos -
                     0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double pr_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_lengths(scores, labels);
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (auto y : labels) {
        n_pos += y ? 1 : 0;
    }
    if (n_pos == 0) {
        throw ValueError("pr_auc needs at least one positive");
    }

    auto order = sorted_order(scores);
    std::reverse(order.begin(), order.end());  // descending score

    double ap = 0.0;
    double recall_prev = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        for (std::size_t t = i; t <= j; ++t) {
            ++seen;
            if (labels[order[t]]) {
                ++tp;
            }
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j + 1;
    }
    return ap;
}

double logloss(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_lengths(scores, labels);
    constexpr double kClamp = 1e-15;
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double p = std::clamp(scores[i], kClamp, 1.0 - kClamp);
        sum += labels[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return sum / static_cast<double>(scores.size());
}

EvalResult evaluate_scores(std::span<const double> scores,
                           std::span<const std::uint8_t> labels) {
    EvalResult r;
    r.auc = roc_auc(scores, labels);
    r.pr_auc = pr_auc(scores, labels);
    r.logloss = logloss(scores, labels);
    for (auto y : labels) {
        if (y) {
            ++r.n_pos;
        } else {
            ++r.n_neg;
        }
    }
    return r;
}

}  // namespace mlet
