// Independent reference implementations used as oracles by the test
// suites. Everything here is deliberately naive and kept clear of the
// library's own code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "mlet/matrix.hpp"

namespace oracle {

// Plain triple loop, i-j-k with a local accumulator.
inline mlet::Matrix naive_matmul(const mlet::Matrix& a, const mlet::Matrix& b) {
    mlet::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double sum = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                sum += a(i, k) * b(k, j);
            }
            c(i, j) = sum;
        }
    }
    return c;
}

// Classical two-sided Jacobi eigensolver for symmetric matrices.
// Returns eigenvalues sorted descending. Used to cross-check singular
// values via eig(A A^T) = sigma^2.
inline std::vector<double> symmetric_eigenvalues(mlet::Matrix a) {
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                off += a(p, q) * a(p, q);
            }
        }
        if (off < 1e-30) {
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) {
                    continue;
                }
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < n; ++r) {
                    const double arp = a(r, p);
                    const double arq = a(r, q);
                    a(r, p) = c * arp - s * arq;
                    a(r, q) = s * arp + c * arq;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    const double apr = a(p, r);
                    const double aqr = a(q, r);
                    a(p, r) = c * apr - s * aqr;
                    a(q, r) = s * apr + c * aqr;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) {
        eig[i] = a(i, i);
    }
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

// AUC by exhaustive positive/negative pair comparison, ties count half.
inline double pairwise_auc(const std::vector<double>& scores,
                           const std::vector<std::uint8_t>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) {
            continue;
        }
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) {
                continue;
            }
            ++pairs;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / static_cast<double>(pairs);
}

// Average precision by an exhaustive threshold sweep: one threshold per
// distinct score, tp/fp recounted from scratch at each.
inline double threshold_sweep_ap(const std::vector<double>& scores,
                                 const std::vector<std::uint8_t>& labels) {
    std::set<double, std::greater<double>> thresholds(scores.begin(), scores.end());
    std::size_t n_pos = 0;
    for (auto y : labels) {
        n_pos += y ? 1 : 0;
    }
    double ap = 0.0;
    double recall_prev = 0.0;
    for (double th : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= th) {
                if (labels[i]) {
                    ++tp;
                } else {
                    ++fp;
                }
            }
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double precision =
            static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
    }
    return ap;
}

inline double naive_logloss(const std::vector<double>& scores,
                            const std::vector<std::uint8_t>& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        double p = scores[i];
        if (p < 1e-15) {
            p = 1e-15;
        }
        if (p > 1.0 - 1e-15) {
            p = 1.0 - 1e-15;
        }
        total += labels[i] ? -std::log(p) : -std::log(1.0 - p);
    }
    return total / static_cast<double>(scores.size());
}

}  // namespace oracle
