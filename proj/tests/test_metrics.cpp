#include <doctest.h>

#include <cmath>
#include <vector>

#include "mlet/errors.hpp"
#include "mlet/metrics.hpp"
#include "mlet/rng.hpp"
#include "oracles.hpp"

using namespace mlet;

TEST_CASE("roc_auc on perfectly separated scores") {
    const std::vector<double> scores{0.9, 0.8, 0.2, 0.1};
    const std::vector<std::uint8_t> labels{1, 1, 0, 0};
    CHECK(roc_auc(scores, labels) == 1.0);
}

TEST_CASE("roc_auc with all-equal scores is 0.5 via midranks") {
    const std::vector<double> scores{0.4, 0.4, 0.4, 0.4, 0.4};
    const std::vector<std::uint8_t> labels{1, 0, 1, 0, 0};
    CHECK(roc_auc(scores, labels) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("roc_auc matches the pairwise oracle on 200 random samples") {
    Rng rng(211);
    std::vector<double> scores(200);
    std::vector<std::uint8_t> labels(200);
    for (std::size_t i = 0; i < 200; ++i) {
        // Coarse grid forces plenty of ties.
        scores[i] = std::floor(rng.uniform() * 20.0) / 20.0;
        labels[i] = rng.uniform() < 0.3 ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    CHECK(std::abs(roc_auc(scores, labels) - oracle::pairwise_auc(scores, labels)) <=
          1e-12);
}

TEST_CASE("roc_auc rejects single-class input instead of returning NaN") {
    const std::vector<double> scores{0.1, 0.2};
    CHECK_THROWS_AS(roc_auc(scores, std::vector<std::uint8_t>{1, 1}), ValueError);
    CHECK_THROWS_AS(roc_auc(scores, std::vector<std::uint8_t>{0, 0}), ValueError);
}

TEST_CASE("roc_auc is invariant under strictly monotone transforms") {
    Rng rng(223);
    std::vector<double> scores(80);
    std::vector<std::uint8_t> labels(80);
    for (std::size_t i = 0; i < 80; ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    const double base = roc_auc(scores, labels);
    std::vector<double> exp_scores(80), affine(80);
    for (std::size_t i = 0; i < 80; ++i) {
        exp_scores[i] = std::exp(scores[i]);
        affine[i] = 3.0 * scores[i] - 11.0;
    }
    CHECK(roc_auc(exp_scores, labels) == doctest::Approx(base).epsilon(1e-14));
    CHECK(roc_auc(affine, labels) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("pr_auc is 1 when all positives rank first") {
    const std::vector<double> scores{0.9, 0.8, 0.7, 0.3, 0.2};
    const std::vector<std::uint8_t> labels{1, 1, 1, 0, 0};
    CHECK(pr_auc(scores, labels) == 1.0);
}

TEST_CASE("pr_auc of random scores approaches prevalence") {
    Rng rng(227);
    const std::size_t n = 100000;
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.uniform() < 0.25 ? 1 : 0;
    }
    CHECK(std::abs(pr_auc(scores, labels) - 0.25) <= 0.02);
}

TEST_CASE("pr_auc matches the threshold-sweep oracle on 50 samples") {
    Rng rng(229);
    std::vector<double> scores(50);
    std::vector<std::uint8_t> labels(50);
    for (std::size_t i = 0; i < 50; ++i) {
        scores[i] = std::floor(rng.uniform() * 8.0) / 8.0;  // ties likely
        labels[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    labels[0] = 1;
    CHECK(std::abs(pr_auc(scores, labels) - oracle::threshold_sweep_ap(scores, labels)) <=
          1e-12);
}

TEST_CASE("pr_auc needs at least one positive") {
    const std::vector<double> scores{0.1, 0.9};
    CHECK_THROWS_AS(pr_auc(scores, std::vector<std::uint8_t>{0, 0}), ValueError);
}

TEST_CASE("pr_auc weakly increases when a positive overtakes a negative") {
    const std::vector<std::uint8_t> labels{0, 1, 0, 1};
    std::vector<double> scores{0.9, 0.8, 0.5, 0.4};
    const double before = pr_auc(scores, labels);
    scores[1] = 0.95;  // the positive moves above the top negative
    const double after = pr_auc(scores, labels);
    CHECK(after >= before);
}

TEST_CASE("logloss of p=0.5 everywhere is ln 2") {
    const std::vector<double> scores{0.5, 0.5, 0.5};
    const std::vector<std::uint8_t> labels{1, 0, 1};
    CHECK(logloss(scores, labels) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("logloss of exact predictions hits the clamp floor") {
    const std::vector<double> scores{1.0, 0.0};
    const std::vector<std::uint8_t> labels{1, 0};
    CHECK(logloss(scores, labels) == doctest::Approx(-std::log(1.0 - 1e-15)));
}

TEST_CASE("logloss matches the naive per-sample loop") {
    Rng rng(233);
    std::vector<double> scores(500);
    std::vector<std::uint8_t> labels(500);
    for (std::size_t i = 0; i < 500; ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    CHECK(std::abs(logloss(scores, labels) - oracle::naive_logloss(scores, labels)) <=
          1e-12);
}

TEST_CASE("metrics are order-independent") {
    Rng rng(239);
    std::vector<double> scores(60);
    std::vector<std::uint8_t> labels(60);
    for (std::size_t i = 0; i < 60; ++i) {
        scores[i] = std::floor(rng.uniform() * 10.0) / 10.0;
        labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    const EvalResult forward = evaluate_scores(scores, labels);
    std::vector<double> rev_scores(scores.rbegin(), scores.rend());
    std::vector<std::uint8_t> rev_labels(labels.rbegin(), labels.rend());
    const EvalResult backward = evaluate_scores(rev_scores, rev_labels);
    CHECK(forward.auc == doctest::Approx(backward.auc).epsilon(1e-15));
    CHECK(forward.pr_auc == doctest::Approx(backward.pr_auc).epsilon(1e-15));
    CHECK(forward.logloss == doctest::Approx(backward.logloss).epsilon(1e-15));
    CHECK(forward.n_pos == backward.n_pos);
}

TEST_CASE("evaluate_scores counts classes") {
    const std::vector<double> scores{0.2, 0.9, 0.4};
    const std::vector<std::uint8_t> labels{0, 1, 1};
    const EvalResult r = evaluate_scores(scores, labels);
    CHECK(r.n_pos == 2);
    CHECK(r.n_neg == 1);
}
