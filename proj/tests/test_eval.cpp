#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "specmix/eval.hpp"
#include "specmix/rng.hpp"

using namespace specmix;
using namespace specmix::eval;

namespace {

// independent oracle: Mann-Whitney pairwise concordance with half-credit ties
double concordance(const std::vector<int>& labels, const std::vector<double>& scores) {
    double num = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < labels.size(); ++i)
        for (size_t j = 0; j < labels.size(); ++j)
            if (labels[i] == 1 && labels[j] == 0) {
                ++pairs;
                if (scores[i] > scores[j])
                    num += 1.0;
                else if (scores[i] == scores[j])
                    num += 0.5;
            }
    return num / static_cast<double>(pairs);
}

} // namespace

TEST_CASE("perfect separation passes through (0,1) with AUC 1") {
    std::vector<int> labels{1, 1, 0, 0};
    std::vector<double> scores{0.9, 0.8, 0.4, 0.2};
    auto curve = roc_curve(labels, scores);
    bool hits_corner = false;
    for (const auto& p : curve) hits_corner |= (p.fpr == 0.0 && p.tpr == 1.0);
    CHECK(hits_corner);
    CHECK(auc(labels, scores) == doctest::Approx(1.0));
}

TEST_CASE("all-equal scores collapse to the diagonal") {
    std::vector<int> labels{1, 0, 1, 0};
    std::vector<double> scores{0.5, 0.5, 0.5, 0.5};
    auto curve = roc_curve(labels, scores);
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].fpr == 0.0);
    CHECK(curve[0].tpr == 0.0);
    CHECK(curve[1].fpr == 1.0);
    CHECK(curve[1].tpr == 1.0);
    CHECK(auc(labels, scores) == doctest::Approx(0.5));
}

TEST_CASE("the interleaved staircase has AUC 0.75") {
    std::vector<int> labels{0, 1, 0, 1};
    std::vector<double> scores{0.1, 0.2, 0.3, 0.4};
    CHECK(auc(labels, scores) == doctest::Approx(0.75));
    CHECK(concordance(labels, scores) == doctest::Approx(0.75));
}

TEST_CASE("trapezoidal AUC equals pairwise concordance, ties included") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<int> labels;
        std::vector<double> scores;
        for (int i = 0; i < 200; ++i) {
            labels.push_back(rng.uniform() < 0.4 ? 1 : 0);
            // quantized scores force plenty of exact ties
            scores.push_back(std::floor(rng.uniform() * 12.0) / 12.0);
        }
        if (labels.front() != 1) labels.front() = 1;
        if (labels.back() != 0) labels.back() = 0;
        CHECK(auc(labels, scores) == doctest::Approx(concordance(labels, scores)).epsilon(1e-12));
    }
}

TEST_CASE("AUC is invariant under monotone score transforms") {
    Rng rng(43);
    std::vector<int> labels;
    std::vector<double> scores, cubed;
    for (int i = 0; i < 100; ++i) {
        labels.push_back(i % 3 == 0 ? 1 : 0);
        const double s = rng.uniform();
        scores.push_back(s);
        cubed.push_back(s * s * s);
    }
    CHECK(auc(labels, scores) == doctest::Approx(auc(labels, cubed)).epsilon(1e-12));
}

TEST_CASE("single-class sets are rejected") {
    CHECK_THROWS_AS(auc({1, 1}, {0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(auc({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(auc({0, 2}, {0.5, 0.6}), std::invalid_argument);
}

TEST_CASE("confusion counts at extreme thresholds") {
    std::vector<int> labels{1, 1, 0, 0};
    std::vector<double> scores{0.9, 0.6, 0.4, 0.1};
    ConfusionCounts hi = confusion_at(labels, scores, 2.0);
    CHECK(hi.tp == 0);
    CHECK(hi.tn == 2);
    ConfusionCounts lo = confusion_at(labels, scores, 0.05);
    CHECK(lo.tp == 2);
    CHECK(lo.tn == 0);
    ConfusionCounts mid = confusion_at({1, 0}, {0.9, 0.2}, 0.5);
    CHECK(mid.tp == 1);
    CHECK(mid.tn == 1);
    CHECK(mid.fp == 0);
    CHECK(mid.fn == 0);
}

TEST_CASE("threshold is inclusive at the boundary") {
    ConfusionCounts c = confusion_at({1, 0}, {0.5, 0.5}, 0.5);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
}

TEST_CASE("patient vote averages probabilities, not votes") {
    std::vector<std::string> ids{"p1", "p1", "p1"};
    std::vector<std::vector<double>> probs{{0.1, 0.9}, {0.8, 0.2}, {0.8, 0.2}};
    // tumor-probs mean = 0.433 -> class 0 even though 1/3 majority-vote differs
    auto votes = patient_votes(ids, probs, {{"p1", 0}});
    REQUIRE(votes.size() == 1);
    CHECK(votes[0].predicted == 0);
    CHECK(votes[0].mean_probs[1] == doctest::Approx(0.43333333));
    CHECK(patient_accuracy(votes) == doctest::Approx(1.0));
}

TEST_CASE("one correct and one wrong patient score one half") {
    std::vector<std::string> ids{"a", "a", "b"};
    std::vector<std::vector<double>> probs{{0.4, 0.6}, {0.2, 0.8}, {0.3, 0.7}};
    auto votes = patient_votes(ids, probs, {{"a", 1}, {"b", 0}});
    CHECK(patient_accuracy(votes) == doctest::Approx(0.5));
}

TEST_CASE("full report on a small set") {
    std::vector<int> labels{1, 1, 0, 0};
    std::vector<double> scores{0.9, 0.6, 0.4, 0.1};
    EvalReport r = evaluate(labels, scores);
    CHECK(r.auc == doctest::Approx(1.0));
    CHECK(r.sensitivity == doctest::Approx(1.0));
    CHECK(r.specificity == doctest::Approx(1.0));
    CHECK(r.accuracy == doctest::Approx(1.0));
    CHECK(r.youden_sensitivity == doctest::Approx(1.0));
    CHECK(r.youden_specificity == doctest::Approx(1.0));
    CHECK(r.youden_threshold == doctest::Approx(0.6));
    CHECK(r.n_patients == 0);
}

TEST_CASE("cross-validation summary statistics") {
    EvalReport a, b;
    a.auc = 0.6;
    b.auc = 0.8;
    a.sensitivity = b.sensitivity = 0.7;
    CvSummary one = summarize({a});
    CHECK(one.mean_auc == doctest::Approx(0.6));
    CHECK(one.std_auc == 0.0);
    CvSummary two = summarize({a, b});
    CHECK(two.mean_auc == doctest::Approx(0.7));
    CHECK(two.std_auc == doctest::Approx(std::sqrt(0.02)));
    CHECK(two.std_sensitivity == doctest::Approx(0.0));
    CvSummary same = summarize({a, a, a});
    CHECK(same.std_auc == doctest::Approx(0.0));
    CHECK_THROWS_AS(summarize({}), std::invalid_argument);
}
