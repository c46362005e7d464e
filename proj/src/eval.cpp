#include "specmix/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "specmix/common.hpp"

namespace specmix::eval {

namespace {

void check_scored(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size())
        throw std::invalid_argument("labels and scores differ in length");
    if (labels.empty()) throw std::invalid_argument("cannot evaluate an empty set");
    for (int y : labels)
        if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");
}

std::pair<int64_t, int64_t> class_counts(const std::vector<int>& labels) {
    int64_t pos = 0;
    for (int y : labels) pos += y;
    return {static_cast<int64_t>(labels.size()) - pos, pos};
}

} // namespace

std::vector<RocPoint> roc_curve(const std::vector<int>& labels, const std::vector<double>& scores) {
    check_scored(labels, scores);
    const auto [neg, pos] = class_counts(labels);
    if (neg == 0 || pos == 0)
        throw std::invalid_argument("ROC undefined: only one class present");

    std::vector<size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> points;
    points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1)
                ++tp;
            else
                ++fp;
            ++i;
        }
        points.push_back({s, static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
    }
    return points;
}

double auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    const auto points = roc_curve(labels, scores);
    double area = 0.0;
    for (size_t i = 1; i < points.size(); ++i)
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    return area;
}

ConfusionCounts confusion_at(const std::vector<int>& labels, const std::vector<double>& scores,
                             double threshold) {
    check_scored(labels, scores);
    ConfusionCounts c;
    for (size_t i = 0; i < labels.size(); ++i) {
        const bool called = scores[i] >= threshold;
        if (labels[i] == 1)
            called ? ++c.tp : ++c.fn;
        else
            called ? ++c.fp : ++c.tn;
    }
    return c;
}

std::vector<PatientResult> patient_votes(const std::vector<std::string>& patient_ids,
                                         const std::vector<std::vector<double>>& probs,
                                         const std::map<std::string, int>& patient_labels) {
    if (patient_ids.size() != probs.size())
        throw std::invalid_argument("patient ids and probabilities differ in length");
    if (patient_ids.empty()) throw std::invalid_argument("cannot vote over an empty set");

    std::map<std::string, PatientResult> acc;
    for (size_t i = 0; i < patient_ids.size(); ++i) {
        auto& r = acc[patient_ids[i]];
        if (r.n_voxels == 0) {
            r.patient_id = patient_ids[i];
            r.mean_probs.assign(probs[i].size(), 0.0);
        }
        if (probs[i].size() != r.mean_probs.size())
            throw std::invalid_argument("inconsistent probability vector length");
        for (size_t c = 0; c < probs[i].size(); ++c) r.mean_probs[c] += probs[i][c];
        ++r.n_voxels;
    }
    std::vector<PatientResult> votes;
    votes.reserve(acc.size());
    for (auto& [id, r] : acc) {
        for (double& p : r.mean_probs) p /= r.n_voxels;
        size_t best = 0;
        bool tied = false;
        for (size_t c = 1; c < r.mean_probs.size(); ++c) {
            if (r.mean_probs[c] > r.mean_probs[best]) {
                best = c;
                tied = false;
            } else if (r.mean_probs[c] == r.mean_probs[best]) {
                tied = true;
            }
        }
        if (tied) log_warn("tied mean probabilities for patient " + id + "; voting class " +
                           std::to_string(best));
        r.predicted = static_cast<int>(best);
        auto it = patient_labels.find(id);
        if (it == patient_labels.end())
            throw std::invalid_argument("no label for patient " + id);
        r.label = it->second;
        votes.push_back(std::move(r));
    }
    return votes;
}

double patient_accuracy(const std::vector<PatientResult>& votes) {
    if (votes.empty()) throw std::invalid_argument("no patients to score");
    int64_t correct = 0;
    for (const auto& v : votes) correct += v.predicted == v.label;
    return static_cast<double>(correct) / static_cast<double>(votes.size());
}

EvalReport evaluate(const std::vector<int>& labels, const std::vector<double>& scores) {
    check_scored(labels, scores);
    EvalReport r;
    r.n_samples = static_cast<int64_t>(labels.size());
    const auto points = roc_curve(labels, scores);   // also rejects single-class sets
    double area = 0.0;
    for (size_t i = 1; i < points.size(); ++i)
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    r.auc = area;

    r.at_half = confusion_at(labels, scores, 0.5);
    r.sensitivity = static_cast<double>(r.at_half.tp) / static_cast<double>(r.at_half.tp + r.at_half.fn);
    r.specificity = static_cast<double>(r.at_half.tn) / static_cast<double>(r.at_half.tn + r.at_half.fp);
    r.accuracy = static_cast<double>(r.at_half.tp + r.at_half.tn) / static_cast<double>(r.n_samples);

    // Youden's J over the curve; ties keep the higher threshold
    size_t best = 0;
    for (size_t i = 1; i < points.size(); ++i)
        if (points[i].tpr - points[i].fpr > points[best].tpr - points[best].fpr) best = i;
    r.youden_threshold = points[best].threshold;
    r.youden_sensitivity = points[best].tpr;
    r.youden_specificity = 1.0 - points[best].fpr;
    return r;
}

EvalReport evaluate(const std::vector<int>& labels, const std::vector<double>& scores,
                    const std::vector<std::string>& patient_ids,
                    const std::map<std::string, int>& patient_labels,
                    const std::vector<std::vector<double>>& probs) {
    EvalReport r = evaluate(labels, scores);
    const auto votes = patient_votes(patient_ids, probs, patient_labels);
    r.n_patients = static_cast<int64_t>(votes.size());
    r.patient_acc = patient_accuracy(votes);
    return r;
}

CvSummary summarize(const std::vector<EvalReport>& folds) {
    if (folds.empty()) throw std::invalid_argument("no folds to summarize");
    CvSummary s;
    s.n_folds = static_cast<int>(folds.size());
    auto stats = [&](auto get, double& mean, double& sd) {
        double m = 0.0;
        for (const auto& f : folds) m += get(f);
        m /= folds.size();
        double acc = 0.0;
        for (const auto& f : folds) {
            const double d = get(f) - m;
            acc += d * d;
        }
        mean = m;
        sd = folds.size() > 1 ? std::sqrt(acc / (folds.size() - 1)) : 0.0;
    };
    stats([](const EvalReport& f) { return f.auc; }, s.mean_auc, s.std_auc);
    stats([](const EvalReport& f) { return f.sensitivity; }, s.mean_sensitivity, s.std_sensitivity);
    stats([](const EvalReport& f) { return f.specificity; }, s.mean_specificity, s.std_specificity);
    stats([](const EvalReport& f) { return f.accuracy; }, s.mean_accuracy, s.std_accuracy);
    stats([](const EvalReport& f) { return f.patient_acc; }, s.mean_patient_acc, s.std_patient_acc);
    return s;
}

} // namespace specmix::eval
