#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace specmix::eval {

struct RocPoint {
    double threshold;   // score at or above which a sample is called positive
    double fpr;
    double tpr;
};

/// Threshold-sorted curve from (0,0) at +inf down to (1,1); tied scores
/// collapse into a single point.
std::vector<RocPoint> roc_curve(const std::vector<int>& labels, const std::vector<double>& scores);

/// Trapezoidal area under roc_curve(); identical to the Mann-Whitney
/// pairwise-concordance statistic with ties counted 1/2.
double auc(const std::vector<int>& labels, const std::vector<double>& scores);

struct ConfusionCounts {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// score >= threshold is called positive (class 1).
ConfusionCounts confusion_at(const std::vector<int>& labels, const std::vector<double>& scores,
                             double threshold);

struct PatientResult {
    std::string patient_id;
    int label = 0;
    int predicted = 0;
    std::vector<double> mean_probs;
    int n_voxels = 0;
};

/// Majority vote by mean probability vector per patient; argmax ties resolve
/// to the lower class index and are logged.
std::vector<PatientResult> patient_votes(const std::vector<std::string>& patient_ids,
                                         const std::vector<std::vector<double>>& probs,
                                         const std::map<std::string, int>& patient_labels);
double patient_accuracy(const std::vector<PatientResult>& votes);

struct EvalReport {
    int64_t n_samples = 0;
    double auc = 0.0;
    ConfusionCounts at_half;
    double sensitivity = 0.0;    // at threshold 0.5
    double specificity = 0.0;
    double accuracy = 0.0;
    double youden_threshold = 0.0;
    double youden_sensitivity = 0.0;
    double youden_specificity = 0.0;
    int64_t n_patients = 0;      // 0 when no patient map was given
    double patient_acc = 0.0;
};

EvalReport evaluate(const std::vector<int>& labels, const std::vector<double>& scores);
EvalReport evaluate(const std::vector<int>& labels, const std::vector<double>& scores,
                    const std::vector<std::string>& patient_ids,
                    const std::map<std::string, int>& patient_labels,
                    const std::vector<std::vector<double>>& probs);

/// Mean and sample (n-1) standard deviation of each metric across folds.
struct CvSummary {
    int n_folds = 0;
    double mean_auc = 0.0, std_auc = 0.0;
    double mean_sensitivity = 0.0, std_sensitivity = 0.0;
    double mean_specificity = 0.0, std_specificity = 0.0;
    double mean_accuracy = 0.0, std_accuracy = 0.0;
    double mean_patient_acc = 0.0, std_patient_acc = 0.0;
};

CvSummary summarize(const std::vector<EvalReport>& folds);

} // namespace specmix::eval
