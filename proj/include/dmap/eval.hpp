#pragma once

#include "dmap/model.hpp"

#include <map>
#include <span>
#include <vector>

namespace dmap {

using CountMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

struct ClassAccuracy {
    ClassId class_id;
    long long correct = 0;
    long long total = 0;
    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct EvalReport {
    RecognitionMode mode = RecognitionMode::czsr;
    /// Ground-truth unseen classes in candidate order.
    std::vector<ClassAccuracy> per_class;
    /// Unweighted mean of per_class accuracies (the headline number).
    double mean_per_class_accuracy = 0.0;
    /// Instance-weighted top-1.
    double top1 = 0.0;
    std::map<int, double> top_k_accuracy;
    ClassList confusion_classes;  // rows (truth) and columns (prediction)
    CountMatrix confusion;
    long long instances = 0;
};

/// `ground_truth[j]` is the true class of prediction instance j.
/// Throws MissingInstance when the lengths differ and UnknownClass when a true
/// class is not an admissible candidate for `mode`.
EvalReport evaluate(const Prediction& prediction, std::span<const ClassId> ground_truth, RecognitionMode mode,
                    std::span<const int> ks);

}  // namespace dmap
