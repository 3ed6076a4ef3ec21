#include "dmap/eval.hpp"

#include "dmap/diagnostics.hpp"
#include "dmap/error.hpp"

#include <unordered_map>
#include <unordered_set>

namespace dmap {

EvalReport evaluate(const Prediction& prediction, std::span<const ClassId> ground_truth, RecognitionMode mode,
                    std::span<const int> ks) {
    const auto n = static_cast<Index>(prediction.predicted.size());
    if (static_cast<Index>(ground_truth.size()) != n || prediction.scores.cols() != n) {
        throw MissingInstance("prediction covers " + std::to_string(n) + " instances, ground truth has " +
                              std::to_string(ground_truth.size()));
    }
    if (prediction.scores.rows() != static_cast<Index>(prediction.candidates.size())) {
        throw DimensionMismatch("score table rows do not match the candidate list");
    }
    for (const int k : ks) {
        if (k < 1) throw InvalidArgument("top-k values must be at least 1");
    }

    std::unordered_map<std::string, Index> where;
    for (std::size_t c = 0; c < prediction.candidates.size(); ++c) {
        where.emplace(prediction.candidates[c], static_cast<Index>(c));
    }
    const std::unordered_set<std::string> unseen(prediction.unseen_classes.begin(), prediction.unseen_classes.end());

    std::vector<Index> truth(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) {
        const auto& t = ground_truth[static_cast<std::size_t>(j)];
        const auto it = where.find(t);
        if (it == where.end() || (mode == RecognitionMode::czsr && !unseen.count(t))) {
            throw UnknownClass("true class '" + t + "' is not among the " + to_string(mode) + " candidates");
        }
        truth[static_cast<std::size_t>(j)] = it->second;
    }

    EvalReport report;
    report.mode = mode;
    report.instances = n;
    report.confusion_classes = prediction.candidates;
    const auto c = static_cast<Index>(prediction.candidates.size());
    report.confusion = CountMatrix::Zero(c, c);

    std::vector<long long> top_hits(ks.size(), 0);
    for (Index j = 0; j < n; ++j) {
        const Index t = truth[static_cast<std::size_t>(j)];
        const Index p = where.at(prediction.predicted[static_cast<std::size_t>(j)]);
        ++report.confusion(t, p);

        // rank of the true class; equal scores at a lower index rank ahead
        const double s = prediction.scores(t, j);
        Index rank = 0;
        for (Index r = 0; r < c; ++r) {
            const double v = prediction.scores(r, j);
            if (v > s || (v == s && r < t)) ++rank;
        }
        for (std::size_t q = 0; q < ks.size(); ++q) {
            if (rank < ks[q]) ++top_hits[q];
        }
    }

    long long diagonal = 0;
    for (Index r = 0; r < c; ++r) diagonal += report.confusion(r, r);
    report.top1 = n == 0 ? 0.0 : static_cast<double>(diagonal) / static_cast<double>(n);
    for (std::size_t q = 0; q < ks.size(); ++q) {
        report.top_k_accuracy[ks[q]] = n == 0 ? 0.0 : static_cast<double>(top_hits[q]) / static_cast<double>(n);
    }

    double sum = 0.0;
    for (Index r = 0; r < c; ++r) {
        const auto& id = prediction.candidates[static_cast<std::size_t>(r)];
        const long long total = report.confusion.row(r).sum();
        if (total == 0 || !unseen.count(id)) continue;
        report.per_class.push_back({id, report.confusion(r, r), total});
        sum += report.per_class.back().accuracy();
    }
    if (report.per_class.empty()) {
        warn("no ground-truth unseen classes; mean per-class accuracy set to 0");
    } else {
        report.mean_per_class_accuracy = sum / static_cast<double>(report.per_class.size());
    }
    return report;
}

}  // namespace dmap
