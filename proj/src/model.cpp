#include "dmap/model.hpp"

#include "dmap/diagnostics.hpp"
#include "dmap/error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <utility>

namespace dmap {
namespace {

double squared_distance(const Vector& a, const Matrix& points, Index col) {
    double sum = 0.0;
    for (Index r = 0; r < a.size(); ++r) {
        const double diff = points(r, col) - a(r);
        sum += diff * diff;
    }
    return sum;
}

Vector knn_average(const Vector& anchor, const Matrix& predictions, const Matrix& features, Index m) {
    const Index n = predictions.cols();
    std::vector<std::pair<double, Index>> order(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) {
        order[static_cast<std::size_t>(j)] = {squared_distance(anchor, predictions, j), j};
    }
    const Index take = std::min(m, n);
    std::partial_sort(order.begin(), order.begin() + take, order.end());
    // Sum in instance order so the mean depends only on the neighbor set.
    std::vector<Index> chosen(static_cast<std::size_t>(take));
    for (Index t = 0; t < take; ++t) chosen[static_cast<std::size_t>(t)] = order[static_cast<std::size_t>(t)].second;
    std::sort(chosen.begin(), chosen.end());
    Vector sum = Vector::Zero(features.rows());
    for (const Index j : chosen) sum += features.col(j);
    return sum / static_cast<double>(take);
}

void check_knn_inputs(Index anchor_dim, const Matrix& predictions, const Matrix& features, Index m) {
    if (m < 1) {
        throw InvalidArgument("neighbor count m must be at least 1");
    }
    if (predictions.cols() != features.cols()) {
        throw DimensionMismatch("predictions cover " + std::to_string(predictions.cols()) + " instances, features " +
                                std::to_string(features.cols()));
    }
    if (predictions.cols() == 0) {
        throw InvalidArgument("no instances to search");
    }
    if (anchor_dim != predictions.rows()) {
        throw DimensionMismatch("anchor has dimension " + std::to_string(anchor_dim) + ", predictions " +
                                std::to_string(predictions.rows()));
    }
}

void warn_if_clamped(Index m, Index n, const char* where) {
    if (m > n) {
        warn(std::string(where) + ": m = " + std::to_string(m) + " exceeds the " + std::to_string(n) +
             " available instances; using " + std::to_string(n));
    }
}

/// Column i = knn_average(anchors.col(i), ...), computed per class in parallel.
Matrix knn_prototypes(const Matrix& anchors, const Matrix& predictions, const Matrix& features, Index m,
                      unsigned threads) {
    check_knn_inputs(anchors.rows(), predictions, features, m);
    Matrix out(features.rows(), anchors.cols());
    detail::parallel_for(static_cast<std::size_t>(anchors.cols()), threads, [&](std::size_t i) {
        const auto c = static_cast<Index>(i);
        out.col(c) = knn_average(anchors.col(c), predictions, features, m);
    });
    return out;
}

Matrix prepare_embeddings(const DmapConfig& config, const Matrix& embeddings) {
    return config.normalize ? normalize_columns(embeddings) : embeddings;
}

Prediction make_prediction(const FeatureMatrix& test, ClassList candidates, ClassList unseen, Matrix scores,
                           RecognitionMode mode) {
    Prediction p;
    p.instance_ids = test.instance_ids();
    const auto best = argmax_columns(scores);
    p.predicted.reserve(best.size());
    for (const Index b : best) {
        p.predicted.push_back(candidates[static_cast<std::size_t>(b)]);
    }
    p.candidates = std::move(candidates);
    p.unseen_classes = std::move(unseen);
    p.scores = std::move(scores);
    p.mode = mode;
    return p;
}

}  // namespace

void DmapConfig::validate() const {
    if (m < 1) throw InvalidArgument("m must be at least 1");
    if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be nonnegative");
    if (!(gamma >= 0.0) || !(eta >= 0.0)) throw InvalidArgument("gamma and eta must be nonnegative");
    if (train_max_iter < 0 || test_max_iter < 0) throw InvalidArgument("iteration caps must be nonnegative");
    if (!(convergence_tol > 0.0)) throw InvalidArgument("convergence_tol must be positive");
}

Vector knn_prototype(const Vector& anchor, const Matrix& predictions, const Matrix& features, Index m) {
    check_knn_inputs(anchor.size(), predictions, features, m);
    warn_if_clamped(m, predictions.cols(), "knn_prototype");
    return knn_average(anchor, predictions, features, m);
}

double relative_change(const Matrix& prev, const Matrix& next) {
    const double base = prev.norm();
    return (next - prev).norm() / std::max(base, std::numeric_limits<double>::min());
}

std::vector<Index> argmax_columns(const Matrix& scores) {
    std::vector<Index> out(static_cast<std::size_t>(scores.cols()), 0);
    for (Index j = 0; j < scores.cols(); ++j) {
        Index best = 0;
        for (Index c = 1; c < scores.rows(); ++c) {
            if (scores(c, j) > scores(best, j)) best = c;
        }
        out[static_cast<std::size_t>(j)] = best;
    }
    return out;
}

Matrix prepare_features(const DmapModel& model, const Matrix& features) {
    Matrix x = model.config.normalize ? normalize_columns(features) : features;
    if (model.feature_mean) {
        if (model.feature_mean->size() != x.rows()) {
            throw DimensionMismatch("feature mean has dimension " + std::to_string(model.feature_mean->size()) +
                                    ", features " + std::to_string(x.rows()));
        }
        x.colwise() -= *model.feature_mean;
    }
    return x;
}

DmapModel train(const LabeledDataset& dataset, const DmapConfig& config) {
    config.validate();
    if (dataset.labels().empty()) {
        throw EmptyTrainingSet("training set has no instances");
    }
    const ClassList& seen = dataset.split().seen();

    Matrix x = config.normalize ? normalize_columns(dataset.features().data()) : dataset.features().data();
    std::optional<Vector> feature_mean;
    if (config.center) {
        feature_mean = x.rowwise().mean();
        x.colwise() -= *feature_mean;
    }
    const Matrix k_seen = prepare_embeddings(config, dataset.semantic().select(seen).data());
    const LabelMatrix y = build_label_matrix(dataset.labels(), seen);
    warn_if_clamped(config.m, x.cols(), "train");

    // Step 1: map into the given embedding space.
    MapMatrix f_s = solve_ridge_map(x, k_seen, y, config.gamma, config.eta);

    // Step 2: seen prototypes from neighbors of each embedding among f_s(X).
    const Matrix predictions = predict_semantic(f_s, x);
    Matrix k_tilde = knn_prototypes(k_seen, predictions, x, config.m, config.threads);
    DmapModel model{std::move(f_s),
                    solve_ridge_map(x, k_tilde, y, config.gamma, config.eta),
                    PrototypeSet(k_tilde, seen, PrototypeSource::knn_average),
                    0,
                    {},
                    config,
                    std::move(feature_mean)};

    // Step 3: alternate prototype refinement and relearning f_tilde.
    for (int it = 1; it <= config.train_max_iter; ++it) {
        const Matrix p_tilde = predict_semantic(model.f_tilde, x);
        Matrix next = knn_prototypes(k_tilde, p_tilde, x, config.m, config.threads);
        const double change = relative_change(k_tilde, next);
        k_tilde = std::move(next);
        model.f_tilde = solve_ridge_map(x, k_tilde, y, config.gamma, config.eta);
        model.train_iterations_run = it;
        model.train_changes.push_back(change);
        if (change < config.convergence_tol) break;
    }
    model.k_tilde_s = PrototypeSet(std::move(k_tilde), seen, PrototypeSource::knn_average);
    return model;
}

Prediction infer_inductive(const DmapModel& model, const FeatureMatrix& test_features,
                           const EmbeddingMatrix& unseen_embeddings, const EmbeddingMatrix& seen_embeddings,
                           RecognitionMode mode) {
    const Matrix x = prepare_features(model, test_features.data());
    const Matrix projected = predict_semantic(model.f_s, x);
    if (unseen_embeddings.dim() != projected.rows() ||
        (mode == RecognitionMode::gzsr && seen_embeddings.dim() != projected.rows())) {
        throw DimensionMismatch("candidate embeddings do not match the map's output dimension " +
                                std::to_string(projected.rows()));
    }

    ClassList candidates;
    Matrix cand;
    if (mode == RecognitionMode::gzsr) {
        candidates = seen_embeddings.class_ids();
        cand.resize(projected.rows(), seen_embeddings.size() + unseen_embeddings.size());
        cand << seen_embeddings.data(), unseen_embeddings.data();
    } else {
        cand = unseen_embeddings.data();
    }
    candidates.insert(candidates.end(), unseen_embeddings.class_ids().begin(), unseen_embeddings.class_ids().end());
    cand = prepare_embeddings(model.config, cand);

    Matrix scores = cand.transpose() * projected;
    return make_prediction(test_features, std::move(candidates), unseen_embeddings.class_ids(), std::move(scores),
                           mode);
}

TransductiveResult infer_transductive(const DmapModel& model, const FeatureMatrix& test_features,
                                      const EmbeddingMatrix& unseen_embeddings, RecognitionMode mode,
                                      int iterations) {
    if (iterations < 1) {
        throw InvalidArgument("transductive inference needs at least one iteration");
    }
    if (test_features.size() == 0) {
        throw EmptyTestSet("no test instances");
    }
    const DmapConfig& config = model.config;
    const Matrix x = prepare_features(model, test_features.data());
    if (x.rows() != model.f_tilde.input_dim()) {
        throw DimensionMismatch("test features have dimension " + std::to_string(x.rows()) + ", model expects " +
                                std::to_string(model.f_tilde.input_dim()));
    }
    const Matrix k_unseen = prepare_embeddings(config, unseen_embeddings.data());
    if (k_unseen.rows() != model.f_s.output_dim()) {
        throw DimensionMismatch("unseen embeddings have dimension " + std::to_string(k_unseen.rows()) +
                                ", f_s maps into " + std::to_string(model.f_s.output_dim()));
    }
    warn_if_clamped(config.m, x.cols(), "infer_transductive");

    const Matrix jump_predictions = predict_semantic(model.f_s, x);
    const Matrix tilde_predictions = predict_semantic(model.f_tilde, x);
    const ClassList& unseen_ids = unseen_embeddings.class_ids();

    ClassList candidates;
    if (mode == RecognitionMode::gzsr) candidates = model.k_tilde_s.class_ids();
    candidates.insert(candidates.end(), unseen_ids.begin(), unseen_ids.end());

    TransductiveResult result{Prediction{}, PrototypeSet(Matrix(x.rows(), 0), {}, PrototypeSource::knn_average), {}};
    Matrix k_tilde_u;
    for (int it = 1; it <= iterations; ++it) {
        if (it == 1 || config.test_refinement == TestRefinement::rejump) {
            k_tilde_u = knn_prototypes(k_unseen, jump_predictions, x, config.m, config.threads);
        } else {
            k_tilde_u = knn_prototypes(k_tilde_u, tilde_predictions, x, config.m, config.threads);
        }
        Matrix cand;
        if (mode == RecognitionMode::gzsr) {
            cand.resize(x.rows(), model.k_tilde_s.size() + k_tilde_u.cols());
            cand << model.k_tilde_s.data(), k_tilde_u;
        } else {
            cand = k_tilde_u;
        }
        Matrix scores = cand.transpose() * tilde_predictions;
        result.history.push_back(TransductiveIteration{
            make_prediction(test_features, candidates, unseen_ids, std::move(scores), mode),
            PrototypeSet(k_tilde_u, unseen_ids, PrototypeSource::knn_average)});
    }
    result.prediction = result.history.back().prediction;
    result.k_tilde_u = result.history.back().k_tilde_u;
    return result;
}

const char* to_string(RecognitionMode mode) { return mode == RecognitionMode::czsr ? "czsr" : "gzsr"; }

RecognitionMode parse_mode(const std::string& text) {
    if (text == "czsr" || text == "cZSR") return RecognitionMode::czsr;
    if (text == "gzsr" || text == "gZSR") return RecognitionMode::gzsr;
    throw InvalidArgument("unknown mode '" + text + "' (expected czsr or gzsr)");
}

const char* to_string(TestRefinement refinement) {
    return refinement == TestRefinement::refine ? "refine" : "rejump";
}

TestRefinement parse_refinement(const std::string& text) {
    if (text == "refine") return TestRefinement::refine;
    if (text == "rejump") return TestRefinement::rejump;
    throw InvalidArgument("unknown test refinement '" + text + "' (expected refine or rejump)");
}

}  // namespace dmap
