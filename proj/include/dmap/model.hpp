#pragma once

#include "dmap/consistency.hpp"
#include "dmap/linmap.hpp"
#include "dmap/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dmap {

/// cZSR scores unseen candidates only; gZSR scores seen and unseen together.
enum class RecognitionMode { czsr, gzsr };

/// How test iterations after the first rebuild the unseen prototypes:
/// `refine` searches around the current prototypes in f_tilde's output space,
/// `rejump` repeats the f_s jump-start every iteration.
enum class TestRefinement { refine, rejump };

struct DmapConfig {
    Index m = 100;
    double lambda = kDefaultLambda;
    double gamma = kDefaultGamma;
    double eta = kDefaultEta;
    int train_max_iter = 2;
    int test_max_iter = 2;
    double convergence_tol = 1e-4;
    RecognitionMode mode = RecognitionMode::czsr;
    bool normalize = false;  // unit-l2 columns for features and embeddings
    bool center = false;     // subtract the training feature mean
    TestRefinement test_refinement = TestRefinement::refine;
    unsigned threads = 0;    // 0 = hardware concurrency; results do not depend on it

    /// Throws InvalidArgument on out-of-range values.
    void validate() const;
};

/// Output of training: both mapping paths and the refined seen prototypes.
struct DmapModel {
    MapMatrix f_s;         // d x p, into the given embedding space
    MapMatrix f_tilde;     // d x d, into the constructed prototype space
    PrototypeSet k_tilde_s;
    int train_iterations_run = 0;
    std::vector<double> train_changes;  // relative Frobenius change of K_tilde_s per iteration
    DmapConfig config;
    std::optional<Vector> feature_mean;  // set when config.center
};

struct Prediction {
    std::vector<std::string> instance_ids;
    ClassList candidates;
    ClassList unseen_classes;  // subset of candidates
    ClassList predicted;
    Matrix scores;             // candidates x instances
    RecognitionMode mode = RecognitionMode::czsr;
};

struct TransductiveIteration {
    Prediction prediction;
    PrototypeSet k_tilde_u;
};

struct TransductiveResult {
    Prediction prediction;  // final iteration
    PrototypeSet k_tilde_u;
    std::vector<TransductiveIteration> history;  // one entry per iteration, in order
};

/// Mean of the feature columns whose predictions are the m nearest (Euclidean)
/// to `anchor`. Distance ties go to the lower instance index; m larger than the
/// instance count is clamped. The mean is accumulated in instance order.
Vector knn_prototype(const Vector& anchor, const Matrix& predictions, const Matrix& features, Index m);

DmapModel train(const LabeledDataset& dataset, const DmapConfig& config);

/// Scores <f_s(x), k_c> against the unseen (cZSR) or seen + unseen (gZSR) embeddings.
Prediction infer_inductive(const DmapModel& model, const FeatureMatrix& test_features,
                           const EmbeddingMatrix& unseen_embeddings, const EmbeddingMatrix& seen_embeddings,
                           RecognitionMode mode);

/// Builds jump-start unseen prototypes from f_s predictions, then refines them
/// for `iterations - 1` further rounds; scores with <f_tilde(x), k_tilde_c>.
TransductiveResult infer_transductive(const DmapModel& model, const FeatureMatrix& test_features,
                                      const EmbeddingMatrix& unseen_embeddings, RecognitionMode mode,
                                      int iterations);

/// Features as the model sees them (column normalization / centering applied).
Matrix prepare_features(const DmapModel& model, const Matrix& features);

/// Relative Frobenius change ||next - prev||_F / ||prev||_F.
double relative_change(const Matrix& prev, const Matrix& next);

/// Argmax of each score column; ties go to the lower candidate index.
std::vector<Index> argmax_columns(const Matrix& scores);

const char* to_string(RecognitionMode mode);
RecognitionMode parse_mode(const std::string& text);
const char* to_string(TestRefinement refinement);
TestRefinement parse_refinement(const std::string& text);

}  // namespace dmap
