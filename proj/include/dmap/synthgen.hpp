#pragma once

#include "dmap/types.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace dmap {

/// Seeded generator with a fully specified output stream: std::mt19937_64
/// (whose sequence is fixed by the C++ standard), uniforms from the top 53
/// bits, and Gaussians from the Box-Muller transform
///   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2)
/// with u1 in (0, 1]. z1 is cached for the next call.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform();
    double gaussian();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct SynthConfig {
    Index d = 30;             // feature dimension
    Index p = 10;             // embedding dimension
    Index k = 15;             // seen classes
    Index l = 5;              // unseen classes
    Index n_per_class = 20;   // instances per class, train and test
    double noise_sigma = 0.0;
    double irc_distortion = 0.0;
    Index defect_pairs = 0;
    std::uint64_t seed = 0;
    double feature_scale = 1.0;

    /// Throws InvalidArgument for out-of-range fields and InfeasibleConfig
    /// when the requested structure cannot be built.
    void validate() const;
};

struct SynthDataset {
    LabeledDataset train;
    FeatureMatrix test_features;
    ClassList test_labels;
    EmbeddingMatrix embeddings;  // seen then unseen
    ClassSplit split;
    Matrix feature_prototypes;   // d x (k + l), noise free, same column order as embeddings
    Matrix feature_map;          // d x p
    std::vector<std::pair<ClassId, ClassId>> defect_pairs;
};

/// Builds a dataset whose feature prototypes are a linear image of the class
/// embeddings, so feature-space and embedding-space relationships agree
/// exactly when irc_distortion is 0.
///
/// Seen embeddings form a randomly rotated harmonic frame: unit columns that
/// sum to zero and satisfy K_s K_s^T = (k / r) I on their r-dimensional span.
/// Unseen embeddings are independent random unit vectors. The feature map is
/// feature_scale times a random isometry. Each defect pair shares its
/// projection onto span(K_s). Distortion moves every unseen feature prototype
/// by irc_distortion * ||x_u|| along a random direction inside the span of the
/// seen prototypes, orthogonal to x_u. Instances add noise_sigma * N(0, I).
SynthDataset generate(const SynthConfig& config);

/// Dimension of span(K_s) produced by generate for this config.
Index seen_span_rank(const SynthConfig& config);

}  // namespace dmap
