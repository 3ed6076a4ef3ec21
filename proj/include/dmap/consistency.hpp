#pragma once

#include "dmap/types.hpp"

#include <vector>

namespace dmap {

/// Default ridge strength for relationship extraction.
inline constexpr double kDefaultLambda = 1e-4;

/// Norms below this are treated as zero by consistency_measure.
inline constexpr double kDegenerateNorm = 1e-12;

enum class RelationSpace { feature, semantic };

/// Coefficients of each unseen class over the seen prototypes (k x l);
/// column i is the relationship vector of unseen class i.
struct RelationshipMatrix {
    Matrix coefficients;
    double lambda = kDefaultLambda;
    RelationSpace space = RelationSpace::feature;

    Index seen_count() const noexcept { return coefficients.rows(); }
    Index unseen_count() const noexcept { return coefficients.cols(); }
};

/// argmin_a ||target - P a||^2 + lambda ||a||^2 over the seen prototypes P.
/// With lambda == 0 a singular P^T P raises SingularSystem.
Vector extract_relationship(const PrototypeSet& seen_prototypes, const Vector& target, double lambda);

/// Column i is extract_relationship(seen, unseen.col(i), lambda).
RelationshipMatrix build_relationship_matrix(const PrototypeSet& seen_prototypes,
                                             const PrototypeSet& unseen_prototypes, double lambda,
                                             RelationSpace space = RelationSpace::feature);

/// Mean over unseen classes of exp(-||P a_i - P b_i|| / (||P a_i|| ||P b_i||)),
/// where P are the seen prototypes and a_i, b_i the columns of the two
/// relationship matrices. A term whose two images are both degenerate counts
/// as 1, a term with exactly one degenerate image counts as 0.
double consistency_measure(const PrototypeSet& seen_prototypes, const RelationshipMatrix& feature_relations,
                           const RelationshipMatrix& semantic_relations);

/// ||P R_x - P R_k||_F / ||P R_k||_F; zero exactly when the relationships agree.
double irc_gap(const PrototypeSet& seen_prototypes, const RelationshipMatrix& feature_relations,
               const RelationshipMatrix& semantic_relations);

/// Orthogonal split of an embedding against span(K_s).
struct ProjectionDecomposition {
    Vector projection;    // in span(K_s)
    Vector residual;      // orthogonal to span(K_s)
    Vector coefficients;  // minimum-norm a with K_s a = projection
};

/// Orthonormal basis of span(K_s) plus a minimum-norm least-squares solver,
/// reused across many projections onto the same span.
class SeenSpan {
public:
    explicit SeenSpan(const Matrix& seen_embeddings);

    Index ambient_dim() const noexcept { return basis_.rows(); }
    Index rank() const noexcept { return basis_.cols(); }
    const Matrix& basis() const noexcept { return basis_; }

    ProjectionDecomposition decompose(const Vector& embedding) const;

private:
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod_;
    Matrix basis_;
};

ProjectionDecomposition project_onto_seen_span(const EmbeddingMatrix& seen_embeddings, const Vector& embedding);

/// Pairs closer than `epsilon` are reported by preinspect. A relative
/// threshold is multiplied by the median off-diagonal distance.
struct DefectThreshold {
    double value = 1e-6;
    bool relative = true;

    static DefectThreshold absolute(double epsilon) { return {epsilon, false}; }
    static DefectThreshold relative_to_median(double factor) { return {factor, true}; }
};

struct FlaggedPair {
    ClassId first;
    ClassId second;
    double distance = 0.0;
};

struct DefectReport {
    ClassList unseen;
    Matrix pairwise_distances;  // l x l, symmetric, zero diagonal
    std::vector<FlaggedPair> flagged_pairs;
    double epsilon = 0.0;  // resolved absolute threshold
};

/// Distances between the projections of unseen embeddings onto span(K_s);
/// flags every pair i < j whose distance is <= epsilon.
DefectReport preinspect(const EmbeddingMatrix& seen_embeddings, const EmbeddingMatrix& unseen_embeddings,
                        DefectThreshold threshold = {});

const char* to_string(RelationSpace space);

}  // namespace dmap
