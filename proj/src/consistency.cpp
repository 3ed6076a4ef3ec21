#include "dmap/consistency.hpp"

#include "dmap/diagnostics.hpp"
#include "dmap/error.hpp"
#include "dmap/linmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dmap {
namespace {

class RelationshipSolver {
public:
    RelationshipSolver(const Matrix& basis, double lambda) : basis_(basis) {
        if (!(lambda >= 0.0)) {
            throw InvalidArgument("lambda must be nonnegative");
        }
        Matrix gram = basis.transpose() * basis;
        gram.diagonal().array() += lambda;
        llt_.compute(gram);
        if (llt_.info() != Eigen::Success) {
            throw SingularSystem("relationship system is singular");
        }
        if (lambda == 0.0) {
            const double rcond = llt_.rcond();
            if (!(rcond > 0.0) || 1.0 / rcond > kMaxGramCondition) {
                throw SingularSystem("relationship system is ill-conditioned; use lambda > 0");
            }
        }
    }

    Vector solve(const Vector& target) const {
        if (target.size() != basis_.rows()) {
            throw DimensionMismatch("target has dimension " + std::to_string(target.size()) +
                                    ", prototypes have " + std::to_string(basis_.rows()));
        }
        const Vector rhs = basis_.transpose() * target;
        return llt_.solve(rhs);
    }

private:
    const Matrix& basis_;
    Eigen::LLT<Matrix> llt_;
};

void check_shapes(const PrototypeSet& seen, const RelationshipMatrix& a, const RelationshipMatrix& b) {
    if (a.coefficients.rows() != b.coefficients.rows() || a.coefficients.cols() != b.coefficients.cols()) {
        throw DimensionMismatch("relationship matrices differ in shape");
    }
    if (a.seen_count() != seen.size()) {
        throw DimensionMismatch("relationship matrices have " + std::to_string(a.seen_count()) +
                                " rows for " + std::to_string(seen.size()) + " seen prototypes");
    }
}

}  // namespace

Vector extract_relationship(const PrototypeSet& seen_prototypes, const Vector& target, double lambda) {
    return RelationshipSolver(seen_prototypes.data(), lambda).solve(target);
}

RelationshipMatrix build_relationship_matrix(const PrototypeSet& seen_prototypes,
                                             const PrototypeSet& unseen_prototypes, double lambda,
                                             RelationSpace space) {
    if (seen_prototypes.dim() != unseen_prototypes.dim()) {
        throw DimensionMismatch("seen prototypes have dimension " + std::to_string(seen_prototypes.dim()) +
                                ", unseen have " + std::to_string(unseen_prototypes.dim()));
    }
    const RelationshipSolver solver(seen_prototypes.data(), lambda);
    Matrix coefficients(seen_prototypes.size(), unseen_prototypes.size());
    for (Index i = 0; i < unseen_prototypes.size(); ++i) {
        coefficients.col(i) = solver.solve(unseen_prototypes.data().col(i));
    }
    return RelationshipMatrix{std::move(coefficients), lambda, space};
}

double consistency_measure(const PrototypeSet& seen_prototypes, const RelationshipMatrix& feature_relations,
                           const RelationshipMatrix& semantic_relations) {
    check_shapes(seen_prototypes, feature_relations, semantic_relations);
    const Index l = feature_relations.unseen_count();
    if (l == 0) {
        throw InvalidArgument("consistency measure needs at least one unseen class");
    }
    const Matrix a = seen_prototypes.data() * feature_relations.coefficients;
    const Matrix b = seen_prototypes.data() * semantic_relations.coefficients;
    double sum = 0.0;
    for (Index i = 0; i < l; ++i) {
        const double na = a.col(i).norm();
        const double nb = b.col(i).norm();
        const bool da = na < kDegenerateNorm;
        const bool db = nb < kDegenerateNorm;
        if (da && db) {
            warn("consistency term " + std::to_string(i) + ": both relationship images vanish; counted as 1");
            sum += 1.0;
        } else if (da || db) {
            warn("consistency term " + std::to_string(i) + ": one relationship image vanishes; counted as 0");
        } else {
            sum += std::exp(-(a.col(i) - b.col(i)).norm() / (na * nb));
        }
    }
    return sum / static_cast<double>(l);
}

double irc_gap(const PrototypeSet& seen_prototypes, const RelationshipMatrix& feature_relations,
               const RelationshipMatrix& semantic_relations) {
    check_shapes(seen_prototypes, feature_relations, semantic_relations);
    const Matrix b = seen_prototypes.data() * semantic_relations.coefficients;
    const Matrix diff = seen_prototypes.data() * (feature_relations.coefficients - semantic_relations.coefficients);
    return diff.norm() / std::max(b.norm(), std::numeric_limits<double>::min());
}

SeenSpan::SeenSpan(const Matrix& seen_embeddings) : cod_(seen_embeddings) {
    const Index r = cod_.rank();
    basis_ = cod_.householderQ() * Matrix::Identity(seen_embeddings.rows(), r);
}

ProjectionDecomposition SeenSpan::decompose(const Vector& embedding) const {
    if (embedding.size() != ambient_dim()) {
        throw DimensionMismatch("embedding has dimension " + std::to_string(embedding.size()) +
                                ", span lives in " + std::to_string(ambient_dim()));
    }
    Vector residual = embedding - basis_ * (basis_.transpose() * embedding);
    residual -= basis_ * (basis_.transpose() * residual);
    Vector projection = embedding - residual;
    Vector coefficients = cod_.solve(projection);
    return ProjectionDecomposition{std::move(projection), std::move(residual), std::move(coefficients)};
}

ProjectionDecomposition project_onto_seen_span(const EmbeddingMatrix& seen_embeddings, const Vector& embedding) {
    return SeenSpan(seen_embeddings.data()).decompose(embedding);
}

DefectReport preinspect(const EmbeddingMatrix& seen_embeddings, const EmbeddingMatrix& unseen_embeddings,
                        DefectThreshold threshold) {
    if (seen_embeddings.dim() != unseen_embeddings.dim()) {
        throw DimensionMismatch("seen embeddings have dimension " + std::to_string(seen_embeddings.dim()) +
                                ", unseen have " + std::to_string(unseen_embeddings.dim()));
    }
    if (!(threshold.value >= 0.0)) {
        throw InvalidArgument("epsilon must be nonnegative");
    }
    const SeenSpan span(seen_embeddings.data());
    const Index l = unseen_embeddings.size();
    Matrix projections(unseen_embeddings.dim(), l);
    for (Index i = 0; i < l; ++i) {
        projections.col(i) = span.decompose(unseen_embeddings.data().col(i)).projection;
    }

    DefectReport report;
    report.unseen = unseen_embeddings.class_ids();
    report.pairwise_distances = Matrix::Zero(l, l);
    std::vector<double> upper;
    for (Index i = 0; i < l; ++i) {
        for (Index j = i + 1; j < l; ++j) {
            const double dist = (projections.col(i) - projections.col(j)).norm();
            report.pairwise_distances(i, j) = dist;
            report.pairwise_distances(j, i) = dist;
            upper.push_back(dist);
        }
    }

    double epsilon = threshold.value;
    if (threshold.relative) {
        double median = 0.0;
        if (!upper.empty()) {
            std::vector<double> sorted = upper;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t mid = sorted.size() / 2;
            median = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
        }
        epsilon *= median;
    }
    report.epsilon = epsilon;

    for (Index i = 0; i < l; ++i) {
        for (Index j = i + 1; j < l; ++j) {
            if (report.pairwise_distances(i, j) <= epsilon) {
                report.flagged_pairs.push_back({report.unseen[static_cast<std::size_t>(i)],
                                                report.unseen[static_cast<std::size_t>(j)],
                                                report.pairwise_distances(i, j)});
            }
        }
    }
    return report;
}

const char* to_string(RelationSpace space) {
    return space == RelationSpace::feature ? "feature" : "semantic";
}

}  // namespace dmap
