#include "dmap/linmap.hpp"

#include "dmap/error.hpp"

#include <cmath>
#include <string>

namespace dmap {
namespace {

Eigen::LLT<Matrix> factor_gram(const Matrix& gram, double reg, const char* name) {
    Matrix a = gram;
    a.diagonal().array() += reg;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw SingularSystem(std::string(name) + " Gram matrix is not positive definite");
    }
    if (reg == 0.0) {
        const double rcond = llt.rcond();
        if (!(rcond > 0.0) || 1.0 / rcond > kMaxGramCondition) {
            throw SingularSystem(std::string(name) + " Gram matrix is ill-conditioned (estimated condition " +
                                 std::to_string(rcond > 0.0 ? 1.0 / rcond : INFINITY) + ")");
        }
    }
    return llt;
}

}  // namespace

MapMatrix solve_ridge_map(const Matrix& features, const Matrix& targets, const LabelMatrix& labels,
                          double gamma, double eta) {
    if (!(gamma >= 0.0) || !(eta >= 0.0)) {
        throw InvalidArgument("gamma and eta must be nonnegative");
    }
    if (labels.rows() != features.cols()) {
        throw DimensionMismatch("label matrix has " + std::to_string(labels.rows()) + " rows for " +
                                std::to_string(features.cols()) + " instances");
    }
    if (labels.cols() != targets.cols()) {
        throw DimensionMismatch("label matrix has " + std::to_string(labels.cols()) + " classes but " +
                                std::to_string(targets.cols()) + " target columns");
    }

    const auto feature_gram = factor_gram(features * features.transpose(), gamma, "feature");
    const auto target_gram = factor_gram(targets * targets.transpose(), eta, "target");

    // rhs = X Y K^T (d x p)
    const Matrix rhs = (features * labels.data()) * targets.transpose();
    const Matrix left = feature_gram.solve(rhs);
    // left * B^-1 == (B^-1 left^T)^T since B is symmetric
    Matrix weights = target_gram.solve(left.transpose()).transpose();
    if (!weights.allFinite()) {
        throw SingularSystem("ridge solution is not finite");
    }
    return MapMatrix{std::move(weights), gamma, eta};
}

Matrix predict_semantic(const MapMatrix& map, const Matrix& features) {
    if (map.input_dim() != features.rows()) {
        throw DimensionMismatch("map expects " + std::to_string(map.input_dim()) + "-dim inputs, got " +
                                std::to_string(features.rows()));
    }
    return map.weights.transpose() * features;
}

}  // namespace dmap
