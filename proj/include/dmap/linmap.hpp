#pragma once

#include "dmap/types.hpp"

namespace dmap {

/// Default ridge strengths: midpoints (in log10) of the ranges used for
/// the feature-side and embedding-side regularizers.
inline constexpr double kDefaultGamma = 22.387211385683397;   // 10^1.35
inline constexpr double kDefaultEta = 63095.734448019342;     // 10^4.8

/// Largest accepted condition estimate of an unregularized Gram matrix.
inline constexpr double kMaxGramCondition = 1e12;

/// Linear visual-semantic map f(x) = V^T x with V of shape d x p.
struct MapMatrix {
    Matrix weights;
    double gamma = 0.0;
    double eta = 0.0;

    Index input_dim() const noexcept { return weights.rows(); }
    Index output_dim() const noexcept { return weights.cols(); }
};

/// Closed-form minimizer of
///   ||X^T V K - Y||_F^2 + gamma ||V K||_F^2 + eta ||X^T V||_F^2 + gamma eta ||V||_F^2,
/// i.e. V = (X X^T + gamma I)^-1 X Y K^T (K K^T + eta I)^-1.
///
/// `features` is d x n, `targets` is p x k (one column per seen class) and
/// `labels` is n x k. Both Gram matrices are solved through Cholesky
/// factorizations. A Gram matrix with a zero regularizer and a condition
/// estimate above kMaxGramCondition, or any failed factorization, raises
/// SingularSystem.
MapMatrix solve_ridge_map(const Matrix& features, const Matrix& targets, const LabelMatrix& labels,
                          double gamma, double eta);

/// Column j of the result is V^T x_j.
Matrix predict_semantic(const MapMatrix& map, const Matrix& features);

}  // namespace dmap
