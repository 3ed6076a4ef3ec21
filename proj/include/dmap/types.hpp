#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dmap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

using ClassId = std::string;
using ClassList = std::vector<ClassId>;

/// Instance features, one column per instance (d x n).
class FeatureMatrix {
public:
    /// Instance ids default to "0", "1", ...
    explicit FeatureMatrix(Matrix data);
    FeatureMatrix(Matrix data, std::vector<std::string> instance_ids);

    const Matrix& data() const noexcept { return data_; }
    const std::vector<std::string>& instance_ids() const noexcept { return ids_; }
    Index dim() const noexcept { return data_.rows(); }
    Index size() const noexcept { return data_.cols(); }

private:
    Matrix data_;
    std::vector<std::string> ids_;
};

/// Per-class semantic embeddings, one column per class (p x c).
///
/// An all-zero column is accepted with a warning; downstream consumers
/// (relationship extraction, CM) guard the degenerate norms themselves.
class EmbeddingMatrix {
public:
    EmbeddingMatrix(Matrix data, ClassList class_ids);

    const Matrix& data() const noexcept { return data_; }
    const ClassList& class_ids() const noexcept { return ids_; }
    Index dim() const noexcept { return data_.rows(); }
    Index size() const noexcept { return data_.cols(); }

    /// Column position of `id`; throws UnknownClass.
    Index index_of(const ClassId& id) const;
    bool contains(const ClassId& id) const;

    /// Columns for `ids`, in that order.
    EmbeddingMatrix select(std::span<const ClassId> ids) const;

private:
    Matrix data_;
    ClassList ids_;
};

/// Disjoint, non-empty seen and unseen class lists.
class ClassSplit {
public:
    ClassSplit(ClassList seen, ClassList unseen);

    const ClassList& seen() const noexcept { return seen_; }
    const ClassList& unseen() const noexcept { return unseen_; }
    /// seen followed by unseen
    ClassList all() const;

private:
    ClassList seen_;
    ClassList unseen_;
};

/// Training data: seen-class instances with labels, plus embeddings for every class.
class LabeledDataset {
public:
    LabeledDataset(FeatureMatrix features, ClassList labels, ClassSplit split, EmbeddingMatrix semantic);

    const FeatureMatrix& features() const noexcept { return features_; }
    const ClassList& labels() const noexcept { return labels_; }
    const ClassSplit& split() const noexcept { return split_; }
    const EmbeddingMatrix& semantic() const noexcept { return semantic_; }

private:
    FeatureMatrix features_;
    ClassList labels_;
    ClassSplit split_;
    EmbeddingMatrix semantic_;
};

/// n x k matrix over {-1, +1} with exactly one +1 per row.
class LabelMatrix {
public:
    explicit LabelMatrix(Matrix data);

    const Matrix& data() const noexcept { return data_; }
    Index rows() const noexcept { return data_.rows(); }
    Index cols() const noexcept { return data_.cols(); }

private:
    Matrix data_;
};

enum class PrototypeSource {
    class_mean,
    knn_average,
    embedding,  // a wrapped embedding matrix, used as relationship basis
};

/// One prototype column per class.
class PrototypeSet {
public:
    PrototypeSet(Matrix data, ClassList class_ids, PrototypeSource source);

    static PrototypeSet from_embeddings(const EmbeddingMatrix& embeddings);

    const Matrix& data() const noexcept { return data_; }
    const ClassList& class_ids() const noexcept { return ids_; }
    PrototypeSource source() const noexcept { return source_; }
    Index dim() const noexcept { return data_.rows(); }
    Index size() const noexcept { return data_.cols(); }

private:
    Matrix data_;
    ClassList ids_;
    PrototypeSource source_;
};

/// Column i is the mean of the feature columns labelled classes[i].
/// Throws MissingClass when a class has no instances.
PrototypeSet class_mean_prototypes(const FeatureMatrix& features,
                                   std::span<const ClassId> labels,
                                   std::span<const ClassId> classes);

/// Entry (i, j) = +1 iff labels[i] == seen[j], else -1. Throws UnknownLabel.
LabelMatrix build_label_matrix(std::span<const ClassId> labels, std::span<const ClassId> seen);

/// Scales every nonzero column to unit l2 norm.
Matrix normalize_columns(const Matrix& m);

bool all_finite(const Matrix& m);

const char* to_string(PrototypeSource source);

}  // namespace dmap
