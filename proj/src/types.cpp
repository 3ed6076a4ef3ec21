#include "dmap/types.hpp"

#include "dmap/diagnostics.hpp"
#include "dmap/error.hpp"

#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace dmap {
namespace {

template <typename Ids>
void require_unique(const Ids& ids, const char* what) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw InvalidArgument(std::string("duplicate ") + what + " id '" + id + "'");
        }
    }
}

std::unordered_map<std::string, Index> index_map(std::span<const ClassId> ids) {
    std::unordered_map<std::string, Index> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.emplace(ids[i], static_cast<Index>(i));
    }
    return out;
}

std::vector<std::string> default_ids(Index n) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        ids.push_back(std::to_string(i));
    }
    return ids;
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

FeatureMatrix::FeatureMatrix(Matrix data) : FeatureMatrix(data, default_ids(data.cols())) {}

FeatureMatrix::FeatureMatrix(Matrix data, std::vector<std::string> instance_ids)
    : data_(std::move(data)), ids_(std::move(instance_ids)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
        throw InvalidArgument("feature matrix must have at least one row and one column");
    }
    if (static_cast<Index>(ids_.size()) != data_.cols()) {
        throw DimensionMismatch("feature matrix has " + std::to_string(data_.cols()) + " columns but " +
                                std::to_string(ids_.size()) + " instance ids");
    }
    if (!data_.allFinite()) {
        throw InvalidArgument("feature matrix contains non-finite entries");
    }
    require_unique(ids_, "instance");
}

EmbeddingMatrix::EmbeddingMatrix(Matrix data, ClassList class_ids)
    : data_(std::move(data)), ids_(std::move(class_ids)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
        throw InvalidArgument("embedding matrix must have at least one row and one column");
    }
    if (static_cast<Index>(ids_.size()) != data_.cols()) {
        throw DimensionMismatch("embedding matrix has " + std::to_string(data_.cols()) + " columns but " +
                                std::to_string(ids_.size()) + " class ids");
    }
    if (!data_.allFinite()) {
        throw InvalidArgument("embedding matrix contains non-finite entries");
    }
    require_unique(ids_, "class");
    for (Index j = 0; j < data_.cols(); ++j) {
        if ((data_.col(j).array() == 0.0).all()) {
            warn("embedding for class '" + ids_[static_cast<std::size_t>(j)] + "' is identically zero");
        }
    }
}

Index EmbeddingMatrix::index_of(const ClassId& id) const {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (ids_[i] == id) {
            return static_cast<Index>(i);
        }
    }
    throw UnknownClass("no embedding for class '" + id + "'");
}

bool EmbeddingMatrix::contains(const ClassId& id) const {
    for (const auto& c : ids_) {
        if (c == id) return true;
    }
    return false;
}

EmbeddingMatrix EmbeddingMatrix::select(std::span<const ClassId> ids) const {
    Matrix out(data_.rows(), static_cast<Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.col(static_cast<Index>(i)) = data_.col(index_of(ids[i]));
    }
    return EmbeddingMatrix(std::move(out), ClassList(ids.begin(), ids.end()));
}

ClassSplit::ClassSplit(ClassList seen, ClassList unseen) : seen_(std::move(seen)), unseen_(std::move(unseen)) {
    if (seen_.empty() || unseen_.empty()) {
        throw InvalidArgument("class split needs at least one seen and one unseen class");
    }
    require_unique(seen_, "seen class");
    require_unique(unseen_, "unseen class");
    std::unordered_set<std::string> s(seen_.begin(), seen_.end());
    for (const auto& u : unseen_) {
        if (s.count(u)) {
            throw InvalidArgument("class '" + u + "' is both seen and unseen");
        }
    }
}

ClassList ClassSplit::all() const {
    ClassList out = seen_;
    out.insert(out.end(), unseen_.begin(), unseen_.end());
    return out;
}

LabeledDataset::LabeledDataset(FeatureMatrix features, ClassList labels, ClassSplit split, EmbeddingMatrix semantic)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      split_(std::move(split)),
      semantic_(std::move(semantic)) {
    if (static_cast<Index>(labels_.size()) != features_.size()) {
        throw DimensionMismatch("dataset has " + std::to_string(features_.size()) + " instances but " +
                                std::to_string(labels_.size()) + " labels");
    }
    std::unordered_set<std::string> seen(split_.seen().begin(), split_.seen().end());
    for (const auto& label : labels_) {
        if (!seen.count(label)) {
            throw UnknownLabel("training label '" + label + "' is not a seen class");
        }
    }
    for (const auto& c : split_.all()) {
        if (!semantic_.contains(c)) {
            throw UnknownClass("no embedding for class '" + c + "'");
        }
    }
}

LabelMatrix::LabelMatrix(Matrix data) : data_(std::move(data)) {
    for (Index i = 0; i < data_.rows(); ++i) {
        int positives = 0;
        for (Index j = 0; j < data_.cols(); ++j) {
            const double v = data_(i, j);
            if (v == 1.0) {
                ++positives;
            } else if (v != -1.0) {
                throw InvalidArgument("label matrix entries must be -1 or +1");
            }
        }
        if (positives != 1) {
            throw InvalidArgument("label matrix row " + std::to_string(i) + " has " + std::to_string(positives) +
                                  " positive entries");
        }
    }
}

PrototypeSet::PrototypeSet(Matrix data, ClassList class_ids, PrototypeSource source)
    : data_(std::move(data)), ids_(std::move(class_ids)), source_(source) {
    if (static_cast<Index>(ids_.size()) != data_.cols()) {
        throw DimensionMismatch("prototype set has " + std::to_string(data_.cols()) + " columns but " +
                                std::to_string(ids_.size()) + " class ids");
    }
    if (!data_.allFinite()) {
        throw InvalidArgument("prototype set contains non-finite entries");
    }
}

PrototypeSet PrototypeSet::from_embeddings(const EmbeddingMatrix& embeddings) {
    return PrototypeSet(embeddings.data(), embeddings.class_ids(), PrototypeSource::embedding);
}

PrototypeSet class_mean_prototypes(const FeatureMatrix& features,
                                   std::span<const ClassId> labels,
                                   std::span<const ClassId> classes) {
    if (static_cast<Index>(labels.size()) != features.size()) {
        throw DimensionMismatch("got " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(features.size()) + " instances");
    }
    const auto where = index_map(classes);
    Matrix sums = Matrix::Zero(features.dim(), static_cast<Index>(classes.size()));
    std::vector<Index> counts(classes.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = where.find(labels[i]);
        if (it == where.end()) continue;
        sums.col(it->second) += features.data().col(static_cast<Index>(i));
        ++counts[static_cast<std::size_t>(it->second)];
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (counts[c] == 0) {
            throw MissingClass("class '" + classes[c] + "' has no instances");
        }
        sums.col(static_cast<Index>(c)) /= static_cast<double>(counts[c]);
    }
    return PrototypeSet(std::move(sums), ClassList(classes.begin(), classes.end()), PrototypeSource::class_mean);
}

LabelMatrix build_label_matrix(std::span<const ClassId> labels, std::span<const ClassId> seen) {
    const auto where = index_map(seen);
    Matrix y = Matrix::Constant(static_cast<Index>(labels.size()), static_cast<Index>(seen.size()), -1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = where.find(labels[i]);
        if (it == where.end()) {
            throw UnknownLabel("label '" + labels[i] + "' is not a seen class");
        }
        y(static_cast<Index>(i), it->second) = 1.0;
    }
    return LabelMatrix(std::move(y));
}

Matrix normalize_columns(const Matrix& m) {
    Matrix out = m;
    for (Index j = 0; j < out.cols(); ++j) {
        const double n = out.col(j).norm();
        if (n > 0.0) out.col(j) /= n;
    }
    return out;
}

const char* to_string(PrototypeSource source) {
    switch (source) {
        case PrototypeSource::class_mean: return "class_mean";
        case PrototypeSource::knn_average: return "knn_average";
        case PrototypeSource::embedding: return "embedding";
    }
    return "unknown";
}

}  // namespace dmap
