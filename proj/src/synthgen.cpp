#include "dmap/synthgen.hpp"

#include "dmap/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace dmap {
namespace {

constexpr double kOrthoTol = 1e-12;
constexpr int kMaxRedraws = 64;

Vector gaussian_vector(Rng& rng, Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = rng.gaussian();
    return v;
}

Vector unit_vector(Rng& rng, Index n) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        Vector v = gaussian_vector(rng, n);
        const double norm = v.norm();
        if (norm > kOrthoTol) return v / norm;
    }
    throw InfeasibleConfig("could not draw a nonzero random vector");
}

/// Removes the components of v along the orthonormal columns of basis, twice.
/// Returns false when nothing above tolerance remains.
bool orthogonalize(Vector& v, const Matrix& basis) {
    const double start = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
        for (Index c = 0; c < basis.cols(); ++c) {
            v -= basis.col(c).dot(v) * basis.col(c);
        }
    }
    const double norm = v.norm();
    if (!(norm > kOrthoTol * std::max(1.0, start))) return false;
    v /= norm;
    return true;
}

/// Random unit vector orthogonal to the columns of `basis` (orthonormal).
Vector random_orthogonal_direction(Rng& rng, const Matrix& basis) {
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        Vector v = gaussian_vector(rng, basis.rows());
        if (orthogonalize(v, basis)) return v;
    }
    throw InfeasibleConfig("no direction orthogonal to the requested span");
}

/// n x r matrix with orthonormal columns from Gram-Schmidt on Gaussian draws.
Matrix random_isometry(Rng& rng, Index n, Index r) {
    Matrix q(n, 0);
    for (Index c = 0; c < r; ++c) {
        const Vector v = random_orthogonal_direction(rng, q);
        q.conservativeResize(Eigen::NoChange, c + 1);
        q.col(c) = v;
    }
    return q;
}

/// r x k harmonic frame: rows cos/sin(2 pi j t / k) for j = 1..r/2, plus the
/// alternating row when r is odd. Columns are rescaled to unit norm.
Matrix harmonic_frame(Index r, Index k) {
    Matrix f(r, k);
    Index row = 0;
    for (Index j = 1; j <= r / 2; ++j) {
        for (Index t = 0; t < k; ++t) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(j * t) / static_cast<double>(k);
            f(row, t) = std::cos(angle);
            f(row + 1, t) = std::sin(angle);
        }
        row += 2;
    }
    if (r % 2 == 1) {
        for (Index t = 0; t < k; ++t) f(row, t) = (t % 2 == 0) ? 1.0 : -1.0;
    }
    for (Index t = 0; t < k; ++t) f.col(t).normalize();
    return f;
}

/// Frame rank r, or 0 when the harmonic construction does not apply.
Index frame_rank(Index p, Index k) {
    if (k < 2) return 0;
    Index r = std::min(p, k - 1);
    if (r % 2 == 1 && k % 2 == 1) --r;
    return r;
}

Matrix seen_embeddings(Rng& rng, Index p, Index k) {
    const Index r = frame_rank(p, k);
    if (r == 0) {
        Matrix out(p, k);
        for (Index c = 0; c < k; ++c) out.col(c) = unit_vector(rng, p);
        return out;
    }
    const Matrix frame = harmonic_frame(r, k);
    const Matrix rotation = random_isometry(rng, p, r);
    // Fisher-Yates over the column order
    std::vector<Index> order(static_cast<std::size_t>(k));
    for (Index c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
    for (Index c = k - 1; c > 0; --c) {
        const auto swap_with = static_cast<Index>(rng.below(static_cast<std::uint64_t>(c + 1)));
        std::swap(order[static_cast<std::size_t>(c)], order[static_cast<std::size_t>(swap_with)]);
    }
    Matrix out(p, k);
    for (Index c = 0; c < k; ++c) {
        out.col(c) = rotation * frame.col(order[static_cast<std::size_t>(c)]);
        out.col(c).normalize();
    }
    return out;
}

Matrix orthonormal_basis(const Matrix& m) {
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    qr.setThreshold(kOrthoTol);
    const Index r = qr.rank();
    return qr.householderQ() * Matrix::Identity(m.rows(), r);
}

ClassList make_ids(const char* prefix, Index n) {
    ClassList ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
    return ids;
}

}  // namespace

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("Rng::below needs n > 0");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

Index seen_span_rank(const SynthConfig& config) {
    const Index r = frame_rank(config.p, config.k);
    return r == 0 ? std::min(config.p, config.k) : r;
}

void SynthConfig::validate() const {
    if (d < 1 || p < 1 || k < 1 || l < 1 || n_per_class < 1) {
        throw InvalidArgument("synth dimensions and counts must be at least 1");
    }
    if (defect_pairs < 0 || 2 * defect_pairs > l) {
        throw InvalidArgument("defect_pairs must lie in [0, l/2]");
    }
    if (!(noise_sigma >= 0.0) || !(irc_distortion >= 0.0)) {
        throw InvalidArgument("noise_sigma and irc_distortion must be nonnegative");
    }
    if (!(feature_scale > 0.0) || !std::isfinite(feature_scale)) {
        throw InvalidArgument("feature_scale must be positive");
    }
    if (p > d) {
        throw InfeasibleConfig("feature dimension d must be at least the embedding dimension p");
    }
    if (defect_pairs > 0 && seen_span_rank(*this) >= p) {
        throw InfeasibleConfig("seen embeddings span the whole embedding space; defect pairs need k < p");
    }
}

SynthDataset generate(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const Index d = config.d, p = config.p, k = config.k, l = config.l, n = config.n_per_class;

    Matrix embeddings(p, k + l);
    embeddings.leftCols(k) = seen_embeddings(rng, p, k);
    for (Index i = 0; i < l; ++i) embeddings.col(k + i) = unit_vector(rng, p);

    const Matrix seen_basis = orthonormal_basis(embeddings.leftCols(k));
    std::vector<std::pair<ClassId, ClassId>> defects;
    for (Index t = 0; t < config.defect_pairs; ++t) {
        const Index a = k + 2 * t;
        const Index b = a + 1;
        const Vector shared = seen_basis * (seen_basis.transpose() * embeddings.col(a));
        Matrix taken(p, seen_basis.cols() + 1);
        Vector own_residual = embeddings.col(a) - shared;
        taken << seen_basis, (own_residual.norm() > kOrthoTol ? Vector(own_residual.normalized()) : Vector::Zero(p));
        const Vector residual_dir = random_orthogonal_direction(rng, orthonormal_basis(taken));
        const double rest = std::max(1.0 - shared.squaredNorm(), 0.0);
        const double length = rest > kOrthoTol ? std::sqrt(rest) : 1.0;
        embeddings.col(b) = shared + length * residual_dir;
        defects.emplace_back("u" + std::to_string(2 * t), "u" + std::to_string(2 * t + 1));
    }

    const Matrix feature_map = config.feature_scale * random_isometry(rng, d, p);
    Matrix prototypes = feature_map * embeddings;

    // Distortion directions are drawn even at zero distortion so the noise
    // stream below does not depend on irc_distortion.
    const Matrix prototype_basis = orthonormal_basis(prototypes.leftCols(k));
    for (Index i = 0; i < l; ++i) {
        const Vector x = prototypes.col(k + i);
        Vector z = Vector::Zero(d);
        for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
            Vector candidate = prototype_basis * gaussian_vector(rng, prototype_basis.cols());
            const double xx = x.squaredNorm();
            if (xx > 0.0) candidate -= x * (x.dot(candidate) / xx);
            const double norm = candidate.norm();
            if (norm > kOrthoTol) {
                z = candidate / norm;
                break;
            }
            if (prototype_basis.cols() <= 1) break;  // no room inside the span
        }
        prototypes.col(k + i) += config.irc_distortion * x.norm() * z;
    }

    const ClassList seen_ids = make_ids("s", k);
    const ClassList unseen_ids = make_ids("u", l);
    ClassList all_ids = seen_ids;
    all_ids.insert(all_ids.end(), unseen_ids.begin(), unseen_ids.end());

    Matrix train_x(d, k * n);
    ClassList train_labels;
    train_labels.reserve(static_cast<std::size_t>(k * n));
    for (Index c = 0; c < k; ++c) {
        for (Index j = 0; j < n; ++j) {
            train_x.col(c * n + j) = prototypes.col(c) + config.noise_sigma * gaussian_vector(rng, d);
            train_labels.push_back(seen_ids[static_cast<std::size_t>(c)]);
        }
    }
    Matrix test_x(d, l * n);
    ClassList test_labels;
    test_labels.reserve(static_cast<std::size_t>(l * n));
    for (Index c = 0; c < l; ++c) {
        for (Index j = 0; j < n; ++j) {
            test_x.col(c * n + j) = prototypes.col(k + c) + config.noise_sigma * gaussian_vector(rng, d);
            test_labels.push_back(unseen_ids[static_cast<std::size_t>(c)]);
        }
    }

    ClassSplit split(seen_ids, unseen_ids);
    EmbeddingMatrix emb(embeddings, all_ids);
    return SynthDataset{
        LabeledDataset(FeatureMatrix(std::move(train_x)), std::move(train_labels), split, emb),
        FeatureMatrix(std::move(test_x)),
        std::move(test_labels),
        emb,
        split,
        std::move(prototypes),
        feature_map,
        std::move(defects),
    };
}

}  // namespace dmap
