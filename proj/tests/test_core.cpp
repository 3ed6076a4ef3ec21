#include "dmap/diagnostics.hpp"
#include "dmap/error.hpp"
#include "dmap/types.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace dmap;

TEST_SUITE("core_model") {

TEST_CASE("feature matrix validation") {
    CHECK_THROWS_AS(FeatureMatrix(Matrix(0, 3)), InvalidArgument);
    CHECK_THROWS_AS(FeatureMatrix(Matrix(2, 0)), InvalidArgument);
    Matrix bad = Matrix::Zero(2, 2);
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(FeatureMatrix{bad}, InvalidArgument);
    CHECK_THROWS_AS(FeatureMatrix(Matrix::Zero(2, 2), {"a", "a"}), InvalidArgument);
    const FeatureMatrix ok(Matrix::Zero(3, 2));
    CHECK(ok.instance_ids() == std::vector<std::string>{"0", "1"});
    CHECK(ok.dim() == 3);
}

TEST_CASE("embedding matrix warns on a zero column") {
    std::vector<std::string> seen;
    auto previous = set_warning_handler([&](const std::string& m) { seen.push_back(m); });
    Matrix k(2, 2);
    k << 1, 0, 0, 0;
    const EmbeddingMatrix e(k, {"a", "b"});
    CHECK(seen.size() == 1);
    CHECK(e.index_of("b") == 1);
    CHECK_THROWS_AS(e.index_of("z"), UnknownClass);
    const std::vector<ClassId> pick{"b", "a"};
    CHECK(e.select(pick).data()(0, 1) == 1.0);
    set_warning_handler(previous);
}

TEST_CASE("class split invariants") {
    CHECK_THROWS_AS(ClassSplit({"a"}, {"a"}), InvalidArgument);
    CHECK_THROWS_AS(ClassSplit({}, {"a"}), InvalidArgument);
    CHECK_THROWS_AS(ClassSplit({"a"}, {}), InvalidArgument);
    const ClassSplit s({"a", "b"}, {"c"});
    CHECK(s.all() == ClassList{"a", "b", "c"});
}

TEST_CASE("labeled dataset rejects unseen labels and missing embeddings") {
    const ClassSplit split({"a"}, {"b"});
    const EmbeddingMatrix k(Matrix::Identity(2, 2), {"a", "b"});
    CHECK_THROWS(LabeledDataset(FeatureMatrix(Matrix::Ones(2, 1)), {"b"}, split, k));
    const EmbeddingMatrix partial(Matrix::Identity(2, 1), {"a"});
    CHECK_THROWS(LabeledDataset(FeatureMatrix(Matrix::Ones(2, 1)), {"a"}, split, partial));
    CHECK_NOTHROW(LabeledDataset(FeatureMatrix(Matrix::Ones(2, 1)), {"a"}, split, k));
}

TEST_CASE("class mean of one instance is that instance") {
    Matrix x(2, 2);
    x << 1, 5, 2, 7;
    const std::vector<ClassId> labels{"a", "b"};
    const std::vector<ClassId> classes{"b", "a"};
    const auto p = class_mean_prototypes(FeatureMatrix(x), labels, classes);
    CHECK(p.data().col(0) == x.col(1));
    CHECK(p.data().col(1) == x.col(0));
    CHECK(p.source() == PrototypeSource::class_mean);
}

TEST_CASE("class mean of (1,0) and (3,0) is (2,0)") {
    Matrix x(2, 2);
    x << 1, 3, 0, 0;
    const std::vector<ClassId> labels{"a", "a"};
    const std::vector<ClassId> classes{"a"};
    const auto p = class_mean_prototypes(FeatureMatrix(x), labels, classes);
    CHECK(p.data()(0, 0) == 2.0);
    CHECK(p.data()(1, 0) == 0.0);
}

TEST_CASE("class means match an accumulation oracle") {
    Rng rng(11);
    const Matrix x = oracle::random_matrix(rng, 8, 40);
    std::vector<ClassId> labels;
    for (int i = 0; i < 40; ++i) labels.push_back("c" + std::to_string(i % 4));
    const auto classes = oracle::class_names(4);
    const auto p = class_mean_prototypes(FeatureMatrix(x), labels, classes);
    for (Index c = 0; c < 4; ++c) {
        for (Index r = 0; r < 8; ++r) {
            double s = 0.0;
            int count = 0;
            for (Index i = 0; i < 40; ++i) {
                if (labels[static_cast<std::size_t>(i)] == classes[static_cast<std::size_t>(c)]) {
                    s += x(r, i);
                    ++count;
                }
            }
            CHECK(std::abs(p.data()(r, c) - s / count) <= 1e-12);
        }
    }
}

TEST_CASE("class means are permutation equivariant") {
    Rng rng(12);
    const Matrix x = oracle::random_matrix(rng, 5, 30);
    const auto labels = oracle::random_labels(rng, 30, 3);
    const auto classes = oracle::class_names(3);
    std::vector<Index> perm(30);
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = 29; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(i + 1)]);
    Matrix xp(5, 30);
    std::vector<ClassId> lp;
    for (Index i = 0; i < 30; ++i) {
        xp.col(i) = x.col(perm[static_cast<std::size_t>(i)]);
        lp.push_back(labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    }
    const auto a = class_mean_prototypes(FeatureMatrix(x), labels, classes);
    const auto b = class_mean_prototypes(FeatureMatrix(xp), lp, classes);
    CHECK((a.data() - b.data()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("class mean errors") {
    const std::vector<ClassId> labels{"a"};
    const std::vector<ClassId> classes{"a", "b"};
    CHECK_THROWS_AS(class_mean_prototypes(FeatureMatrix(Matrix::Ones(2, 1)), labels, classes), MissingClass);
    const std::vector<ClassId> two{"a", "a"};
    CHECK_THROWS_AS(class_mean_prototypes(FeatureMatrix(Matrix::Ones(2, 1)), two, labels), DimensionMismatch);
}

TEST_CASE("label matrix examples") {
    const std::vector<ClassId> seen{"A", "B"};
    const std::vector<ClassId> ab{"A", "B"};
    Matrix expect(2, 2);
    expect << 1, -1, -1, 1;
    CHECK(build_label_matrix(ab, seen).data() == expect);
    const std::vector<ClassId> bb{"B", "B"};
    expect << -1, 1, -1, 1;
    CHECK(build_label_matrix(bb, seen).data() == expect);
    const std::vector<ClassId> bad{"C"};
    CHECK_THROWS_AS(build_label_matrix(bad, seen), UnknownLabel);
}

TEST_CASE("label matrix rows sum to 2 - k and decode back to the labels") {
    Rng rng(13);
    const auto labels = oracle::random_labels(rng, 100, 7);
    const auto seen = oracle::class_names(7);
    const auto y = build_label_matrix(labels, seen);
    for (Index i = 0; i < y.rows(); ++i) {
        CHECK(y.data().row(i).sum() == -5.0);
        Index best = 0;
        y.data().row(i).maxCoeff(&best);
        CHECK(seen[static_cast<std::size_t>(best)] == labels[static_cast<std::size_t>(i)]);
    }
}

TEST_CASE("label matrix constructor checks entries") {
    Matrix two_pos(1, 2);
    two_pos << 1, 1;
    CHECK_THROWS_AS(LabelMatrix{two_pos}, InvalidArgument);
    Matrix zero(1, 2);
    zero << 1, 0;
    CHECK_THROWS_AS(LabelMatrix{zero}, InvalidArgument);
}

TEST_CASE("normalize_columns leaves zero columns alone") {
    Matrix m(2, 2);
    m << 3, 0, 4, 0;
    const Matrix n = normalize_columns(m);
    CHECK(n(0, 0) == doctest::Approx(0.6));
    CHECK(n(1, 0) == doctest::Approx(0.8));
    CHECK(n.col(1).isZero());
}

}  // TEST_SUITE
