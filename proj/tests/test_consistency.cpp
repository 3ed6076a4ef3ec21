#include "dmap/consistency.hpp"
#include "dmap/diagnostics.hpp"
#include "dmap/error.hpp"
#include "dmap/linmap.hpp"
#include "dmap/synthgen.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace dmap;

namespace {

PrototypeSet protos(const Matrix& m, const std::string& prefix = "c") {
    ClassList ids;
    for (Index c = 0; c < m.cols(); ++c) ids.push_back(prefix + std::to_string(c));
    return PrototypeSet(m, ids, PrototypeSource::class_mean);
}

EmbeddingMatrix embeds(const Matrix& m, const std::string& prefix) {
    ClassList ids;
    for (Index c = 0; c < m.cols(); ++c) ids.push_back(prefix + std::to_string(c));
    return EmbeddingMatrix(m, ids);
}

Matrix orthonormal(Rng& rng, Index rows, Index cols) {
    return Eigen::HouseholderQR<Matrix>(oracle::random_matrix(rng, rows, cols)).householderQ() *
           Matrix::Identity(rows, cols);
}

// Silences expected warnings for the lifetime of the guard.
struct QuietWarnings {
    WarningHandler previous = set_warning_handler([](const std::string&) {});
    ~QuietWarnings() { set_warning_handler(previous); }
};

}  // namespace

TEST_SUITE("consistency") {

TEST_CASE("relationship of the first orthonormal prototype") {
    Rng rng(31);
    const Matrix p = orthonormal(rng, 6, 4);
    const Vector a = extract_relationship(protos(p), p.col(0), 1e-4);
    CHECK(std::abs(a(0) - 1.0 / (1.0 + 1e-4)) <= 1e-12);
    CHECK(a.tail(3).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero target gives zero relationship") {
    Rng rng(32);
    const Matrix p = oracle::random_matrix(rng, 5, 3);
    CHECK(extract_relationship(protos(p), Vector::Zero(5), 0.3).isZero());
}

TEST_CASE("relationship matches gradient descent") {
    Rng rng(33);
    const Matrix p = oracle::random_matrix(rng, 10, 6);
    const Vector t = oracle::random_matrix(rng, 10, 1);
    const Vector a = extract_relationship(protos(p), t, 1e-4);
    const Vector ref = oracle::relationship_gradient_descent(p, t, 1e-4);
    CHECK((a - ref).norm() <= 1e-6);
}

TEST_CASE("lambda zero on dependent prototypes raises SingularSystem") {
    Matrix p(3, 2);
    p << 1, 2, 0, 0, 0, 0;
    CHECK_THROWS_AS(extract_relationship(protos(p), Vector::Ones(3), 0.0), SingularSystem);
    CHECK_THROWS_AS(extract_relationship(protos(p), Vector::Ones(2), 1.0), DimensionMismatch);
    CHECK_THROWS_AS(extract_relationship(protos(p), Vector::Ones(3), -1.0), InvalidArgument);
}

TEST_CASE("relationship matrix examples") {
    Rng rng(34);
    const Matrix p = orthonormal(rng, 7, 4);
    const auto r = build_relationship_matrix(protos(p), protos(p, "u"), 1e-12);
    CHECK((r.coefficients - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-10);

    const Matrix s = oracle::random_matrix(rng, 8, 5);
    const Matrix u = oracle::random_matrix(rng, 8, 3);
    const auto rm = build_relationship_matrix(protos(s), protos(u, "u"), 1e-4);
    CHECK(rm.seen_count() == 5);
    CHECK(rm.unseen_count() == 3);
    for (Index c = 0; c < 3; ++c) {
        const Vector single = extract_relationship(protos(s), u.col(c), 1e-4);
        CHECK(rm.coefficients.col(c) == single);
    }
    const auto one = build_relationship_matrix(protos(s), protos(u.leftCols(1), "u"), 1e-4);
    CHECK(one.coefficients.col(0) == extract_relationship(protos(s), u.col(0), 1e-4));
}

TEST_CASE("consistency measure examples") {
    Rng rng(35);
    const Matrix p = oracle::random_matrix(rng, 6, 4);
    RelationshipMatrix r{oracle::random_matrix(rng, 4, 3), 1e-4, RelationSpace::feature};
    CHECK(consistency_measure(protos(p), r, r) == doctest::Approx(1.0).epsilon(1e-15));

    const PrototypeSet id = protos(Matrix::Identity(2, 2));
    const RelationshipMatrix a{Matrix{{1}, {0}}, 0, RelationSpace::feature};
    const RelationshipMatrix b{Matrix{{0}, {1}}, 0, RelationSpace::semantic};
    CHECK(std::abs(consistency_measure(id, a, b) - std::exp(-std::sqrt(2.0))) <= 1e-15);
    CHECK(std::abs(consistency_measure(id, a, b) - 0.24312) <= 1e-5);
}

TEST_CASE("consistency measure degenerate terms") {
    QuietWarnings quiet;
    const PrototypeSet id = protos(Matrix::Identity(2, 2));
    const RelationshipMatrix zero{Matrix::Zero(2, 1), 0, RelationSpace::feature};
    const RelationshipMatrix one{Matrix{{1}, {0}}, 0, RelationSpace::semantic};
    CHECK(consistency_measure(id, zero, zero) == 1.0);
    CHECK(consistency_measure(id, zero, one) == 0.0);
    const RelationshipMatrix wide{Matrix::Zero(2, 2), 0, RelationSpace::feature};
    CHECK_THROWS_AS(consistency_measure(id, zero, wide), DimensionMismatch);
}

TEST_CASE("consistency measure is in (0, 1] and rotation invariant") {
    Rng rng(36);
    for (int t = 0; t < 20; ++t) {
        const Matrix p = oracle::random_matrix(rng, 6, 4);
        const RelationshipMatrix a{oracle::random_matrix(rng, 4, 3), 0, RelationSpace::feature};
        const RelationshipMatrix b{oracle::random_matrix(rng, 4, 3), 0, RelationSpace::semantic};
        const double cm = consistency_measure(protos(p), a, b);
        CHECK(cm > 0.0);
        CHECK(cm <= 1.0);
        const Matrix q = orthonormal(rng, 6, 6);
        CHECK(std::abs(consistency_measure(protos(q * p), a, b) - cm) <= 1e-12);
    }
}

TEST_CASE("irc_gap examples") {
    Rng rng(37);
    const Matrix p = oracle::random_matrix(rng, 6, 4);
    const RelationshipMatrix r{oracle::random_matrix(rng, 4, 3), 0, RelationSpace::semantic};
    CHECK(irc_gap(protos(p), r, r) == 0.0);
    const RelationshipMatrix twice{2.0 * r.coefficients, 0, RelationSpace::feature};
    CHECK(std::abs(irc_gap(protos(p), twice, r) - 1.0) <= 1e-14);
    const RelationshipMatrix perturbed{r.coefficients + 0.1 * oracle::random_matrix(rng, 4, 3), 0,
                                       RelationSpace::feature};
    const Matrix diff = oracle::naive_matmul(p, perturbed.coefficients) - oracle::naive_matmul(p, r.coefficients);
    const double ref = diff.norm() / oracle::naive_matmul(p, r.coefficients).norm();
    CHECK(std::abs(irc_gap(protos(p), perturbed, r) - ref) <= 1e-12);
}

TEST_CASE("projection examples") {
    const Matrix ks{{1, 0}, {0, 1}, {0, 0}};
    const auto e = embeds(ks, "s");
    const auto d = project_onto_seen_span(e, Vector{{1, 2, 3}});
    CHECK((d.projection - Vector{{1, 2, 0}}).norm() <= 1e-14);
    CHECK((d.residual - Vector{{0, 0, 3}}).norm() <= 1e-14);
    CHECK((d.coefficients - Vector{{1, 2}}).norm() <= 1e-14);

    const auto in_span = project_onto_seen_span(e, Vector{{-2, 5, 0}});
    CHECK(in_span.residual.norm() <= 1e-14);
}

TEST_CASE("projection of a rank-deficient span is orthogonal and reconstructs") {
    Rng rng(38);
    for (int t = 0; t < 10; ++t) {
        const Matrix ks = oracle::random_matrix(rng, 6, 3) * oracle::random_matrix(rng, 3, 5);  // rank 3
        const Vector ku = oracle::random_matrix(rng, 6, 1);
        const auto d = project_onto_seen_span(embeds(ks, "s"), ku);
        CHECK((d.projection + d.residual - ku).norm() <= 1e-10 * ku.norm());
        for (Index j = 0; j < ks.cols(); ++j) {
            CHECK(std::abs(d.residual.dot(ks.col(j))) <= 1e-8 * d.residual.norm() * ks.col(j).norm() + 1e-14);
        }
        CHECK((ks * d.coefficients - d.projection).norm() <= 1e-10 * ku.norm());
        // Minimum norm: the coefficients have no component in the null space of K_s.
        const Eigen::FullPivLU<Matrix> lu(ks);
        const Matrix null = lu.kernel();
        CHECK((null.transpose() * d.coefficients).norm() <= 1e-10 * d.coefficients.norm());
    }
}

TEST_CASE("preinspect flags an orthogonal-difference pair") {
    const Matrix ks{{1, 0}, {0, 1}, {0, 0}, {0, 0}};
    Matrix ku(4, 3);
    ku << 0.5, 0.5, 0.1, 0.2, 0.2, 0.9, 1.0, -1.0, 0.0, 0.0, 2.0, 0.3;
    const auto r = preinspect(embeds(ks, "s"), embeds(ku, "u"), DefectThreshold::absolute(1e-12));
    REQUIRE(r.flagged_pairs.size() == 1);
    CHECK(r.flagged_pairs[0].first == "u0");
    CHECK(r.flagged_pairs[0].second == "u1");
    CHECK(r.pairwise_distances(0, 1) == 0.0);
    CHECK(r.epsilon == 1e-12);
}

TEST_CASE("preinspect on in-span unseen embeddings keeps raw distances") {
    Rng rng(39);
    const Matrix ks = oracle::random_matrix(rng, 5, 4);
    const Matrix ku = ks.leftCols(3);
    const auto r = preinspect(embeds(ks, "s"), embeds(ku, "u"), DefectThreshold::absolute(0.0));
    CHECK(r.flagged_pairs.empty());
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j)
            CHECK(std::abs(r.pairwise_distances(i, j) - (ku.col(i) - ku.col(j)).norm()) <= 1e-10);
}

TEST_CASE("preinspect distance matrix is a metric") {
    Rng rng(40);
    const Matrix ks = oracle::random_matrix(rng, 8, 4);
    const Matrix ku = oracle::random_matrix(rng, 8, 7);
    const auto r = preinspect(embeds(ks, "s"), embeds(ku, "u"));
    const Matrix& d = r.pairwise_distances;
    for (Index i = 0; i < 7; ++i) {
        CHECK(d(i, i) == 0.0);
        for (Index j = 0; j < 7; ++j) {
            CHECK(d(i, j) == d(j, i));
            for (Index k = 0; k < 7; ++k) CHECK(d(i, k) <= d(i, j) + d(j, k) + 1e-12);
        }
    }
    for (const auto& f : r.flagged_pairs) CHECK(f.distance <= r.epsilon);
}

TEST_CASE("relative epsilon scales with the median distance") {
    Rng rng(41);
    const Matrix ks = oracle::random_matrix(rng, 6, 3);
    const Matrix ku = oracle::random_matrix(rng, 6, 4);
    const auto r = preinspect(embeds(ks, "s"), embeds(ku, "u"), DefectThreshold::relative_to_median(0.5));
    std::vector<double> upper;
    for (Index i = 0; i < 4; ++i)
        for (Index j = i + 1; j < 4; ++j) upper.push_back(r.pairwise_distances(i, j));
    std::sort(upper.begin(), upper.end());
    const double median = 0.5 * (upper[2] + upper[3]);
    CHECK(r.epsilon == doctest::Approx(0.5 * median).epsilon(1e-15));
}

TEST_CASE("low-rank seen span collapses many unseen projections") {
    // 312-dim space, 10 seen classes spanning a 10-dim subspace, 190 unseen classes
    // that mostly live outside it.
    Rng rng(42);
    const Matrix ks = oracle::random_matrix(rng, 312, 10);
    Matrix ku = oracle::random_matrix(rng, 312, 190);
    const Matrix coarse = oracle::random_matrix(rng, 10, 4);
    for (Index c = 0; c < 190; ++c) {
        // Unseen classes share one of four in-span anchors plus an out-of-span part.
        const Vector anchor = ks * coarse.col(c % 4);
        const auto d = project_onto_seen_span(embeds(ks, "s"), ku.col(c));
        ku.col(c) = anchor + d.residual;
    }
    const auto r = preinspect(embeds(ks, "s"), embeds(ku, "u"), DefectThreshold::relative_to_median(1e-3));
    const double pairs = 190.0 * 189.0 / 2.0;
    CHECK(static_cast<double>(r.flagged_pairs.size()) / pairs > 0.2);
}

TEST_CASE("consistent data: f_s maps unseen prototypes to the scaled seen-span projection") {
    SynthConfig c;  // d 30, p 10, k 15, l 5, zero noise
    c.seed = 3;
    const auto data = generate(c);
    const auto& split = data.split;
    const auto ks = data.embeddings.select(split.seen());
    const auto ku = data.embeddings.select(split.unseen());
    const auto map = solve_ridge_map(data.train.features().data(), ks.data(),
                                     build_label_matrix(data.train.labels(), split.seen()), 1e-10, 1e-10);
    const Index r = seen_span_rank(c);
    const double scale = 2.0 * static_cast<double>(r) / static_cast<double>(c.k);
    const Matrix seen_means = data.feature_prototypes.leftCols(c.k);
    const Matrix seen_pred = predict_semantic(map, seen_means);
    CHECK((seen_pred - scale * ks.data()).norm() <= 1e-6 * (scale * ks.data()).norm());
    const Matrix unseen_pred = predict_semantic(map, data.feature_prototypes.rightCols(c.l));
    for (Index i = 0; i < c.l; ++i) {
        const Vector u = project_onto_seen_span(ks, ku.data().col(i)).projection;
        CHECK((unseen_pred.col(i) - scale * u).norm() <= 1e-8 * (scale * u).norm());
    }
}

TEST_CASE("equal projections give equal scores for any input") {
    SynthConfig c;
    c.d = 40;
    c.p = 20;
    c.k = 8;
    c.l = 6;
    c.defect_pairs = 2;
    c.noise_sigma = 0.1;
    c.seed = 4;
    const auto data = generate(c);
    const auto ks = data.embeddings.select(data.split.seen());
    const auto ku = data.embeddings.select(data.split.unseen());
    const auto map = solve_ridge_map(data.train.features().data(), ks.data(),
                                     build_label_matrix(data.train.labels(), data.split.seen()), 1.0, 1.0);
    Rng probe(99);
    const Matrix pred = predict_semantic(map, oracle::random_matrix(probe, 40, 30));
    for (const auto& [a, b] : data.defect_pairs) {
        const Vector ka = ku.data().col(ku.index_of(a));
        const Vector kb = ku.data().col(ku.index_of(b));
        for (Index j = 0; j < pred.cols(); ++j) {
            const double diff = std::abs(pred.col(j).dot(ka) - pred.col(j).dot(kb));
            CHECK(diff <= 1e-9 * pred.col(j).norm() * std::max(ka.norm(), kb.norm()));
        }
    }
}

}  // TEST_SUITE
