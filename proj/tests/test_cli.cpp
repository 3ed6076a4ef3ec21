#include "dmap/cli.hpp"
#include "dmap/diagnostics.hpp"
#include "dmap/io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <iostream>
#include <sstream>

using namespace dmap;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dmap");
    // Silence the structured error line on stderr.
    std::stringstream sink;
    auto* old = std::cerr.rdbuf(sink.rdbuf());
    auto previous = set_warning_handler([](const std::string&) {});
    const int code = run_cli(args);
    set_warning_handler(previous);
    std::cerr.rdbuf(old);
    return code;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::stringstream in(io::read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("pipeline on the exact preset reports 1.0 at every iteration") {
    oracle::TempDir dir("cli");
    io::write_text(R"({"d": 30, "p": 10, "k": 15, "l": 5, "n_per_class": 20, "seed": 1})", dir / "synth.json");
    io::write_text(R"({"gamma": 1e-10, "eta": 1e-10, "lambda": 1e-6, "m": 20, "test_max_iter": 3})",
                   dir / "run.json");
    REQUIRE(cli({"synth", "--config", (dir / "synth.json").string(), "--out-dir", (dir / "data").string()}) == 0);
    REQUIRE(cli({"pipeline", "--config", (dir / "run.json").string(), "--data-dir", (dir / "data").string(),
                 "--out-dir", (dir / "out").string()}) == 0);
    const auto rows = read_csv(dir / "out" / "summary.csv");
    REQUIRE(rows.size() == 9);
    CHECK(rows[0] == std::vector<std::string>{"iteration", "mode", "mean_per_class_acc", "top1", "cm", "irc_gap"});
    int czsr_rows = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i][1] != "czsr") continue;
        ++czsr_rows;
        CHECK(rows[i][2] == "1");
        CHECK(rows[i][3] == "1");
    }
    CHECK(czsr_rows == 4);
}

TEST_CASE("preinspect flags the single defect pair") {
    oracle::TempDir dir("cli");
    io::write_text(R"({"d": 40, "p": 20, "k": 8, "l": 6, "defect_pairs": 1, "seed": 5})", dir / "synth.json");
    REQUIRE(cli({"synth", "--config", (dir / "synth.json").string(), "--out-dir", (dir / "data").string()}) == 0);
    // Split the embedding file into seen and unseen parts.
    const auto k = io::load_embeddings(dir / "data" / "embeddings.mat");
    const auto split = io::split_from_json(io::load_json(dir / "data" / "split.json"));
    io::save_embeddings(k.select(split.seen()), dir / "ks.mat");
    io::save_embeddings(k.select(split.unseen()), dir / "ku.mat");
    REQUIRE(cli({"preinspect", "--kseen", (dir / "ks.mat").string(), "--kunseen", (dir / "ku.mat").string(),
                 "--out", (dir / "report.json").string()}) == 0);
    const auto report = io::load_json(dir / "report.json");
    REQUIRE(report["flagged_pairs"].size() == 1);
    CHECK(report["flagged_pairs"][0]["first"] == "u0");
    CHECK(report["flagged_pairs"][0]["second"] == "u1");
    CHECK(fs::exists(dir / "report.distances.csv"));
}

TEST_CASE("eval on a hand-written three-instance prediction") {
    oracle::TempDir dir("cli");
    io::write_text(R"({
  "mode": "czsr",
  "instance_ids": ["x0", "x1", "x2"],
  "candidates": ["a", "b"],
  "unseen_classes": ["a", "b"],
  "predicted": ["a", "b", "a"],
  "scores": [[0.9, 0.2, 0.6], [0.1, 0.8, 0.4]]
})",
                   dir / "pred.json");
    io::write_text("a\nb\nb\n", dir / "truth.txt");
    REQUIRE(cli({"eval", "--pred", (dir / "pred.json").string(), "--truth", (dir / "truth.txt").string(), "--mode",
                 "czsr", "--topk", "1,2", "--out", (dir / "report.json").string()}) == 0);
    const auto r = io::load_json(dir / "report.json");
    // a: 1/1 correct; b: 1/2 correct.
    CHECK(r["mean_per_class_accuracy"].get<double>() == 0.75);
    CHECK(r["top1"].get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(r["top_k_accuracy"]["2"].get<double>() == 1.0);
    CHECK(io::read_text(dir / "report.confusion.csv") == "true\\predicted,a,b\na,1,0\nb,1,1\n");
}

TEST_CASE("train, predict, eval and cm through the command line") {
    oracle::TempDir dir("cli");
    io::write_text(R"({"d": 20, "p": 10, "k": 20, "l": 8, "n_per_class": 30, "noise_sigma": 0.5,
                       "irc_distortion": 0.5, "feature_scale": 1.5, "seed": 3})",
                   dir / "synth.json");
    io::write_text(R"({"gamma": 1, "eta": 1, "m": 20})", dir / "run.json");
    const auto d = dir / "data";
    REQUIRE(cli({"synth", "--config", (dir / "synth.json").string(), "--out-dir", d.string()}) == 0);
    REQUIRE(cli({"train", "--features", (d / "train_features.mat").string(), "--labels",
                 (d / "train_labels.txt").string(), "--split", (d / "split.json").string(), "--embeddings",
                 (d / "embeddings.mat").string(), "--config", (dir / "run.json").string(), "--model-dir",
                 (dir / "model").string()}) == 0);
    REQUIRE(cli({"predict", "--model-dir", (dir / "model").string(), "--test-features",
                 (d / "test_features.mat").string(), "--embeddings", (d / "embeddings.mat").string(), "--split",
                 (d / "split.json").string(), "--out", (dir / "pred.json").string()}) == 0);
    CHECK(fs::exists(dir / "pred.k_tilde_u.mat"));
    CHECK(fs::exists(dir / "pred.k_tilde_u.mat.ids"));
    REQUIRE(cli({"eval", "--pred", (dir / "pred.json").string(), "--truth", (d / "test_labels.txt").string(),
                 "--out", (dir / "eval.json").string()}) == 0);
    CHECK(io::load_json(dir / "eval.json")["mean_per_class_accuracy"].get<double>() > 0.5);

    REQUIRE(cli({"predict", "--model-dir", (dir / "model").string(), "--test-features",
                 (d / "test_features.mat").string(), "--embeddings", (d / "embeddings.mat").string(), "--split",
                 (d / "split.json").string(), "--inductive", "--mode", "gzsr", "--out",
                 (dir / "ind.json").string()}) == 0);
    CHECK(!fs::exists(dir / "ind.k_tilde_u.mat"));
    CHECK(io::load_json(dir / "ind.json")["candidates"].size() == 28);

    // cm needs instances of both seen and unseen classes.
    Matrix x(20, 840);
    x << io::load_matrix(d / "train_features.mat"), io::load_matrix(d / "test_features.mat");
    io::save_matrix(x, dir / "all.mat");
    auto labels = io::load_id_list(d / "train_labels.txt");
    const auto test_labels = io::load_id_list(d / "test_labels.txt");
    labels.insert(labels.end(), test_labels.begin(), test_labels.end());
    io::save_id_list(labels, dir / "all.txt");
    REQUIRE(cli({"cm", "--features", (dir / "all.mat").string(), "--labels", (dir / "all.txt").string(), "--split",
                 (d / "split.json").string(), "--embeddings", (d / "embeddings.mat").string(), "--out",
                 (dir / "cm.json").string()}) == 0);
    const double cm = io::load_json(dir / "cm.json")["cm"].get<double>();
    CHECK(cm > 0.0);
    CHECK(cm <= 1.0);
}

TEST_CASE("exit codes") {
    oracle::TempDir dir("cli");
    CHECK(cli({}) == kExitValidation);
    CHECK(cli({"bogus"}) == kExitValidation);
    CHECK(cli({"eval", "--pred", "x.json"}) == kExitValidation);
    CHECK(cli({"preinspect", "--kseen", (dir / "none.mat").string(), "--kunseen", (dir / "none.mat").string(),
               "--out", (dir / "r.json").string()}) == kExitIo);
    io::write_text("dmap-matrix 1 2 2\n1 2\n", dir / "bad.mat");
    CHECK(cli({"preinspect", "--kseen", (dir / "bad.mat").string(), "--kunseen", (dir / "bad.mat").string(),
               "--out", (dir / "r.json").string()}) == kExitValidation);
    CHECK(!fs::exists(dir / "r.json"));

    // Unregularized training on rank-deficient features is a numerical failure.
    io::write_text("dmap-matrix 1 3 4\n1 2 3 4\n2 4 6 8\n0 0 0 0\n", dir / "x.mat");
    io::save_id_list({"a", "b", "a", "b"}, dir / "y.txt");
    io::write_text(R"({"seen": ["a", "b"], "unseen": ["c"]})", dir / "split.json");
    io::save_embeddings(EmbeddingMatrix(Matrix::Identity(3, 3), {"a", "b", "c"}), dir / "k.mat");
    CHECK(cli({"train", "--features", (dir / "x.mat").string(), "--labels", (dir / "y.txt").string(), "--split",
               (dir / "split.json").string(), "--embeddings", (dir / "k.mat").string(), "--gamma", "0",
               "--model-dir", (dir / "model").string()}) == kExitNumerical);
    CHECK(cli({"train", "--features", (dir / "x.mat").string(), "--labels", (dir / "y.txt").string(), "--split",
               (dir / "split.json").string(), "--embeddings", (dir / "k.mat").string(), "--m", "0", "--model-dir",
               (dir / "model").string()}) == kExitValidation);
}

TEST_CASE("flags override the config file") {
    oracle::TempDir dir("cli");
    io::write_text(R"({"d": 30, "p": 10, "k": 15, "l": 5, "seed": 2})", dir / "synth.json");
    io::write_text(R"({"m": 20, "gamma": 1e-10, "eta": 1e-10, "lambda": 1e-6, "test_max_iter": 1})",
                   dir / "run.json");
    const auto d = dir / "data";
    REQUIRE(cli({"synth", "--config", (dir / "synth.json").string(), "--out-dir", d.string()}) == 0);
    REQUIRE(cli({"pipeline", "--config", (dir / "run.json").string(), "--data-dir", d.string(), "--out-dir",
                 (dir / "out").string(), "--test-max-iter", "2"}) == 0);
    CHECK(read_csv(dir / "out" / "summary.csv").size() == 7);
}

TEST_CASE("commands are byte-identical across runs and do not touch inputs") {
    oracle::TempDir dir("cli");
    io::write_text(R"({"d": 20, "p": 10, "k": 12, "l": 4, "n_per_class": 15, "noise_sigma": 0.3, "seed": 8})",
                   dir / "synth.json");
    io::write_text(R"({"gamma": 1, "eta": 1, "m": 10})", dir / "run.json");
    for (const char* run : {"a", "b"}) {
        REQUIRE(cli({"synth", "--config", (dir / "synth.json").string(), "--out-dir",
                     (dir / (std::string("data_") + run)).string()}) == 0);
    }
    const std::string before = io::read_text(dir / "data_a" / "train_features.mat");
    for (const char* run : {"a", "b"}) {
        REQUIRE(cli({"pipeline", "--config", (dir / "run.json").string(), "--data-dir", (dir / "data_a").string(),
                     "--out-dir", (dir / (std::string("out_") + run)).string(), "--threads",
                     run[0] == 'a' ? "1" : "3"}) == 0);
    }
    for (const auto& entry : fs::directory_iterator(dir / "data_a")) {
        const auto name = entry.path().filename();
        CHECK(io::read_text(entry.path()) == io::read_text(dir / "data_b" / name));
    }
    CHECK(io::read_text(dir / "out_a" / "summary.csv") == io::read_text(dir / "out_b" / "summary.csv"));
    CHECK(io::read_text(dir / "data_a" / "train_features.mat") == before);
}

}  // TEST_SUITE
