#include "dmap/cli.hpp"

#include "dmap/consistency.hpp"
#include "dmap/error.hpp"
#include "dmap/eval.hpp"
#include "dmap/io.hpp"
#include "dmap/model.hpp"
#include "dmap/pipeline.hpp"
#include "dmap/synthgen.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

namespace dmap {
namespace {

namespace fs = std::filesystem;
using io::json;

// Flags that override RunConfig fields; unset flags leave the config alone.
struct RunOverrides {
    std::optional<double> lambda, gamma, eta, convergence_tol, epsilon;
    std::optional<Index> m;
    std::optional<int> train_max_iter, test_max_iter;
    std::optional<std::string> mode, test_refinement;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool normalize = false;
    bool center = false;

    void add_to(CLI::App& cmd, bool model_flags) {
        cmd.add_option("--threads", threads, "Worker threads (0 = all cores)");
        cmd.add_option("--m", m, "Neighbors per prototype");
        cmd.add_option("--mode", mode, "czsr or gzsr");
        cmd.add_option("--test-max-iter", test_max_iter, "Transductive test iterations");
        cmd.add_option("--test-refinement", test_refinement, "refine or rejump");
        cmd.add_option("--seed", seed, "Recorded run seed");
        if (model_flags) {
            cmd.add_option("--lambda", lambda, "Relationship ridge strength");
            cmd.add_option("--gamma", gamma, "Feature-side ridge strength");
            cmd.add_option("--eta", eta, "Embedding-side ridge strength");
            cmd.add_option("--train-max-iter", train_max_iter, "Training refinement iterations");
            cmd.add_option("--convergence-tol", convergence_tol, "Relative prototype change that stops training");
            cmd.add_option("--epsilon", epsilon, "Absolute defect threshold");
            cmd.add_flag("--normalize", normalize, "Unit-normalize features and embeddings");
            cmd.add_flag("--center", center, "Subtract the training feature mean");
        }
    }

    void apply(io::RunConfig& c) const {
        auto& d = c.dmap;
        if (lambda) d.lambda = *lambda;
        if (gamma) d.gamma = *gamma;
        if (eta) d.eta = *eta;
        if (convergence_tol) d.convergence_tol = *convergence_tol;
        if (m) d.m = *m;
        if (train_max_iter) d.train_max_iter = *train_max_iter;
        if (test_max_iter) d.test_max_iter = *test_max_iter;
        if (mode) d.mode = parse_mode(*mode);
        if (test_refinement) d.test_refinement = parse_refinement(*test_refinement);
        if (threads) d.threads = *threads;
        if (normalize) d.normalize = true;
        if (center) d.center = true;
        if (epsilon) c.epsilon = DefectThreshold::absolute(*epsilon);
        if (seed) c.seed = *seed;
        d.validate();
    }
};

io::RunConfig resolve_config(const std::string& path, const RunOverrides& flags, io::RunConfig base = {}) {
    io::RunConfig c = path.empty() ? base : io::run_config_from_json(io::load_json(path), std::move(base));
    flags.apply(c);
    return c;
}

std::vector<int> parse_topk(const std::string& text) {
    std::vector<int> ks;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            const int k = std::stoi(item, &used);
            if (used != item.size() || k < 1) throw std::invalid_argument(item);
            ks.push_back(k);
        } catch (const std::logic_error&) {
            throw InvalidArgument("--topk expects comma-separated positive integers, got '" + text + "'");
        }
    }
    if (ks.empty()) throw InvalidArgument("--topk is empty");
    return ks;
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
    fs::path p = out;
    p.replace_extension();
    return fs::path(p.string() + suffix);
}

const char* kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::validation: return "validation";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

int report_failure(const char* kind, const std::string& message, int code) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
    return code;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::validation: return kExitValidation;
        case ErrorKind::numerical: return kExitNumerical;
        case ErrorKind::io: return kExitIo;
    }
    return kExitValidation;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Zero-shot recognition with dual visual-semantic mapping paths", "dmap"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dmap 1.0.0");

    // preinspect
    std::string kseen, kunseen, out;
    std::optional<double> epsilon, epsilon_relative;
    auto* pre = app.add_subcommand("preinspect", "Flag unseen classes with equal projections onto span(K_s)");
    pre->add_option("--kseen", kseen, "Seen embedding matrix")->required();
    pre->add_option("--kunseen", kunseen, "Unseen embedding matrix")->required();
    pre->add_option("--epsilon", epsilon, "Absolute distance threshold");
    pre->add_option("--epsilon-relative", epsilon_relative, "Threshold as a fraction of the median distance");
    pre->add_option("--out", out, "Report JSON; distances also go to <out>.distances.csv")->required();
    unsigned ignored_threads = 0;
    pre->add_option("--threads", ignored_threads, "Worker threads");

    // cm
    std::string features, labels, split_path, embeddings;
    double lambda = kDefaultLambda;
    auto* cm = app.add_subcommand("cm", "Consistency measure between feature and embedding relationships");
    cm->add_option("--features", features, "Feature matrix (d x n)")->required();
    cm->add_option("--labels", labels, "Instance labels, one per line")->required();
    cm->add_option("--split", split_path, "Split JSON")->required();
    cm->add_option("--embeddings", embeddings, "Embedding matrix (p x c)")->required();
    cm->add_option("--lambda", lambda, "Relationship ridge strength");
    cm->add_option("--out", out, "Output JSON")->required();
    cm->add_option("--threads", ignored_threads, "Worker threads");

    // train
    std::string config_path, model_dir;
    RunOverrides train_flags;
    auto* tr = app.add_subcommand("train", "Learn f_s, the refined seen prototypes and f_tilde");
    tr->add_option("--features", features, "Feature matrix (d x n)")->required();
    tr->add_option("--labels", labels, "Instance labels, one per line")->required();
    tr->add_option("--split", split_path, "Split JSON")->required();
    tr->add_option("--embeddings", embeddings, "Embedding matrix (p x c)")->required();
    tr->add_option("--config", config_path, "Run config JSON");
    tr->add_option("--model-dir", model_dir, "Output model directory")->required();
    train_flags.add_to(*tr, true);

    // predict
    std::string test_features;
    bool inductive = false;
    RunOverrides predict_flags;
    auto* pr = app.add_subcommand("predict", "Label test instances with a trained model");
    pr->add_option("--model-dir", model_dir, "Model directory")->required();
    pr->add_option("--test-features", test_features, "Test feature matrix")->required();
    pr->add_option("--embeddings", embeddings, "Embedding matrix (p x c)")->required();
    pr->add_option("--split", split_path, "Split JSON")->required();
    pr->add_option("--config", config_path, "Run config JSON; inference keys override the model's");
    pr->add_flag("--inductive", inductive, "Score with f_s and the given embeddings");
    pr->add_option("--out", out, "Prediction JSON")->required();
    predict_flags.add_to(*pr, false);

    // eval
    std::string pred_path, truth, mode_text = "czsr", topk = "1,5", confusion_out;
    auto* ev = app.add_subcommand("eval", "Score a prediction file against ground truth");
    ev->add_option("--pred", pred_path, "Prediction JSON")->required();
    ev->add_option("--truth", truth, "True class per instance, one per line")->required();
    ev->add_option("--mode", mode_text, "czsr or gzsr");
    ev->add_option("--topk", topk, "Comma-separated k values");
    ev->add_option("--out", out, "Report JSON")->required();
    ev->add_option("--confusion-csv", confusion_out, "Confusion matrix CSV (default: <out>.confusion.csv)");
    ev->add_option("--threads", ignored_threads, "Worker threads");

    // synth
    std::string out_dir;
    std::optional<std::uint64_t> synth_seed;
    auto* sy = app.add_subcommand("synth", "Generate a synthetic dataset");
    sy->add_option("--config", config_path, "Synth config JSON");
    sy->add_option("--seed", synth_seed, "Overrides the config seed");
    sy->add_option("--out-dir", out_dir, "Output directory")->required();
    sy->add_option("--threads", ignored_threads, "Worker threads");

    // pipeline
    std::string data_dir;
    RunOverrides pipeline_flags;
    auto* pl = app.add_subcommand("pipeline", "Train, predict and evaluate for every iteration count");
    pl->add_option("--config", config_path, "Run config JSON");
    pl->add_option("--data-dir", data_dir, "Data directory")->required();
    pl->add_option("--out-dir", out_dir, "Output directory")->required();
    pipeline_flags.add_to(*pl, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_failure("validation", e.what(), kExitValidation);
    }

    try {
        if (pre->parsed()) {
            DefectThreshold threshold;
            if (epsilon && epsilon_relative) throw InvalidArgument("give --epsilon or --epsilon-relative, not both");
            if (epsilon) threshold = DefectThreshold::absolute(*epsilon);
            if (epsilon_relative) threshold = DefectThreshold::relative_to_median(*epsilon_relative);
            const auto report = preinspect(io::load_embeddings(kseen), io::load_embeddings(kunseen), threshold);
            io::save_json(io::to_json(report), out);
            io::write_text(io::distance_csv(report), sibling(out, ".distances.csv"));
        } else if (cm->parsed()) {
            const FeatureMatrix x = load_features(features);
            const ClassList y = io::load_id_list(labels);
            const ClassSplit split = io::split_from_json(io::load_json(split_path));
            const EmbeddingMatrix k = io::load_embeddings(embeddings);
            const auto seen_means = class_mean_prototypes(x, y, split.seen());
            const auto unseen_means = class_mean_prototypes(x, y, split.unseen());
            for (const auto& label : y) {
                const auto all = split.all();
                if (std::find(all.begin(), all.end(), label) == all.end()) {
                    throw UnknownLabel("label '" + label + "' is not in the split");
                }
            }
            const auto rx = build_relationship_matrix(seen_means, unseen_means, lambda, RelationSpace::feature);
            const auto rk =
                build_relationship_matrix(PrototypeSet::from_embeddings(k.select(split.seen())),
                                          PrototypeSet::from_embeddings(k.select(split.unseen())), lambda,
                                          RelationSpace::semantic);
            io::save_json(json{{"cm", consistency_measure(seen_means, rx, rk)},
                               {"irc_gap", irc_gap(seen_means, rx, rk)},
                               {"lambda", lambda},
                               {"seen", split.seen()},
                               {"unseen", split.unseen()}},
                          out);
        } else if (tr->parsed()) {
            const io::RunConfig config = resolve_config(config_path, train_flags);
            LabeledDataset data(load_features(features), io::load_id_list(labels),
                                io::split_from_json(io::load_json(split_path)), io::load_embeddings(embeddings));
            io::save_model(train(data, config.dmap), model_dir);
        } else if (pr->parsed()) {
            const DmapModel stored = io::load_model(model_dir);
            io::RunConfig base;
            base.dmap = stored.config;
            const io::RunConfig config = resolve_config(config_path, predict_flags, base);
            DmapModel model = stored;
            model.config.m = config.dmap.m;
            model.config.mode = config.dmap.mode;
            model.config.test_max_iter = config.dmap.test_max_iter;
            model.config.test_refinement = config.dmap.test_refinement;
            model.config.threads = config.dmap.threads;

            const ClassSplit split = io::split_from_json(io::load_json(split_path));
            const EmbeddingMatrix k = io::load_embeddings(embeddings);
            const FeatureMatrix x = load_features(test_features);
            const RecognitionMode mode = model.config.mode;
            if (inductive || model.config.test_max_iter == 0) {
                const auto prediction =
                    infer_inductive(model, x, k.select(split.unseen()), k.select(split.seen()), mode);
                io::save_json(io::to_json(prediction), out);
            } else {
                const auto result =
                    infer_transductive(model, x, k.select(split.unseen()), mode, model.config.test_max_iter);
                io::save_json(io::to_json(result.prediction), out);
                const fs::path kt = sibling(out, ".k_tilde_u.mat");
                io::save_matrix(result.k_tilde_u.data(), kt);
                io::save_id_list(result.k_tilde_u.class_ids(), io::ids_path(kt));
            }
        } else if (ev->parsed()) {
            const Prediction prediction = io::prediction_from_json(io::load_json(pred_path));
            const ClassList truth_ids = io::load_id_list(truth);
            const auto ks = parse_topk(topk);
            const auto report = evaluate(prediction, truth_ids, parse_mode(mode_text), ks);
            io::save_json(io::to_json(report), out);
            io::write_text(io::confusion_csv(report),
                           confusion_out.empty() ? sibling(out, ".confusion.csv") : fs::path(confusion_out));
        } else if (sy->parsed()) {
            SynthConfig config =
                config_path.empty() ? SynthConfig{} : io::synth_config_from_json(io::load_json(config_path));
            if (synth_seed) config.seed = *synth_seed;
            save_data_dir(generate(config), out_dir);
        } else if (pl->parsed()) {
            const io::RunConfig config = resolve_config(config_path, pipeline_flags);
            const auto rows = run_pipeline(load_data_dir(data_dir), config);
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
            io::write_text(pipeline_csv(rows), fs::path(out_dir) / "summary.csv");
        }
    } catch (const Error& e) {
        return report_failure(kind_name(e.kind()), e.what(), exit_code(e.kind()));
    } catch (const std::bad_alloc&) {
        return report_failure("numerical", "out of memory", kExitNumerical);
    }
    return kExitOk;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> storage = args;
    if (storage.empty()) storage.emplace_back("dmap");
    std::vector<char*> argv;
    argv.reserve(storage.size());
    for (auto& s : storage) argv.push_back(s.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace dmap
