#include "dmap/pipeline.hpp"

#include "dmap/consistency.hpp"
#include "dmap/error.hpp"
#include "dmap/eval.hpp"

#include <system_error>

namespace dmap {
namespace {

namespace fs = std::filesystem;

fs::path existing(const fs::path& dir, const std::string& name) {
    const fs::path plain = dir / name;
    if (fs::exists(plain)) return plain;
    const fs::path gz = dir / (name + ".gz");
    if (fs::exists(gz)) return gz;
    throw IoError("missing data file '" + plain.string() + "'");
}

// Feature-space relationships of the unseen class means against the seen
// class means, compared with relationships of the scoring prototypes.
std::pair<double, double> consistency(const PrototypeSet& seen_means, const PrototypeSet& unseen_means,
                                      const PrototypeSet& seen_protos, const PrototypeSet& unseen_protos,
                                      double lambda) {
    const auto rx = build_relationship_matrix(seen_means, unseen_means, lambda, RelationSpace::feature);
    const auto rk = build_relationship_matrix(seen_protos, unseen_protos, lambda, RelationSpace::semantic);
    return {consistency_measure(seen_means, rx, rk), irc_gap(seen_means, rx, rk)};
}

PipelineRow make_row(int iteration, const Prediction& prediction, const ClassList& truth, RecognitionMode mode,
                     std::pair<double, double> cm) {
    static constexpr int kTop1[] = {1};
    const EvalReport report = evaluate(prediction, truth, mode, kTop1);
    return PipelineRow{iteration, mode, report.mean_per_class_accuracy, report.top1, cm.first, cm.second};
}

}  // namespace

FeatureMatrix load_features(const fs::path& path) {
    Matrix data = io::load_matrix(path);
    if (fs::exists(io::ids_path(path))) {
        auto ids = io::load_id_list(io::ids_path(path));
        if (static_cast<Index>(ids.size()) != data.cols()) {
            throw ShapeMismatch(path.string() + ": " + std::to_string(data.cols()) + " columns but " +
                                std::to_string(ids.size()) + " instance ids");
        }
        return FeatureMatrix(std::move(data), std::move(ids));
    }
    return FeatureMatrix(std::move(data));
}

DataBundle load_data_dir(const fs::path& dir) {
    FeatureMatrix train_x = load_features(existing(dir, "train_features.mat"));
    ClassList train_labels = io::load_id_list(existing(dir, "train_labels.txt"));
    ClassSplit split = io::split_from_json(io::load_json(existing(dir, "split.json")));
    EmbeddingMatrix embeddings = io::load_embeddings(existing(dir, "embeddings.mat"));
    FeatureMatrix test_x = load_features(existing(dir, "test_features.mat"));
    ClassList test_labels = io::load_id_list(existing(dir, "test_labels.txt"));
    if (static_cast<Index>(test_labels.size()) != test_x.size()) {
        throw MissingInstance("test_labels.txt has " + std::to_string(test_labels.size()) + " ids for " +
                              std::to_string(test_x.size()) + " test instances");
    }
    if (test_x.dim() != train_x.dim()) {
        throw DimensionMismatch("train features have dimension " + std::to_string(train_x.dim()) +
                                ", test features " + std::to_string(test_x.dim()));
    }
    return DataBundle{LabeledDataset(std::move(train_x), std::move(train_labels), std::move(split),
                                     std::move(embeddings)),
                      std::move(test_x), std::move(test_labels)};
}

void save_data_dir(const SynthDataset& data, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    io::save_matrix(data.train.features().data(), dir / "train_features.mat");
    io::save_id_list(data.train.labels(), dir / "train_labels.txt");
    io::save_matrix(data.test_features.data(), dir / "test_features.mat");
    io::save_id_list(data.test_labels, dir / "test_labels.txt");
    io::save_embeddings(data.embeddings, dir / "embeddings.mat");
    io::save_json(io::to_json(data.split), dir / "split.json");
}

std::vector<PipelineRow> run_pipeline(const DataBundle& data, const io::RunConfig& config) {
    const DmapConfig& base = config.dmap;
    base.validate();
    const LabeledDataset& train_set = data.train;
    const ClassSplit& split = train_set.split();
    const EmbeddingMatrix seen_k = train_set.semantic().select(split.seen());
    const EmbeddingMatrix unseen_k = train_set.semantic().select(split.unseen());

    for (const auto& label : data.test_labels) {
        if (!unseen_k.contains(label)) throw UnknownClass("test label '" + label + "' is not an unseen class");
    }

    const PrototypeSet seen_means =
        class_mean_prototypes(train_set.features(), train_set.labels(), split.seen());
    const PrototypeSet unseen_means = class_mean_prototypes(data.test_features, data.test_labels, split.unseen());

    const RecognitionMode modes[] = {RecognitionMode::czsr, RecognitionMode::gzsr};
    std::vector<PipelineRow> rows;

    const DmapModel model = train(train_set, base);
    const auto cm0 = consistency(seen_means, unseen_means, PrototypeSet::from_embeddings(seen_k),
                                 PrototypeSet::from_embeddings(unseen_k), base.lambda);
    for (const auto mode : modes) {
        rows.push_back(
            make_row(0, infer_inductive(model, data.test_features, unseen_k, seen_k, mode), data.test_labels, mode,
                     cm0));
    }

    const int iterations = base.test_max_iter;
    if (config.couple_iterations) {
        for (int t = 1; t <= iterations; ++t) {
            DmapConfig c = base;
            c.train_max_iter = t;
            const DmapModel coupled = train(train_set, c);
            for (const auto mode : modes) {
                const auto result = infer_transductive(coupled, data.test_features, unseen_k, mode, t);
                const auto cm = consistency(seen_means, unseen_means, coupled.k_tilde_s, result.k_tilde_u,
                                            base.lambda);
                rows.push_back(make_row(t, result.prediction, data.test_labels, mode, cm));
            }
        }
    } else if (iterations > 0) {
        for (const auto mode : modes) {
            const auto result = infer_transductive(model, data.test_features, unseen_k, mode, iterations);
            for (int t = 1; t <= iterations; ++t) {
                const auto& step = result.history[static_cast<std::size_t>(t - 1)];
                const auto cm =
                    consistency(seen_means, unseen_means, model.k_tilde_s, step.k_tilde_u, base.lambda);
                rows.push_back(make_row(t, step.prediction, data.test_labels, mode, cm));
            }
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PipelineRow& a, const PipelineRow& b) {
        return a.iteration != b.iteration ? a.iteration < b.iteration : a.mode < b.mode;
    });
    return rows;
}

std::string pipeline_csv(const std::vector<PipelineRow>& rows) {
    std::string out = std::string(kPipelineCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.iteration) + "," + to_string(r.mode) + "," + io::format_double(r.mean_per_class_acc) +
               "," + io::format_double(r.top1) + "," + io::format_double(r.cm) + "," + io::format_double(r.irc_gap) +
               "\n";
    }
    return out;
}

}  // namespace dmap
