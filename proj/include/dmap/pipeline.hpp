#pragma once

#include "dmap/io.hpp"
#include "dmap/model.hpp"
#include "dmap/synthgen.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dmap {

/// Everything `pipeline` reads from a data directory.
struct DataBundle {
    LabeledDataset train;
    FeatureMatrix test_features;
    ClassList test_labels;
};

// Data directory layout (each matrix may also be stored as "<name>.gz"):
//   train_features.mat   d x n_train       train_labels.txt   one class id per line
//   test_features.mat    d x n_test        test_labels.txt    one class id per line
//   embeddings.mat       p x c (+ .ids)    split.json         {"seen": [...], "unseen": [...]}
DataBundle load_data_dir(const std::filesystem::path& dir);
void save_data_dir(const SynthDataset& data, const std::filesystem::path& dir);

/// Matrix with its instance ids from "<path>.ids" when present.
FeatureMatrix load_features(const std::filesystem::path& path);

struct PipelineRow {
    int iteration = 0;  // 0 = inductive, t >= 1 = t transductive test iterations
    RecognitionMode mode = RecognitionMode::czsr;
    double mean_per_class_acc = 0.0;
    double top1 = 0.0;
    double cm = 0.0;
    double irc_gap = 0.0;
};

/// Rows for both modes: iteration 0 scores with f_s and the given embeddings,
/// iterations 1..test_max_iter with f_tilde and the constructed prototypes.
/// cm and irc_gap compare class-mean feature relationships against those of the
/// prototypes used for scoring.
std::vector<PipelineRow> run_pipeline(const DataBundle& data, const io::RunConfig& config);

inline constexpr const char* kPipelineCsvHeader = "iteration,mode,mean_per_class_acc,top1,cm,irc_gap";
std::string pipeline_csv(const std::vector<PipelineRow>& rows);

}  // namespace dmap
