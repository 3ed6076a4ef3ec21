#pragma once

#include "dmap/consistency.hpp"
#include "dmap/eval.hpp"
#include "dmap/model.hpp"
#include "dmap/synthgen.hpp"
#include "dmap/types.hpp"

#include <filesystem>
#include <string>

#include <json.hpp>

namespace dmap::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kMatrixMagic = "dmap-matrix 1";

// Matrix text format:
//
//   dmap-matrix 1 <rows> <cols>
//   <cols space-separated values>      (rows lines)
//
// Values use the shortest decimal form that parses back to the same double.
// Paths ending in ".gz" are read and written through gzip.

std::string format_matrix(const Matrix& m);
/// `source` names the input in error messages.
Matrix parse_matrix(const std::string& text, const std::string& source = "<matrix>");

void save_matrix(const Matrix& m, const fs::path& path);
Matrix load_matrix(const fs::path& path);

/// Shortest round-trip decimal form of a finite double.
std::string format_double(double value);

/// One id per line.
std::vector<std::string> load_id_list(const fs::path& path);
void save_id_list(const std::vector<std::string>& ids, const fs::path& path);

/// Class ids of an embedding file live in "<path>.ids"; without it the ids
/// are "0", "1", ...
fs::path ids_path(const fs::path& matrix_path);
EmbeddingMatrix load_embeddings(const fs::path& path);
void save_embeddings(const EmbeddingMatrix& embeddings, const fs::path& path);

std::string read_text(const fs::path& path);
void write_text(const std::string& text, const fs::path& path);
json load_json(const fs::path& path);
/// Pretty-printed with a trailing newline.
void save_json(const json& value, const fs::path& path);

// {"seen": [...], "unseen": [...]}
ClassSplit split_from_json(const json& j);
json to_json(const ClassSplit& split);

/// Everything a run can be configured with; unknown keys are rejected.
struct RunConfig {
    DmapConfig dmap;
    DefectThreshold epsilon;  // relative to the median distance unless set explicitly
    std::uint64_t seed = 0;
    bool couple_iterations = true;
};

RunConfig run_config_from_json(const json& j, RunConfig base = {});
json to_json(const RunConfig& config);

SynthConfig synth_config_from_json(const json& j, SynthConfig base = {});
json to_json(const SynthConfig& config);

json to_json(const DefectReport& report);
/// Pairwise projection distances with class ids as header row and column.
std::string distance_csv(const DefectReport& report);
json to_json(const EvalReport& report);
std::string confusion_csv(const EvalReport& report);

json to_json(const Prediction& prediction);
Prediction prediction_from_json(const json& j);

/// Directory layout: f_s.mat, f_tilde.mat, k_tilde_s.mat (+ .ids),
/// feature_mean.mat when centering, model.json with config and metadata.
void save_model(const DmapModel& model, const fs::path& dir);
DmapModel load_model(const fs::path& dir);

}  // namespace dmap::io
