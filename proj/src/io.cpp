#include "dmap/io.hpp"

#include "dmap/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unordered_set>

#include <zlib.h>

namespace dmap::io {
namespace {

bool is_gzip(const fs::path& path) { return path.extension() == ".gz"; }

std::string read_gzip(const fs::path& path) {
    gzFile file = gzopen(path.c_str(), "rb");
    if (file == nullptr) throw IoError("cannot open '" + path.string() + "'");
    std::string out;
    char buffer[1 << 16];
    int got = 0;
    while ((got = gzread(file, buffer, sizeof buffer)) > 0) out.append(buffer, static_cast<std::size_t>(got));
    const bool failed = got < 0;
    gzclose(file);
    if (failed) throw IoError("cannot decompress '" + path.string() + "'");
    return out;
}

void write_gzip(const std::string& text, const fs::path& path) {
    gzFile file = gzopen(path.c_str(), "wb");
    if (file == nullptr) throw IoError("cannot write '" + path.string() + "'");
    const int wrote = text.empty() ? 0 : gzwrite(file, text.data(), static_cast<unsigned>(text.size()));
    const int closed = gzclose(file);
    if (wrote != static_cast<int>(text.size()) || closed != Z_OK) {
        throw IoError("cannot write '" + path.string() + "'");
    }
}

struct Token {
    std::string_view text;
    std::size_t column;  // 1-based
};

std::vector<Token> split_tokens(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i >= line.size()) break;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        out.push_back({line.substr(start, i - start), start + 1});
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

Index parse_extent(const Token& token, const std::string& source) {
    long long value = -1;
    const auto* end = token.text.data() + token.text.size();
    const auto [ptr, ec] = std::from_chars(token.text.data(), end, value);
    if (ec != std::errc() || ptr != end || value < 0) {
        throw ParseError(source, 1, token.column, "expected a nonnegative integer, got '" + std::string(token.text) + "'");
    }
    return static_cast<Index>(value);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
    }
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const char* what) {
    if (!j.is_object()) throw InvalidArgument(std::string(what) + " must be a JSON object");
    std::unordered_set<std::string> allowed(known.begin(), known.end());
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw InvalidArgument(std::string("unknown ") + what + " key '" + item.key() + "'");
        }
    }
}

json matrix_rows(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string format_double(double value) {
    if (!std::isfinite(value)) throw InvalidArgument("cannot serialize a non-finite value");
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    if (ec != std::errc()) throw InvalidArgument("cannot format value");
    return std::string(buffer, ptr);
}

std::string format_matrix(const Matrix& m) {
    std::string out = std::string(kMatrixMagic) + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c > 0) out += ' ';
            out += format_double(m(r, c));
        }
        out += '\n';
    }
    return out;
}

Matrix parse_matrix(const std::string& text, const std::string& source) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw ParseError(source, 1, 1, "empty matrix file");
    const auto header = split_tokens(lines[0]);
    if (header.size() != 4 || header[0].text != "dmap-matrix" || header[1].text != "1") {
        throw ParseError(source, 1, 1, std::string("expected header '") + kMatrixMagic + " <rows> <cols>'");
    }
    const Index rows = parse_extent(header[2], source);
    const Index cols = parse_extent(header[3], source);

    std::size_t body_lines = lines.size() - 1;
    while (body_lines > 0 && split_tokens(lines[body_lines]).empty()) --body_lines;
    if (static_cast<Index>(body_lines) != rows) {
        throw ShapeMismatch(source + ": header declares " + std::to_string(rows) + " rows, body has " +
                            std::to_string(body_lines));
    }

    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const std::size_t line_no = static_cast<std::size_t>(r) + 2;
        const auto tokens = split_tokens(lines[static_cast<std::size_t>(r) + 1]);
        if (static_cast<Index>(tokens.size()) != cols) {
            throw ShapeMismatch(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                                " values, found " + std::to_string(tokens.size()));
        }
        for (Index c = 0; c < cols; ++c) {
            const auto& tok = tokens[static_cast<std::size_t>(c)];
            double value = 0.0;
            const auto* end = tok.text.data() + tok.text.size();
            const auto [ptr, ec] = std::from_chars(tok.text.data(), end, value);
            if (ec != std::errc() || ptr != end) {
                throw ParseError(source, line_no, tok.column, "invalid number '" + std::string(tok.text) + "'");
            }
            if (!std::isfinite(value)) {
                throw ParseError(source, line_no, tok.column, "non-finite value '" + std::string(tok.text) + "'");
            }
            m(r, c) = value;
        }
    }
    return m;
}

std::string read_text(const fs::path& path) {
    if (is_gzip(path)) return read_gzip(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
    return buffer.str();
}

void write_text(const std::string& text, const fs::path& path) {
    if (is_gzip(path)) {
        write_gzip(text, path);
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

void save_matrix(const Matrix& m, const fs::path& path) { write_text(format_matrix(m), path); }

Matrix load_matrix(const fs::path& path) { return parse_matrix(read_text(path), path.string()); }

std::vector<std::string> load_id_list(const fs::path& path) {
    const std::string text = read_text(path);
    const auto lines = split_lines(text);
    std::size_t count = lines.size();
    while (count > 0 && lines[count - 1].empty()) --count;
    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (lines[i].empty()) throw ParseError(path.string(), i + 1, 1, "empty id");
        ids.emplace_back(lines[i]);
    }
    return ids;
}

void save_id_list(const std::vector<std::string>& ids, const fs::path& path) {
    std::string text;
    for (const auto& id : ids) {
        if (id.empty() || id.find('\n') != std::string::npos) {
            throw InvalidArgument("ids must be non-empty single-line strings");
        }
        text += id;
        text += '\n';
    }
    write_text(text, path);
}

fs::path ids_path(const fs::path& matrix_path) { return fs::path(matrix_path.string() + ".ids"); }

EmbeddingMatrix load_embeddings(const fs::path& path) {
    Matrix data = load_matrix(path);
    ClassList ids;
    if (fs::exists(ids_path(path))) {
        ids = load_id_list(ids_path(path));
    } else {
        for (Index c = 0; c < data.cols(); ++c) ids.push_back(std::to_string(c));
    }
    if (static_cast<Index>(ids.size()) != data.cols()) {
        throw ShapeMismatch(path.string() + ": " + std::to_string(data.cols()) + " columns but " +
                            std::to_string(ids.size()) + " class ids");
    }
    return EmbeddingMatrix(std::move(data), std::move(ids));
}

void save_embeddings(const EmbeddingMatrix& embeddings, const fs::path& path) {
    save_matrix(embeddings.data(), path);
    save_id_list(embeddings.class_ids(), ids_path(path));
}

json load_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), 1, e.byte, e.what());
    }
}

void save_json(const json& value, const fs::path& path) { write_text(value.dump(2) + "\n", path); }

ClassSplit split_from_json(const json& j) {
    reject_unknown_keys(j, {"seen", "unseen"}, "split");
    if (!j.contains("seen") || !j.contains("unseen")) {
        throw InvalidArgument("split needs 'seen' and 'unseen' lists");
    }
    try {
        return ClassSplit(j.at("seen").get<ClassList>(), j.at("unseen").get<ClassList>());
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("split: ") + e.what());
    }
}

json to_json(const ClassSplit& split) { return json{{"seen", split.seen()}, {"unseen", split.unseen()}}; }

RunConfig run_config_from_json(const json& j, RunConfig base) {
    reject_unknown_keys(j,
                        {"lambda", "gamma", "eta", "m", "train_max_iter", "test_max_iter", "convergence_tol", "mode",
                         "normalize", "center", "epsilon", "epsilon_relative", "seed", "couple_iterations",
                         "test_refinement", "threads"},
                        "run config");
    RunConfig c = std::move(base);
    auto& d = c.dmap;
    d.lambda = get_or(j, "lambda", d.lambda);
    d.gamma = get_or(j, "gamma", d.gamma);
    d.eta = get_or(j, "eta", d.eta);
    d.m = get_or<Index>(j, "m", d.m);
    d.train_max_iter = get_or(j, "train_max_iter", d.train_max_iter);
    d.test_max_iter = get_or(j, "test_max_iter", d.test_max_iter);
    d.convergence_tol = get_or(j, "convergence_tol", d.convergence_tol);
    if (j.contains("mode") && !j["mode"].is_null()) d.mode = parse_mode(get_or<std::string>(j, "mode", ""));
    d.normalize = get_or(j, "normalize", d.normalize);
    d.center = get_or(j, "center", d.center);
    if (j.contains("test_refinement") && !j["test_refinement"].is_null()) {
        d.test_refinement = parse_refinement(get_or<std::string>(j, "test_refinement", ""));
    }
    d.threads = get_or(j, "threads", d.threads);
    if (j.contains("epsilon") && !j["epsilon"].is_null()) {
        c.epsilon = DefectThreshold::absolute(get_or(j, "epsilon", 0.0));
    } else if (j.contains("epsilon_relative") && !j["epsilon_relative"].is_null()) {
        c.epsilon = DefectThreshold::relative_to_median(get_or(j, "epsilon_relative", 0.0));
    }
    c.seed = get_or(j, "seed", c.seed);
    c.couple_iterations = get_or(j, "couple_iterations", c.couple_iterations);
    d.validate();
    if (!(c.epsilon.value >= 0.0)) throw InvalidArgument("epsilon must be nonnegative");
    return c;
}

json to_json(const RunConfig& config) {
    const auto& d = config.dmap;
    json j{{"lambda", d.lambda},
           {"gamma", d.gamma},
           {"eta", d.eta},
           {"m", d.m},
           {"train_max_iter", d.train_max_iter},
           {"test_max_iter", d.test_max_iter},
           {"convergence_tol", d.convergence_tol},
           {"mode", to_string(d.mode)},
           {"normalize", d.normalize},
           {"center", d.center},
           {"test_refinement", to_string(d.test_refinement)},
           {"threads", d.threads},
           {"seed", config.seed},
           {"couple_iterations", config.couple_iterations}};
    if (config.epsilon.relative) {
        j["epsilon"] = nullptr;
        j["epsilon_relative"] = config.epsilon.value;
    } else {
        j["epsilon"] = config.epsilon.value;
    }
    return j;
}

SynthConfig synth_config_from_json(const json& j, SynthConfig base) {
    reject_unknown_keys(j,
                        {"d", "p", "k", "l", "n_per_class", "noise_sigma", "irc_distortion", "defect_pairs", "seed",
                         "feature_scale"},
                        "synth config");
    SynthConfig c = base;
    c.d = get_or<Index>(j, "d", c.d);
    c.p = get_or<Index>(j, "p", c.p);
    c.k = get_or<Index>(j, "k", c.k);
    c.l = get_or<Index>(j, "l", c.l);
    c.n_per_class = get_or<Index>(j, "n_per_class", c.n_per_class);
    c.noise_sigma = get_or(j, "noise_sigma", c.noise_sigma);
    c.irc_distortion = get_or(j, "irc_distortion", c.irc_distortion);
    c.defect_pairs = get_or<Index>(j, "defect_pairs", c.defect_pairs);
    c.seed = get_or(j, "seed", c.seed);
    c.feature_scale = get_or(j, "feature_scale", c.feature_scale);
    c.validate();
    return c;
}

json to_json(const SynthConfig& c) {
    return json{{"d", c.d},
                {"p", c.p},
                {"k", c.k},
                {"l", c.l},
                {"n_per_class", c.n_per_class},
                {"noise_sigma", c.noise_sigma},
                {"irc_distortion", c.irc_distortion},
                {"defect_pairs", c.defect_pairs},
                {"seed", c.seed},
                {"feature_scale", c.feature_scale}};
}

json to_json(const DefectReport& report) {
    json pairs = json::array();
    for (const auto& p : report.flagged_pairs) {
        pairs.push_back(json{{"first", p.first}, {"second", p.second}, {"distance", p.distance}});
    }
    return json{{"unseen", report.unseen},
                {"epsilon", report.epsilon},
                {"pairwise_distances", matrix_rows(report.pairwise_distances)},
                {"flagged_pairs", std::move(pairs)}};
}

std::string distance_csv(const DefectReport& report) {
    std::string out = "class";
    for (const auto& c : report.unseen) out += "," + c;
    out += '\n';
    for (Index r = 0; r < report.pairwise_distances.rows(); ++r) {
        out += report.unseen[static_cast<std::size_t>(r)];
        for (Index c = 0; c < report.pairwise_distances.cols(); ++c) {
            out += "," + format_double(report.pairwise_distances(r, c));
        }
        out += '\n';
    }
    return out;
}

json to_json(const EvalReport& report) {
    json per_class = json::array();
    for (const auto& c : report.per_class) {
        per_class.push_back(
            json{{"class", c.class_id}, {"correct", c.correct}, {"total", c.total}, {"accuracy", c.accuracy()}});
    }
    json top_k = json::object();
    for (const auto& [k, v] : report.top_k_accuracy) top_k[std::to_string(k)] = v;
    json confusion = json::array();
    for (Index r = 0; r < report.confusion.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < report.confusion.cols(); ++c) row.push_back(report.confusion(r, c));
        confusion.push_back(std::move(row));
    }
    return json{{"mode", to_string(report.mode)},
                {"instances", report.instances},
                {"mean_per_class_accuracy", report.mean_per_class_accuracy},
                {"top1", report.top1},
                {"top_k_accuracy", std::move(top_k)},
                {"per_class_accuracy", std::move(per_class)},
                {"confusion_classes", report.confusion_classes},
                {"confusion", std::move(confusion)}};
}

std::string confusion_csv(const EvalReport& report) {
    std::string out = "true\\predicted";
    for (const auto& c : report.confusion_classes) out += "," + c;
    out += '\n';
    for (Index r = 0; r < report.confusion.rows(); ++r) {
        out += report.confusion_classes[static_cast<std::size_t>(r)];
        for (Index c = 0; c < report.confusion.cols(); ++c) out += "," + std::to_string(report.confusion(r, c));
        out += '\n';
    }
    return out;
}

json to_json(const Prediction& p) {
    return json{{"mode", to_string(p.mode)},
                {"instance_ids", p.instance_ids},
                {"candidates", p.candidates},
                {"unseen_classes", p.unseen_classes},
                {"predicted", p.predicted},
                {"scores", matrix_rows(p.scores)}};
}

Prediction prediction_from_json(const json& j) {
    try {
        Prediction p;
        p.mode = parse_mode(j.at("mode").get<std::string>());
        p.instance_ids = j.at("instance_ids").get<std::vector<std::string>>();
        p.candidates = j.at("candidates").get<ClassList>();
        p.unseen_classes = j.at("unseen_classes").get<ClassList>();
        p.predicted = j.at("predicted").get<ClassList>();
        const auto& rows = j.at("scores");
        const auto n = static_cast<Index>(p.instance_ids.size());
        if (rows.size() != p.candidates.size() || p.predicted.size() != p.instance_ids.size()) {
            throw ShapeMismatch("prediction: score table, candidates and instances disagree");
        }
        p.scores.resize(static_cast<Index>(rows.size()), n);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (static_cast<Index>(rows[r].size()) != n) {
                throw ShapeMismatch("prediction: score row " + std::to_string(r) + " has the wrong length");
            }
            for (Index c = 0; c < n; ++c) p.scores(static_cast<Index>(r), c) = rows[r][static_cast<std::size_t>(c)].get<double>();
        }
        return p;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("prediction file: ") + e.what());
    }
}

void save_model(const DmapModel& model, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    save_matrix(model.f_s.weights, dir / "f_s.mat");
    save_matrix(model.f_tilde.weights, dir / "f_tilde.mat");
    save_matrix(model.k_tilde_s.data(), dir / "k_tilde_s.mat");
    save_id_list(model.k_tilde_s.class_ids(), ids_path(dir / "k_tilde_s.mat"));
    if (model.feature_mean) save_matrix(*model.feature_mean, dir / "feature_mean.mat");

    RunConfig rc;
    rc.dmap = model.config;
    json meta{{"format", "dmap-model 1"},
              {"config", to_json(rc)},
              {"f_s", {{"gamma", model.f_s.gamma}, {"eta", model.f_s.eta}}},
              {"f_tilde", {{"gamma", model.f_tilde.gamma}, {"eta", model.f_tilde.eta}}},
              {"train_iterations_run", model.train_iterations_run},
              {"train_changes", model.train_changes},
              {"centered", model.feature_mean.has_value()}};
    save_json(meta, dir / "model.json");
}

DmapModel load_model(const fs::path& dir) {
    const json meta = load_json(dir / "model.json");
    if (!meta.is_object() || meta.value("format", "") != "dmap-model 1") {
        throw InvalidArgument("'" + (dir / "model.json").string() + "' is not a dmap model");
    }
    PrototypeSet k_tilde_s(load_matrix(dir / "k_tilde_s.mat"), load_id_list(ids_path(dir / "k_tilde_s.mat")),
                           PrototypeSource::knn_average);
    try {
        DmapModel model{
            MapMatrix{load_matrix(dir / "f_s.mat"), meta.at("f_s").at("gamma").get<double>(),
                      meta.at("f_s").at("eta").get<double>()},
            MapMatrix{load_matrix(dir / "f_tilde.mat"), meta.at("f_tilde").at("gamma").get<double>(),
                      meta.at("f_tilde").at("eta").get<double>()},
            std::move(k_tilde_s),
            meta.at("train_iterations_run").get<int>(),
            meta.at("train_changes").get<std::vector<double>>(),
            run_config_from_json(meta.at("config")).dmap,
            std::nullopt};
        if (meta.at("centered").get<bool>()) model.feature_mean = Vector(load_matrix(dir / "feature_mean.mat"));
        if (model.f_tilde.output_dim() != model.k_tilde_s.dim() ||
            model.f_s.input_dim() != model.f_tilde.input_dim() ||
            (model.feature_mean && model.feature_mean->size() != model.f_s.input_dim())) {
            throw ShapeMismatch("model matrices have inconsistent shapes");
        }
        return model;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("model.json: ") + e.what());
    }
}

}  // namespace dmap::io
