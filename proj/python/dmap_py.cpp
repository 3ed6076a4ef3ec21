#include "dmap/cli.hpp"
#include "dmap/consistency.hpp"
#include "dmap/error.hpp"
#include "dmap/eval.hpp"
#include "dmap/io.hpp"
#include "dmap/linmap.hpp"
#include "dmap/model.hpp"
#include "dmap/pipeline.hpp"
#include "dmap/synthgen.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dmap;

namespace {

ClassList default_ids(Index n, const std::string& prefix) {
    ClassList ids;
    for (Index i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
    return ids;
}

py::dict prediction_dict(const Prediction& p) {
    py::dict d;
    d["instance_ids"] = p.instance_ids;
    d["candidates"] = p.candidates;
    d["unseen_classes"] = p.unseen_classes;
    d["predicted"] = p.predicted;
    d["scores"] = p.scores;
    d["mode"] = to_string(p.mode);
    return d;
}

Prediction prediction_from(const py::dict& d) {
    return io::prediction_from_json(io::json::parse(py::module_::import("json").attr("dumps")(
        py::dict(py::arg("mode") = d["mode"], py::arg("instance_ids") = d["instance_ids"],
                 py::arg("candidates") = d["candidates"], py::arg("unseen_classes") = d["unseen_classes"],
                 py::arg("predicted") = d["predicted"],
                 py::arg("scores") = py::module_::import("numpy").attr("asarray")(d["scores"]).attr("tolist")()))
                                                   .cast<std::string>()));
}

}  // namespace

PYBIND11_MODULE(_dmap, m) {
    m.doc() = "Zero-shot recognition with dual visual-semantic mapping paths";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    static py::exception<Error> validation(m, "ValidationError", base.ptr());
    static py::exception<Error> numerical(m, "NumericalError", base.ptr());
    static py::exception<Error> io_error(m, "IoError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            switch (e.kind()) {
                case ErrorKind::validation: py::set_error(validation, e.what()); break;
                case ErrorKind::numerical: py::set_error(numerical, e.what()); break;
                case ErrorKind::io: py::set_error(io_error, e.what()); break;
            }
        }
    });

    m.def(
        "solve_ridge_map",
        [](const Matrix& x, const Matrix& k, const Matrix& y, double gamma, double eta) {
            return solve_ridge_map(x, k, LabelMatrix(y), gamma, eta).weights;
        },
        py::arg("features"), py::arg("targets"), py::arg("labels"), py::arg("gamma") = kDefaultGamma,
        py::arg("eta") = kDefaultEta, "Closed-form map V (d x p); labels is the n x k +-1 matrix.");

    m.def(
        "label_matrix",
        [](const std::vector<std::string>& labels, const std::vector<std::string>& seen) {
            return build_label_matrix(labels, seen).data();
        },
        py::arg("labels"), py::arg("seen"));

    m.def(
        "predict_semantic", [](const Matrix& v, const Matrix& x) { return predict_semantic(MapMatrix{v, 0, 0}, x); },
        py::arg("weights"), py::arg("features"));

    m.def(
        "extract_relationship",
        [](const Matrix& seen, const Vector& target, double lambda) {
            return extract_relationship(PrototypeSet(seen, default_ids(seen.cols(), "s"), PrototypeSource::class_mean),
                                        target, lambda);
        },
        py::arg("seen_prototypes"), py::arg("target"), py::arg("lam") = kDefaultLambda);

    m.def(
        "consistency",
        [](const Matrix& xs, const Matrix& xu, const Matrix& ks, const Matrix& ku, double lambda) {
            const PrototypeSet px(xs, default_ids(xs.cols(), "s"), PrototypeSource::class_mean);
            const auto rx = build_relationship_matrix(
                px, PrototypeSet(xu, default_ids(xu.cols(), "u"), PrototypeSource::class_mean), lambda,
                RelationSpace::feature);
            const auto rk = build_relationship_matrix(
                PrototypeSet(ks, default_ids(ks.cols(), "s"), PrototypeSource::embedding),
                PrototypeSet(ku, default_ids(ku.cols(), "u"), PrototypeSource::embedding), lambda,
                RelationSpace::semantic);
            return py::make_tuple(consistency_measure(px, rx, rk), irc_gap(px, rx, rk));
        },
        py::arg("seen_features"), py::arg("unseen_features"), py::arg("seen_embeddings"),
        py::arg("unseen_embeddings"), py::arg("lam") = kDefaultLambda,
        "Returns (CM, irc_gap) for class-level feature and embedding prototypes.");

    m.def(
        "preinspect",
        [](const Matrix& ks, const Matrix& ku, std::optional<double> epsilon, double relative) {
            const auto t =
                epsilon ? DefectThreshold::absolute(*epsilon) : DefectThreshold::relative_to_median(relative);
            const auto r = preinspect(EmbeddingMatrix(ks, default_ids(ks.cols(), "s")),
                                      EmbeddingMatrix(ku, default_ids(ku.cols(), "u")), t);
            std::vector<std::tuple<Index, Index, double>> pairs;
            for (const auto& f : r.flagged_pairs) {
                pairs.emplace_back(std::stol(f.first.substr(1)), std::stol(f.second.substr(1)), f.distance);
            }
            py::dict d;
            d["distances"] = r.pairwise_distances;
            d["flagged_pairs"] = pairs;
            d["epsilon"] = r.epsilon;
            return d;
        },
        py::arg("seen_embeddings"), py::arg("unseen_embeddings"), py::arg("epsilon") = py::none(),
        py::arg("relative") = 1e-6);

    m.def("knn_prototype", &knn_prototype, py::arg("anchor"), py::arg("predictions"), py::arg("features"),
          py::arg("m"));

    m.def(
        "generate",
        [](const std::string& config_json) {
            const auto data = generate(io::synth_config_from_json(io::json::parse(config_json)));
            py::dict d;
            d["train_features"] = data.train.features().data();
            d["train_labels"] = data.train.labels();
            d["test_features"] = data.test_features.data();
            d["test_labels"] = data.test_labels;
            d["embeddings"] = data.embeddings.data();
            d["class_ids"] = data.embeddings.class_ids();
            d["seen"] = data.split.seen();
            d["unseen"] = data.split.unseen();
            d["feature_prototypes"] = data.feature_prototypes;
            d["defect_pairs"] = data.defect_pairs;
            return d;
        },
        py::arg("config_json"));

    py::class_<DmapModel>(m, "Model")
        .def_static(
            "train",
            [](const Matrix& x, const ClassList& labels, const ClassList& seen, const ClassList& unseen,
               const Matrix& k, const ClassList& class_ids, const std::string& config_json) {
                const auto config = io::run_config_from_json(io::json::parse(config_json));
                LabeledDataset data(FeatureMatrix(x), labels, ClassSplit(seen, unseen), EmbeddingMatrix(k, class_ids));
                py::gil_scoped_release release;
                return train(data, config.dmap);
            },
            py::arg("features"), py::arg("labels"), py::arg("seen"), py::arg("unseen"), py::arg("embeddings"),
            py::arg("class_ids"), py::arg("config_json") = "{}")
        .def_static("load", &io::load_model, py::arg("directory"))
        .def("save", [](const DmapModel& model, const std::filesystem::path& dir) { io::save_model(model, dir); },
             py::arg("directory"))
        .def_property_readonly("f_s", [](const DmapModel& model) { return model.f_s.weights; })
        .def_property_readonly("f_tilde", [](const DmapModel& model) { return model.f_tilde.weights; })
        .def_property_readonly("k_tilde_s", [](const DmapModel& model) { return model.k_tilde_s.data(); })
        .def_readonly("train_changes", &DmapModel::train_changes)
        .def_readonly("train_iterations_run", &DmapModel::train_iterations_run)
        .def(
            "infer_inductive",
            [](const DmapModel& model, const Matrix& x, const Matrix& ku, const ClassList& unseen, const Matrix& ks,
               const ClassList& seen, const std::string& mode) {
                return prediction_dict(infer_inductive(model, FeatureMatrix(x), EmbeddingMatrix(ku, unseen),
                                                       EmbeddingMatrix(ks, seen), parse_mode(mode)));
            },
            py::arg("features"), py::arg("unseen_embeddings"), py::arg("unseen"), py::arg("seen_embeddings"),
            py::arg("seen"), py::arg("mode") = "czsr")
        .def(
            "infer_transductive",
            [](const DmapModel& model, const Matrix& x, const Matrix& ku, const ClassList& unseen,
               const std::string& mode, int iterations) {
                const auto r = infer_transductive(model, FeatureMatrix(x), EmbeddingMatrix(ku, unseen),
                                                  parse_mode(mode), iterations);
                py::dict d = prediction_dict(r.prediction);
                d["k_tilde_u"] = r.k_tilde_u.data();
                py::list history;
                for (const auto& h : r.history) history.append(h.k_tilde_u.data());
                d["k_tilde_u_history"] = history;
                return d;
            },
            py::arg("features"), py::arg("unseen_embeddings"), py::arg("unseen"), py::arg("mode") = "czsr",
            py::arg("iterations") = 2);

    m.def(
        "evaluate",
        [](const py::dict& prediction, const ClassList& truth, const std::string& mode, const std::vector<int>& ks) {
            const auto r = evaluate(prediction_from(prediction), truth, parse_mode(mode), ks);
            return py::module_::import("json").attr("loads")(io::to_json(r).dump());
        },
        py::arg("prediction"), py::arg("truth"), py::arg("mode") = "czsr", py::arg("ks") = std::vector<int>{1});

    m.def("load_matrix", &io::load_matrix, py::arg("path"));
    m.def("save_matrix", &io::save_matrix, py::arg("matrix"), py::arg("path"));
    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "dmap");
            return run_cli(args);
        },
        py::arg("args"), "Runs a dmap command line; returns its exit code.");
}
