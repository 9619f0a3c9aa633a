// Python bindings for the core operations: synthetic data, window prep,
// knowledge bases, the frozen backbone, and the retrieval pipeline.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "timeraf/harness.hpp"
#include "timeraf/synth.hpp"

namespace py = pybind11;
using namespace timeraf;

namespace {

std::vector<Vector> matrix_rows(const Matrix& m) {
    std::vector<Vector> rows;
    rows.reserve(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) rows.push_back(m.row(r));
    return rows;
}

}  // namespace

PYBIND11_MODULE(_timeraf, m) {
    m.doc() = "Retrieval-augmented zero-shot time-series forecasting core";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");

    // ---- data types ----
    py::class_<Series>(m, "Series")
        .def(py::init<>())
        .def_readwrite("values", &Series::values)
        .def_readwrite("channel_id", &Series::channel_id)
        .def_readwrite("dataset_id", &Series::dataset_id)
        .def_readwrite("domain", &Series::domain)
        .def_readwrite("frequency", &Series::frequency);

    py::class_<NormStats>(m, "NormStats")
        .def(py::init<>())
        .def_readwrite("mean", &NormStats::mean)
        .def_readwrite("std", &NormStats::std);

    py::class_<WindowPair>(m, "WindowPair")
        .def(py::init<>())
        .def_readwrite("x", &WindowPair::x)
        .def_readwrite("y", &WindowPair::y)
        .def_readwrite("stats", &WindowPair::stats)
        .def_property_readonly("dataset_id",
                               [](const WindowPair& p) { return p.source.dataset_id; });

    py::class_<SplitSpec>(m, "SplitSpec")
        .def(py::init<double, double, double>(), py::arg("train") = 0.7,
             py::arg("val") = 0.1, py::arg("test") = 0.2)
        .def_readwrite("train", &SplitSpec::train)
        .def_readwrite("val", &SplitSpec::val)
        .def_readwrite("test", &SplitSpec::test);

    m.def("instance_normalize", &instance_normalize, py::arg("x"));
    m.def("denormalize", &denormalize, py::arg("yn"), py::arg("stats"));
    m.def(
        "patchify",
        [](const Vector& xn, std::size_t patch_len, std::size_t stride) {
            return matrix_rows(patchify(xn, patch_len, stride));
        },
        py::arg("xn"), py::arg("patch_len"), py::arg("stride"));
    m.def("sliding_windows", &sliding_windows, py::arg("series"), py::arg("sl"),
          py::arg("fl"), py::arg("stride"));
    m.def("mse", &mse, py::arg("a"), py::arg("b"));
    m.def("softmax", &softmax, py::arg("v"), py::arg("tau"));
    m.def("kl_divergence", &kl_divergence, py::arg("p"), py::arg("q"));

    m.def("load_manifest", &load_manifest, py::arg("manifest_path"));
    m.def("collect_pairs", &collect_pairs, py::arg("series"), py::arg("split"),
          py::arg("which"), py::arg("sl"), py::arg("fl"), py::arg("stride"));

    // ---- synthetic corpus ----
    py::class_<SyntheticSpec>(m, "SyntheticSpec")
        .def_readwrite("series_per_domain", &SyntheticSpec::series_per_domain)
        .def_readwrite("length", &SyntheticSpec::length);
    m.def("default_synthetic_spec", &default_synthetic_spec);
    m.def("gen_series", &gen_series, py::arg("spec"), py::arg("seed"));
    m.def("write_dataset", &write_dataset, py::arg("dir"), py::arg("series"));

    // ---- knowledge base ----
    py::class_<KbEntry>(m, "KbEntry")
        .def_readonly("values", &KbEntry::values)
        .def_readonly("domain", &KbEntry::domain)
        .def_readonly("dataset_id", &KbEntry::dataset_id)
        .def_readonly("channel_id", &KbEntry::channel_id)
        .def_readonly("start", &KbEntry::start);

    py::class_<KnowledgeBase>(m, "KnowledgeBase")
        .def_readonly("entries", &KnowledgeBase::entries)
        .def_readonly("sl", &KnowledgeBase::sl)
        .def("__len__", &KnowledgeBase::size)
        .def_property_readonly("domains", [](const KnowledgeBase& kb) {
            std::vector<std::string> out;
            for (const auto& [dom, idx] : kb.domain_index) out.push_back(dom);
            return out;
        });

    m.def("build_kb", &build_kb, py::arg("datasets"), py::arg("sl"),
          py::arg("per_domain_quota"), py::arg("seed"));
    m.def("build_kb_pooled", &build_kb_pooled, py::arg("datasets"), py::arg("sl"),
          py::arg("total_quota"), py::arg("seed"));
    m.def("subsample", &subsample, py::arg("kb"), py::arg("fraction"), py::arg("seed"));
    m.def("eligible_candidates", &eligible_candidates, py::arg("kb"),
          py::arg("query_dataset_id"), py::arg("training"), py::arg("min_needed") = 1);
    m.def("save_kb", &save_kb, py::arg("kb"), py::arg("path"));
    m.def("load_kb", &load_kb, py::arg("path"));

    // ---- backbone ----
    py::class_<BackboneDims>(m, "BackboneDims")
        .def(py::init([](std::size_t sl, std::size_t fl, std::size_t patch_len,
                         std::size_t d) {
                 return BackboneDims{sl, fl, patch_len, d};
             }),
             py::arg("sl"), py::arg("fl"), py::arg("patch_len"), py::arg("d"))
        .def_readwrite("sl", &BackboneDims::sl)
        .def_readwrite("fl", &BackboneDims::fl)
        .def_readwrite("patch_len", &BackboneDims::patch_len)
        .def_readwrite("d", &BackboneDims::d)
        .def_property_readonly("n", &BackboneDims::n);

    py::class_<PretrainConfig>(m, "PretrainConfig")
        .def(py::init([](std::size_t epochs, double lr, std::uint64_t seed) {
                 return PretrainConfig{epochs, lr, seed};
             }),
             py::arg("epochs") = 20, py::arg("lr") = 1e-3, py::arg("seed") = 0)
        .def_readwrite("epochs", &PretrainConfig::epochs)
        .def_readwrite("lr", &PretrainConfig::lr)
        .def_readwrite("seed", &PretrainConfig::seed);

    py::class_<BackboneParams>(m, "Backbone")
        .def_readonly("dims", &BackboneParams::dims)
        .def_property_readonly("frozen", &BackboneParams::frozen)
        .def("hash", &BackboneParams::hash)
        .def("predict", [](const BackboneParams& b, const Vector& x) {
            return predict(b, x);
        });

    m.def(
        "make_backbone",
        [](const BackboneDims& dims, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            return make_backbone(dims, rng);
        },
        py::arg("dims"), py::arg("seed"));
    m.def(
        "pretrain",
        [](BackboneParams& b, const std::vector<WindowPair>& pairs,
           const PretrainConfig& cfg) { return pretrain(b, pairs, cfg).epoch_mse; },
        py::arg("backbone"), py::arg("pairs"), py::arg("config"));
    m.def("save_backbone", &save_backbone, py::arg("backbone"), py::arg("path"));
    m.def("load_backbone", &load_backbone, py::arg("path"));

    // ---- training pipeline ----
    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("k", &TrainConfig::k)
        .def_readwrite("tau_m", &TrainConfig::tau_m)
        .def_readwrite("tau_s", &TrainConfig::tau_s)
        .def_readwrite("rho", &TrainConfig::rho)
        .def_readwrite("lambda_", &TrainConfig::lambda)
        .def_readwrite("lr_retriever", &TrainConfig::lr_retriever)
        .def_readwrite("lr_fusion", &TrainConfig::lr_fusion)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("warmup_epochs", &TrainConfig::warmup_epochs)
        .def_readwrite("e", &TrainConfig::e)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("checkpoint_dir", &TrainConfig::checkpoint_dir)
        .def_property(
            "retrieval_policy",
            [](const TrainConfig& c) { return to_string(c.retrieval_policy); },
            [](TrainConfig& c, const std::string& s) {
                c.retrieval_policy = retrieval_policy_from_string(s);
            })
        .def_property(
            "fusion_policy",
            [](const TrainConfig& c) { return to_string(c.fusion_policy); },
            [](TrainConfig& c, const std::string& s) {
                c.fusion_policy = fusion_policy_from_string(s);
            });

    py::class_<TrainingLog>(m, "TrainingLog")
        .def_readonly("epoch_l_pred", &TrainingLog::epoch_l_pred)
        .def_readonly("skipped", &TrainingLog::skipped)
        .def_property_readonly("n_steps",
                               [](const TrainingLog& l) { return l.steps.size(); })
        .def_property_readonly("step_losses", [](const TrainingLog& l) {
            Vector out;
            out.reserve(l.steps.size());
            for (const auto& s : l.steps) out.push_back(s.loss);
            return out;
        });

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("per_dataset_mse", &EvalReport::per_dataset_mse)
        .def_readonly("per_dataset_windows", &EvalReport::per_dataset_windows)
        .def_readonly("mean_mse", &EvalReport::mean_mse)
        .def_readonly("n_windows", &EvalReport::n_windows)
        .def_readonly("residual_mse", &EvalReport::residual_mse)
        .def("to_json", &eval_report_to_json);

    py::class_<Pipeline>(m, "Pipeline")
        .def_readonly("cfg", &Pipeline::cfg)
        .def("retriever_hash",
             [](const Pipeline& p) { return p.retriever.hash(); })
        .def("fusion_hash", [](const Pipeline& p) { return p.fusion.hash(); });

    // keep_alive ties the backbone's lifetime to the returned pipeline, which
    // stores a raw pointer to it
    m.def("make_pipeline", &make_pipeline, py::arg("backbone"), py::arg("config"),
          py::keep_alive<0, 1>());
    m.def("train", &train, py::arg("pipeline"), py::arg("pairs"), py::arg("kb"));
    m.def("predict_raf", &predict_raf, py::arg("pipeline"), py::arg("x"), py::arg("kb"));
    m.def("evaluate", &evaluate, py::arg("pipeline"), py::arg("pairs"), py::arg("kb"));
    m.def("evaluate_backbone", &evaluate_backbone, py::arg("backbone"), py::arg("pairs"));
}
