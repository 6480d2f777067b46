#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "graph_bendr/checkpoint.hpp"
#include "graph_bendr/config.hpp"
#include "graph_bendr/dataset_io.hpp"
#include "graph_bendr/gradcheck_suite.hpp"
#include "graph_bendr/graph.hpp"
#include "graph_bendr/metrics.hpp"
#include "graph_bendr/pipelines.hpp"
#include "graph_bendr/synth.hpp"

namespace py = pybind11;
namespace gb = graph_bendr;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.
gb::RunConfig config_from_text(const std::string& text) {
  gb::RunConfig cfg = text.empty() ? gb::RunConfig{} : gb::RunConfig::from_json(nlohmann::json::parse(text));
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph-augmented masked contrastive pre-training for EEG (C++ core)";

  // base first: later registrations are tried first
  auto& base = py::register_exception<gb::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<gb::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<gb::ValidationError>(m, "ValidationError", base.ptr());

  m.def("default_config", [] { return gb::RunConfig{}.to_json().dump(); });
  m.def("normalize_config", [](const std::string& text) { return config_from_text(text).to_json().dump(); },
        py::arg("config_json"));

  m.def("montage_labels", [](const std::string& path) { return gb::load_montage_or_default(path).labels(); },
        py::arg("montage") = "default");
  m.def(
      "edge_weights",
      [](const std::string& path) {
        const auto w = gb::build_edge_weights(gb::load_montage_or_default(path));
        return py::make_tuple(w.labels, gb::MatD(w.weights));
      },
      py::arg("montage") = "default", "Returns (labels, W) for the montage.");
  m.def("geodesic_distance", &gb::geodesic_distance, py::arg("a"), py::arg("b"), py::arg("radius"));

  m.def("accuracy", &gb::accuracy, py::arg("predictions"), py::arg("labels"));
  m.def("auroc", &gb::auroc, py::arg("scores"), py::arg("labels"));

  m.def(
      "synth_pretrain",
      [](std::uint64_t seed, int recordings, double duration_s, double sfreq, const std::string& out,
         const std::string& montage) {
        const auto corpus =
            gb::generate_pretrain_corpus(seed, recordings, gb::load_montage_or_default(montage), duration_s, sfreq);
        gb::save_pretrain_corpus(out, corpus);
        return corpus.size();
      },
      py::arg("seed"), py::arg("recordings"), py::arg("duration_s"), py::arg("sfreq"), py::arg("out"),
      py::arg("montage") = "default");

  m.def(
      "synth_task",
      [](std::uint64_t seed, const std::string& out, int windows, int folds, const std::string& metric,
         double balance, double window_s, double sfreq, std::pair<std::string, std::string> pair, double lag_s,
         double gain, const std::string& name, const std::string& montage) {
        gb::TaskSpec spec;
        spec.num_windows = windows;
        spec.folds = folds;
        spec.metric = gb::metric_from_string(metric);
        spec.class_balance = balance;
        spec.window_s = window_s;
        spec.sfreq = sfreq;
        spec.coupled_pair = std::move(pair);
        spec.lag_s = lag_s;
        spec.coupling_gain = gain;
        const auto ds = gb::generate_task(seed, gb::load_montage_or_default(montage), spec);
        gb::save_task(out, ds, name.empty() ? "task" : name);
        std::vector<int> labels;
        for (const auto& w : ds.windows) labels.push_back(*w.label);
        return labels;
      },
      py::arg("seed"), py::arg("out"), py::arg("windows") = 200, py::arg("folds") = 4,
      py::arg("metric") = "accuracy", py::arg("balance") = 0.5, py::arg("window_s") = 2.0,
      py::arg("sfreq") = 256.0, py::arg("pair") = std::pair<std::string, std::string>{"C3", "C4"}, py::arg("lag_s") = 0.1,
      py::arg("gain") = 1.5, py::arg("name") = "", py::arg("montage") = "default",
      "Writes a labeled task directory and returns the window labels.");

  m.def(
      "pretrain",
      [](const std::string& config_json, const std::string& data_dir, const std::string& out,
         const std::function<void(const std::string&)>& progress) {
        gb::RunConfig cfg = config_from_text(config_json);
        const gb::Montage montage = gb::load_montage_or_default(cfg.montage);
        const auto windows = gb::prepare_pretrain_windows(gb::load_pretrain_corpus(data_dir), montage, cfg);
        gb::PretrainResult result;
        {
          py::gil_scoped_release release;
          result = gb::pretrain(windows, cfg, montage, [&](const std::string& line) {
            if (!progress) return;
            py::gil_scoped_acquire acquire;
            progress(line);
          });
        }
        result.checkpoint.save(out);
        std::vector<double> losses;
        for (const auto& p : result.curve) losses.push_back(p.loss);
        return nlohmann::json({{"checkpoint", out},
                               {"checkpoint_sha256", gb::sha256_file(out)},
                               {"model", gb::model_name(cfg.gnn)},
                               {"losses", losses},
                               {"initial", {{"loss", result.initial.loss}, {"accuracy", result.initial.accuracy}}},
                               {"trained", {{"loss", result.trained.loss}, {"accuracy", result.trained.accuracy}}},
                               {"chance", result.trained.chance}})
            .dump();
      },
      py::arg("config_json"), py::arg("data_dir"), py::arg("out"), py::arg("progress") = nullptr);

  m.def(
      "finetune",
      [](const std::string& checkpoint, const std::string& task_dir, const std::string& head,
         const std::string& adjuster, std::optional<int> epochs, std::optional<double> lr) {
        const gb::Checkpoint ck = gb::Checkpoint::load(checkpoint);
        gb::FinetuneOptions opt;
        opt.head = gb::head_kind_from_string(head);
        opt.adjuster = gb::adjuster_kind_from_string(adjuster);
        opt.epochs = epochs;
        opt.lr = lr;
        const gb::TaskDataset ds = gb::load_task(task_dir);
        py::gil_scoped_release release;
        return gb::crossval(ck, ds, opt).to_json().dump();
      },
      py::arg("checkpoint"), py::arg("task_dir"), py::arg("head") = "bendr", py::arg("adjuster") = "linear",
      py::arg("epochs") = py::none(), py::arg("lr") = py::none());

  m.def(
      "gradcheck",
      [](std::uint64_t seed, double eps, double tol) {
        gb::GradCheckSuiteOptions opt;
        opt.seed = seed;
        opt.eps = eps;
        opt.tol = tol;
        std::vector<std::tuple<std::string, double, bool>> out;
        for (const auto& r : gb::run_gradcheck_suite(opt)) out.emplace_back(r.layer, r.max_rel_err, r.pass);
        return out;
      },
      py::arg("seed") = 1, py::arg("eps") = 1e-5, py::arg("tol") = 1e-4,
      "Returns (layer, max relative error, pass) for every checked layer.");

  m.def("sha256_file", &gb::sha256_file, py::arg("path"));
}
