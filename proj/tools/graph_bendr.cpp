// graph-bendr: synthesis, graph export, pre-training, fine-tuning, grid
// evaluation, gradient checks and reports.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error,
// 3 gradient check failure.

#include <CLI11/CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "graph_bendr/checkpoint.hpp"
#include "graph_bendr/config.hpp"
#include "graph_bendr/dataset_io.hpp"
#include "graph_bendr/gradcheck_suite.hpp"
#include "graph_bendr/graph.hpp"
#include "graph_bendr/pipelines.hpp"
#include "graph_bendr/synth.hpp"

namespace fs = std::filesystem;
namespace gb = graph_bendr;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitGradcheck = 3;

void log_line(const std::string& line) { std::cerr << line << std::endl; }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

bool parse_on_off(const std::string& v) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw gb::ConfigError("expected on|off, got '" + v + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gb::Error("cannot write " + path.string());
  out << text;
  if (!out) throw gb::Error("write failed: " + path.string());
}

gb::RunConfig load_config(const std::string& path) {
  gb::RunConfig cfg = path.empty() ? gb::RunConfig{} : gb::RunConfig::load(path);
  gb::apply_seed_override(cfg);
  cfg.validate();
  return cfg;
}

struct SynthPretrainArgs {
  std::uint64_t seed = 1;
  int recordings = 32;
  double duration = 60.0;
  double sfreq = 256.0;
  std::string montage = "default";
  std::string out;
};

struct SynthTaskArgs {
  std::uint64_t seed = 1;
  std::string pair = "C3,C4";
  int windows = 200;
  int folds = 4;
  std::string metric = "accuracy";
  double balance = 0.5;
  double window = 2.0;
  double sfreq = 256.0;
  double lag = 0.1;
  std::string band = "6,14";
  double gain = 1.5;
  std::string name;
  std::string montage = "default";
  std::string out;
};

struct GnnArgs {
  std::string gnn;
  std::string edge_weights;
  std::uint64_t permute = 0;
  bool permute_set = false;

  void apply(gb::GnnConfig& g) const {
    if (!gnn.empty()) g.architecture = gb::gnn_architecture_from_string(gnn);
    if (!edge_weights.empty()) g.use_edge_weights = parse_on_off(edge_weights);
    if (permute_set) g.permute_edge_weights_seed = permute;
    g.validate();
  }
  bool any() const { return !gnn.empty() || !edge_weights.empty() || permute_set; }
};

void add_gnn_flags(CLI::App* cmd, GnnArgs& args) {
  cmd->add_option("--gnn", args.gnn, "GNN front-end")->check(CLI::IsMember({"gcn", "gat", "sage", "none"}));
  cmd->add_option("--edge-weights", args.edge_weights, "Use reciprocal geodesic edge weights")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option_function<std::uint64_t>(
      "--permute-edge-weights",
      [&args](const std::uint64_t& v) {
        args.permute = v;
        args.permute_set = true;
      },
      "Shuffle the node labels of W with this seed (geometry ablation)");
}

int cmd_synth_pretrain(const SynthPretrainArgs& a) {
  const gb::Montage montage = gb::load_montage_or_default(a.montage);
  const auto corpus = gb::generate_pretrain_corpus(a.seed, a.recordings, montage, a.duration, a.sfreq);
  gb::save_pretrain_corpus(a.out, corpus);
  log_line("synth: wrote " + std::to_string(corpus.size()) + " recordings to " + a.out);
  std::cout << json({{"command", "synth pretrain"}, {"out", a.out}, {"recordings", corpus.size()},
                     {"samples_per_recording", corpus.front().length()}})
                   .dump()
            << std::endl;
  return 0;
}

int cmd_synth_task(const SynthTaskArgs& a) {
  const gb::Montage montage = gb::load_montage_or_default(a.montage);
  const auto pair = split(a.pair, ',');
  if (pair.size() != 2) throw gb::ConfigError("--pair expects two labels, e.g. C3,C4");
  const auto band = split(a.band, ',');
  if (band.size() != 2) throw gb::ConfigError("--band expects lo,hi in Hz");
  gb::TaskSpec spec;
  spec.num_windows = a.windows;
  spec.window_s = a.window;
  spec.sfreq = a.sfreq;
  spec.coupled_pair = {pair[0], pair[1]};
  spec.class_balance = a.balance;
  spec.metric = gb::metric_from_string(a.metric);
  spec.folds = a.folds;
  spec.lag_s = a.lag;
  spec.band_lo_hz = std::stod(band[0]);
  spec.band_hi_hz = std::stod(band[1]);
  spec.coupling_gain = a.gain;
  // flag values the generator would reject are usage errors
  try {
    spec.validate();
  } catch (const gb::ValidationError& e) {
    throw gb::ConfigError(e.what());
  }
  for (const auto& label : pair)
    if (!montage.index_of(label)) throw gb::ConfigError("--pair: channel '" + label + "' is not in the montage");
  const gb::TaskDataset ds = gb::generate_task(a.seed, montage, spec);
  const std::string name = a.name.empty() ? fs::path(a.out).filename().string() : a.name;
  const json generator = {{"seed", a.seed},       {"pair", a.pair}, {"windows", a.windows}, {"folds", a.folds},
                          {"metric", a.metric},   {"balance", a.balance}, {"window_s", a.window},
                          {"sfreq", a.sfreq},     {"lag_s", a.lag},  {"band_hz", {spec.band_lo_hz, spec.band_hi_hz}},
                          {"gain", a.gain}};
  gb::save_task(a.out, ds, name, generator);
  std::size_t positives = 0;
  for (const auto& w : ds.windows) positives += *w.label == 1 ? 1 : 0;
  log_line("synth: wrote task '" + name + "' to " + a.out);
  std::cout << json({{"command", "synth task"}, {"out", a.out}, {"name", name}, {"windows", ds.windows.size()},
                     {"positive", positives}, {"negative", ds.windows.size() - positives}, {"folds", ds.folds},
                     {"metric", gb::to_string(ds.metric)}, {"balanced", ds.balanced}})
                   .dump()
            << std::endl;
  return 0;
}

int cmd_graph(const std::string& montage_path, const std::string& out) {
  const gb::Montage montage = gb::load_montage_or_default(montage_path);
  const gb::EdgeWeightMatrix w = gb::build_edge_weights(montage);
  fs::create_directories(out);
  write_text(fs::path(out) / "edge_weights.csv", w.to_csv());
  write_text(fs::path(out) / "edge_weights.json", w.to_json().dump(2) + "\n");
  std::cout << json({{"command", "graph"}, {"montage", montage.name}, {"channels", w.size()},
                     {"csv", (fs::path(out) / "edge_weights.csv").string()},
                     {"json", (fs::path(out) / "edge_weights.json").string()}})
                   .dump()
            << std::endl;
  return 0;
}

struct PretrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string montage;
  int steps = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  GnnArgs gnn;
};

int cmd_pretrain(const PretrainArgs& a) {
  gb::RunConfig cfg = load_config(a.config);
  if (a.seed_set) cfg.seeds.seed = a.seed;
  if (a.steps >= 0) cfg.pretrain.steps = a.steps;
  if (!a.montage.empty()) cfg.montage = a.montage;
  a.gnn.apply(cfg.gnn);
  cfg.validate();
  log_line("config: " + cfg.to_json().dump());
  const gb::Montage montage = gb::load_montage_or_default(cfg.montage);
  const auto windows = gb::prepare_pretrain_windows(gb::load_pretrain_corpus(a.data), montage, cfg);
  log_line("pretrain: " + std::to_string(windows.size()) + " windows");
  const gb::PretrainResult result = gb::pretrain(windows, cfg, montage, log_line);

  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  result.checkpoint.save(out.string());
  std::string curve = "step,loss,contrastive_accuracy,chance\n";
  for (const auto& p : result.curve) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g\n", p.step, p.loss, p.accuracy, p.chance);
    curve += line;
  }
  const fs::path curve_path = out.parent_path() / (out.stem().string() + "_curve.csv");
  write_text(curve_path, curve);
  std::cout << json({{"command", "pretrain"},
                     {"checkpoint", out.string()},
                     {"checkpoint_sha256", gb::sha256_file(out.string())},
                     {"loss_curve", curve_path.string()},
                     {"model", gb::model_name(cfg.gnn)},
                     {"steps", cfg.pretrain.steps},
                     {"initial", {{"loss", result.initial.loss}, {"accuracy", result.initial.accuracy}}},
                     {"trained", {{"loss", result.trained.loss}, {"accuracy", result.trained.accuracy}}},
                     {"chance", result.trained.chance},
                     {"clamped_windows", result.clamped_windows}})
                   .dump()
            << std::endl;
  return 0;
}

struct FinetuneArgs {
  std::string checkpoint;
  std::string task;
  std::string head = "bendr";
  std::string adjuster = "linear";
  std::string out;
  int epochs = -1;
  int batch_size = -1;
  double lr = -1.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  GnnArgs gnn;
};

int cmd_finetune(const FinetuneArgs& a) {
  const gb::Checkpoint ck = gb::Checkpoint::load(a.checkpoint);
  gb::RunConfig ck_cfg = gb::checkpoint_config(ck);
  gb::FinetuneOptions opt;
  opt.head = gb::head_kind_from_string(a.head);
  opt.adjuster = gb::adjuster_kind_from_string(a.adjuster);
  if (a.gnn.any()) {
    gb::GnnConfig expect = ck_cfg.gnn;
    a.gnn.apply(expect);
    opt.expect_gnn = expect;
  }
  if (a.epochs >= 0) opt.epochs = a.epochs;
  if (a.batch_size > 0) opt.batch_size = a.batch_size;
  if (a.lr > 0.0) opt.lr = a.lr;
  gb::apply_seed_override(ck_cfg);
  if (a.seed_set) ck_cfg.seeds.seed = a.seed;
  opt.seeds = ck_cfg.seeds.streams();

  std::string task_name;
  const gb::TaskDataset ds = gb::load_task(a.task, &task_name);
  const gb::FinetuneRun run = gb::crossval(ck, ds, opt, log_line);
  json result = run.to_json();
  result["task"] = task_name;
  result["seed"] = ck_cfg.seeds.seed;
  result["checkpoint_hash"] = gb::sha256_file(a.checkpoint);
  if (!a.out.empty()) write_text(a.out, result.dump(2) + "\n");
  std::cout << result.dump() << std::endl;
  return 0;
}

struct GridArgs {
  std::string checkpoints;
  std::string tasks;
  std::string heads = "bendr,linear";
  std::string adjusters = "linear,padding";
  std::string out;
  int jobs = 1;
  int epochs = -1;
  bool no_resume = false;
};

int cmd_grid(const GridArgs& a) {
  std::vector<gb::GridModel> models;
  for (const auto& p : split(a.checkpoints, ',')) models.push_back({p});
  std::vector<gb::GridTask> tasks;
  for (const auto& t : split(a.tasks, ',')) tasks.push_back({"", t});
  gb::GridOptions opt;
  opt.heads.clear();
  for (const auto& h : split(a.heads, ',')) opt.heads.push_back(gb::head_kind_from_string(h));
  opt.adjusters.clear();
  for (const auto& h : split(a.adjusters, ',')) opt.adjusters.push_back(gb::adjuster_kind_from_string(h));
  if (a.epochs >= 0) opt.epochs = a.epochs;
  opt.out_dir = a.out;
  opt.jobs = a.jobs;
  opt.resume = !a.no_resume;
  auto cells = gb::run_grid(models, tasks, opt, log_line);
  const gb::Report report = gb::make_report(cells);
  write_text(fs::path(a.out) / "report.md", report.markdown);
  write_text(fs::path(a.out) / "report.csv", report.csv);
  json summary = {{"command", "grid"}, {"out", a.out}, {"cells", cells.size()}};
  json flagged = json::array();
  for (const auto& c : cells)
    if (c.flagged) flagged.push_back(c.model + "/" + c.head + "/" + c.task + "/" + c.adjuster);
  summary["flagged"] = flagged;
  std::cout << summary.dump() << std::endl;
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double eps, double tol, const std::string& config) {
  gb::GradCheckSuiteOptions opt;
  opt.seed = seed;
  opt.eps = eps;
  opt.tol = tol;
  if (!config.empty()) opt.encoder = load_config(config).encoder;
  const auto reports = gb::run_gradcheck_suite(opt);
  bool all_pass = true;
  json layers = json::array();
  for (const auto& r : reports) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %s  max rel err %.3e (%zu entries)", r.layer.c_str(),
                  r.pass ? "PASS" : "FAIL", r.max_rel_err, r.entries);
    log_line(line);
    if (!r.pass)
      for (const auto& [param, err] : r.per_parameter)
        if (err > tol) log_line("    " + param + " " + std::to_string(err));
    all_pass = all_pass && r.pass;
    layers.push_back({{"layer", r.layer}, {"pass", r.pass}, {"max_rel_err", r.max_rel_err}, {"entries", r.entries}});
  }
  std::cout << json({{"command", "gradcheck"}, {"pass", all_pass}, {"tol", tol}, {"layers", layers}}).dump()
            << std::endl;
  return all_pass ? 0 : kExitGradcheck;
}

int cmd_report(const std::string& in, const std::string& out) {
  const auto cells = gb::load_cells(in);
  if (cells.empty()) throw gb::Error("report: no result cells under " + in);
  const gb::Report report = gb::make_report(cells);
  const fs::path md(out);
  write_text(md, report.markdown);
  const fs::path csv = md.parent_path() / (md.stem().string() + ".csv");
  write_text(csv, report.csv);
  std::cout << json({{"command", "report"}, {"cells", cells.size()}, {"markdown", md.string()}, {"csv", csv.string()}})
                   .dump()
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-bendr: GNN-augmented masked pre-training for multichannel EEG"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate synthetic recordings or labeled tasks");
  synth->require_subcommand(1);
  SynthPretrainArgs sp;
  auto* synth_pre = synth->add_subcommand("pretrain", "Unlabeled pre-training corpus");
  synth_pre->add_option("--seed", sp.seed);
  synth_pre->add_option("--recordings", sp.recordings)->check(CLI::PositiveNumber);
  synth_pre->add_option("--duration", sp.duration, "Seconds per recording")->check(CLI::PositiveNumber);
  synth_pre->add_option("--sfreq", sp.sfreq)->check(CLI::PositiveNumber);
  synth_pre->add_option("--montage", sp.montage);
  synth_pre->add_option("--out", sp.out)->required();
  SynthTaskArgs st;
  auto* synth_task = synth->add_subcommand("task", "Labeled task with a planted coupled channel pair");
  synth_task->add_option("--seed", st.seed);
  synth_task->add_option("--pair", st.pair, "Coupled channels, e.g. C3,C4");
  synth_task->add_option("--windows", st.windows)->check(CLI::PositiveNumber);
  synth_task->add_option("--folds", st.folds)->check(CLI::PositiveNumber);
  synth_task->add_option("--metric", st.metric)->check(CLI::IsMember({"accuracy", "auroc"}));
  synth_task->add_option("--balance", st.balance, "Fraction of positive windows");
  synth_task->add_option("--window", st.window, "Window length in seconds")->check(CLI::PositiveNumber);
  synth_task->add_option("--sfreq", st.sfreq)->check(CLI::PositiveNumber);
  synth_task->add_option("--lag", st.lag, "Planted lag in seconds");
  synth_task->add_option("--band", st.band, "Planted band lo,hi in Hz");
  synth_task->add_option("--gain", st.gain, "Planted amplitude relative to the background");
  synth_task->add_option("--name", st.name);
  synth_task->add_option("--montage", st.montage);
  synth_task->add_option("--out", st.out)->required();

  std::string graph_montage = "default", graph_out;
  auto* graph = app.add_subcommand("graph", "Export the edge-weight matrix as CSV and JSON");
  graph->add_option("--montage", graph_montage);
  graph->add_option("--out", graph_out)->required();

  PretrainArgs pa;
  auto* pre = app.add_subcommand("pretrain", "Masked contrastive pre-training");
  pre->add_option("--config", pa.config, "JSON run configuration");
  pre->add_option("--data", pa.data, "Corpus directory from 'synth pretrain'")->required();
  pre->add_option("--out", pa.out, "Checkpoint path")->required();
  pre->add_option("--montage", pa.montage);
  pre->add_option("--steps", pa.steps);
  pre->add_option_function<std::uint64_t>("--seed", [&pa](const std::uint64_t& v) {
    pa.seed = v;
    pa.seed_set = true;
  });
  add_gnn_flags(pre, pa.gnn);

  FinetuneArgs fa;
  auto* fine = app.add_subcommand("finetune", "Cross-validated fine-tuning on a task");
  fine->add_option("--checkpoint", fa.checkpoint)->required();
  fine->add_option("--task", fa.task)->required();
  fine->add_option("--head", fa.head)->check(CLI::IsMember({"bendr", "linear"}));
  fine->add_option("--adjuster", fa.adjuster)->check(CLI::IsMember({"linear", "padding"}));
  fine->add_option("--epochs", fa.epochs);
  fine->add_option("--batch-size", fa.batch_size);
  fine->add_option("--lr", fa.lr);
  fine->add_option("--out", fa.out, "Result JSON path");
  fine->add_option_function<std::uint64_t>("--seed", [&fa](const std::uint64_t& v) {
    fa.seed = v;
    fa.seed_set = true;
  });
  add_gnn_flags(fine, fa.gnn);

  GridArgs ga;
  auto* grid = app.add_subcommand("grid", "Evaluate models x heads x tasks x adjusters");
  grid->add_option("--checkpoints", ga.checkpoints, "Comma-separated checkpoint paths")->required();
  grid->add_option("--tasks", ga.tasks, "Comma-separated task directories")->required();
  grid->add_option("--heads", ga.heads);
  grid->add_option("--adjusters", ga.adjusters);
  grid->add_option("--epochs", ga.epochs);
  grid->add_option("--jobs", ga.jobs)->check(CLI::PositiveNumber);
  grid->add_flag("--no-resume", ga.no_resume, "Recompute cells that already have result files");
  grid->add_option("--out", ga.out)->required();

  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  bool gc_all = false;
  std::string gc_config;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every layer");
  gc->add_flag("--all", gc_all, "Check every trainable layer (the default)");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--eps", gc_eps)->check(CLI::PositiveNumber);
  gc->add_option("--tol", gc_tol)->check(CLI::PositiveNumber);
  gc->add_option("--config", gc_config, "Take encoder kernels and strides from this config");

  std::string report_in, report_out;
  auto* rep = app.add_subcommand("report", "Markdown and CSV tables from grid result files");
  rep->add_option("--in", report_in)->required();
  rep->add_option("--out", report_out, "Markdown path; the CSV goes next to it")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth_pre->parsed()) return cmd_synth_pretrain(sp);
    if (synth_task->parsed()) return cmd_synth_task(st);
    if (graph->parsed()) return cmd_graph(graph_montage, graph_out);
    if (pre->parsed()) return cmd_pretrain(pa);
    if (fine->parsed()) return cmd_finetune(fa);
    if (grid->parsed()) return cmd_grid(ga);
    if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_eps, gc_tol, gc_config);
    if (rep->parsed()) return cmd_report(report_in, report_out);
  } catch (const gb::ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitUsage;
}
