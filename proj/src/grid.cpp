#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "graph_bendr/dataset_io.hpp"
#include "graph_bendr/pipelines.hpp"

namespace graph_bendr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct LoadedTask {
  std::string name;
  TaskDataset dataset;
  std::string hash;
};

struct LoadedModel {
  std::string path;
  Checkpoint checkpoint;
  std::string hash;
  std::string name;
  std::uint64_t seed = 0;
};

int model_rank(const std::string& name) {
  static const std::vector<std::string> order = {"baseline", "sage", "gcn", "gcn+ew", "gat", "gat+ew"};
  const auto it = std::find(order.begin(), order.end(), name);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

std::string display_model(const std::string& name) {
  static const std::map<std::string, std::string> names = {{"baseline", "Baseline"}, {"sage", "GraphSAGE"},
                                                           {"gcn", "GCN"},           {"gcn+ew", "GCN (w/ e.)"},
                                                           {"gat", "GAT"},           {"gat+ew", "GAT (w/ e.)"}};
  const std::string suffix = "+perm";
  if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
    return display_model(name.substr(0, name.size() - suffix.size())) + " [permuted W]";
  const auto it = names.find(name);
  return it == names.end() ? name : it->second;
}

std::string display_head(const std::string& head) { return head == "bendr" ? "BENDR" : "Linear"; }

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

json GridCell::to_json() const {
  return {{"model", model},
          {"head", head},
          {"adjuster", adjuster},
          {"task", task},
          {"metric", metric},
          {"per_fold", per_fold},
          {"mean", mean},
          {"seed", seed},
          {"checkpoint_hash", checkpoint_hash},
          {"key", key}};
}

GridCell GridCell::from_json(const json& doc) {
  GridCell c;
  try {
    c.model = doc.at("model");
    c.head = doc.at("head");
    c.adjuster = doc.at("adjuster");
    c.task = doc.at("task");
    c.metric = doc.value("metric", "accuracy");
    c.per_fold = doc.at("per_fold").get<std::vector<double>>();
    c.mean = doc.at("mean");
    c.seed = doc.value("seed", std::uint64_t{0});
    c.checkpoint_hash = doc.value("checkpoint_hash", "");
    c.key = doc.value("key", "");
  } catch (const json::exception& ex) {
    throw FormatError(std::string("grid cell: ") + ex.what());
  }
  return c;
}

void flag_cells(std::vector<GridCell>& cells) {
  std::map<std::tuple<std::string, std::string, std::string>, double> baseline;
  for (const auto& c : cells)
    if (c.model == "baseline") baseline[{c.head, c.adjuster, c.task}] = c.mean;
  for (auto& c : cells) {
    c.flagged = false;
    if (c.model == "baseline") continue;
    const auto it = baseline.find({c.head, c.adjuster, c.task});
    c.flagged = it != baseline.end() && c.mean > it->second;
  }
}

std::vector<GridCell> run_grid(const std::vector<GridModel>& models, const std::vector<GridTask>& tasks,
                               const GridOptions& options, const Progress& progress) {
  if (models.empty() || tasks.empty()) throw ValidationError("grid: needs at least one model and one task");
  if (options.out_dir.empty()) throw ConfigError("grid: output directory required");
  if (options.jobs < 1) throw ConfigError("grid: --jobs must be >= 1");

  std::vector<LoadedModel> loaded_models;
  for (const auto& m : models) {
    LoadedModel lm;
    lm.path = m.checkpoint_path;
    lm.checkpoint = Checkpoint::load(m.checkpoint_path);
    lm.hash = sha256_file(m.checkpoint_path);
    const RunConfig cfg = checkpoint_config(lm.checkpoint);
    lm.name = model_name(cfg.gnn);
    lm.seed = options.seeds ? options.seeds->init : cfg.seeds.seed;
    loaded_models.push_back(std::move(lm));
  }
  std::vector<LoadedTask> loaded_tasks;
  for (const auto& t : tasks) {
    LoadedTask lt;
    std::string manifest_name;
    lt.dataset = load_task(t.dir, &manifest_name);
    lt.name = t.name.empty() ? manifest_name : t.name;
    lt.hash = task_content_hash(lt.dataset);
    loaded_tasks.push_back(std::move(lt));
  }

  struct Job {
    const LoadedModel* model;
    const LoadedTask* task;
    HeadKind head;
    AdjusterKind adjuster;
  };
  std::vector<Job> jobs;
  for (const auto& m : loaded_models)
    for (HeadKind h : options.heads)
      for (const auto& t : loaded_tasks)
        for (AdjusterKind a : options.adjusters) jobs.push_back({&m, &t, h, a});

  const fs::path cell_dir = fs::path(options.out_dir) / "cells";
  fs::create_directories(cell_dir);
  std::vector<GridCell> cells(jobs.size());
  std::mutex log_mutex;
  auto log = [&](const std::string& line) {
    if (!progress) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    progress(line);
  };
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (failure) return;
      }
      try {
        const Job& job = jobs[i];
        const json settings = {{"model", job.model->name},
                               {"head", to_string(job.head)},
                               {"adjuster", to_string(job.adjuster)},
                               {"task", job.task->name},
                               {"epochs", options.epochs ? json(*options.epochs) : json(nullptr)},
                               {"batch_size", options.batch_size ? json(*options.batch_size) : json(nullptr)},
                               {"lr", options.lr ? json(*options.lr) : json(nullptr)},
                               {"seeds", options.seeds ? json({options.seeds->init, options.seeds->mask,
                                                               options.seeds->sampling, options.seeds->dropout})
                                                       : json(nullptr)}};
        const std::string key = sha256_hex(job.model->hash + job.task->hash + settings.dump()).substr(0, 24);
        const fs::path file = cell_dir / (key + ".json");
        if (options.resume && fs::exists(file)) {
          std::ifstream in(file);
          cells[i] = GridCell::from_json(json::parse(in));
          log("grid: reuse " + job.model->name + "/" + to_string(job.head) + "/" + job.task->name + "/" +
              to_string(job.adjuster));
          continue;
        }
        FinetuneOptions fo;
        fo.head = job.head;
        fo.adjuster = job.adjuster;
        fo.epochs = options.epochs;
        fo.batch_size = options.batch_size;
        fo.lr = options.lr;
        fo.seeds = options.seeds;
        const FinetuneRun run = crossval(job.model->checkpoint, job.task->dataset, fo, {});
        GridCell cell;
        cell.model = job.model->name;
        cell.head = to_string(job.head);
        cell.adjuster = to_string(job.adjuster);
        cell.task = job.task->name;
        cell.metric = to_string(run.metric);
        for (const auto& f : run.folds) cell.per_fold.push_back(f.metric);
        cell.mean = run.mean;
        cell.seed = job.model->seed;
        cell.checkpoint_hash = job.model->hash;
        cell.key = key;
        write_text_atomic(file, cell.to_json().dump(2) + "\n");
        cells[i] = cell;
        char line[200];
        std::snprintf(line, sizeof(line), "grid: %s/%s/%s/%s mean %.4f", cell.model.c_str(), cell.head.c_str(),
                      cell.task.c_str(), cell.adjuster.c_str(), cell.mean);
        log(line);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int threads = std::min<int>(options.jobs, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  flag_cells(cells);
  return cells;
}

std::vector<GridCell> load_cells(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error("report: not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<GridCell> cells;
  for (const auto& f : files) {
    std::ifstream in(f);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception&) {
      continue;
    }
    if (!doc.is_object() || !doc.contains("model") || !doc.contains("per_fold")) continue;
    cells.push_back(GridCell::from_json(doc));
  }
  flag_cells(cells);
  return cells;
}

Report make_report(std::vector<GridCell> cells) {
  flag_cells(cells);
  std::vector<std::string> models, tasks, adjusters;
  auto add = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& c : cells) {
    add(models, c.model);
    add(tasks, c.task);
    add(adjusters, c.adjuster);
  }
  std::stable_sort(models.begin(), models.end(), [](const std::string& a, const std::string& b) {
    const int ra = model_rank(a), rb = model_rank(b);
    return ra != rb ? ra < rb : a < b;
  });
  std::sort(tasks.begin(), tasks.end());
  std::sort(adjusters.begin(), adjusters.end());

  std::map<std::tuple<std::string, std::string, std::string, std::string>, const GridCell*> index;
  for (const auto& c : cells) index[{c.model, c.head, c.adjuster, c.task}] = &c;

  Report report;
  report.csv = "model,head,adjuster,task,metric,mean,flagged,per_fold\n";
  for (const auto& c : cells) {
    std::string folds;
    for (double v : c.per_fold) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s%.6f", folds.empty() ? "" : ";", v);
      folds += buf;
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%s,%s,%s,%s,%.6f,%d,%s\n", c.model.c_str(), c.head.c_str(),
                  c.adjuster.c_str(), c.task.c_str(), c.metric.c_str(), c.mean, c.flagged ? 1 : 0, folds.c_str());
    report.csv += line;
  }

  std::string& md = report.markdown;
  for (const auto& adj : adjusters) {
    md += "## Adjuster: " + adj + "\n\n| Model | Config. |";
    for (const auto& t : tasks) md += " " + t + " |";
    md += "\n|---|---|";
    for (std::size_t i = 0; i < tasks.size(); ++i) md += "---:|";
    md += "\n";
    for (const auto& m : models) {
      bool first = true;
      for (const std::string head : {"bendr", "linear"}) {
        bool any = false;
        for (const auto& t : tasks) any = any || index.count({m, head, adj, t});
        if (!any) continue;
        md += "| " + (first ? "**" + display_model(m) + "**" : std::string()) + " | " + display_head(head) + " |";
        first = false;
        for (const auto& t : tasks) {
          const auto it = index.find({m, head, adj, t});
          if (it == index.end()) {
            md += " - |";
            continue;
          }
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.3f", it->second->mean);
          md += it->second->flagged ? std::string(" <u>") + buf + "</u> |" : std::string(" ") + buf + " |";
        }
        md += "\n";
      }
    }
    md += "\nUnderlined: above the baseline with the same configuration.\n\n";
  }
  return report;
}

}  // namespace graph_bendr
