#include "graph_bendr/dataset_io.hpp"

#include <filesystem>
#include <fstream>

#include "graph_bendr/checkpoint.hpp"

namespace graph_bendr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& doc) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }
}

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05zu.eeg", prefix, i);
  return buf;
}

}  // namespace

void save_pretrain_corpus(const std::string& dir, const std::vector<Recording>& recordings) {
  fs::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    const std::string file = numbered("rec_", i);
    save_recording(recordings[i], (fs::path(dir) / file).string());
    entries.push_back({{"path", file}, {"subject_id", recordings[i].subject_id}});
  }
  write_json(fs::path(dir) / "manifest.json", {{"kind", "pretrain"}, {"recordings", entries}});
}

std::vector<Recording> load_pretrain_corpus(const std::string& dir) {
  const json doc = read_json(fs::path(dir) / "manifest.json");
  std::vector<Recording> out;
  try {
    if (doc.at("kind") != "pretrain") throw FormatError(dir + ": manifest is not a pre-training corpus");
    for (const auto& e : doc.at("recordings"))
      out.push_back(load_recording((fs::path(dir) / e.at("path").get<std::string>()).string()));
  } catch (const json::exception& ex) {
    throw FormatError(dir + "/manifest.json: " + ex.what());
  }
  if (out.empty()) throw ValidationError(dir + ": corpus has no recordings");
  return out;
}

void save_task(const std::string& dir, const TaskDataset& dataset, const std::string& name, const json& generator) {
  dataset.validate();
  fs::create_directories(fs::path(dir) / "windows");
  json entries = json::array();
  for (std::size_t i = 0; i < dataset.windows.size(); ++i) {
    const auto& w = dataset.windows[i];
    Recording rec;
    rec.channel_labels = dataset.channel_labels;
    rec.sfreq = w.sfreq;
    rec.samples = w.samples;
    rec.subject_id = w.source.subject_id;
    const std::string file = "windows/" + numbered("w_", i);
    save_recording(rec, (fs::path(dir) / file).string());
    entries.push_back({{"path", file},
                       {"label", *w.label},
                       {"fold", dataset.fold_assignment[i]},
                       {"subject_id", w.source.subject_id},
                       {"offset", w.source.offset}});
  }
  json doc = {{"kind", "task"},
              {"name", name},
              {"metric", to_string(dataset.metric)},
              {"folds", dataset.folds},
              {"balanced", dataset.balanced},
              {"num_classes", dataset.num_classes},
              {"channel_labels", dataset.channel_labels},
              {"windows", entries}};
  if (!generator.is_null()) doc["generator"] = generator;
  write_json(fs::path(dir) / "manifest.json", doc);
}

TaskDataset load_task(const std::string& dir, std::string* name) {
  const json doc = read_json(fs::path(dir) / "manifest.json");
  TaskDataset ds;
  try {
    if (doc.at("kind") != "task") throw FormatError(dir + ": manifest is not a task dataset");
    if (name != nullptr) *name = doc.value("name", fs::path(dir).filename().string());
    ds.metric = metric_from_string(doc.at("metric"));
    ds.folds = doc.at("folds");
    ds.balanced = doc.at("balanced");
    ds.num_classes = doc.value("num_classes", 2);
    ds.channel_labels = doc.at("channel_labels").get<std::vector<std::string>>();
    for (const auto& e : doc.at("windows")) {
      const Recording rec = load_recording((fs::path(dir) / e.at("path").get<std::string>()).string());
      if (rec.channel_labels != ds.channel_labels)
        throw FormatError(dir + ": window channel labels differ from the manifest");
      EegWindow w;
      w.samples = rec.samples;
      w.sfreq = rec.sfreq;
      w.label = e.at("label").get<int>();
      w.source = WindowSource{e.at("subject_id"), e.at("offset")};
      ds.windows.push_back(std::move(w));
      ds.fold_assignment.push_back(e.at("fold"));
    }
  } catch (const json::exception& ex) {
    throw FormatError(dir + "/manifest.json: " + ex.what());
  }
  ds.validate();
  return ds;
}

std::string task_content_hash(const TaskDataset& dataset) {
  json meta = {{"metric", to_string(dataset.metric)},
               {"folds", dataset.folds},
               {"balanced", dataset.balanced},
               {"channel_labels", dataset.channel_labels},
               {"fold_assignment", dataset.fold_assignment}};
  std::string bytes = meta.dump();
  for (const auto& w : dataset.windows) {
    bytes += json({{"label", w.label.value_or(-1)}, {"subject", w.source.subject_id}, {"offset", w.source.offset},
                   {"sfreq", w.sfreq}})
                 .dump();
    bytes.append(reinterpret_cast<const char*>(w.samples.data()), w.samples.size() * sizeof(float));
  }
  return sha256_hex(bytes);
}

}  // namespace graph_bendr
