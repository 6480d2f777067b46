#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "graph_bendr/adam.hpp"
#include "graph_bendr/graph.hpp"
#include "graph_bendr/metrics.hpp"
#include "graph_bendr/pipelines.hpp"

namespace graph_bendr {

namespace {

constexpr std::uint64_t kFoldSalt = 0x464f'4c44'0000ull;

bool same_gnn(const GnnConfig& a, const GnnConfig& b) {
  if (a.architecture != b.architecture) return false;
  if (!a.enabled()) return true;
  return a.use_edge_weights == b.use_edge_weights && a.permute_edge_weights_seed == b.permute_edge_weights_seed;
}

std::vector<std::size_t> canonical_order(const TaskDataset& ds, std::vector<std::size_t> idx) {
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return ds.windows[a].source < ds.windows[b].source; });
  return idx;
}

bool is_new_parameter(const std::string& name) {
  return name.rfind("adjuster.", 0) == 0 || name.rfind("head.", 0) == 0;
}

}  // namespace

RunConfig checkpoint_config(const Checkpoint& checkpoint) { return RunConfig::from_json(checkpoint.config); }

nlohmann::json FinetuneRun::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  std::vector<double> per_fold;
  for (const auto& f : folds) {
    per_fold.push_back(f.metric);
    folds_json.push_back({{"fold", f.fold},
                          {"metric", f.metric},
                          {"final_train_loss", f.final_train_loss},
                          {"train_windows", f.audit.train.size()},
                          {"test_windows", f.audit.test.size()},
                          {"train_class_counts", {f.audit.train_counts[0], f.audit.train_counts[1]}},
                          {"test_class_counts", {f.audit.test_counts[0], f.audit.test_counts[1]}},
                          {"undersampled", f.audit.undersampled}});
  }
  return {{"model", model},
          {"head", to_string(head)},
          {"adjuster", to_string(adjuster)},
          {"adjuster_applied", to_string(adjuster_applied)},
          {"metric", to_string(metric)},
          {"per_fold", per_fold},
          {"mean", mean},
          {"folds", folds_json}};
}

FoldResult finetune_fold(const Checkpoint& checkpoint, const TaskDataset& dataset, int fold,
                         const FinetuneOptions& options, const Progress& progress) {
  dataset.validate();
  if (fold < 0 || fold >= dataset.folds) throw ValidationError("finetune: fold " + std::to_string(fold) + " out of range");
  RunConfig cfg = checkpoint_config(checkpoint);
  if (options.expect_gnn && !same_gnn(cfg.gnn, *options.expect_gnn))
    throw ValidationError("finetune: checkpoint was pre-trained as '" + model_name(cfg.gnn) + "' but '" +
                          model_name(*options.expect_gnn) + "' was requested");
  cfg.head.kind = options.head;
  cfg.adjuster = options.adjuster;
  const int epochs = options.epochs.value_or(cfg.finetune.epochs);
  const int batch = options.batch_size.value_or(cfg.finetune.batch_size);
  const double lr = options.lr.value_or(cfg.finetune.lr);
  if (epochs < 0 || batch < 1 || !(lr > 0.0)) throw ConfigError("finetune: invalid epochs, batch size or lr");
  const StreamSeeds seeds = options.seeds.value_or(cfg.seeds.streams());

  const Montage montage = Montage::from_json(checkpoint.model.at("montage"));
  const auto labels = checkpoint.model.at("channel_labels").get<std::vector<std::string>>();
  if (labels != dataset.channel_labels) throw ValidationError("finetune: task channels differ from the checkpoint montage");
  const auto n = checkpoint.model.at("seq_len").get<Eigen::Index>();
  const Eigen::Index m = dataset.windows.front().samples.cols();
  try {
    select_adjuster(static_cast<int>(m), static_cast<int>(n), options.adjuster);
  } catch (const ValidationError& ex) {
    throw ValidationError("finetune: task length m = " + std::to_string(m) + " is incompatible with checkpoint n = " +
                          std::to_string(n) + " under the " + to_string(options.adjuster) + " adjuster (" +
                          ex.what() + ")");
  }

  const std::uint64_t salt = kFoldSalt + static_cast<std::uint64_t>(fold);
  Rng init = make_stream(seeds.init, salt);
  Rng sampling = make_stream(seeds.sampling, salt);
  Rng dropout = make_stream(seeds.dropout, salt);

  FinetuneModel<float> model(cfg, build_edge_weights(montage), m, n, init);
  const ParamList<float> params = model.parameters();
  for (auto* p : params) {
    if (is_new_parameter(p->name)) continue;
    if (checkpoint.find(p->name) == nullptr) throw ValidationError("finetune: checkpoint lacks tensor '" + p->name + "'");
  }
  checkpoint.fill(params);
  for (auto* p : params)
    if (is_new_parameter(p->name) && checkpoint.find(p->name) != nullptr)
      throw ValidationError("finetune: checkpoint unexpectedly holds '" + p->name + "'");

  std::vector<std::size_t> train_all, test;
  for (std::size_t i = 0; i < dataset.windows.size(); ++i)
    (dataset.fold_assignment[i] == fold ? test : train_all).push_back(i);
  train_all = canonical_order(dataset, train_all);
  test = canonical_order(dataset, test);

  FoldResult result;
  result.fold = fold;
  FoldAudit& audit = result.audit;
  audit.fold = fold;
  std::vector<std::size_t> train = train_all;
  if (!dataset.balanced) {
    std::vector<int> y;
    for (std::size_t i : train_all) y.push_back(*dataset.windows[i].label);
    train.clear();
    for (std::size_t k : undersample(y, sampling, dataset.num_classes)) train.push_back(train_all[k]);
    audit.undersampled = true;
  }
  std::set<std::size_t> test_set(test.begin(), test.end());
  for (std::size_t i : train) {
    if (test_set.count(i)) throw Error("finetune: test window leaked into the training split");
    audit.train.push_back(dataset.windows[i].source);
    ++audit.train_counts[*dataset.windows[i].label];
  }
  for (std::size_t i : test) {
    audit.test.push_back(dataset.windows[i].source);
    ++audit.test_counts[*dataset.windows[i].label];
  }
  for (std::size_t i = 0; i < dataset.windows.size(); ++i)
    if (dataset.fold_assignment[i] == fold) ++audit.test_available[*dataset.windows[i].label];

  AdamConfig acfg = cfg.optimizer;
  acfg.lr = lr;
  AdamState<float> adam(acfg, params);
  std::vector<std::size_t> order = train;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(sampling, i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
      const float scale = 1.0f / static_cast<float>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& w = dataset.windows[order[k]];
        FinetuneModel<float>::Cache cache;
        const MatF logits = model.logits(w.samples, cache, ForwardContext{true, &dropout});
        MatF dlogits;
        epoch_loss += softmax_cross_entropy(logits, *w.label, dlogits);
        model.backward(cache, dlogits * scale);
      }
      adam_step(adam, params);
    }
    result.final_train_loss = order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size());
    if (progress && ((epoch + 1) % 5 == 0 || epoch + 1 == epochs)) {
      char line[128];
      std::snprintf(line, sizeof(line), "  fold %d epoch %d/%d train loss %.4f", fold, epoch + 1, epochs,
                    result.final_train_loss);
      progress(line);
    }
  }

  std::vector<double> scores;
  std::vector<int> predictions, truth;
  for (std::size_t i : test) {
    FinetuneModel<float>::Cache cache;
    const MatF logits = model.logits(dataset.windows[i].samples, cache);
    const double score = static_cast<double>(logits(0, 1)) - static_cast<double>(logits(0, 0));
    scores.push_back(score);
    predictions.push_back(score > 0.0 ? 1 : 0);
    truth.push_back(*dataset.windows[i].label);
  }
  result.metric = dataset.metric == Metric::kAuroc ? auroc(scores, truth) : accuracy(predictions, truth);
  return result;
}

FinetuneRun crossval(const Checkpoint& checkpoint, const TaskDataset& dataset, const FinetuneOptions& options,
                     const Progress& progress) {
  dataset.validate();
  if (dataset.folds < 2) throw ValidationError("crossval: needs at least 2 folds");
  FinetuneRun run;
  const RunConfig cfg = checkpoint_config(checkpoint);
  run.model = model_name(cfg.gnn);
  run.head = options.head;
  run.adjuster = options.adjuster;
  run.adjuster_applied =
      select_adjuster(static_cast<int>(dataset.windows.front().samples.cols()),
                      checkpoint.model.at("seq_len").get<int>(), options.adjuster)
          .kind;
  run.metric = dataset.metric;
  double sum = 0.0;
  for (int f = 0; f < dataset.folds; ++f) {
    run.folds.push_back(finetune_fold(checkpoint, dataset, f, options, progress));
    sum += run.folds.back().metric;
    if (progress) {
      char line[128];
      std::snprintf(line, sizeof(line), "%s/%s/%s fold %d: %s %.4f", run.model.c_str(), to_string(run.head).c_str(),
                    to_string(run.adjuster).c_str(), f, to_string(run.metric).c_str(), run.folds.back().metric);
      progress(line);
    }
  }
  run.mean = sum / static_cast<double>(dataset.folds);
  return run;
}

}  // namespace graph_bendr
