#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "graph_bendr/dataset_io.hpp"
#include "graph_bendr/graph.hpp"
#include "graph_bendr/metrics.hpp"
#include "graph_bendr/pipelines.hpp"
#include "graph_bendr/synth.hpp"
#include "support.hpp"

namespace gb = graph_bendr;
using gb::testing::TempDir;
using gb::testing::tiny_config;

namespace {

double brute_force_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

std::vector<gb::MatF> tiny_windows(std::uint64_t seed, const gb::RunConfig& cfg) {
  const auto recs = gb::generate_pretrain_corpus(seed, 2, gb::default_montage(), 12.0, cfg.data.sfreq);
  return gb::prepare_pretrain_windows(recs, gb::default_montage(), cfg);
}

gb::TaskSpec tiny_task_spec(int windows, int folds) {
  gb::TaskSpec spec;
  spec.num_windows = windows;
  spec.window_s = 3.0;
  spec.sfreq = 32.0;
  spec.folds = folds;
  spec.lag_s = 0.0625;
  spec.band_lo_hz = 3.0;
  spec.band_hi_hz = 8.0;
  spec.windows_per_subject = 4;
  return spec;
}

// Pre-trained tiny checkpoint, computed once per GNN variant.
const gb::Checkpoint& tiny_checkpoint(gb::GnnArchitecture arch = gb::GnnArchitecture::kNone, bool ew = false) {
  static std::map<std::pair<int, bool>, gb::Checkpoint> cache;
  const auto key = std::make_pair(static_cast<int>(arch), ew);
  auto it = cache.find(key);
  if (it == cache.end()) {
    gb::RunConfig cfg = tiny_config();
    cfg.gnn.architecture = arch;
    cfg.gnn.use_edge_weights = ew;
    it = cache.emplace(key, gb::pretrain(tiny_windows(3, cfg), cfg, gb::default_montage()).checkpoint).first;
  }
  return it->second;
}

// label = sign of the mean of channel 0
gb::TaskDataset sign_task(std::uint64_t seed, int windows, int folds) {
  gb::Rng rng = gb::make_stream(seed, gb::Stream::kData);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  gb::TaskDataset ds;
  ds.channel_labels = gb::default_montage().labels();
  ds.folds = folds;
  for (int i = 0; i < windows; ++i) {
    gb::EegWindow w;
    w.sfreq = 32.0;
    w.samples.resize(19, 96);
    for (Eigen::Index k = 0; k < w.samples.size(); ++k) w.samples.data()[k] = noise(rng);
    w.samples.row(0).array() += (i % 2 == 0) ? 0.5f : -0.5f;
    w.label = w.samples.row(0).mean() > 0.0f ? 1 : 0;
    w.source = {"s" + std::to_string(i / 5), static_cast<std::int64_t>(i % 5)};
    ds.windows.push_back(std::move(w));
    ds.fold_assignment.push_back((i / 2) % folds);
  }
  return ds;
}

}  // namespace

TEST(Accuracy, Examples) {
  EXPECT_EQ(gb::accuracy({0, 1, 1}, {0, 1, 1}), 1.0);
  EXPECT_EQ(gb::accuracy({1, 0}, {0, 1}), 0.0);
  EXPECT_EQ(gb::accuracy({1, 1, 0, 0}, {1, 1, 0, 1}), 0.75);
  EXPECT_THROW(gb::accuracy({1, 0}, {1}), gb::ValidationError);
  EXPECT_THROW(gb::accuracy({}, {}), gb::ValidationError);
}

TEST(Auroc, WorkedExampleAndAnchors) {
  EXPECT_EQ(gb::auroc({0.9, 0.8, 0.7, 0.85}, {1, 1, 0, 0}), 0.75);
  EXPECT_EQ(gb::auroc({3, 4, 1, 2}, {1, 1, 0, 0}), 1.0);
  EXPECT_EQ(gb::auroc({1, 2, 3, 4}, {1, 1, 0, 0}), 0.0);
  EXPECT_EQ(gb::auroc({5, 5, 5, 5, 5}, {1, 0, 0, 1, 0}), 0.5);
  EXPECT_THROW(gb::auroc({1, 2}, {1, 1}), gb::ValidationError);
  EXPECT_THROW(gb::auroc({1, 2}, {0, 2}), gb::ValidationError);
}

TEST(Auroc, EqualsPairwiseCountOnRandomInstances) {
  gb::Rng rng = gb::make_stream(11, gb::Stream::kData);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t size = 2 + gb::uniform_index(rng, 999);
    // few distinct values on some trials so ties are common
    const int levels = trial % 3 == 0 ? 1 + static_cast<int>(gb::uniform_index(rng, 5)) : 0;
    std::vector<double> s(size);
    std::vector<int> y(size);
    for (std::size_t i = 0; i < size; ++i) {
      s[i] = levels > 0 ? static_cast<double>(gb::uniform_index(rng, levels)) : gb::uniform(rng, -1.0, 1.0);
      y[i] = static_cast<int>(gb::uniform_index(rng, 2));
    }
    y[0] = 1;
    y[1] = 0;
    ASSERT_EQ(gb::auroc(s, y), brute_force_auroc(s, y)) << "trial " << trial;
  }
}

TEST(Undersample, MinorityKeptWhole) {
  gb::Rng rng = gb::make_stream(1, gb::Stream::kSampling);
  std::vector<int> labels(14, 1);
  for (int i : {2, 5, 9, 13}) labels[i] = 0;
  const auto idx = gb::undersample(labels, rng);
  ASSERT_EQ(idx.size(), 8u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  int neg = 0;
  for (auto i : idx) neg += labels[i] == 0;
  EXPECT_EQ(neg, 4);
  for (std::size_t i : {2u, 5u, 9u, 13u}) EXPECT_NE(std::find(idx.begin(), idx.end(), i), idx.end());
}

TEST(Undersample, BalancedIsIdentity) {
  gb::Rng rng = gb::make_stream(2, gb::Stream::kSampling);
  const std::vector<int> labels = {0, 1, 1, 0, 0, 1, 0, 1, 1, 0};
  std::vector<std::size_t> all(10);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(gb::undersample(labels, rng), all);
}

TEST(Undersample, DeterministicAndRejectsEmptyClass) {
  std::vector<int> labels(137, 0);
  std::fill(labels.begin(), labels.begin() + 100, 1);
  gb::Rng a = gb::make_stream(3, gb::Stream::kSampling);
  gb::Rng b = gb::make_stream(3, gb::Stream::kSampling);
  const auto sa = gb::undersample(labels, a);
  EXPECT_EQ(sa, gb::undersample(labels, b));
  EXPECT_EQ(sa.size(), 74u);
  gb::Rng c = gb::make_stream(3, gb::Stream::kSampling);
  EXPECT_THROW(gb::undersample(std::vector<int>(5, 1), c), gb::ValidationError);
}

TEST(Pretrain, ZeroStepsGivesInitialization) {
  gb::RunConfig cfg = tiny_config();
  cfg.pretrain.steps = 0;
  cfg.gnn.architecture = gb::GnnArchitecture::kGcn;
  const auto res = gb::pretrain(tiny_windows(1, cfg), cfg, gb::default_montage());
  EXPECT_TRUE(res.curve.empty());
  EXPECT_EQ(res.checkpoint.step, 0);

  gb::RngStreams streams(cfg.seeds.streams());
  gb::PretrainModel<float> model(cfg, gb::build_edge_weights(gb::default_montage()), 96, streams.init);
  const auto params = model.parameters();
  ASSERT_FALSE(params.empty());
  for (const auto* p : params) {
    const gb::NamedTensor* t = res.checkpoint.find(p->name);
    ASSERT_NE(t, nullptr) << p->name;
    EXPECT_TRUE(t->value == p->value) << p->name;
  }
}

TEST(Pretrain, SameSeedGivesIdenticalBytes) {
  gb::RunConfig cfg = tiny_config();
  cfg.gnn.architecture = gb::GnnArchitecture::kGat;
  cfg.gnn.use_edge_weights = true;
  const auto windows = tiny_windows(2, cfg);
  const auto a = gb::pretrain(windows, cfg, gb::default_montage());
  const auto b = gb::pretrain(windows, cfg, gb::default_montage());
  EXPECT_EQ(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
  ASSERT_EQ(a.curve.size(), 4u);

  cfg.seeds.seed = 2;
  EXPECT_NE(gb::pretrain(windows, cfg, gb::default_montage()).checkpoint.to_bytes(), a.checkpoint.to_bytes());
}

TEST(Pretrain, RejectsHeterogeneousShapes) {
  gb::RunConfig cfg = tiny_config();
  auto windows = tiny_windows(1, cfg);
  windows.push_back(gb::MatF::Zero(19, 64));
  try {
    gb::pretrain(windows, cfg, gb::default_montage());
    FAIL() << "expected an error";
  } catch (const gb::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 19 x 96"), std::string::npos) << e.what();
  }
  EXPECT_THROW(gb::pretrain({}, cfg, gb::default_montage()), gb::ValidationError);
}

TEST(Finetune, ZeroEpochsIsNearChance) {
  const gb::TaskDataset ds = gb::generate_task(5, gb::default_montage(), tiny_task_spec(200, 2));
  ASSERT_EQ(ds.fold_indices(0).size(), 100u);
  gb::FinetuneOptions opt;
  opt.epochs = 0;
  for (auto head : {gb::HeadKind::kBendr, gb::HeadKind::kLinear}) {
    opt.head = head;
    const auto r = gb::finetune_fold(tiny_checkpoint(), ds, 0, opt);
    EXPECT_GE(r.metric, 0.3) << gb::to_string(head);
    EXPECT_LE(r.metric, 0.7) << gb::to_string(head);
  }
}

TEST(Finetune, LearnsSignOfChannelMean) {
  const gb::TaskDataset ds = sign_task(8, 100, 4);

  // logistic regression on the channel-0 mean alone
  std::vector<double> feature;
  std::vector<int> labels;
  for (const auto& w : ds.windows) {
    feature.push_back(w.samples.row(0).mean());
    labels.push_back(*w.label);
  }
  double a = 0.0, b = 0.0;
  for (int it = 0; it < 2000; ++it) {
    double ga = 0.0, gb_ = 0.0;
    for (std::size_t i = 0; i < feature.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(a * feature[i] + b)));
      ga += (p - labels[i]) * feature[i];
      gb_ += p - labels[i];
    }
    a -= 0.5 * ga;
    b -= 0.5 * gb_;
  }
  std::vector<int> oracle;
  for (double f : feature) oracle.push_back(a * f + b > 0.0 ? 1 : 0);
  ASSERT_GE(gb::accuracy(oracle, labels), 0.99);

  gb::FinetuneOptions opt;
  opt.head = gb::HeadKind::kLinear;
  opt.epochs = 50;
  opt.lr = 1e-2;
  for (int fold = 0; fold < ds.folds; ++fold)
    EXPECT_GE(gb::finetune_fold(tiny_checkpoint(), ds, fold, opt).metric, 0.95) << "fold " << fold;
}

TEST(Finetune, SameSeedIsBitIdentical) {
  const gb::TaskDataset ds = gb::generate_task(6, gb::default_montage(), tiny_task_spec(40, 2));
  gb::FinetuneOptions opt;
  const auto& ck = tiny_checkpoint(gb::GnnArchitecture::kGcn, true);
  const auto a = gb::finetune_fold(ck, ds, 1, opt);
  const auto b = gb::finetune_fold(ck, ds, 1, opt);
  EXPECT_EQ(a.metric, b.metric);
  EXPECT_EQ(a.final_train_loss, b.final_train_loss);
}

TEST(Finetune, RejectsMismatchedGnnAndChannels) {
  const gb::TaskDataset ds = gb::generate_task(6, gb::default_montage(), tiny_task_spec(40, 2));
  gb::FinetuneOptions opt;
  gb::GnnConfig gcn;
  gcn.architecture = gb::GnnArchitecture::kGcn;
  opt.expect_gnn = gcn;
  EXPECT_THROW(gb::finetune_fold(tiny_checkpoint(), ds, 0, opt), gb::ValidationError);
  EXPECT_THROW(gb::finetune_fold(tiny_checkpoint(), ds, 2, gb::FinetuneOptions{}), gb::ValidationError);

  gb::TaskDataset renamed = ds;
  renamed.channel_labels[0] = "X1";
  EXPECT_THROW(gb::finetune_fold(tiny_checkpoint(), renamed, 0, gb::FinetuneOptions{}), gb::ValidationError);
}

TEST(Finetune, PaddingNeedsShorterTaskWindows) {
  gb::TaskSpec spec = tiny_task_spec(40, 2);
  spec.window_s = 2.0;
  const gb::TaskDataset shorter = gb::generate_task(7, gb::default_montage(), spec);
  gb::FinetuneOptions opt;
  opt.adjuster = gb::AdjusterKind::kPadding;
  opt.epochs = 1;
  const auto r = gb::finetune_fold(tiny_checkpoint(), shorter, 0, opt);
  EXPECT_GE(r.metric, 0.0);
  EXPECT_LE(r.metric, 1.0);

  spec.window_s = 4.0;
  const gb::TaskDataset longer = gb::generate_task(7, gb::default_montage(), spec);
  EXPECT_THROW(gb::finetune_fold(tiny_checkpoint(), longer, 0, opt), gb::ValidationError);
}

TEST(Crossval, MeanAndPartition) {
  const gb::TaskDataset ds = gb::generate_task(9, gb::default_montage(), tiny_task_spec(48, 4));
  gb::FinetuneOptions opt;
  opt.epochs = 1;
  const auto run = gb::crossval(tiny_checkpoint(), ds, opt);
  ASSERT_EQ(run.folds.size(), 4u);
  double sum = 0.0;
  std::set<gb::WindowSource> tested;
  for (std::size_t f = 0; f < run.folds.size(); ++f) {
    EXPECT_EQ(run.folds[f].fold, static_cast<int>(f));
    sum += run.folds[f].metric;
    for (const auto& s : run.folds[f].audit.test) EXPECT_TRUE(tested.insert(s).second);
  }
  EXPECT_EQ(tested.size(), ds.windows.size());
  EXPECT_NEAR(run.mean, sum / 4.0, 1e-15);
  EXPECT_EQ(run.model, "baseline");
  EXPECT_EQ(run.adjuster_applied, gb::AdjusterKind::kIdentity);

  const auto doc = run.to_json();
  EXPECT_EQ(doc.at("per_fold").size(), 4u);
  EXPECT_EQ(doc.at("metric"), "accuracy");
}

TEST(Crossval, DatasetOrderDoesNotMatter) {
  const gb::TaskDataset ds = gb::generate_task(10, gb::default_montage(), tiny_task_spec(32, 2));
  gb::TaskDataset shuffled = ds;
  std::vector<std::size_t> perm(ds.windows.size());
  std::iota(perm.begin(), perm.end(), 0);
  gb::Rng rng = gb::make_stream(10, gb::Stream::kData);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.windows[i] = ds.windows[perm[i]];
    shuffled.fold_assignment[i] = ds.fold_assignment[perm[i]];
  }
  gb::FinetuneOptions opt;
  opt.epochs = 1;
  const auto a = gb::crossval(tiny_checkpoint(), ds, opt);
  const auto b = gb::crossval(tiny_checkpoint(), shuffled, opt);
  for (std::size_t f = 0; f < a.folds.size(); ++f) EXPECT_EQ(a.folds[f].metric, b.folds[f].metric);
}

TEST(Protocol, UndersamplingAuditOnImbalancedTask) {
  gb::TaskSpec spec = tiny_task_spec(40, 2);
  spec.class_balance = 0.3;
  spec.metric = gb::Metric::kAuroc;
  const gb::TaskDataset ds = gb::generate_task(12, gb::default_montage(), spec);
  ASSERT_FALSE(ds.balanced);
  gb::FinetuneOptions opt;
  opt.epochs = 1;
  const auto run = gb::crossval(tiny_checkpoint(), ds, opt);
  EXPECT_EQ(run.metric, gb::Metric::kAuroc);
  for (const auto& f : run.folds) {
    const auto& a = f.audit;
    EXPECT_TRUE(a.undersampled);
    EXPECT_EQ(a.train_counts[0], a.train_counts[1]);
    EXPECT_EQ(a.test_counts[0], a.test_available[0]);
    EXPECT_EQ(a.test_counts[1], a.test_available[1]);

    std::set<gb::WindowSource> expected_test;
    for (auto i : ds.fold_indices(f.fold)) expected_test.insert(ds.windows[i].source);
    EXPECT_EQ(std::set<gb::WindowSource>(a.test.begin(), a.test.end()), expected_test);
    for (const auto& s : a.train) EXPECT_EQ(expected_test.count(s), 0u);
  }
}

TEST(Protocol, BalancedTaskUsesAccuracyWithoutUndersampling) {
  const gb::TaskDataset ds = gb::generate_task(13, gb::default_montage(), tiny_task_spec(40, 2));
  gb::FinetuneOptions opt;
  opt.epochs = 1;
  const auto r = gb::finetune_fold(tiny_checkpoint(), ds, 0, opt);
  EXPECT_FALSE(r.audit.undersampled);
  EXPECT_EQ(r.audit.train.size() + r.audit.test.size(), ds.windows.size());
  EXPECT_EQ(gb::crossval(tiny_checkpoint(), ds, opt).metric, gb::Metric::kAccuracy);
}

TEST(Grid, SixModelsTwoHeadsThreeTasks) {
  TempDir dir("grid");
  std::vector<gb::GridModel> models;
  const std::vector<std::pair<gb::GnnArchitecture, bool>> variants = {
      {gb::GnnArchitecture::kNone, false}, {gb::GnnArchitecture::kSage, false}, {gb::GnnArchitecture::kGcn, false},
      {gb::GnnArchitecture::kGcn, true},   {gb::GnnArchitecture::kGat, false},  {gb::GnnArchitecture::kGat, true}};
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const std::string path = dir / ("model" + std::to_string(i) + ".ckpt");
    tiny_checkpoint(variants[i].first, variants[i].second).save(path);
    models.push_back({path});
  }
  std::vector<gb::GridTask> tasks;
  for (int t = 0; t < 3; ++t) {
    gb::TaskSpec spec = tiny_task_spec(16, 2);
    if (t == 2) {
      spec.class_balance = 0.25;
      spec.metric = gb::Metric::kAuroc;
    }
    const std::string task_dir = dir / ("task" + std::to_string(t));
    gb::save_task(task_dir, gb::generate_task(20 + t, gb::default_montage(), spec), "task" + std::to_string(t));
    tasks.push_back({"", task_dir});
  }
  gb::GridOptions opt;
  opt.adjusters = {gb::AdjusterKind::kLinear};
  opt.epochs = 1;
  opt.out_dir = dir / "grid";
  const auto cells = gb::run_grid(models, tasks, opt);
  ASSERT_EQ(cells.size(), 36u);
  std::set<std::string> names;
  for (const auto& c : cells) {
    EXPECT_GE(c.mean, 0.0);
    EXPECT_LE(c.mean, 1.0);
    EXPECT_EQ(c.per_fold.size(), 2u);
    names.insert(c.model);
  }
  EXPECT_EQ(names, (std::set<std::string>{"baseline", "sage", "gcn", "gcn+ew", "gat", "gat+ew"}));
  EXPECT_EQ(cells[24].metric, "accuracy");
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir / "grid/cells"), {}), 36);

  for (const auto& c : cells) {
    if (c.model == "baseline") {
      EXPECT_FALSE(c.flagged);
      continue;
    }
    const auto base = std::find_if(cells.begin(), cells.end(), [&](const gb::GridCell& b) {
      return b.model == "baseline" && b.head == c.head && b.adjuster == c.adjuster && b.task == c.task;
    });
    ASSERT_NE(base, cells.end());
    EXPECT_EQ(c.flagged, c.mean > base->mean) << c.model << c.head << c.task;
  }

  const auto report = gb::make_report(gb::load_cells(opt.out_dir));
  EXPECT_NE(report.markdown.find("| **Baseline** | BENDR |"), std::string::npos);
  EXPECT_EQ(std::count(report.csv.begin(), report.csv.end(), '\n'), 37);

  // a second run reuses every cell file
  std::vector<std::string> log;
  const auto again = gb::run_grid(models, tasks, opt, [&](const std::string& l) { log.push_back(l); });
  ASSERT_EQ(log.size(), 36u);
  for (const auto& l : log) EXPECT_EQ(l.rfind("grid: reuse", 0), 0u);
  for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_EQ(again[i].mean, cells[i].mean);
}

TEST(Grid, FlagsAreStrictlyAboveBaseline) {
  auto cell = [](std::string model, std::string head, double mean) {
    gb::GridCell c;
    c.model = std::move(model);
    c.head = std::move(head);
    c.adjuster = "linear";
    c.task = "t";
    c.mean = mean;
    return c;
  };
  std::vector<gb::GridCell> cells = {cell("baseline", "bendr", 0.6), cell("baseline", "linear", 0.7),
                                     cell("gcn", "bendr", 0.6),      cell("gcn", "linear", 0.65),
                                     cell("gat", "bendr", 0.61),     cell("gat", "linear", 0.71)};
  gb::flag_cells(cells);
  const std::vector<bool> expected = {false, false, false, false, true, true};
  for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_EQ(cells[i].flagged, expected[i]) << i;
  const auto report = gb::make_report(cells);
  EXPECT_NE(report.markdown.find("<u>"), std::string::npos);
  EXPECT_LT(report.markdown.find("**Baseline**"), report.markdown.find("**GCN**"));
}
