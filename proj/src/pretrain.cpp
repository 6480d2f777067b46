#include <algorithm>
#include <cmath>
#include <cstdio>

#include "graph_bendr/adam.hpp"
#include "graph_bendr/graph.hpp"
#include "graph_bendr/pipelines.hpp"

namespace graph_bendr {

namespace {

constexpr std::uint64_t kEvalMaskSalt = 0x4556'414cull;

nlohmann::json stream_state(const RngStreams& s) {
  return {{"init", serialize_state(s.init)},
          {"mask", serialize_state(s.mask)},
          {"sampling", serialize_state(s.sampling)},
          {"dropout", serialize_state(s.dropout)}};
}

}  // namespace

std::string model_name(const GnnConfig& gnn) {
  std::string name = gnn.enabled() ? to_string(gnn.architecture) : "baseline";
  if (gnn.enabled() && gnn.use_edge_weights) name += "+ew";
  if (gnn.enabled() && gnn.permute_edge_weights_seed != 0) name += "+perm";
  return name;
}

std::vector<MatF> prepare_pretrain_windows(const std::vector<Recording>& recordings, const Montage& montage,
                                           const RunConfig& config) {
  std::vector<MatF> out;
  for (const auto& rec : recordings) {
    Recording r = resample(select_channels(rec, montage), config.data.sfreq);
    zscore_channels(r.samples);
    for (auto& w : window(r, config.data.window_s)) out.push_back(std::move(w.samples));
  }
  return out;
}

EvalStats evaluate_pretrain(PretrainModel<float>& model, const std::vector<MatF>& windows, std::uint64_t mask_seed) {
  Rng mask_rng = make_stream(mask_seed, kEvalMaskSalt);
  EvalStats stats;
  std::size_t correct = 0, masked = 0;
  double chance_weighted = 0.0;
  for (const auto& w : windows) {
    const WindowStats s = model.train_window(w, mask_rng, ForwardContext{}, 1.0f, false);
    stats.loss += s.loss;
    correct += s.correct;
    masked += s.masked;
    chance_weighted += static_cast<double>(s.masked) / static_cast<double>(s.negatives + 1);
  }
  stats.windows = windows.size();
  if (!windows.empty()) stats.loss /= static_cast<double>(windows.size());
  if (masked > 0) {
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(masked);
    stats.chance = chance_weighted / static_cast<double>(masked);
  }
  return stats;
}

PretrainResult pretrain(const std::vector<MatF>& windows, const RunConfig& config, const Montage& montage,
                        const Progress& progress) {
  config.validate();
  if (windows.empty()) throw ValidationError("pretrain: corpus has no windows");
  const Eigen::Index c = windows.front().rows();
  const Eigen::Index n = windows.front().cols();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].rows() != c || windows[i].cols() != n)
      throw ValidationError("pretrain: window " + std::to_string(i) + " is " + std::to_string(windows[i].rows()) +
                            " x " + std::to_string(windows[i].cols()) + ", expected " + std::to_string(c) + " x " +
                            std::to_string(n));
    if (!windows[i].allFinite()) throw ValidationError("pretrain: window " + std::to_string(i) + " is not finite");
  }
  if (static_cast<std::size_t>(c) != montage.size())
    throw ValidationError("pretrain: windows have " + std::to_string(c) + " channels, montage has " +
                          std::to_string(montage.size()));

  const StreamSeeds seeds = config.seeds.streams();
  RngStreams streams(seeds);
  const EdgeWeightMatrix graph = build_edge_weights(montage);
  PretrainModel<float> model(config, graph, n, streams.init);
  const ParamList<float> params = model.parameters();
  AdamState<float> adam(config.optimizer, params);

  PretrainResult result;
  result.initial = evaluate_pretrain(model, windows, seeds.mask);
  if (progress) {
    char line[160];
    std::snprintf(line, sizeof(line), "pretrain[%s]: n=%ld T'=%ld params=%zu initial loss %.4f acc %.3f",
                  model_name(config.gnn).c_str(), static_cast<long>(n), static_cast<long>(model.positions()),
                  count_values(params), result.initial.loss, result.initial.accuracy);
    progress(line);
  }

  const int batch = config.pretrain.batch_size;
  const float scale = 1.0f / static_cast<float>(batch);
  for (int step = 0; step < config.pretrain.steps; ++step) {
    CurvePoint point;
    point.step = step;
    std::size_t correct = 0, masked = 0;
    double chance_weighted = 0.0;
    for (int b = 0; b < batch; ++b) {
      const std::size_t idx = uniform_index(streams.sampling, windows.size());
      const WindowStats s =
          model.train_window(windows[idx], streams.mask, ForwardContext{true, &streams.dropout}, scale);
      point.loss += s.loss / batch;
      correct += s.correct;
      masked += s.masked;
      chance_weighted += static_cast<double>(s.masked) / static_cast<double>(s.negatives + 1);
      if (s.clamped) ++result.clamped_windows;
    }
    adam_step(adam, params);
    point.accuracy = static_cast<double>(correct) / static_cast<double>(masked);
    point.chance = chance_weighted / static_cast<double>(masked);
    result.curve.push_back(point);
    if (progress && ((step + 1) % 25 == 0 || step + 1 == config.pretrain.steps)) {
      char line[128];
      std::snprintf(line, sizeof(line), "pretrain step %d/%d loss %.4f acc %.3f", step + 1, config.pretrain.steps,
                    point.loss, point.accuracy);
      progress(line);
    }
  }
  result.trained = evaluate_pretrain(model, windows, seeds.mask);
  if (progress && result.clamped_windows > 0)
    progress("warning: K reduced to masked-count - 1 in " + std::to_string(result.clamped_windows) +
             " training windows");

  Checkpoint& ck = result.checkpoint;
  ck.config = config.to_json();
  ck.model = {{"kind", "pretrain"},
              {"seq_len", n},
              {"channels", c},
              {"positions", model.positions()},
              {"channel_labels", montage.labels()},
              {"montage", montage.to_json()},
              {"model_name", model_name(config.gnn)}};
  ck.add(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck.tensors.push_back({"adam.m." + params[i]->name, adam.m[i]});
    ck.tensors.push_back({"adam.v." + params[i]->name, adam.v[i]});
  }
  ck.rng_state = stream_state(streams).dump();
  ck.step = adam.step;
  return result;
}

}  // namespace graph_bendr
