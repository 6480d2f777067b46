#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graph_bendr/common.hpp"
#include "graph_bendr/montage.hpp"

namespace graph_bendr {

/// Multichannel recording: one row of `samples` per entry of channel_labels.
struct Recording {
  std::vector<std::string> channel_labels;
  double sfreq = 0.0;
  MatF samples;  // C x T
  std::string subject_id;

  std::size_t channels() const { return static_cast<std::size_t>(samples.rows()); }
  std::size_t length() const { return static_cast<std::size_t>(samples.cols()); }
  void validate() const;
};

struct WindowSource {
  std::string subject_id;
  std::int64_t offset = 0;

  bool operator==(const WindowSource&) const = default;
  auto operator<=>(const WindowSource&) const = default;
};

struct EegWindow {
  MatF samples;  // C x m
  double sfreq = 0.0;
  std::optional<int> label;
  WindowSource source;
};

enum class Metric { kAccuracy, kAuroc };

std::string to_string(Metric metric);
Metric metric_from_string(const std::string& name);

struct TaskDataset {
  std::vector<EegWindow> windows;
  std::vector<std::string> channel_labels;
  int num_classes = 2;
  Metric metric = Metric::kAccuracy;
  int folds = 1;
  std::vector<int> fold_assignment;  // one entry per window
  bool balanced = true;

  /// Every window labeled, shapes uniform, folds in range and each fold
  /// non-empty with both classes present.
  void validate() const;
  std::vector<std::size_t> fold_indices(int fold) const;
};

/// Band-limited rational resampling (polyphase, windowed sinc) with a linear
/// interpolation fallback when the rate ratio has no small rational form.
Recording resample(const Recording& recording, double target_sfreq);

/// Rows reordered to montage order; channels outside the montage are dropped.
/// Labels match case-insensitively and through the T3/T7, T4/T8, T5/P7, T6/P8
/// synonym table.
Recording select_channels(const Recording& recording, const Montage& montage);

/// Consecutive non-overlapping windows of floor(length_s * sfreq) samples; a
/// trailing remainder is dropped.
std::vector<EegWindow> window(const Recording& recording, double length_s);

/// Per-channel z-score. Constant channels become all-zero.
void zscore_channels(MatF& samples);

void save_recording(const Recording& recording, const std::string& path);
Recording load_recording(const std::string& path);

}  // namespace graph_bendr
