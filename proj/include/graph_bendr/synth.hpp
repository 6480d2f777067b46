#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "graph_bendr/montage.hpp"
#include "graph_bendr/signal.hpp"

namespace graph_bendr {

/// Unlabeled corpus: per-channel narrow-band oscillators (distinct centre
/// frequencies in 1-40 Hz) mixed across channels with weights that decay with
/// geodesic distance, plus white noise; each channel z-scored.
std::vector<Recording> generate_pretrain_corpus(std::uint64_t seed, int num_recordings, const Montage& montage,
                                                double duration_s, double sfreq);

struct TaskSpec {
  int num_windows = 200;
  double window_s = 2.0;
  double sfreq = 256.0;
  std::pair<std::string, std::string> coupled_pair{"C3", "C4"};
  double class_balance = 0.5;  // fraction of positive windows
  Metric metric = Metric::kAccuracy;
  int folds = 4;

  double lag_s = 0.1;           // planted lag between the pair
  double band_lo_hz = 6.0;      // planted source band
  double band_hi_hz = 14.0;
  double coupling_gain = 1.5;   // planted amplitude relative to unit background
  int windows_per_subject = 10;

  void validate() const;
};

/// Binary task: in positive windows the second channel of the pair carries the
/// first channel's planted source delayed by lag_s; in negative windows it
/// carries an independent draw with the same spectrum. Single-channel marginals
/// are identical across classes. Folds are assigned round-robin per class.
TaskDataset generate_task(std::uint64_t seed, const Montage& montage, const TaskSpec& spec);

/// Pearson correlation of a(t) with b(t + lag) over the overlap.
double lagged_correlation(const MatF& samples, std::size_t a, std::size_t b, std::int64_t lag);

}  // namespace graph_bendr
