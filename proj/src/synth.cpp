#include "graph_bendr/synth.hpp"

#include <algorithm>
#include <cmath>

#include "graph_bendr/graph.hpp"
#include "graph_bendr/rng.hpp"

namespace graph_bendr {

namespace {

constexpr std::uint64_t kCorpusSalt = 0x5052'4554'0000ull;
constexpr std::uint64_t kTaskWindowSalt = 0x5441'534bull << 16;
constexpr std::uint64_t kTaskLabelSalt = 0x4c41'4245'4cull;
constexpr double kMixingLengthRad = 0.35;
constexpr double kNoiseStd = 0.5;
constexpr int kSourceComponents = 3;
constexpr int kBandComponents = 24;

// Mixing weights exp(-D_ij / lambda); the diagonal is 1.
MatD mixing_matrix(const Montage& montage) {
  const auto c = static_cast<Eigen::Index>(montage.size());
  MatD m = MatD::Identity(c, c);
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      if (i != j)
        m(i, j) = std::exp(-geodesic_distance(montage.electrodes[static_cast<std::size_t>(i)].position(),
                                              montage.electrodes[static_cast<std::size_t>(j)].position(),
                                              montage.radius) /
                           kMixingLengthRad);
  return m;
}

// C x T background: narrow-band oscillator per channel, spatially mixed, plus
// white noise.
MatD background(Rng& rng, const MatD& mixing, std::int64_t length, double sfreq) {
  const Eigen::Index c = mixing.rows();
  std::vector<double> centres(static_cast<std::size_t>(c));
  for (Eigen::Index k = 0; k < c; ++k)
    centres[static_cast<std::size_t>(k)] = 1.0 + 39.0 * (static_cast<double>(k) + uniform(rng, 0.0, 1.0)) /
                                                     static_cast<double>(c);
  for (std::size_t i = centres.size(); i > 1; --i) std::swap(centres[i - 1], centres[uniform_index(rng, i)]);

  MatD sources = MatD::Zero(c, length);
  for (Eigen::Index k = 0; k < c; ++k) {
    for (int q = 0; q < kSourceComponents; ++q) {
      const double f = centres[static_cast<std::size_t>(k)] * (1.0 + uniform(rng, -0.03, 0.03));
      const double phase = uniform(rng, 0.0, 2.0 * M_PI);
      const double amp = uniform(rng, 0.5, 1.0);
      for (std::int64_t t = 0; t < length; ++t)
        sources(k, t) += amp * std::sin(2.0 * M_PI * f * static_cast<double>(t) / sfreq + phase);
    }
  }
  MatD x = mixing * sources;
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += normal(rng, 0.0, kNoiseStd);
  return x;
}

void standardize_rows(MatD& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    x.row(r).array() -= mean;
    const double sd = std::sqrt(x.row(r).squaredNorm() / static_cast<double>(x.cols()));
    if (sd > 0.0) x.row(r) /= sd;
  }
}

// Unit-variance sum of sinusoids with frequencies uniform in [lo, hi].
std::vector<double> band_source(Rng& rng, std::int64_t length, double sfreq, double lo, double hi) {
  std::vector<double> s(static_cast<std::size_t>(length), 0.0);
  for (int q = 0; q < kBandComponents; ++q) {
    const double f = uniform(rng, lo, hi);
    const double phase = uniform(rng, 0.0, 2.0 * M_PI);
    for (std::int64_t t = 0; t < length; ++t)
      s[static_cast<std::size_t>(t)] += std::sin(2.0 * M_PI * f * static_cast<double>(t) / sfreq + phase);
  }
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (double& v : s) {
    v -= mean;
    var += v * v;
  }
  const double inv = 1.0 / std::sqrt(var / static_cast<double>(s.size()));
  for (double& v : s) v *= inv;
  return s;
}

}  // namespace

std::vector<Recording> generate_pretrain_corpus(std::uint64_t seed, int num_recordings, const Montage& montage,
                                                double duration_s, double sfreq) {
  if (num_recordings < 1) throw ValidationError("generate_pretrain_corpus: num_recordings must be >= 1");
  if (!(duration_s > 0.0) || !(sfreq > 0.0)) throw ValidationError("generate_pretrain_corpus: bad duration or sfreq");
  montage.validate();
  const auto length = static_cast<std::int64_t>(std::floor(duration_s * sfreq + 1e-9));
  if (length < 1) throw ValidationError("generate_pretrain_corpus: duration shorter than one sample");
  const MatD mixing = mixing_matrix(montage);
  std::vector<Recording> out;
  out.reserve(static_cast<std::size_t>(num_recordings));
  for (int r = 0; r < num_recordings; ++r) {
    Rng rng = make_stream(seed, kCorpusSalt + static_cast<std::uint64_t>(r));
    MatD x = background(rng, mixing, length, sfreq);
    standardize_rows(x);
    Recording rec;
    rec.channel_labels = montage.labels();
    rec.sfreq = sfreq;
    rec.samples = x.cast<float>();
    char id[32];
    std::snprintf(id, sizeof(id), "pre-%04d", r);
    rec.subject_id = id;
    out.push_back(std::move(rec));
  }
  return out;
}

void TaskSpec::validate() const {
  if (num_windows < 2) throw ValidationError("task: num_windows must be >= 2");
  if (!(class_balance > 0.0 && class_balance < 1.0)) throw ValidationError("task: class_balance must be in (0, 1)");
  if (folds < 1) throw ValidationError("task: folds must be >= 1");
  if (!(window_s > 0.0) || !(sfreq > 0.0)) throw ValidationError("task: bad window length or sfreq");
  if (!(lag_s >= 0.0)) throw ValidationError("task: lag must be >= 0");
  if (!(band_lo_hz > 0.0 && band_hi_hz > band_lo_hz)) throw ValidationError("task: bad planted band");
  if (windows_per_subject < 1) throw ValidationError("task: windows_per_subject must be >= 1");
}

TaskDataset generate_task(std::uint64_t seed, const Montage& montage, const TaskSpec& spec) {
  spec.validate();
  montage.validate();
  const auto a = montage.index_of(spec.coupled_pair.first);
  const auto b = montage.index_of(spec.coupled_pair.second);
  std::vector<std::string> missing;
  if (!a) missing.push_back(spec.coupled_pair.first);
  if (!b) missing.push_back(spec.coupled_pair.second);
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw ValidationError("generate_task: coupled pair label(s) not in montage: " + names);
  }
  if (*a == *b) throw ValidationError("generate_task: coupled pair must name two different channels");

  const auto m = static_cast<std::int64_t>(std::floor(spec.window_s * spec.sfreq + 1e-9));
  const auto lag = static_cast<std::int64_t>(std::llround(spec.lag_s * spec.sfreq));
  if (m < 2 || lag >= m) throw ValidationError("generate_task: window too short for the planted lag");

  const int positives = static_cast<int>(std::lround(spec.class_balance * spec.num_windows));
  if (positives < 1 || positives >= spec.num_windows)
    throw ValidationError("generate_task: class_balance leaves a class empty");
  std::vector<int> labels(static_cast<std::size_t>(spec.num_windows), 0);
  std::fill(labels.begin(), labels.begin() + positives, 1);
  Rng label_rng = make_stream(seed, kTaskLabelSalt);
  for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[uniform_index(label_rng, i)]);

  const MatD mixing = mixing_matrix(montage);
  TaskDataset ds;
  ds.channel_labels = montage.labels();
  ds.metric = spec.metric;
  ds.folds = spec.folds;
  ds.balanced = positives * 2 == spec.num_windows;
  int next_fold[2] = {0, 0};
  for (int w = 0; w < spec.num_windows; ++w) {
    Rng rng = make_stream(seed, kTaskWindowSalt + static_cast<std::uint64_t>(w));
    MatD x = background(rng, mixing, m, spec.sfreq);
    standardize_rows(x);
    const auto planted = band_source(rng, m + lag, spec.sfreq, spec.band_lo_hz, spec.band_hi_hz);
    const auto other = band_source(rng, m + lag, spec.sfreq, spec.band_lo_hz, spec.band_hi_hz);
    const int label = labels[static_cast<std::size_t>(w)];
    const auto& second = label == 1 ? planted : other;
    for (std::int64_t t = 0; t < m; ++t) {
      // a(t) = s(t + lag), b(t) = s(t): b(t + lag) repeats a(t).
      x(static_cast<Eigen::Index>(*a), t) += spec.coupling_gain * planted[static_cast<std::size_t>(t + lag)];
      x(static_cast<Eigen::Index>(*b), t) += spec.coupling_gain * second[static_cast<std::size_t>(t)];
    }
    standardize_rows(x);

    EegWindow win;
    win.samples = x.cast<float>();
    win.sfreq = spec.sfreq;
    win.label = label;
    char id[48];
    std::snprintf(id, sizeof(id), "task-s%04d", w / spec.windows_per_subject);
    win.source = WindowSource{id, static_cast<std::int64_t>(w % spec.windows_per_subject) * m};
    ds.windows.push_back(std::move(win));
    ds.fold_assignment.push_back(next_fold[label]++ % spec.folds);
  }
  ds.validate();
  return ds;
}

double lagged_correlation(const MatF& samples, std::size_t a, std::size_t b, std::int64_t lag) {
  const std::int64_t n = samples.cols() - std::abs(lag);
  if (n < 2) throw ValidationError("lagged_correlation: lag leaves fewer than 2 samples");
  const std::int64_t a0 = lag >= 0 ? 0 : -lag;
  const std::int64_t b0 = lag >= 0 ? lag : 0;
  double ma = 0.0, mb = 0.0;
  for (std::int64_t t = 0; t < n; ++t) {
    ma += samples(static_cast<Eigen::Index>(a), a0 + t);
    mb += samples(static_cast<Eigen::Index>(b), b0 + t);
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::int64_t t = 0; t < n; ++t) {
    const double da = samples(static_cast<Eigen::Index>(a), a0 + t) - ma;
    const double db = samples(static_cast<Eigen::Index>(b), b0 + t) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace graph_bendr
