#include "graph_bendr/signal.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace graph_bendr {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

constexpr char kRecordingMagic[8] = {'E', 'E', 'G', 'R', 'E', 'C', '0', '1'};
constexpr int kRecordingVersion = 1;

// Half-width of the interpolation kernel, in zero crossings of the sinc.
constexpr int kZeroCrossings = 16;
constexpr double kRolloff = 0.95;
constexpr double kKaiserBeta = 8.6;
constexpr std::int64_t kMaxPolyphaseFactor = 4096;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

double kaiser(double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - x * x)) /
         std::cyl_bessel_i(0.0, kKaiserBeta);
}

// Exact integer ratio up/down for rates that are whole thousandths of a hertz.
std::optional<std::pair<std::int64_t, std::int64_t>> rational_ratio(double source, double target) {
  const double s = source * 1000.0;
  const double t = target * 1000.0;
  if (std::abs(s - std::round(s)) > 1e-6 || std::abs(t - std::round(t)) > 1e-6) return std::nullopt;
  auto si = static_cast<std::int64_t>(std::llround(s));
  auto ti = static_cast<std::int64_t>(std::llround(t));
  if (si <= 0 || ti <= 0) return std::nullopt;
  const std::int64_t g = std::gcd(si, ti);
  const std::int64_t up = ti / g;
  const std::int64_t down = si / g;
  if (up > kMaxPolyphaseFactor || down > kMaxPolyphaseFactor) return std::nullopt;
  return std::make_pair(up, down);
}

MatF resample_polyphase(const MatF& x, std::int64_t up, std::int64_t down, std::int64_t out_len) {
  const std::int64_t in_len = x.cols();
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * kRolloff;
  const double half_width = kZeroCrossings / cutoff;
  const auto reach = static_cast<std::int64_t>(std::ceil(half_width));

  // One normalized filter per phase; taps cover input offsets [1 - reach, reach].
  const std::int64_t ntaps = 2 * reach;
  std::vector<std::vector<double>> phases(static_cast<std::size_t>(up), std::vector<double>(ntaps));
  for (std::int64_t p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    double sum = 0.0;
    for (std::int64_t i = 0; i < ntaps; ++i) {
      const double tau = frac - static_cast<double>(i + 1 - reach);
      const double h = cutoff * sinc(cutoff * tau) * kaiser(tau / half_width);
      phases[p][i] = h;
      sum += h;
    }
    for (double& h : phases[p]) h /= sum;
  }

  MatF y(x.rows(), out_len);
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (std::int64_t j = 0; j < out_len; ++j) {
      const std::int64_t num = j * down;
      const std::int64_t base = num / up;
      const auto& taps = phases[static_cast<std::size_t>(num % up)];
      double acc = 0.0;
      for (std::int64_t i = 0; i < ntaps; ++i) {
        const std::int64_t k = std::clamp<std::int64_t>(base + i + 1 - reach, 0, in_len - 1);
        acc += taps[i] * static_cast<double>(x(c, k));
      }
      y(c, j) = static_cast<float>(acc);
    }
  }
  return y;
}

MatF resample_linear(const MatF& x, double step, std::int64_t out_len) {
  const std::int64_t in_len = x.cols();
  MatF y(x.rows(), out_len);
  for (std::int64_t j = 0; j < out_len; ++j) {
    const double u = static_cast<double>(j) * step;
    const auto k = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(u)), in_len - 1);
    const std::int64_t k1 = std::min<std::int64_t>(k + 1, in_len - 1);
    const double f = u - static_cast<double>(k);
    for (Eigen::Index c = 0; c < x.rows(); ++c)
      y(c, j) = static_cast<float>((1.0 - f) * x(c, k) + f * x(c, k1));
  }
  return y;
}

std::string canonical_label(const std::string& label) {
  std::string s;
  s.reserve(label.size());
  for (char ch : label) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  static const std::map<std::string, std::string> synonyms = {
      {"t7", "t3"}, {"t8", "t4"}, {"p7", "t5"}, {"p8", "t6"}};
  if (auto it = synonyms.find(s); it != synonyms.end()) return it->second;
  return s;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

}  // namespace

void Recording::validate() const {
  if (!(sfreq > 0.0) || !std::isfinite(sfreq)) throw ValidationError("recording: sfreq must be > 0");
  if (static_cast<std::size_t>(samples.rows()) != channel_labels.size())
    throw ValidationError("recording: " + std::to_string(samples.rows()) + " sample rows but " +
                          std::to_string(channel_labels.size()) + " channel labels");
  if (!samples.allFinite()) throw ValidationError("recording '" + subject_id + "': non-finite samples");
}

std::string to_string(Metric metric) { return metric == Metric::kAuroc ? "auroc" : "accuracy"; }

Metric metric_from_string(const std::string& name) {
  if (name == "auroc") return Metric::kAuroc;
  if (name == "accuracy") return Metric::kAccuracy;
  throw ConfigError("unknown metric '" + name + "' (expected accuracy|auroc)");
}

void TaskDataset::validate() const {
  if (windows.empty()) throw ValidationError("task dataset: no windows");
  if (folds < 1) throw ValidationError("task dataset: folds must be >= 1");
  if (fold_assignment.size() != windows.size())
    throw ValidationError("task dataset: fold assignment size differs from window count");
  const auto rows = windows.front().samples.rows();
  const auto cols = windows.front().samples.cols();
  std::vector<std::set<int>> classes_per_fold(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (!w.label) throw ValidationError("task dataset: window " + std::to_string(i) + " unlabeled");
    if (*w.label < 0 || *w.label >= num_classes)
      throw ValidationError("task dataset: window " + std::to_string(i) + " label out of range");
    if (w.samples.rows() != rows || w.samples.cols() != cols)
      throw ValidationError("task dataset: window " + std::to_string(i) + " has a different shape");
    if (!w.samples.allFinite()) throw ValidationError("task dataset: non-finite samples");
    const int f = fold_assignment[i];
    if (f < 0 || f >= folds) throw ValidationError("task dataset: fold index out of range");
    classes_per_fold[static_cast<std::size_t>(f)].insert(*w.label);
  }
  for (int f = 0; f < folds; ++f) {
    if (static_cast<int>(classes_per_fold[static_cast<std::size_t>(f)].size()) < num_classes)
      throw ValidationError("task dataset: fold " + std::to_string(f) + " lacks a class");
  }
}

std::vector<std::size_t> TaskDataset::fold_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_assignment.size(); ++i)
    if (fold_assignment[i] == fold) out.push_back(i);
  return out;
}

Recording resample(const Recording& recording, double target_sfreq) {
  if (!(target_sfreq > 0.0) || !std::isfinite(target_sfreq))
    throw ValidationError("resample: target sfreq must be > 0");
  recording.validate();
  if (target_sfreq == recording.sfreq) return recording;

  const auto out_len = static_cast<std::int64_t>(
      std::llround(static_cast<double>(recording.length()) * target_sfreq / recording.sfreq));
  Recording out;
  out.channel_labels = recording.channel_labels;
  out.sfreq = target_sfreq;
  out.subject_id = recording.subject_id;
  if (recording.length() == 0 || out_len == 0) {
    out.samples = MatF(recording.samples.rows(), out_len);
    out.samples.setZero();
    return out;
  }
  if (auto ratio = rational_ratio(recording.sfreq, target_sfreq)) {
    out.samples = resample_polyphase(recording.samples, ratio->first, ratio->second, out_len);
  } else {
    out.samples = resample_linear(recording.samples, recording.sfreq / target_sfreq, out_len);
  }
  return out;
}

Recording select_channels(const Recording& recording, const Montage& montage) {
  std::map<std::string, std::size_t> by_label;
  for (std::size_t i = 0; i < recording.channel_labels.size(); ++i)
    by_label.emplace(canonical_label(recording.channel_labels[i]), i);

  std::vector<std::size_t> rows;
  std::vector<std::string> missing;
  for (const auto& e : montage.electrodes) {
    auto it = by_label.find(canonical_label(e.label));
    if (it == by_label.end()) {
      missing.push_back(e.label);
    } else {
      rows.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = "select_channels: recording lacks montage channels:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }
  Recording out;
  out.channel_labels = montage.labels();
  out.sfreq = recording.sfreq;
  out.subject_id = recording.subject_id;
  out.samples.resize(static_cast<Eigen::Index>(rows.size()), recording.samples.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.samples.row(static_cast<Eigen::Index>(r)) = recording.samples.row(static_cast<Eigen::Index>(rows[r]));
  return out;
}

std::vector<EegWindow> window(const Recording& recording, double length_s) {
  const double exact = length_s * recording.sfreq;
  const auto len = static_cast<std::int64_t>(std::floor(exact + 1e-9 * std::max(1.0, exact)));
  if (len < 1) throw ValidationError("window: length_s * sfreq must be >= 1");
  std::vector<EegWindow> out;
  const auto total = static_cast<std::int64_t>(recording.length());
  for (std::int64_t start = 0; start + len <= total; start += len) {
    EegWindow w;
    w.samples = recording.samples.middleCols(start, len);
    w.sfreq = recording.sfreq;
    w.source = WindowSource{recording.subject_id, start};
    out.push_back(std::move(w));
  }
  return out;
}

void zscore_channels(MatF& samples) {
  for (Eigen::Index c = 0; c < samples.rows(); ++c) {
    auto row = samples.row(c);
    const double n = static_cast<double>(row.size());
    if (n == 0) continue;
    double mean = 0.0;
    for (Eigen::Index t = 0; t < row.size(); ++t) mean += row(t);
    mean /= n;
    double var = 0.0;
    for (Eigen::Index t = 0; t < row.size(); ++t) var += (row(t) - mean) * (row(t) - mean);
    var /= n;
    const double inv = var > 1e-20 ? 1.0 / std::sqrt(var) : 0.0;
    for (Eigen::Index t = 0; t < row.size(); ++t) row(t) = static_cast<float>((row(t) - mean) * inv);
  }
}

void save_recording(const Recording& recording, const std::string& path) {
  recording.validate();
  const nlohmann::json header = {
      {"format_version", kRecordingVersion},
      {"channel_labels", recording.channel_labels},
      {"sfreq", recording.sfreq},
      {"n_channels", recording.channels()},
      {"n_samples", recording.length()},
      {"subject_id", recording.subject_id},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write recording: " + path);
  out.write(kRecordingMagic, 8);
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  // Row-major storage is already channel-major.
  out.write(reinterpret_cast<const char*>(recording.samples.data()),
            static_cast<std::streamsize>(recording.samples.size() * sizeof(float)));
  if (!out) throw Error("write failed: " + path);
}

Recording load_recording(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open recording: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kRecordingMagic, 8) != 0)
    throw FormatError(path + ": bad magic");
  std::uint32_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 4);
  if (12ull + header_len > bytes.size()) throw FormatError(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path + ": malformed header: " + ex.what());
  }
  Recording rec;
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kRecordingVersion)
      throw FormatError(path + ": unknown format version " + std::to_string(version));
    rec.channel_labels = header.at("channel_labels").get<std::vector<std::string>>();
    rec.sfreq = header.at("sfreq").get<double>();
    n_channels = header.at("n_channels").get<std::size_t>();
    n_samples = header.at("n_samples").get<std::size_t>();
    rec.subject_id = header.at("subject_id").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path + ": malformed header: " + ex.what());
  }
  if (n_channels != rec.channel_labels.size())
    throw FormatError(path + ": n_channels does not match channel_labels");
  const std::size_t payload = bytes.size() - 12 - header_len;
  if (payload != n_channels * n_samples * sizeof(float)) throw FormatError(path + ": payload size mismatch");
  rec.samples.resize(static_cast<Eigen::Index>(n_channels), static_cast<Eigen::Index>(n_samples));
  std::memcpy(rec.samples.data(), bytes.data() + 12 + header_len, payload);
  rec.validate();
  return rec;
}

}  // namespace graph_bendr
