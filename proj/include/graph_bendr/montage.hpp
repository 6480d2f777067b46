#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace graph_bendr {

struct Electrode {
  std::string label;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  std::array<double, 3> position() const { return {x, y, z}; }
};

/// Named electrodes on a spherical head model.
struct Montage {
  std::string name;
  std::vector<Electrode> electrodes;
  double radius = 1.0;

  std::size_t size() const { return electrodes.size(); }
  std::vector<std::string> labels() const;
  std::optional<std::size_t> index_of(const std::string& label) const;

  /// Throws ValidationError unless C >= 2, labels are unique and every
  /// electrode lies on the sphere within 1e-6 * radius.
  void validate() const;

  static Montage from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  static Montage load(const std::string& path);
  void save(const std::string& path) const;
};

/// The shipped 19-channel 10/20 montage (data/montage_1020.json, embedded at
/// build time).
const Montage& default_montage();

/// Loads `path`, or returns the default montage when path is empty or "default".
Montage load_montage_or_default(const std::string& path);

}  // namespace graph_bendr
