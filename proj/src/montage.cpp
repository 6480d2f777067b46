#include "graph_bendr/montage.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "graph_bendr/common.hpp"

namespace graph_bendr {

extern const char* const kDefaultMontageJson;

std::vector<std::string> Montage::labels() const {
  std::vector<std::string> out;
  out.reserve(electrodes.size());
  for (const auto& e : electrodes) out.push_back(e.label);
  return out;
}

std::optional<std::size_t> Montage::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < electrodes.size(); ++i)
    if (electrodes[i].label == label) return i;
  return std::nullopt;
}

void Montage::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ValidationError("montage '" + name + "': radius must be positive");
  if (electrodes.size() < 2)
    throw ValidationError("montage '" + name + "': at least 2 electrodes required");
  std::set<std::string> seen;
  for (const auto& e : electrodes) {
    if (!seen.insert(e.label).second)
      throw ValidationError("montage '" + name + "': duplicate label '" + e.label + "'");
    const double norm = std::sqrt(e.x * e.x + e.y * e.y + e.z * e.z);
    if (!std::isfinite(norm) || std::abs(norm - radius) > 1e-6 * radius)
      throw ValidationError("montage '" + name + "': electrode '" + e.label +
                            "' is not on the sphere of radius " + std::to_string(radius));
  }
}

Montage Montage::from_json(const nlohmann::json& doc) {
  try {
    Montage m;
    m.name = doc.at("name").get<std::string>();
    m.radius = doc.at("radius").get<double>();
    for (const auto& e : doc.at("electrodes")) {
      m.electrodes.push_back(Electrode{e.at("label").get<std::string>(), e.at("x").get<double>(),
                                       e.at("y").get<double>(), e.at("z").get<double>()});
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("montage json: ") + ex.what());
  }
}

nlohmann::json Montage::to_json() const {
  nlohmann::json electrodes_json = nlohmann::json::array();
  for (const auto& e : electrodes)
    electrodes_json.push_back({{"label", e.label}, {"x", e.x}, {"y", e.y}, {"z", e.z}});
  return {{"name", name}, {"radius", radius}, {"electrodes", electrodes_json}};
}

Montage Montage::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open montage file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("montage file " + path + ": " + ex.what());
  }
  return from_json(doc);
}

void Montage::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write montage file: " + path);
  out << to_json().dump(2) << "\n";
}

const Montage& default_montage() {
  static const Montage montage = Montage::from_json(nlohmann::json::parse(kDefaultMontageJson));
  return montage;
}

Montage load_montage_or_default(const std::string& path) {
  if (path.empty() || path == "default") return default_montage();
  return Montage::load(path);
}

}  // namespace graph_bendr
