#include "graph_bendr/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>

namespace graph_bendr {

namespace {

constexpr char kMagic[8] = {'G', 'B', 'C', 'K', 'P', 'T', '0', '1'};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::string Checkpoint::to_bytes() const {
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& t : tensors) manifest.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}});
  const nlohmann::json header = {{"config", config},     {"model", model}, {"manifest", manifest},
                                 {"rng_state", rng_state}, {"step", step}};
  const std::string text = header.dump();
  std::string out(kMagic, 8);
  const auto len = static_cast<std::uint32_t>(text.size());
  out.append(reinterpret_cast<const char*>(&len), 4);
  out += text;
  for (const auto& t : tensors)
    out.append(reinterpret_cast<const char*>(t.value.data()), static_cast<std::size_t>(t.value.size()) * sizeof(float));
  return out;
}

Checkpoint Checkpoint::from_bytes(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw FormatError("checkpoint: bad magic");
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 4);
  if (12ull + len > bytes.size()) throw FormatError("checkpoint: truncated header");
  Checkpoint ck;
  std::size_t offset = 12 + len;
  try {
    const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
    ck.config = header.at("config");
    ck.model = header.at("model");
    ck.rng_state = header.at("rng_state").get<std::string>();
    ck.step = header.at("step").get<std::int64_t>();
    for (const auto& entry : header.at("manifest")) {
      const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
      const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
      NamedTensor t{entry.at("name").get<std::string>(), MatF(rows, cols)};
      const std::size_t nbytes = static_cast<std::size_t>(rows * cols) * sizeof(float);
      if (offset + nbytes > bytes.size()) throw FormatError("checkpoint: payload size mismatch");
      std::memcpy(t.value.data(), bytes.data() + offset, nbytes);
      offset += nbytes;
      ck.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("checkpoint: malformed header: ") + ex.what());
  }
  if (offset != bytes.size()) throw FormatError("checkpoint: payload size mismatch");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  const std::string bytes = to_bytes();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

}  // namespace graph_bendr
