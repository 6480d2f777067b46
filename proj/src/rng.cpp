#include "graph_bendr/rng.hpp"

#include <algorithm>
#include <iterator>
#include <sstream>

#include "graph_bendr/common.hpp"

namespace graph_bendr {

Rng make_stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

Rng make_stream(std::uint64_t seed, Stream stream) {
  return make_stream(seed, static_cast<std::uint64_t>(stream));
}

StreamSeeds StreamSeeds::from_master(std::uint64_t seed) {
  return StreamSeeds{seed, seed, seed, seed};
}

RngStreams::RngStreams(const StreamSeeds& seeds)
    : init(make_stream(seeds.init, Stream::kInit)),
      mask(make_stream(seeds.mask, Stream::kMask)),
      sampling(make_stream(seeds.sampling, Stream::kSampling)),
      dropout(make_stream(seeds.dropout, Stream::kDropout)) {}

RngStreams RngStreams::from_seed(std::uint64_t seed) {
  return RngStreams(StreamSeeds::from_master(seed));
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(Rng& rng, double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw ValidationError("uniform_index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<std::size_t> sample_without_replacement(Rng& rng, const std::vector<std::size_t>& pool,
                                                    std::size_t k) {
  if (k > pool.size()) throw ValidationError("sample_without_replacement: k exceeds pool size");
  std::vector<std::size_t> out;
  out.reserve(k);
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), k, rng);
  return out;
}

std::string serialize_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw FormatError("invalid rng state");
}

}  // namespace graph_bendr
