#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace graph_bendr {

using Rng = std::mt19937_64;

/// Named sub-streams derived from one seed. Each stochastic concern draws from
/// its own stream so that, e.g., changing how batches are sampled never alters
/// parameter initialization.
enum class Stream : std::uint32_t {
  kInit = 1,
  kMask = 2,
  kSampling = 3,
  kDropout = 4,
  kData = 5,
};

Rng make_stream(std::uint64_t seed, Stream stream);
Rng make_stream(std::uint64_t seed, std::uint64_t salt);

struct StreamSeeds {
  std::uint64_t init = 0;
  std::uint64_t mask = 0;
  std::uint64_t sampling = 0;
  std::uint64_t dropout = 0;

  static StreamSeeds from_master(std::uint64_t seed);
};

struct RngStreams {
  Rng init;
  Rng mask;
  Rng sampling;
  Rng dropout;

  explicit RngStreams(const StreamSeeds& seeds);
  /// Convenience for seed_rng(seed): all streams derived from one master seed.
  static RngStreams from_seed(std::uint64_t seed);
};

double uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng, double mean = 0.0, double stddev = 1.0);
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Uniform sample of `k` distinct values from `pool`, keeping pool order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, const std::vector<std::size_t>& pool,
                                                    std::size_t k);

std::string serialize_state(const Rng& rng);
void restore_state(Rng& rng, const std::string& state);

}  // namespace graph_bendr
