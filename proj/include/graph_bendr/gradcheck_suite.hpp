#pragma once

#include <cstdint>
#include <vector>

#include "graph_bendr/encoder.hpp"
#include "graph_bendr/gradcheck.hpp"

namespace graph_bendr {

struct GradCheckSuiteOptions {
  std::uint64_t seed = 1;
  double eps = 1e-5;
  double tol = 1e-4;
  // Kernels and strides for the per-block encoder checks; widths are shrunk.
  EncoderConfig encoder;
};

/// Finite-difference checks, in double precision, of every trainable layer:
/// affine map, linear adjuster, GCN/GAT with and without edge weights, SAGE,
/// the two-layer stacks, each encoder block, the transformer layer, the masked
/// reconstructor and both classifier heads. Parameters are perturbed away from
/// their initial values so that no gradient is trivially zero.
std::vector<GradCheckReport> run_gradcheck_suite(const GradCheckSuiteOptions& options = {});

}  // namespace graph_bendr
