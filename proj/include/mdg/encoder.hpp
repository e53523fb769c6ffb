#pragma once

#include "mdg/graph.hpp"
#include "mdg/tensor.hpp"

#include <cstdint>
#include <vector>

namespace mdg {

// GCN weight stack: W_1 is input_dim×hidden_dim, the rest hidden²; no biases.
struct GcnParams {
  std::vector<Tensor> weights;
  Index input_dim = 0;
  Index hidden_dim = 0;
  int layers = 0;

  std::int64_t parameter_count() const;
  bool frozen() const;  // true when no weight tracks gradients
};

// Xavier-uniform initialization, bound sqrt(6/(fan_in+fan_out)), seeded.
GcnParams init_params(Index input_dim, Index hidden_dim, int layers, std::uint64_t seed,
                      Tape& tape);

// H^0 = features; H^l = relu(Âhat H^{l-1} W_l); returns H^layers.
Tensor encode(const Matrix& adj_hat, const Tensor& features, const GcnParams& params);
Tensor encode(const Graph& g, const Tensor& features, const GcnParams& params);

// Column-wise mean readout: n×h embeddings -> 1×h graph embedding.
Tensor readout(const Tensor& embeddings);

}  // namespace mdg
