#include "mdg/encoder.hpp"

#include <cmath>

namespace mdg {

std::int64_t GcnParams::parameter_count() const {
  std::int64_t n = 0;
  for (const Tensor& w : weights) n += w.size();
  return n;
}

bool GcnParams::frozen() const {
  for (const Tensor& w : weights) {
    if (w.requires_grad()) return false;
  }
  return true;
}

GcnParams init_params(Index input_dim, Index hidden_dim, int layers, std::uint64_t seed,
                      Tape& tape) {
  if (input_dim < 1 || hidden_dim < 1 || layers < 1) {
    throw Error("init_params: dimensions and layer count must be positive");
  }
  GcnParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.layers = layers;
  Rng rng(seed);
  for (int l = 0; l < layers; ++l) {
    const Index fan_in = (l == 0) ? input_dim : hidden_dim;
    const Index fan_out = hidden_dim;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < fan_in; ++i) {
      for (Index j = 0; j < fan_out; ++j) w(i, j) = rng.uniform(-bound, bound);
    }
    p.weights.push_back(tape.parameter(std::move(w)));
  }
  return p;
}

Tensor encode(const Matrix& adj_hat, const Tensor& features, const GcnParams& params) {
  if (features.cols() != params.input_dim) {
    throw Error("encode: feature width " + std::to_string(features.cols()) +
                " does not match encoder input dim " + std::to_string(params.input_dim));
  }
  if (adj_hat.rows() != adj_hat.cols() || adj_hat.rows() != features.rows()) {
    throw Error("encode: adjacency/feature shape mismatch");
  }
  const Tensor adj{adj_hat};
  Tensor h = features;
  for (const Tensor& w : params.weights) {
    h = relu(matmul(matmul(adj, h), w));
  }
  return h;
}

Tensor encode(const Graph& g, const Tensor& features, const GcnParams& params) {
  return encode(normalized_adjacency(g), features, params);
}

Tensor readout(const Tensor& embeddings) {
  if (embeddings.rows() == 0) throw Error("readout: empty embedding matrix");
  return row_mean(embeddings);
}

}  // namespace mdg
