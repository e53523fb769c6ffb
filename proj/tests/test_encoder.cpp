#include "mdg/encoder.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace mdg;

TEST_CASE("initialization is seeded, bounded and counted") {
  Tape t1, t2;
  const GcnParams a = init_params(50, 256, 3, 42, t1);
  const GcnParams b = init_params(50, 256, 3, 42, t2);
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    CHECK((a.weights[l].value() - b.weights[l].value()).cwiseAbs().maxCoeff() == 0.0);
  }
  const double bound = std::sqrt(6.0 / (50.0 + 256.0));
  CHECK(a.weights[0].value().cwiseAbs().maxCoeff() <= bound);
  CHECK(a.parameter_count() == 143872);  // 50*256 + 2*256*256
}

TEST_CASE("single node with identity weights is a relu") {
  Tape tape;
  GcnParams p;
  p.input_dim = 2;
  p.hidden_dim = 2;
  p.layers = 1;
  p.weights.push_back(tape.parameter(Matrix::Identity(2, 2)));
  Matrix features(1, 2);
  features << 1.0, -1.0;
  const Graph g(1, {}, Matrix::Zero(1, 1));
  const Tensor h = encode(g, Tensor{features}, p);
  CHECK(h.value()(0, 0) == 1.0);
  CHECK(h.value()(0, 1) == 0.0);
}

TEST_CASE("zero features stay zero through any weights") {
  Tape tape;
  const GcnParams p = init_params(3, 5, 2, 7, tape);
  const Graph g = oracle::random_graph(6, 3, 0.4, 1);
  const Tensor h = encode(g, Tensor{Matrix::Zero(6, 3)}, p);
  CHECK(h.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-layer propagation matches the straight-line oracle") {
  Tape tape;
  const GcnParams p = init_params(4, 3, 2, 99, tape);
  const Graph path(3, {{0, 1}, {1, 2}}, Matrix::Zero(3, 4));
  Rng rng(5);
  Matrix features(3, 4);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 4; ++j) features(i, j) = rng.uniform(-1.0, 1.0);
  }
  const Tensor h = encode(path, Tensor{features}, p);
  const Matrix expected = oracle::plain_encode(
      oracle::plain_normalized_adjacency(path), features,
      {p.weights[0].value(), p.weights[1].value()});
  CHECK((h.value() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("node relabeling permutes embedding rows") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = oracle::random_graph(8, 3, 0.35, derive_seed(seed, 17));
    Tape tape;
    const GcnParams p = init_params(3, 6, 2, 11, tape);

    std::vector<int> perm{3, 1, 7, 0, 5, 2, 6, 4};  // image of each node
    std::vector<std::pair<int, int>> edges;
    for (const auto& [u, v] : g.edges()) {
      edges.emplace_back(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]);
    }
    Matrix features(8, 3);
    for (int v = 0; v < 8; ++v) {
      features.row(perm[static_cast<std::size_t>(v)]) = g.features().row(v);
    }
    const Graph permuted(8, std::move(edges), std::move(features));

    const Matrix h = encode(g, Tensor{g.features()}, p).value();
    const Matrix hp = encode(permuted, Tensor{permuted.features()}, p).value();
    for (int v = 0; v < 8; ++v) {
      CHECK((h.row(v) - hp.row(perm[static_cast<std::size_t>(v)])).cwiseAbs().maxCoeff() <
            1e-10);
    }
  }
}

TEST_CASE("readout is the column mean and permutation invariant") {
  Matrix h(2, 2);
  h << 1, 0, 0, 1;
  const Tensor r = readout(Tensor{h});
  CHECK(r.value()(0, 0) == 0.5);
  CHECK(r.value()(0, 1) == 0.5);

  Matrix single(1, 3);
  single << 4, 5, 6;
  CHECK((readout(Tensor{single}).value() - single).cwiseAbs().maxCoeff() == 0.0);

  Matrix swapped(2, 2);
  swapped << 0, 1, 1, 0;
  CHECK((readout(Tensor{swapped}).value() - r.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encode gradients w.r.t. features match finite differences") {
  const Graph g = oracle::random_graph(5, 3, 0.4, 23);
  Tape tape;
  const GcnParams p = init_params(3, 4, 2, 5, tape);
  Rng rng(3);
  Matrix f0(5, 3);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 3; ++j) f0(i, j) = rng.uniform(0.2, 1.0);  // away from relu kinks
  }
  Tensor features = tape.parameter(f0);
  const Matrix adj = normalized_adjacency(g);
  auto loss = [&] { return sum_all(encode(adj, features, p)); };
  CHECK(oracle::max_gradcheck_error(tape, {features}, loss) < 1e-4);
}

TEST_CASE("encode is deterministic and shape-checked") {
  const Graph g = oracle::random_graph(6, 3, 0.4, 29);
  Tape tape;
  const GcnParams p = init_params(3, 4, 2, 5, tape);
  const Matrix a = encode(g, Tensor{g.features()}, p).value();
  const Matrix b = encode(g, Tensor{g.features()}, p).value();
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(encode(g, Tensor{Matrix::Zero(6, 5)}, p), Error);
  CHECK_THROWS_AS(readout(Tensor{Matrix(0, 3)}), Error);
}
