#include "mdg/tensor.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace mdg;

namespace {

Matrix random_matrix(Index r, Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

Matrix m2(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& row : rows) {
    Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul matches the naive triple loop") {
  Rng rng(7);
  const Matrix a = random_matrix(5, 4, rng);
  const Matrix b = random_matrix(4, 6, rng);
  const Tensor c = matmul(Tensor{a}, Tensor{b});
  CHECK((c.value() - oracle::naive_matmul(a, b)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_FALSE(c.requires_grad());
}

TEST_CASE("elementwise_mul broadcasts a row over the other operand") {
  const Tensor row{m2({{2.0, 0.0, 1.0}})};
  const Tensor x{m2({{1.0, 1.0, 1.0}, {3.0, -2.0, 5.0}})};
  const Tensor y = elementwise_mul(row, x);
  CHECK(y.value()(0, 0) == 2.0);
  CHECK(y.value()(0, 1) == 0.0);
  CHECK(y.value()(1, 2) == 5.0);
  const Tensor y2 = elementwise_mul(x, row);  // symmetric
  CHECK((y.value() - y2.value()).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(elementwise_mul(row, Tensor{m2({{1.0, 2.0}})}), Error);
}

TEST_CASE("cosine similarity closed forms") {
  CHECK(cosine_similarity(Tensor{m2({{1, 0}})}, Tensor{m2({{0, 1}})}).value()(0, 0) == 0.0);
  CHECK(cosine_similarity(Tensor{m2({{2, 2}})}, Tensor{m2({{1, 1}})}).value()(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-14));
  // zero vector: defined as 0
  CHECK(cosine_similarity(Tensor{m2({{0, 0}})}, Tensor{m2({{1, 2}})}).value()(0, 0) == 0.0);
}

TEST_CASE("cosine similarity of fixed random vectors matches the direct formula") {
  Rng rng(123);
  const Matrix u = random_matrix(1, 5, rng);
  const Matrix v = random_matrix(1, 5, rng);
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (Index j = 0; j < 5; ++j) {
    dot += u(0, j) * v(0, j);
    nu += u(0, j) * u(0, j);
    nv += v(0, j) * v(0, j);
  }
  const double expected = dot / (std::sqrt(nu) * std::sqrt(nv));
  CHECK(cosine_similarity(Tensor{u}, Tensor{v}).value()(0, 0) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backward: square function and inactive relu") {
  {
    Tape tape;
    Tensor x = tape.parameter(m2({{3.0}}));
    Tensor y = elementwise_mul(x, x);
    tape.backward(y);
    CHECK(x.grad()(0, 0) == doctest::Approx(6.0));
  }
  {
    Tape tape;
    Tensor x = tape.parameter(m2({{-1.0}}));
    Tensor y = relu(x);
    CHECK(y.value()(0, 0) == 0.0);
    tape.backward(y);
    CHECK(x.grad()(0, 0) == 0.0);
  }
}

TEST_CASE("gradients accumulate additively across fan-out") {
  Tape tape;
  Tensor x = tape.parameter(m2({{1.5}}));
  Tensor y = add(x, x);
  tape.backward(y);
  CHECK(x.grad()(0, 0) == 2.0);
}

TEST_CASE("backward rejects non-scalar losses and constants") {
  Tape tape;
  Tensor x = tape.parameter(m2({{1.0, 2.0}}));
  Tensor y = relu(x);
  CHECK_THROWS_AS(tape.backward(y), Error);          // not scalar
  Tensor c = relu(Tensor{m2({{1.0}})});              // constant path, never recorded
  CHECK_THROWS_AS(tape.backward(c), Error);          // not on tape
}

TEST_CASE("cosine gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Tape tape;
    Tensor u = tape.parameter(random_matrix(1, 4, rng));
    Tensor v = tape.parameter(random_matrix(1, 4, rng));
    auto loss = [&] { return cosine_similarity(u, v); };
    CHECK(oracle::max_gradcheck_error(tape, {u, v}, loss) < 1e-4);
  }
}

TEST_CASE("every primitive passes a finite-difference gradient check on 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, 0xf00));
    Tape tape;
    Tensor a = tape.parameter(random_matrix(3, 4, rng));
    Tensor b = tape.parameter(random_matrix(4, 3, rng));
    Tensor row = tape.parameter(random_matrix(1, 4, rng));

    // composite touching matmul, add, elementwise_mul (both shapes), relu
    // (inputs shifted off the kink), scale, row_mean, l2_normalize_rows,
    // cosine_rows, link_nll, class_nll, cosine_similarity, add_all
    auto loss = [&] {
      Tensor prod = matmul(a, b);                              // 3×3
      Tensor gated = relu(add(prod, Tensor{Matrix::Constant(3, 3, 0.3)}));
      Tensor scaled = scale(gated, 1.7);
      Tensor mixed = elementwise_mul(scaled, scaled);
      Tensor normed = l2_normalize_rows(mixed);
      Tensor broad = elementwise_mul(row, matmul(normed, a));  // 3×4 broadcast by 1×4
      Tensor pooled = row_mean(broad);                         // 1×4
      std::vector<int> idx{0, 1, 2};
      Tensor sims = cosine_rows(broad, 0, broad, idx);         // 1×3
      Tensor nll = link_nll(sims, 0.8, false);
      Tensor cls = class_nll(cosine_rows(pooled, 0, broad, idx), 1, 1.3);
      Tensor cos = cosine_similarity(pooled, row);
      Tensor bulk = sum_all(normed);
      std::vector<Tensor> parts{nll, cls, cos, bulk};
      return add_all(parts);
    };
    CHECK(oracle::max_gradcheck_error(tape, {a, b, row}, loss) < 1e-4);
  }
}

TEST_CASE("vstack and add_all route gradients to every contributor") {
  Rng rng(42);
  Tape tape;
  Tensor r1 = tape.parameter(random_matrix(1, 3, rng));
  Tensor r2 = tape.parameter(random_matrix(1, 3, rng));
  Tensor r3 = tape.parameter(random_matrix(2, 3, rng));
  auto loss = [&] {
    std::vector<Tensor> rows{r1, r2, r3};
    Tensor stacked = vstack(rows);  // 4×3
    std::vector<int> idx{1, 2, 3};
    Tensor sims = cosine_rows(stacked, 0, stacked, idx);
    return link_nll(sims, 1.0, true);
  };
  CHECK(oracle::max_gradcheck_error(tape, {r1, r2, r3}, loss) < 1e-4);
}

TEST_CASE("l2_normalize_rows scales rows to unit norm and keeps zero rows") {
  Matrix x(3, 2);
  x << 3, 4, 0, 0, -1, 0;
  const Tensor y = l2_normalize_rows(Tensor{x});
  CHECK(y.value()(0, 0) == doctest::Approx(0.6));
  CHECK(y.value()(0, 1) == doctest::Approx(0.8));
  CHECK(y.value()(1, 0) == 0.0);
  CHECK(y.value()(1, 1) == 0.0);
  CHECK(y.value()(2, 0) == doctest::Approx(-1.0));
}

TEST_CASE("sum_all reduces to a scalar with unit gradients") {
  Tape tape;
  Tensor x = tape.parameter(m2({{1.0, 2.0}, {3.0, 4.0}}));
  Tensor s = sum_all(x);
  CHECK(s.value()(0, 0) == 10.0);
  tape.backward(s);
  CHECK((x.grad().array() == 1.0).all());
}

TEST_CASE("link_nll closed forms") {
  // sim(v,a)=1, one negative at 0, tau=1: -ln(e/1) = -1
  Tensor sims1{m2({{1.0, 0.0}})};
  CHECK(link_nll(sims1, 1.0).value()(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  // all sims 0, two negatives: -ln(1/2) = ln 2
  Tensor sims2{m2({{0.0, 0.0, 0.0}})};
  CHECK(link_nll(sims2, 1.0).value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(link_nll(sims2, 0.0), Error);
  CHECK_THROWS_AS(link_nll(sims2, -1.0), Error);
}

TEST_CASE("class_nll closed forms") {
  // own-prototype sim 1, other 0: -ln(e/(e+1))
  Tensor sims{m2({{1.0, 0.0}})};
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  CHECK(class_nll(sims, 0, 1.0).value()(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  Tensor even{m2({{0.0, 0.0}})};
  CHECK(class_nll(even, 1, 1.0).value()(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("tape replay is deterministic bit for bit") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tape tape;
    Tensor a = tape.parameter(random_matrix(4, 4, rng));
    Tensor b = tape.parameter(random_matrix(4, 4, rng));
    Tensor pooled = row_mean(relu(matmul(a, b)));               // 1×4
    Tensor total = cosine_similarity(pooled, row_mean(b));
    Tensor l = add(sum_all(relu(matmul(a, b))), total);
    tape.backward(l);
    return std::make_pair(l.value()(0, 0), a.grad()(0, 0));
  };
  const auto [l1, g1] = run(99);
  const auto [l2, g2] = run(99);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}
