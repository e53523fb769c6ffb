#pragma once

// Test-only reference implementations, deliberately independent of the
// library code paths they check: naive loops instead of Eigen products, a
// hand-rolled Jacobi eigensolver, literal transcriptions of the loss
// formulas, and central finite differences.

#include "mdg/graph.hpp"
#include "mdg/pretrain.hpp"
#include "mdg/tensor.hpp"

#include <functional>
#include <vector>

namespace oracle {

using mdg::Graph;
using mdg::Index;
using mdg::Matrix;

Matrix naive_matmul(const Matrix& a, const Matrix& b);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

// Cyclic Jacobi rotations on a symmetric matrix; sweeps until off-diagonal
// mass is negligible.
SymmetricEigen jacobi_eigen(Matrix a);

// D^-1/2 (A+I) D^-1/2 recomputed from scratch.
Matrix plain_normalized_adjacency(const Graph& g);

// relu((adj h) w) per layer, all products as explicit loops.
Matrix plain_encode(const Matrix& adj, const Matrix& features,
                    const std::vector<Matrix>& weights);

double plain_cosine(const Matrix& h, Index i, Index j);

// Literal per-triplet form: -ln( exp(s_pos/t) / sum_b exp(s_b/t) ).
double plain_link_loss(const Matrix& h, const std::vector<mdg::Triplet>& triplets,
                       double temperature, bool include_positive);

// Literal class form: -ln( exp(s_y/t) / sum_y' exp(s_y'/t) ), prototypes as
// given rows.
double plain_class_loss(const Matrix& embeddings, const std::vector<int>& rows,
                        const std::vector<int>& labels, const Matrix& prototypes,
                        double temperature);

// Full pre-training loss pipeline on plain doubles: project, token-scale,
// encode, then plain_link_loss, one graph per dataset.
double plain_pretrain_loss(const std::vector<mdg::DomainDataset>& datasets,
                           const std::vector<Matrix>& projections,
                           const std::vector<Matrix>& token_rows,  // empty = no tokens
                           const std::vector<Matrix>& weights, const mdg::TripletSet& ts,
                           double temperature, bool include_positive);

// Scalar Adam recurrence, one parameter.
struct AdamScalarRef {
  double m = 0.0;
  double v = 0.0;
  int t = 0;
  double step(double x, double g, double lr, double b1, double b2, double eps);
};

// Central finite differences of make_loss around the current leaf values
// against the recorded analytic gradients. Returns the worst relative error
// (|a-b| / max(1, |a|, |b|)).
double max_gradcheck_error(mdg::Tape& tape, const std::vector<mdg::Tensor>& leaves,
                           const std::function<mdg::Tensor()>& make_loss, double h = 1e-5);

// Erdos-Renyi style random graph with random features, always connected
// enough for triplet sampling (at least a spanning path).
Graph random_graph(int nodes, Index feature_dim, double edge_prob, std::uint64_t seed,
                   int num_classes = 0);

mdg::DomainDataset random_dataset(const std::string& id, int nodes, Index feature_dim,
                                  double edge_prob, std::uint64_t seed, int num_classes = 0);

}  // namespace oracle
