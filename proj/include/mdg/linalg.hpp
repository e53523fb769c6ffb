#pragma once

#include "mdg/types.hpp"

#include <Eigen/Dense>

namespace mdg {

struct TruncatedSvd {
  Matrix u;           // n×k
  Eigen::VectorXd s;  // k, non-increasing, non-negative
  Matrix v;           // d×k, orthonormal columns
};

// Rank-k SVD of a dense matrix with a deterministic sign convention: in each
// column of V the entry of largest magnitude is non-negative (ties broken by
// lowest row index), and the matching U column is flipped with it.
TruncatedSvd truncated_svd(const Matrix& x, Index k);

}  // namespace mdg
