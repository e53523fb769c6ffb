#include "mdg/linalg.hpp"

#include <cmath>

namespace mdg {

TruncatedSvd truncated_svd(const Matrix& x, Index k) {
  if (k < 1) throw Error("truncated_svd: k must be at least 1");
  if (k > std::min(x.rows(), x.cols())) {
    throw Error("truncated_svd: k exceeds min(rows, cols)");
  }
  if (!x.allFinite()) throw Error("truncated_svd: non-finite input");

  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);

  TruncatedSvd out;
  out.u = svd.matrixU().leftCols(k);
  out.s = svd.singularValues().head(k);
  out.v = svd.matrixV().leftCols(k);

  for (Index j = 0; j < k; ++j) {
    Index pivot = 0;
    double best = -1.0;
    for (Index i = 0; i < out.v.rows(); ++i) {
      const double a = std::abs(out.v(i, j));
      if (a > best) {  // strict: ties keep the lowest index
        best = a;
        pivot = i;
      }
    }
    if (out.v(pivot, j) < 0.0) {
      out.v.col(j) = -out.v.col(j);
      out.u.col(j) = -out.u.col(j);
    }
  }
  return out;
}

}  // namespace mdg
