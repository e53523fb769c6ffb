#include "mdg/alignment.hpp"

#include "mdg/linalg.hpp"

#include <algorithm>
#include <unordered_set>

namespace mdg {

DimensionAligner fit_aligner(const DomainDataset& ds, Index unified_dim) {
  if (unified_dim < 1) throw Error("fit_aligner: unified_dim must be positive");
  if (ds.graphs.empty()) throw Error("fit_aligner: dataset '" + ds.domain_id + "' is empty");

  Index total_rows = 0;
  for (const Graph& g : ds.graphs) total_rows += g.node_count();
  if (total_rows == 0) throw Error("fit_aligner: dataset '" + ds.domain_id + "' has no nodes");

  Matrix stacked(total_rows, ds.feature_dim);
  Index at = 0;
  for (const Graph& g : ds.graphs) {
    stacked.middleRows(at, g.node_count()) = g.features();
    at += g.node_count();
  }
  if (!stacked.allFinite()) {
    throw Error("fit_aligner: non-finite features in dataset '" + ds.domain_id + "'");
  }

  const Index k = std::min(unified_dim, std::min(total_rows, ds.feature_dim));
  const TruncatedSvd svd = truncated_svd(stacked, k);

  DimensionAligner a;
  a.domain_id = ds.domain_id;
  a.source_dim = ds.feature_dim;
  a.unified_dim = unified_dim;
  a.projection = Matrix::Zero(ds.feature_dim, unified_dim);
  a.projection.leftCols(k) = svd.v;
  return a;
}

Matrix apply_aligner(const DimensionAligner& a, const Matrix& features) {
  if (features.cols() != a.source_dim) {
    throw Error("apply_aligner: feature dim " + std::to_string(features.cols()) +
                " does not match aligner for '" + a.domain_id + "' (" +
                std::to_string(a.source_dim) + ")");
  }
  return features * a.projection;
}

const Tensor& DomainTokens::at(const std::string& domain_id) const {
  for (std::size_t i = 0; i < domain_ids.size(); ++i) {
    if (domain_ids[i] == domain_id) return tokens[i];
  }
  throw Error("no domain token for '" + domain_id + "'");
}

DomainTokens init_tokens(const std::vector<std::string>& domain_ids, Index unified_dim,
                         Tape& tape) {
  if (domain_ids.empty()) throw Error("init_tokens: empty domain list");
  std::unordered_set<std::string> seen;
  DomainTokens t;
  for (const std::string& id : domain_ids) {
    if (!seen.insert(id).second) throw Error("init_tokens: duplicate domain id '" + id + "'");
    t.domain_ids.push_back(id);
    t.tokens.push_back(tape.parameter(Matrix::Ones(1, unified_dim)));
  }
  return t;
}

Tensor unify(const Tensor& token, const Tensor& aligned_features) {
  if (token.rows() != 1 || token.cols() != aligned_features.cols()) {
    throw Error("unify: token length does not match feature columns");
  }
  return elementwise_mul(token, aligned_features);
}

}  // namespace mdg
