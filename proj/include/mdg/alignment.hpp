#pragma once

#include "mdg/graph.hpp"
#include "mdg/tensor.hpp"

#include <string>
#include <vector>

namespace mdg {

// Linear projection of one domain's native feature space onto the shared
// unified dimension. Columns are right singular vectors of the stacked domain
// features; columns past min(rows, source_dim) are zero.
struct DimensionAligner {
  std::string domain_id;
  Matrix projection;  // source_dim × unified_dim
  Index source_dim = 0;
  Index unified_dim = 0;
};

// Fits the projection on all feature rows of all graphs in the domain.
DimensionAligner fit_aligner(const DomainDataset& ds, Index unified_dim);

Matrix apply_aligner(const DimensionAligner& a, const Matrix& features);

// One learnable semantic-unification vector per source domain, in a stable
// insertion order.
struct DomainTokens {
  std::vector<std::string> domain_ids;
  std::vector<Tensor> tokens;  // each 1×unified_dim

  Index size() const { return static_cast<Index>(tokens.size()); }
  bool empty() const { return tokens.empty(); }
  const Tensor& at(const std::string& domain_id) const;
};

// All-ones initialization, so unification starts as the identity map.
DomainTokens init_tokens(const std::vector<std::string>& domain_ids, Index unified_dim,
                         Tape& tape);

// Row-broadcast product token ⊙ X̃ (Hadamard against every row).
Tensor unify(const Tensor& token, const Tensor& aligned_features);

}  // namespace mdg
