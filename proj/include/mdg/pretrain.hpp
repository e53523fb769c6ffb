#pragma once

#include "mdg/alignment.hpp"
#include "mdg/encoder.hpp"
#include "mdg/graph.hpp"
#include "mdg/optim.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mdg {

// Link-prediction sample: (anchor, positive) is an edge of the referenced
// graph, negatives are non-neighbors of the anchor.
struct Triplet {
  int dataset = 0;  // index into the dataset list
  int graph = 0;    // index into that dataset's graphs
  int anchor = 0;
  int positive = 0;
  std::vector<int> negatives;
};

struct TripletSet {
  std::vector<Triplet> triplets;
  std::uint64_t seed = 0;
  int negatives_per_triplet = 0;
};

// Uniform edges as (anchor, positive), negatives drawn without replacement
// from the anchor's non-neighbors; equal counts per domain. Deterministic:
// domain i consumes a sub-stream derived from (seed, i).
TripletSet sample_triplets(const std::vector<DomainDataset>& datasets, int negatives,
                           int count_per_domain, std::uint64_t seed);

struct PretrainConfig {
  Index unified_dim = 50;
  Index hidden_dim = 256;
  int layers = 3;
  double temperature = 1.0;
  int negatives = 5;
  int triplets_per_domain = 2000;  // per-epoch cap; capped again by the smallest edge set
  int epochs = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool use_domain_tokens = true;
  bool include_positive_in_denominator = false;
};

// Everything downstream adaptation needs: frozen encoder weights, frozen
// domain tokens (absent for token-free pre-training), per-domain aligners.
struct PretrainedBundle {
  GcnParams gcn;
  DomainTokens tokens;
  std::vector<DimensionAligner> aligners;
  PretrainConfig config;

  Index num_domains() const { return static_cast<Index>(aligners.size()); }
  const DimensionAligner& aligner(const std::string& domain_id) const;
  bool frozen() const;
  void freeze();
  void validate() const;
};

// Loss contribution of triplets whose anchor/positive/negatives index rows of
// one embedding matrix. Exposed so fixtures can pin the closed-form values.
Tensor link_prediction_loss(const Tensor& embeddings, std::span<const Triplet> triplets,
                            double temperature, bool include_positive_in_denominator);

// Full pipeline loss: align -> unify (when tokens present) -> encode -> loss,
// summed over triplets in order.
Tensor pretrain_loss(const std::vector<DomainDataset>& datasets,
                     const std::vector<DimensionAligner>& aligners,
                     const DomainTokens& tokens, const GcnParams& gcn,
                     const TripletSet& triplets, double temperature,
                     bool include_positive_in_denominator = false);

struct PretrainResult {
  PretrainedBundle bundle;
  std::vector<double> epoch_losses;  // loss per epoch, before that epoch's update
  double final_loss = 0.0;           // loss on a fresh sample after the last update
};

PretrainResult pretrain(const std::vector<DomainDataset>& datasets, const PretrainConfig& cfg);

// Checkpoint: versioned UTF-8 text, config echo plus every named array with
// its shape and row-major shortest-round-trip decimals. Save/load/save is
// byte-identical.
std::string checkpoint_to_string(const PretrainedBundle& bundle);
void save_checkpoint(const PretrainedBundle& bundle, const std::filesystem::path& path);
PretrainedBundle load_checkpoint(const std::filesystem::path& path);
PretrainedBundle checkpoint_from_string(const std::string& text);

}  // namespace mdg
