#pragma once

#include "mdg/pretrain.hpp"

#include <filesystem>
#include <vector>

namespace mdg {

enum class TaskKind { node, graph };
TaskKind parse_task_kind(const std::string& s);  // "node" | "graph", ConfigError otherwise
std::string to_string(TaskKind kind);

// Labeled instances of one downstream task. Node tasks index into the target
// graph; graph tasks carry ego-networks. Labels are contiguous 0..C-1.
struct LabeledSet {
  TaskKind kind = TaskKind::node;
  std::vector<int> nodes;            // node kind
  std::vector<EgoNetwork> graphs;    // graph kind
  std::vector<int> labels;           // parallel to the instance list
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  void validate() const;
  // Exactly m instances of every class 0..C-1 (support sets of m-shot tasks).
  void validate_shots(int m) const;
};

// The only learnable state during adaptation. Either prompt may be absent
// (ablation variants); an absent prompt leaves its encoder branch out.
struct DualPrompts {
  Tensor unifying;        // 1×unified_dim
  Tensor mixing_weights;  // 1×K over source domains

  bool has_unifying() const { return unifying.defined(); }
  bool has_mixing() const { return mixing_weights.defined(); }
  Index tunable_parameter_count() const;
};

struct AdaptConfig {
  int steps = 100;
  double learning_rate = 1e-2;
  double temperature = 1.0;
  bool use_unifying_prompt = true;
  bool use_mixing_prompt = true;
  int ego_hops = 2;
};

// p_uni = 1s and mixing weights uniform 1/K, so the mixing prompt starts at
// the average pre-trained token.
DualPrompts init_prompts(const PretrainedBundle& bundle, const AdaptConfig& cfg, Tape& tape);

// Frozen domain tokens stacked K×d for the mixing combination.
Matrix token_stack(const DomainTokens& tokens);

// Weighted sum of frozen tokens: 1×K weights times K×d stack.
Tensor mixing_prompt(const Tensor& mixing_weights, const Matrix& tokens);

// Sum of one encoder pass per active prompt; plain encoding when neither
// prompt is present. The bundle must be frozen.
Tensor prompted_encode(const Matrix& adj_hat, const Matrix& aligned_features,
                       const DualPrompts& prompts, const PretrainedBundle& bundle);
Tensor prompted_encode(const Graph& g, const Matrix& aligned_features,
                       const DualPrompts& prompts, const PretrainedBundle& bundle);

// Per-class mean of the selected embedding rows -> C×h prototype matrix,
// differentiable through the embeddings.
Tensor build_prototypes(const Tensor& embeddings, const std::vector<int>& rows,
                        const std::vector<int>& labels, int num_classes);

// Softmax cross-entropy over cosine similarities to the class prototypes,
// denominator over every class, summed over the listed instances.
Tensor downstream_loss(const Tensor& embeddings, const std::vector<int>& rows,
                       const std::vector<int>& labels, const Tensor& prototypes,
                       double temperature);

// Nearest prototype by cosine similarity; ties break to the lowest class.
int classify(const Matrix& embedding, const Matrix& prototypes);

// Target-domain state shared by every episode: fresh aligner, plus the target
// graph's propagation matrix and aligned features for node tasks.
struct TargetContext {
  const DomainDataset* dataset = nullptr;
  DimensionAligner aligner;
  Matrix adj_hat;            // target graph (index 0)
  Matrix aligned_features;   // target graph (index 0)
};

TargetContext make_target_context(const DomainDataset& target, const PretrainedBundle& bundle);

// Adam over the active prompts only; prototypes are rebuilt from the current
// embeddings at every step. The bundle is bit-identical before and after.
DualPrompts tune_prompts(const LabeledSet& support, const TargetContext& target,
                         const PretrainedBundle& bundle, const AdaptConfig& cfg);

// Classifies every query instance with tuned prompts held fixed, using
// prototypes rebuilt from the support set.
std::vector<int> classify_queries(const LabeledSet& support, const LabeledSet& query,
                                  const DualPrompts& prompts, const TargetContext& target,
                                  const PretrainedBundle& bundle);

// Prompt checkpoint: same array text format, keys `p_uni` and `gamma`.
std::string prompts_to_string(const DualPrompts& prompts);
void save_prompts(const DualPrompts& prompts, const std::filesystem::path& path);

}  // namespace mdg
