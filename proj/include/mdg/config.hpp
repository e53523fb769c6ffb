#pragma once

#include "mdg/adapt.hpp"
#include "mdg/pretrain.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mdg {

// Flat key=value experiment configuration; every field has a default and maps
// 1:1 onto a file key of the same name.
struct ExperimentConfig {
  Index unified_dim = 50;
  Index hidden_dim = 256;
  int layers = 3;
  double temperature = 1.0;
  int negatives = 5;
  int triplets_per_domain = 2000;
  int pretrain_epochs = 100;
  double pretrain_lr = 1e-3;
  int adapt_steps = 100;
  double adapt_lr = 1e-2;
  int ego_hops = 2;
  int eval_tasks = 100;
  std::vector<std::uint64_t> eval_seeds = {0, 1, 2, 3, 4};
  bool domain_token = true;
  bool mixing_prompt = true;
  bool unifying_prompt = true;
  bool include_positive_in_denominator = false;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError on nonsense values or flag combinations
  PretrainConfig pretrain_config() const;
  AdaptConfig adapt_config() const;
};

ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig config_from_string(const std::string& text, const std::string& origin);
// Canonical form: fixed key order, shortest-round-trip values.
std::string serialize_config(const ExperimentConfig& cfg);

// Table 4-style variant switches: 1..4 or "full".
void apply_variant(ExperimentConfig& cfg, const std::string& variant);

std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

}  // namespace mdg
