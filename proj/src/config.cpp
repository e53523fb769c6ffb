#include "mdg/config.hpp"

#include "mdg/kv.hpp"

#include <sstream>

namespace mdg {

void ExperimentConfig::validate() const {
  auto positive = [](auto v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  positive(unified_dim, "unified_dim");
  positive(hidden_dim, "hidden_dim");
  positive(layers, "layers");
  positive(temperature, "temperature");
  positive(negatives, "negatives");
  positive(triplets_per_domain, "triplets_per_domain");
  positive(ego_hops, "ego_hops");
  positive(eval_tasks, "eval_tasks");
  positive(pretrain_lr, "pretrain_lr");
  positive(adapt_lr, "adapt_lr");
  if (pretrain_epochs < 0) throw ConfigError("config: pretrain_epochs must be non-negative");
  if (adapt_steps < 0) throw ConfigError("config: adapt_steps must be non-negative");
  if (eval_seeds.empty()) throw ConfigError("config: eval_seeds must not be empty");
  if (mixing_prompt && !domain_token) {
    throw ConfigError("config: mixing_prompt requires domain_token");
  }
}

PretrainConfig ExperimentConfig::pretrain_config() const {
  PretrainConfig p;
  p.unified_dim = unified_dim;
  p.hidden_dim = hidden_dim;
  p.layers = layers;
  p.temperature = temperature;
  p.negatives = negatives;
  p.triplets_per_domain = triplets_per_domain;
  p.epochs = pretrain_epochs;
  p.learning_rate = pretrain_lr;
  p.seed = seed;
  p.use_domain_tokens = domain_token;
  p.include_positive_in_denominator = include_positive_in_denominator;
  return p;
}

AdaptConfig ExperimentConfig::adapt_config() const {
  AdaptConfig a;
  a.steps = adapt_steps;
  a.learning_rate = adapt_lr;
  a.temperature = temperature;
  a.use_unifying_prompt = unifying_prompt;
  a.use_mixing_prompt = mixing_prompt;
  a.ego_hops = ego_hops;
  return a;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& part : split(csv, ',')) {
    const std::string s = trim(part);
    if (s.empty()) continue;
    seeds.push_back(static_cast<std::uint64_t>(parse_int(s)));
  }
  if (seeds.empty()) throw ConfigError("empty seed list '" + csv + "'");
  return seeds;
}

ExperimentConfig config_from_string(const std::string& text, const std::string& origin) {
  const KvFile kv = KvFile::parse_string(text, origin);
  ExperimentConfig cfg;
  try {
    for (const auto& [key, value] : kv.entries()) {
      if (key == "unified_dim") cfg.unified_dim = static_cast<Index>(parse_int(value));
      else if (key == "hidden_dim") cfg.hidden_dim = static_cast<Index>(parse_int(value));
      else if (key == "layers") cfg.layers = static_cast<int>(parse_int(value));
      else if (key == "temperature") cfg.temperature = parse_double(value);
      else if (key == "negatives") cfg.negatives = static_cast<int>(parse_int(value));
      else if (key == "triplets_per_domain") cfg.triplets_per_domain = static_cast<int>(parse_int(value));
      else if (key == "pretrain_epochs") cfg.pretrain_epochs = static_cast<int>(parse_int(value));
      else if (key == "pretrain_lr") cfg.pretrain_lr = parse_double(value);
      else if (key == "adapt_steps") cfg.adapt_steps = static_cast<int>(parse_int(value));
      else if (key == "adapt_lr") cfg.adapt_lr = parse_double(value);
      else if (key == "ego_hops") cfg.ego_hops = static_cast<int>(parse_int(value));
      else if (key == "eval_tasks") cfg.eval_tasks = static_cast<int>(parse_int(value));
      else if (key == "eval_seeds") cfg.eval_seeds = parse_seed_list(value);
      else if (key == "domain_token") cfg.domain_token = parse_bool(value);
      else if (key == "mixing_prompt") cfg.mixing_prompt = parse_bool(value);
      else if (key == "unifying_prompt") cfg.unifying_prompt = parse_bool(value);
      else if (key == "include_positive_in_denominator") cfg.include_positive_in_denominator = parse_bool(value);
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value));
      else throw ConfigError(origin + ": unknown config key '" + key + "'");
    }
  } catch (const Error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config not found: " + path.string());
  const KvFile kv = KvFile::parse_file(path);
  std::ostringstream text;
  for (const auto& [k, v] : kv.entries()) text << k << " = " << v << "\n";
  return config_from_string(text.str(), path.string());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "unified_dim = " << cfg.unified_dim << "\n";
  out << "hidden_dim = " << cfg.hidden_dim << "\n";
  out << "layers = " << cfg.layers << "\n";
  out << "temperature = " << format_double(cfg.temperature) << "\n";
  out << "negatives = " << cfg.negatives << "\n";
  out << "triplets_per_domain = " << cfg.triplets_per_domain << "\n";
  out << "pretrain_epochs = " << cfg.pretrain_epochs << "\n";
  out << "pretrain_lr = " << format_double(cfg.pretrain_lr) << "\n";
  out << "adapt_steps = " << cfg.adapt_steps << "\n";
  out << "adapt_lr = " << format_double(cfg.adapt_lr) << "\n";
  out << "ego_hops = " << cfg.ego_hops << "\n";
  out << "eval_tasks = " << cfg.eval_tasks << "\n";
  out << "eval_seeds = ";
  for (std::size_t i = 0; i < cfg.eval_seeds.size(); ++i) {
    if (i) out << ",";
    out << cfg.eval_seeds[i];
  }
  out << "\n";
  out << "domain_token = " << (cfg.domain_token ? "true" : "false") << "\n";
  out << "mixing_prompt = " << (cfg.mixing_prompt ? "true" : "false") << "\n";
  out << "unifying_prompt = " << (cfg.unifying_prompt ? "true" : "false") << "\n";
  out << "include_positive_in_denominator = "
      << (cfg.include_positive_in_denominator ? "true" : "false") << "\n";
  out << "seed = " << cfg.seed << "\n";
  return out.str();
}

void apply_variant(ExperimentConfig& cfg, const std::string& variant) {
  if (variant == "1") {
    cfg.domain_token = false;
    cfg.mixing_prompt = false;
    cfg.unifying_prompt = false;
  } else if (variant == "2") {
    cfg.domain_token = false;
    cfg.mixing_prompt = false;
    cfg.unifying_prompt = true;
  } else if (variant == "3") {
    cfg.domain_token = true;
    cfg.mixing_prompt = false;
    cfg.unifying_prompt = false;
  } else if (variant == "4") {
    cfg.domain_token = true;
    cfg.mixing_prompt = true;
    cfg.unifying_prompt = false;
  } else if (variant == "full") {
    cfg.domain_token = true;
    cfg.mixing_prompt = true;
    cfg.unifying_prompt = true;
  } else {
    throw ConfigError("unknown variant '" + variant + "' (expected 1, 2, 3, 4 or full)");
  }
}

}  // namespace mdg
