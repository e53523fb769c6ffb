#include "mdg/config.hpp"

#include <doctest.h>

#include <array>

using namespace mdg;

TEST_CASE("defaults mirror the documented values") {
  const ExperimentConfig cfg;
  CHECK(cfg.unified_dim == 50);
  CHECK(cfg.hidden_dim == 256);
  CHECK(cfg.layers == 3);
  CHECK(cfg.temperature == 1.0);
  CHECK(cfg.negatives == 5);
  CHECK(cfg.ego_hops == 2);
  CHECK(cfg.eval_tasks == 100);
  CHECK(cfg.eval_seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK_FALSE(cfg.include_positive_in_denominator);
  cfg.validate();
}

TEST_CASE("parsing and serialization are inverse up to canonical form") {
  const std::string text =
      "# comment\n"
      "unified_dim = 8\n"
      "eval_seeds = 3, 4,5\n"
      "temperature = 0.5\n"
      "mixing_prompt = true\n";
  const ExperimentConfig cfg = config_from_string(text, "<test>");
  CHECK(cfg.unified_dim == 8);
  CHECK(cfg.eval_seeds == std::vector<std::uint64_t>{3, 4, 5});
  CHECK(cfg.temperature == 0.5);

  const std::string canonical = serialize_config(cfg);
  const ExperimentConfig reparsed = config_from_string(canonical, "<canonical>");
  CHECK(serialize_config(reparsed) == canonical);
}

TEST_CASE("unknown keys and bad values are configuration errors") {
  CHECK_THROWS_AS(config_from_string("no_such_key = 1\n", "<t>"), ConfigError);
  CHECK_THROWS_AS(config_from_string("layers = banana\n", "<t>"), ConfigError);
  CHECK_THROWS_AS(config_from_string("layers = 0\n", "<t>"), ConfigError);
  CHECK_THROWS_AS(config_from_string("temperature = -1\n", "<t>"), ConfigError);
}

TEST_CASE("variant switches follow the ablation grid") {
  auto flags = [](const std::string& v) {
    ExperimentConfig cfg;
    apply_variant(cfg, v);
    return std::array<bool, 3>{cfg.domain_token, cfg.mixing_prompt, cfg.unifying_prompt};
  };
  CHECK(flags("1") == std::array<bool, 3>{false, false, false});
  CHECK(flags("2") == std::array<bool, 3>{false, false, true});
  CHECK(flags("3") == std::array<bool, 3>{true, false, false});
  CHECK(flags("4") == std::array<bool, 3>{true, true, false});
  CHECK(flags("full") == std::array<bool, 3>{true, true, true});
  ExperimentConfig cfg;
  CHECK_THROWS_AS(apply_variant(cfg, "5"), ConfigError);
}

TEST_CASE("a mixing prompt without domain tokens is rejected") {
  ExperimentConfig cfg;
  cfg.domain_token = false;
  cfg.mixing_prompt = true;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  // but every variant row is internally consistent
  for (const std::string v : {"1", "2", "3", "4", "full"}) {
    ExperimentConfig c;
    apply_variant(c, v);
    c.validate();
  }
}

TEST_CASE("seed lists reject junk") {
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK_THROWS_AS(config_from_string("eval_seeds = 1,x\n", "<t>"), ConfigError);
}
