#include "mdg/harness.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace mdg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mdg_harness_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SynthSpec two_domain_spec(double p_intra = 0.5, double p_inter = 0.05, double noise = 0.1,
                          int nodes = 24) {
  SynthSpec spec;
  spec.class_count = 2;
  spec.seed = 3;
  for (int i = 0; i < 2; ++i) {
    SynthDomainSpec d;
    d.id = "s" + std::to_string(i);
    d.nodes = nodes;
    d.blocks = 2;
    d.p_intra = p_intra;
    d.p_inter = p_inter;
    d.feature_dim = 6 + 2 * i;
    d.noise = noise;
    d.basis_seed = 10 + static_cast<std::uint64_t>(i);
    spec.domains.push_back(std::move(d));
  }
  resolve_bases(spec);
  return spec;
}

PretrainedBundle quick_bundle(const std::vector<DomainDataset>& sources, int epochs = 10) {
  PretrainConfig cfg;
  cfg.unified_dim = 4;
  cfg.hidden_dim = 6;
  cfg.layers = 2;
  cfg.negatives = 2;
  cfg.triplets_per_domain = 15;
  cfg.epochs = epochs;
  cfg.seed = 11;
  return pretrain(sources, cfg).bundle;
}

}  // namespace

TEST_CASE("one-shot tasks take one support instance per class") {
  const DomainDataset ds = oracle::random_dataset("t", 21, 4, 0.2, 5, 3);
  const FewShotTask task = sample_task(ds, TaskKind::node, 1, 42, 2);
  CHECK(task.support.size() == 3);
  CHECK(task.support.labels == std::vector<int>{0, 1, 2});
  CHECK(task.query.size() == 21 - 3);

  const FewShotTask again = sample_task(ds, TaskKind::node, 1, 42, 2);
  CHECK(again.support.nodes == task.support.nodes);
  CHECK(again.query.nodes == task.query.nodes);

  const std::set<int> support(task.support.nodes.begin(), task.support.nodes.end());
  for (int q : task.query.nodes) CHECK(support.count(q) == 0);
}

TEST_CASE("task sampling rejects classes that are too small") {
  const DomainDataset ds = oracle::random_dataset("t", 6, 4, 0.2, 5, 3);  // 2 per class
  CHECK_THROWS_AS(sample_task(ds, TaskKind::node, 2, 1, 2), Error);
}

TEST_CASE("summary statistics use the sample standard deviation") {
  const std::vector<double> acc{50.0, 60.0, 70.0};
  const auto [mean, stddev] = mean_and_stddev(acc);
  CHECK(mean == doctest::Approx(60.0));
  CHECK(stddev == doctest::Approx(10.0));
  CHECK(format_summary(42.26, 10.18) == "42.26 ± 10.18");
  CHECK(format_summary(mean, stddev) == "60.00 ± 10.00");
}

TEST_CASE("a constant classifier scores the base rate on balanced queries") {
  const std::vector<int> predictions{0, 0, 0, 0};
  const std::vector<int> labels{0, 0, 1, 1};
  CHECK(accuracy_percent(predictions, labels) == 50.0);
  CHECK(accuracy_percent(labels, labels) == 100.0);
  CHECK_THROWS_AS(accuracy_percent(predictions, std::vector<int>{0}), Error);
}

TEST_CASE("sbm extremes produce exactly the intra-block cliques") {
  SynthSpec spec = two_domain_spec(1.0, 0.0, 0.0, 6);
  const DomainDataset ds = generate_synthetic_domain(spec, 0, 7);
  const Graph& g = ds.graphs[0];
  CHECK(g.node_count() == 6);
  CHECK(g.edges().size() == 6);  // two disjoint triangles
  for (const auto& [u, v] : g.edges()) CHECK(g.label(u) == g.label(v));
  // zero noise: same-class feature rows identical
  CHECK((g.features().row(0) - g.features().row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((g.features().row(0) - g.features().row(3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("empirical intra-block density approaches the requested probability") {
  SynthSpec spec = two_domain_spec(0.3, 0.0, 0.0, 200);  // two 100-node blocks
  double intra_edges = 0.0;
  double intra_pairs = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DomainDataset ds = generate_synthetic_domain(spec, 0, seed);
    const Graph& g = ds.graphs[0];
    for (const auto& [u, v] : g.edges()) {
      if (g.label(u) == g.label(v)) intra_edges += 1.0;
    }
    intra_pairs += 2.0 * (100.0 * 99.0 / 2.0);
  }
  CHECK(std::abs(intra_edges / intra_pairs - 0.3) < 0.05);
}

TEST_CASE("synthetic specs validate their probabilities") {
  SynthSpec spec = two_domain_spec();
  spec.domains[1].p_inter = 1.2;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.domains[1].p_inter = -0.1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  SynthSpec thin = two_domain_spec();
  thin.domains[0].feature_dim = 1;
  CHECK_THROWS_AS(thin.validate(), ConfigError);
}

TEST_CASE("related domains share rotated bases") {
  SynthSpec spec = two_domain_spec();
  spec.domains[1].feature_dim = spec.domains[0].feature_dim;
  spec.domains[1].related_to = 0;
  spec.domains[1].related_angle = 0.05;
  resolve_bases(spec);
  // rows stay unit-norm and close to the parent basis
  for (int c = 0; c < spec.class_count; ++c) {
    CHECK(spec.domains[1].basis.row(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
    const double align = spec.domains[1].basis.row(c).dot(spec.domains[0].basis.row(c));
    CHECK(align > 0.9);
  }
}

TEST_CASE("generated files reload into the identical dataset") {
  TempDir dir;
  SynthSpec spec = two_domain_spec(0.4, 0.05, 0.2, 18);
  const DomainDataset ds = generate_synthetic_domain(spec, 0, 9);
  write_dataset_files(ds, dir.path);
  const DomainDataset loaded = load_dataset(dir.path / "s0.manifest");
  CHECK(loaded.domain_id == ds.domain_id);
  const Graph& a = ds.graphs[0];
  const Graph& b = loaded.graphs[0];
  CHECK(a.node_count() == b.node_count());
  CHECK(a.edges() == b.edges());
  CHECK(a.labels() == b.labels());
  CHECK((a.features() - b.features()).cwiseAbs().maxCoeff() == 0.0);  // shortest-repr exact
}

TEST_CASE("evaluation reports are deterministic and self-consistent") {
  SynthSpec spec = two_domain_spec(0.5, 0.05, 0.15, 30);
  const std::vector<DomainDataset> sources{generate_synthetic_domain(spec, 0, 1),
                                           generate_synthetic_domain(spec, 1, 1)};
  const DomainDataset target = generate_synthetic_domain(spec, 0, 99);
  const PretrainedBundle bundle = quick_bundle(sources, 6);

  AdaptConfig cfg;
  cfg.steps = 4;
  const std::vector<std::uint64_t> seeds{0, 1};
  const EvalReport a = evaluate(bundle, target, TaskKind::node, 1, 3, seeds, cfg, 1);
  const EvalReport b = evaluate(bundle, target, TaskKind::node, 1, 3, seeds, cfg, 2);
  REQUIRE(a.records.size() == 6);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].accuracy == b.records[i].accuracy);  // schedule independent
    CHECK(a.records[i].task_id == b.records[i].task_id);
    CHECK(a.records[i].accuracy >= 0.0);
    CHECK(a.records[i].accuracy <= 100.0);
  }
  CHECK(a.stddev >= 0.0);

  std::vector<double> acc;
  for (const auto& r : a.records) acc.push_back(r.accuracy);
  const auto [m, s] = mean_and_stddev(acc);
  CHECK(std::abs(m - a.mean) < 1e-9);
  CHECK(std::abs(s - a.stddev) < 1e-9);
}

TEST_CASE("reports round-trip through their text form") {
  TempDir dir;
  EvalReport report = EvalReport::from_records(
      {{0, 0, 50.0}, {1, 0, 62.5}, {0, 1, 75.0}, {1, 1, 100.0 / 3.0}}, 2, {0, 1});
  write_report(report, dir.path / "r.tsv");
  const EvalReport parsed = parse_report(dir.path / "r.tsv");
  REQUIRE(parsed.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(parsed.records[i].accuracy == report.records[i].accuracy);
    CHECK(parsed.records[i].task_id == report.records[i].task_id);
    CHECK(parsed.records[i].seed == report.records[i].seed);
  }
  CHECK(parsed.mean == doctest::Approx(report.mean).epsilon(1e-12));
}

TEST_CASE("zero-noise disconnected blocks give a perfect one-shot task") {
  SynthSpec spec = two_domain_spec(1.0, 0.0, 0.0, 20);
  const std::vector<DomainDataset> sources{generate_synthetic_domain(spec, 0, 0),
                                           generate_synthetic_domain(spec, 1, 0)};
  const DomainDataset target = generate_synthetic_domain(spec, 0, 123);
  const PretrainedBundle bundle = quick_bundle(sources, 8);
  AdaptConfig cfg;
  cfg.steps = 10;
  const std::vector<std::uint64_t> seeds{0};
  const EvalReport report = evaluate(bundle, target, TaskKind::node, 1, 3, seeds, cfg, 1);
  CHECK(report.mean == doctest::Approx(100.0));
}

TEST_CASE("model ablation emits the five-variant grid under shared seeds") {
  SynthSpec spec = two_domain_spec(0.5, 0.05, 0.2, 24);
  const std::vector<DomainDataset> sources{generate_synthetic_domain(spec, 0, 2),
                                           generate_synthetic_domain(spec, 1, 2)};
  const DomainDataset target = generate_synthetic_domain(spec, 0, 77);

  PretrainConfig pre;
  pre.unified_dim = 4;
  pre.hidden_dim = 5;
  pre.layers = 2;
  pre.negatives = 2;
  pre.triplets_per_domain = 10;
  pre.epochs = 4;
  pre.seed = 21;
  AdaptConfig cfg;
  cfg.steps = 3;
  const std::vector<std::uint64_t> seeds{0};
  const auto rows = run_model_ablation(sources, target, TaskKind::node, 1, pre, cfg, 2, seeds, 1);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].label == "variant1");
  CHECK(rows[4].label == "full");
  auto attr = [](const AblationRow& row, const std::string& key) {
    for (const auto& [k, v] : row.attrs) {
      if (k == key) return v;
    }
    return std::string();
  };
  CHECK(attr(rows[0], "domain_token") == "false");
  CHECK(attr(rows[0], "mixing_prompt") == "false");
  CHECK(attr(rows[0], "unifying_prompt") == "false");
  CHECK(attr(rows[1], "unifying_prompt") == "true");
  CHECK(attr(rows[2], "domain_token") == "true");
  CHECK(attr(rows[3], "mixing_prompt") == "true");
  CHECK(attr(rows[3], "unifying_prompt") == "false");
  CHECK(attr(rows[4], "domain_token") == "true");
  CHECK(attr(rows[4], "mixing_prompt") == "true");
  CHECK(attr(rows[4], "unifying_prompt") == "true");

  // identical task seeds across variants: the record grid aligns
  for (const AblationRow& row : rows) {
    REQUIRE(row.report.records.size() == rows[0].report.records.size());
    for (std::size_t i = 0; i < row.report.records.size(); ++i) {
      CHECK(row.report.records[i].task_id == rows[0].report.records[i].task_id);
      CHECK(row.report.records[i].seed == rows[0].report.records[i].seed);
    }
  }
}

TEST_CASE("data ablation grows the source prefix with shared evaluation seeds") {
  SynthSpec spec = two_domain_spec(0.5, 0.05, 0.2, 24);
  const std::vector<DomainDataset> sources{generate_synthetic_domain(spec, 0, 4),
                                           generate_synthetic_domain(spec, 1, 4)};
  const DomainDataset target = generate_synthetic_domain(spec, 0, 88);

  PretrainConfig pre;
  pre.unified_dim = 3;
  pre.hidden_dim = 4;
  pre.layers = 1;
  pre.negatives = 2;
  pre.triplets_per_domain = 8;
  pre.epochs = 3;
  AdaptConfig cfg;
  cfg.steps = 2;
  const std::vector<std::uint64_t> seeds{0};
  const auto rows = run_data_ablation(sources, target, TaskKind::node, 1, pre, cfg, 2, seeds, 1);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].label == "sources_1");
  CHECK(rows[1].label == "sources_2");
  for (const AblationRow& row : rows) {
    std::vector<double> acc;
    for (const auto& r : row.report.records) acc.push_back(r.accuracy);
    CHECK(std::abs(mean_and_stddev(acc).first - row.report.mean) < 1e-9);
  }

  TempDir dir;
  write_ablation(rows, dir.path / "ablation.tsv");
  const auto parsed = parse_ablation(dir.path / "ablation.tsv");
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].label == "sources_1");
  CHECK(parsed[0].attrs == rows[0].attrs);
  CHECK(parsed[1].report.records.size() == rows[1].report.records.size());
}

TEST_CASE("sweep csv lists one row per point") {
  TempDir dir;
  EvalReport a = EvalReport::from_records({{0, 0, 60.0}}, 1, {0});
  EvalReport b = EvalReport::from_records({{0, 0, 80.0}}, 1, {0});
  const std::vector<std::pair<double, EvalReport>> points{{1.0, a}, {5.0, b}};
  write_sweep_csv("shots", points, dir.path / "sweep.csv");
  std::ifstream in(dir.path / "sweep.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "shots,mean,std");
  std::getline(in, line);
  CHECK(line == "1,60.00,0.00");
}
