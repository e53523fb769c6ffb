#pragma once

#include "mdg/adapt.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mdg {

// One sampled episode: m support instances per class, every remaining labeled
// instance as query. Support and query are disjoint by construction.
struct FewShotTask {
  TaskKind kind = TaskKind::node;
  int shots = 1;
  LabeledSet support;
  LabeledSet query;
  std::uint64_t seed = 0;
};

// Seeded uniform sampling without replacement; graph tasks take ego-networks
// of the sampled labeled nodes. Every class needs at least shots+1 instances.
FewShotTask sample_task(const DomainDataset& ds, TaskKind kind, int shots, std::uint64_t seed,
                        int ego_hops);

struct EvalRecord {
  int task_id = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // percent
};

struct EvalReport {
  std::vector<EvalRecord> records;
  double mean = 0.0;    // percent
  double stddev = 0.0;  // sample standard deviation, percent
  int task_count = 0;   // tasks per seed
  std::vector<std::uint64_t> seeds;

  static EvalReport from_records(std::vector<EvalRecord> records, int task_count,
                                 std::vector<std::uint64_t> seeds);
};

// Pools of mean and sample standard deviation over values in percent.
std::pair<double, double> mean_and_stddev(std::span<const double> values);
std::string format_summary(double mean, double stddev);  // "42.26 ± 10.18"

// Fraction of matching predictions, in percent.
double accuracy_percent(std::span<const int> predictions, std::span<const int> labels);

// Runs n_tasks episodes per seed: sample task, tune prompts on the support
// set, classify the queries. Episodes are independent and may run on several
// threads (0 = hardware concurrency); results do not depend on the schedule.
EvalReport evaluate(const PretrainedBundle& bundle, const DomainDataset& target, TaskKind kind,
                    int shots, int n_tasks, std::span<const std::uint64_t> seeds,
                    const AdaptConfig& cfg, int threads = 0);

// ---- synthetic multi-domain fixtures ------------------------------------

// One synthetic domain: an SBM graph whose blocks are the classes, with
// per-class feature basis vectors in the domain's own feature space.
struct SynthDomainSpec {
  std::string id;
  int nodes = 0;
  int blocks = 0;  // equals the class count
  double p_intra = 0.0;
  double p_inter = 0.0;
  Index feature_dim = 0;
  double noise = 0.0;
  std::uint64_t basis_seed = 0;
  int related_to = -1;  // reuse that domain's basis, rotated by related_angle
  double related_angle = 0.0;
  Matrix basis;  // blocks × feature_dim, resolved by resolve_bases
};

struct SynthSpec {
  int class_count = 0;
  std::uint64_t seed = 0;
  std::vector<SynthDomainSpec> domains;

  void validate() const;  // ConfigError on out-of-range probabilities etc.
};

SynthSpec parse_synth_spec(const std::filesystem::path& path);
// Fills every domain's basis: orthonormal rows from basis_seed, or the
// related domain's basis rotated by related_angle.
void resolve_bases(SynthSpec& spec);

DomainDataset generate_synthetic_domain(const SynthSpec& spec, int domain_index,
                                        std::uint64_t seed);

// Writes <id>.manifest / <id>.nodes.tsv / <id>.edges.tsv, loadable by
// load_dataset; byte-identical for identical spec and seed.
void write_dataset_files(const DomainDataset& ds, const std::filesystem::path& out_dir);

// ---- reports and ablation drivers ----------------------------------------

std::string report_to_string(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport parse_report(const std::filesystem::path& path);

struct AblationRow {
  std::string label;
  std::vector<std::pair<std::string, std::string>> attrs;
  EvalReport report;
};

std::string ablation_to_string(std::span<const AblationRow> rows);
void write_ablation(std::span<const AblationRow> rows, const std::filesystem::path& path);
std::vector<AblationRow> parse_ablation(const std::filesystem::path& path);

// Pre-trains on growing source prefixes (1..K domains) and evaluates each
// bundle on identical target tasks.
std::vector<AblationRow> run_data_ablation(const std::vector<DomainDataset>& sources,
                                           const DomainDataset& target, TaskKind kind, int shots,
                                           const PretrainConfig& pre_cfg, const AdaptConfig& cfg,
                                           int n_tasks, std::span<const std::uint64_t> seeds,
                                           int threads = 0);

// Variants 1-4 plus the full model under identical task seeds; pre-trains
// once with domain tokens and once without, as the variants require.
std::vector<AblationRow> run_model_ablation(const std::vector<DomainDataset>& sources,
                                            const DomainDataset& target, TaskKind kind, int shots,
                                            const PretrainConfig& pre_cfg, const AdaptConfig& cfg,
                                            int n_tasks, std::span<const std::uint64_t> seeds,
                                            int threads = 0);

// Plot-ready CSV `<x_name>,mean,std` for shot-count or dimension sweeps.
void write_sweep_csv(const std::string& x_name,
                     std::span<const std::pair<double, EvalReport>> points,
                     const std::filesystem::path& path);

}  // namespace mdg
