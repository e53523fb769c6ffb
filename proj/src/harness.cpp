#include "mdg/harness.hpp"

#include "mdg/kv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace mdg {

FewShotTask sample_task(const DomainDataset& ds, TaskKind kind, int shots, std::uint64_t seed,
                        int ego_hops) {
  if (shots < 1) throw Error("sample_task: shots must be positive");
  if (ds.graphs.empty()) throw Error("sample_task: dataset '" + ds.domain_id + "' is empty");
  const Graph& g = ds.graphs[0];
  if (!g.has_labels()) throw Error("sample_task: dataset '" + ds.domain_id + "' has no labels");
  const int num_classes = ds.num_classes();

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
  for (int v = 0; v < g.node_count(); ++v) {
    const int y = g.label(v);
    if (y >= 0) by_class[static_cast<std::size_t>(y)].push_back(v);
  }
  for (int c = 0; c < num_classes; ++c) {
    if (static_cast<int>(by_class[static_cast<std::size_t>(c)].size()) < shots + 1) {
      throw Error("sample_task: class " + std::to_string(c) + " has fewer than " +
                  std::to_string(shots + 1) + " labeled instances");
    }
  }

  Rng rng(seed);
  FewShotTask task;
  task.kind = kind;
  task.shots = shots;
  task.seed = seed;
  task.support.kind = kind;
  task.support.num_classes = num_classes;
  task.query.kind = kind;
  task.query.num_classes = num_classes;

  std::vector<int> support_nodes;
  std::vector<int> query_nodes;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int>& pool = by_class[static_cast<std::size_t>(c)];
    for (int s = 0; s < shots; ++s) {  // partial Fisher-Yates
      const auto j = static_cast<std::size_t>(s) +
                     static_cast<std::size_t>(rng.uniform_int(
                         static_cast<std::int64_t>(pool.size() - static_cast<std::size_t>(s))));
      std::swap(pool[static_cast<std::size_t>(s)], pool[j]);
      support_nodes.push_back(pool[static_cast<std::size_t>(s)]);
      task.support.labels.push_back(c);
    }
    std::vector<int> rest(pool.begin() + shots, pool.end());
    std::sort(rest.begin(), rest.end());
    for (int v : rest) {
      query_nodes.push_back(v);
      task.query.labels.push_back(c);
    }
  }

  if (kind == TaskKind::node) {
    task.support.nodes = std::move(support_nodes);
    task.query.nodes = std::move(query_nodes);
  } else {
    for (int v : support_nodes) task.support.graphs.push_back(extract_ego_network(g, v, ego_hops));
    for (int v : query_nodes) task.query.graphs.push_back(extract_ego_network(g, v, ego_hops));
  }
  task.support.validate_shots(shots);
  task.query.validate();
  return task;
}

std::pair<double, double> mean_and_stddev(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

std::string format_summary(double mean, double stddev) {
  return format_fixed(mean, 2) + " ± " + format_fixed(stddev, 2);
}

double accuracy_percent(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw Error("accuracy_percent: prediction/label size mismatch");
  }
  int correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
}

EvalReport EvalReport::from_records(std::vector<EvalRecord> records, int task_count,
                                    std::vector<std::uint64_t> seeds) {
  EvalReport r;
  r.records = std::move(records);
  r.task_count = task_count;
  r.seeds = std::move(seeds);
  std::vector<double> acc;
  acc.reserve(r.records.size());
  for (const EvalRecord& rec : r.records) acc.push_back(rec.accuracy);
  std::tie(r.mean, r.stddev) = mean_and_stddev(acc);
  return r;
}

EvalReport evaluate(const PretrainedBundle& bundle, const DomainDataset& target, TaskKind kind,
                    int shots, int n_tasks, std::span<const std::uint64_t> seeds,
                    const AdaptConfig& cfg, int threads) {
  if (n_tasks < 1) throw Error("evaluate: n_tasks must be positive");
  if (seeds.empty()) throw Error("evaluate: need at least one seed");
  const TargetContext ctx = make_target_context(target, bundle);

  const std::size_t episodes = seeds.size() * static_cast<std::size_t>(n_tasks);
  std::vector<EvalRecord> records(episodes);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_episode = [&](std::size_t idx) {
    const std::size_t seed_idx = idx / static_cast<std::size_t>(n_tasks);
    const int task_idx = static_cast<int>(idx % static_cast<std::size_t>(n_tasks));
    const std::uint64_t task_seed =
        derive_seed(seeds[seed_idx], static_cast<std::uint64_t>(task_idx), seed_idx);
    const FewShotTask task = sample_task(target, kind, shots, task_seed, cfg.ego_hops);
    const DualPrompts prompts = tune_prompts(task.support, ctx, bundle, cfg);
    const std::vector<int> predictions =
        classify_queries(task.support, task.query, prompts, ctx, bundle);
    records[idx] =
        EvalRecord{task_idx, seeds[seed_idx], accuracy_percent(predictions, task.query.labels)};
  };

  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(episodes)));
  if (workers == 1) {
    for (std::size_t i = 0; i < episodes; ++i) run_episode(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < episodes;
             i += static_cast<std::size_t>(workers)) {
          try {
            run_episode(i);
          } catch (...) {
            const std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  return EvalReport::from_records(std::move(records), n_tasks,
                                  std::vector<std::uint64_t>(seeds.begin(), seeds.end()));
}

// ---- synthetic fixtures ---------------------------------------------------

void SynthSpec::validate() const {
  if (class_count < 2) throw ConfigError("synth spec: class_count must be at least 2");
  if (domains.empty()) throw ConfigError("synth spec: no domains");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const SynthDomainSpec& d = domains[i];
    const std::string where = "synth spec domain '" + d.id + "'";
    if (d.id.empty()) throw ConfigError("synth spec: domain " + std::to_string(i) + " has no id");
    if (d.nodes < class_count) throw ConfigError(where + ": fewer nodes than classes");
    if (d.blocks != class_count) throw ConfigError(where + ": blocks must equal class_count");
    if (d.p_intra < 0.0 || d.p_intra > 1.0) {
      throw ConfigError(where + ": p_intra must be within [0,1]");
    }
    if (d.p_inter < 0.0 || d.p_inter > 1.0) {
      throw ConfigError(where + ": p_inter must be within [0,1]");
    }
    if (d.feature_dim < class_count) {
      throw ConfigError(where + ": feature_dim must be at least class_count");
    }
    if (d.noise < 0.0) throw ConfigError(where + ": noise must be non-negative");
    if (d.related_to >= 0) {
      if (static_cast<std::size_t>(d.related_to) >= i) {
        throw ConfigError(where + ": related_to must reference an earlier domain");
      }
      if (domains[static_cast<std::size_t>(d.related_to)].feature_dim != d.feature_dim) {
        throw ConfigError(where + ": related domains must share feature_dim");
      }
    }
  }
}

namespace {

Matrix random_orthonormal_rows(int rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    for (int p = 0; p < i; ++p) {  // Gram-Schmidt against earlier rows
      m.row(i) -= m.row(i).dot(m.row(p)) * m.row(p);
    }
    m.row(i) /= m.row(i).norm();
  }
  return m;
}

Matrix rotated_basis(const Matrix& basis, double angle, Rng& rng) {
  Matrix out = basis;
  const Index d = basis.cols();
  for (Index r = 0; r < d; ++r) {  // plane rotations on random coordinate pairs
    const Index i = rng.uniform_int(d);
    Index j = rng.uniform_int(d - 1);
    if (j >= i) ++j;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const Eigen::VectorXd ci = out.col(i);
    const Eigen::VectorXd cj = out.col(j);
    out.col(i) = c * ci - s * cj;
    out.col(j) = s * ci + c * cj;
  }
  return out;
}

}  // namespace

void resolve_bases(SynthSpec& spec) {
  spec.validate();
  for (std::size_t i = 0; i < spec.domains.size(); ++i) {
    SynthDomainSpec& d = spec.domains[i];
    Rng rng(derive_seed(d.basis_seed, 0xba5e, i));
    if (d.related_to < 0) {
      d.basis = random_orthonormal_rows(spec.class_count, d.feature_dim, rng);
    } else {
      d.basis = rotated_basis(spec.domains[static_cast<std::size_t>(d.related_to)].basis,
                              d.related_angle, rng);
    }
  }
}

SynthSpec parse_synth_spec(const std::filesystem::path& path) {
  const KvFile kv = KvFile::parse_file(path);
  SynthSpec spec;
  spec.class_count = static_cast<int>(parse_int(kv.require("class_count")));
  spec.seed = static_cast<std::uint64_t>(parse_int(kv.get_or("seed", "0")));
  const int n_domains = static_cast<int>(parse_int(kv.require("domains")));
  if (n_domains < 1) throw ConfigError(path.string() + ": domains must be positive");
  for (int i = 0; i < n_domains; ++i) {
    const std::string p = "domain." + std::to_string(i) + ".";
    SynthDomainSpec d;
    d.id = kv.get_or(p + "id", "synth" + std::to_string(i));
    d.nodes = static_cast<int>(parse_int(kv.require(p + "nodes")));
    d.blocks = static_cast<int>(parse_int(kv.get_or(p + "blocks", std::to_string(spec.class_count))));
    d.p_intra = parse_double(kv.require(p + "p_intra"));
    d.p_inter = parse_double(kv.require(p + "p_inter"));
    d.feature_dim = static_cast<Index>(parse_int(kv.require(p + "feature_dim")));
    d.noise = parse_double(kv.get_or(p + "noise", "0"));
    d.basis_seed = static_cast<std::uint64_t>(
        parse_int(kv.get_or(p + "basis_seed", std::to_string(spec.seed + i))));
    if (kv.has(p + "related_to")) {
      d.related_to = static_cast<int>(parse_int(kv.require(p + "related_to")));
      d.related_angle = parse_double(kv.get_or(p + "related_angle", "0.1"));
    }
    spec.domains.push_back(std::move(d));
  }
  resolve_bases(spec);
  return spec;
}

DomainDataset generate_synthetic_domain(const SynthSpec& spec, int domain_index,
                                        std::uint64_t seed) {
  spec.validate();
  if (domain_index < 0 || static_cast<std::size_t>(domain_index) >= spec.domains.size()) {
    throw Error("generate_synthetic_domain: domain index out of range");
  }
  const SynthDomainSpec& d = spec.domains[static_cast<std::size_t>(domain_index)];
  if (d.basis.rows() != spec.class_count || d.basis.cols() != d.feature_dim) {
    throw Error("generate_synthetic_domain: basis not resolved for '" + d.id + "'");
  }
  Rng rng(derive_seed(seed, 0x5b3, static_cast<std::uint64_t>(domain_index)));

  const int n = d.nodes;
  const int c = spec.class_count;
  std::vector<int> labels(static_cast<std::size_t>(n));
  // Contiguous near-equal blocks; block id doubles as the class label.
  const int base = n / c;
  const int extra = n % c;
  int at = 0;
  for (int b = 0; b < c; ++b) {
    const int size = base + (b < extra ? 1 : 0);
    for (int i = 0; i < size; ++i) labels[static_cast<std::size_t>(at++)] = b;
  }

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]
                           ? d.p_intra
                           : d.p_inter;
      if (p >= 1.0 || (p > 0.0 && rng.uniform() < p)) edges.emplace_back(i, j);
    }
  }

  Matrix features(n, d.feature_dim);
  for (int i = 0; i < n; ++i) {
    features.row(i) = d.basis.row(labels[static_cast<std::size_t>(i)]);
    if (d.noise > 0.0) {
      for (Index j = 0; j < d.feature_dim; ++j) features(i, j) += d.noise * rng.gaussian();
    }
  }

  DomainDataset ds;
  ds.domain_id = d.id;
  ds.feature_dim = d.feature_dim;
  for (int b = 0; b < c; ++b) ds.label_names.push_back(std::to_string(b));
  ds.graphs.emplace_back(n, std::move(edges), std::move(features), std::move(labels));
  ds.validate();
  return ds;
}

void write_dataset_files(const DomainDataset& ds, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const Graph& g = ds.graphs.at(0);

  const auto nodes_name = ds.domain_id + ".nodes.tsv";
  const auto edges_name = ds.domain_id + ".edges.tsv";
  {
    std::ofstream out(out_dir / (ds.domain_id + ".manifest"), std::ios::binary);
    if (!out) throw Error("cannot write manifest for '" + ds.domain_id + "'");
    out << "domain_id = " << ds.domain_id << "\n";
    out << "nodes = " << nodes_name << "\n";
    out << "edges = " << edges_name << "\n";
    out << "directed = false\n";
  }
  {
    std::ofstream out(out_dir / nodes_name, std::ios::binary);
    if (!out) throw Error("cannot write nodes file for '" + ds.domain_id + "'");
    out << "node_id\tlabel\tfeatures\n";
    for (Index v = 0; v < g.node_count(); ++v) {
      const int y = g.label(v);
      out << "n" << v << "\t"
          << (y < 0 ? std::string("-") : ds.label_names[static_cast<std::size_t>(y)]) << "\t";
      for (Index j = 0; j < g.feature_dim(); ++j) {
        if (j) out << ",";
        out << format_double(g.features()(v, j));
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(out_dir / edges_name, std::ios::binary);
    if (!out) throw Error("cannot write edges file for '" + ds.domain_id + "'");
    out << "# src\tdst\n";
    for (const auto& [u, v] : g.edges()) out << "n" << u << "\tn" << v << "\n";
  }
}

// ---- reports ---------------------------------------------------------------

std::string report_to_string(const EvalReport& report) {
  std::ostringstream out;
  out << "task_id\tseed\taccuracy\n";
  for (const EvalRecord& r : report.records) {
    out << r.task_id << "\t" << r.seed << "\t" << format_double(r.accuracy) << "\n";
  }
  out << "mean=" << format_fixed(report.mean, 2) << " std=" << format_fixed(report.stddev, 2)
      << " n=" << report.records.size() << "\n";
  return out.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report: " + path.string());
  out << report_to_string(report);
}

namespace {

// Reads one TSV block (header, records, summary line) from `in`.
EvalReport parse_report_block(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "task_id\tseed\taccuracy") {
    throw Error(origin + ": expected report header 'task_id<TAB>seed<TAB>accuracy'");
  }
  std::vector<EvalRecord> records;
  std::vector<std::uint64_t> seeds;
  while (std::getline(in, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.rfind("mean=", 0) == 0) {
      int max_task = -1;
      for (const EvalRecord& r : records) max_task = std::max(max_task, r.task_id);
      return EvalReport::from_records(std::move(records), max_task + 1, std::move(seeds));
    }
    const auto cols = split(stripped, '\t');
    if (cols.size() != 3) throw Error(origin + ": malformed report row '" + stripped + "'");
    EvalRecord r;
    r.task_id = static_cast<int>(parse_int(cols[0]));
    r.seed = static_cast<std::uint64_t>(parse_int(cols[1]));
    r.accuracy = parse_double(cols[2]);
    if (seeds.empty() || seeds.back() != r.seed) seeds.push_back(r.seed);
    records.push_back(r);
  }
  throw Error(origin + ": report has no summary line");
}

}  // namespace

EvalReport parse_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report: " + path.string());
  return parse_report_block(in, path.string());
}

std::string ablation_to_string(std::span<const AblationRow> rows) {
  std::ostringstream out;
  for (const AblationRow& row : rows) {
    out << "row = " << row.label << "\n";
    for (const auto& [k, v] : row.attrs) out << k << " = " << v << "\n";
    out << report_to_string(row.report);
  }
  return out.str();
}

void write_ablation(std::span<const AblationRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write ablation table: " + path.string());
  out << ablation_to_string(rows);
}

std::vector<AblationRow> parse_ablation(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open ablation table: " + path.string());
  std::vector<AblationRow> rows;
  std::string line;
  while (in.peek() != EOF) {
    if (!std::getline(in, line)) break;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.rfind("row =", 0) != 0) {
      throw Error(path.string() + ": expected 'row = <label>', got '" + stripped + "'");
    }
    AblationRow row;
    row.label = trim(stripped.substr(5));
    // attribute lines until the TSV header
    while (in.peek() != EOF) {
      const auto pos = in.tellg();
      if (!std::getline(in, line)) break;
      const std::string s = trim(line);
      if (s == "task_id\tseed\taccuracy") {
        in.seekg(pos);
        break;
      }
      const std::size_t eq = s.find('=');
      if (eq == std::string::npos) throw Error(path.string() + ": malformed attribute '" + s + "'");
      row.attrs.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    row.report = parse_report_block(in, path.string());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> run_data_ablation(const std::vector<DomainDataset>& sources,
                                           const DomainDataset& target, TaskKind kind, int shots,
                                           const PretrainConfig& pre_cfg, const AdaptConfig& cfg,
                                           int n_tasks, std::span<const std::uint64_t> seeds,
                                           int threads) {
  if (sources.size() < 2) throw Error("data ablation: need at least two source domains");
  std::vector<AblationRow> rows;
  for (std::size_t k = 1; k <= sources.size(); ++k) {
    const std::vector<DomainDataset> prefix(sources.begin(),
                                            sources.begin() + static_cast<std::ptrdiff_t>(k));
    const PretrainResult pre = pretrain(prefix, pre_cfg);
    AblationRow row;
    row.label = "sources_" + std::to_string(k);
    row.attrs.emplace_back("source_count", std::to_string(k));
    row.report = evaluate(pre.bundle, target, kind, shots, n_tasks, seeds, cfg, threads);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AblationRow> run_model_ablation(const std::vector<DomainDataset>& sources,
                                            const DomainDataset& target, TaskKind kind, int shots,
                                            const PretrainConfig& pre_cfg, const AdaptConfig& cfg,
                                            int n_tasks, std::span<const std::uint64_t> seeds,
                                            int threads) {
  PretrainConfig with_tokens = pre_cfg;
  with_tokens.use_domain_tokens = true;
  PretrainConfig without_tokens = pre_cfg;
  without_tokens.use_domain_tokens = false;
  const PretrainedBundle tokened = pretrain(sources, with_tokens).bundle;
  const PretrainedBundle plain = pretrain(sources, without_tokens).bundle;

  struct VariantSpec {
    std::string label;
    bool domain_token;
    bool mixing;
    bool unifying;
  };
  const std::vector<VariantSpec> variants = {
      {"variant1", false, false, false}, {"variant2", false, false, true},
      {"variant3", true, false, false},  {"variant4", true, true, false},
      {"full", true, true, true},
  };

  std::vector<AblationRow> rows;
  for (const VariantSpec& v : variants) {
    AdaptConfig vcfg = cfg;
    vcfg.use_mixing_prompt = v.mixing;
    vcfg.use_unifying_prompt = v.unifying;
    AblationRow row;
    row.label = v.label;
    row.attrs.emplace_back("domain_token", v.domain_token ? "true" : "false");
    row.attrs.emplace_back("mixing_prompt", v.mixing ? "true" : "false");
    row.attrs.emplace_back("unifying_prompt", v.unifying ? "true" : "false");
    row.report = evaluate(v.domain_token ? tokened : plain, target, kind, shots, n_tasks, seeds,
                          vcfg, threads);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(const std::string& x_name,
                     std::span<const std::pair<double, EvalReport>> points,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write sweep csv: " + path.string());
  out << x_name << ",mean,std\n";
  for (const auto& [x, report] : points) {
    out << format_double(x) << "," << format_fixed(report.mean, 2) << ","
        << format_fixed(report.stddev, 2) << "\n";
  }
}

}  // namespace mdg
