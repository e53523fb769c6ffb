#include "mdg/pretrain.hpp"

#include "mdg/kv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <map>
#include <unordered_set>

namespace mdg {

namespace {

// Negatives without replacement from the anchor's non-neighbor pool. The pool
// is enumerated when small, rejection-sampled otherwise.
std::vector<int> draw_negatives(const Graph& g, int anchor, int count, Rng& rng) {
  const Index n = g.node_count();
  const auto& nbrs = g.neighbors(anchor);
  const Index pool = n - 1 - static_cast<Index>(nbrs.size());
  if (pool < count) return {};

  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  if (pool <= 2 * static_cast<Index>(count)) {
    std::vector<int> candidates;
    candidates.reserve(static_cast<std::size_t>(pool));
    for (int v = 0; v < n; ++v) {
      if (v == anchor || g.has_edge(anchor, v)) continue;
      candidates.push_back(v);
    }
    for (int i = 0; i < count; ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(candidates.size())));
      out.push_back(candidates[j]);
      candidates[j] = candidates.back();
      candidates.pop_back();
    }
  } else {
    std::unordered_set<int> seen;
    while (static_cast<int>(out.size()) < count) {
      const int v = static_cast<int>(rng.uniform_int(n));
      if (v == anchor || g.has_edge(anchor, v) || seen.count(v)) continue;
      seen.insert(v);
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace

TripletSet sample_triplets(const std::vector<DomainDataset>& datasets, int negatives,
                           int count_per_domain, std::uint64_t seed) {
  if (negatives < 1) throw Error("sample_triplets: negatives must be positive");
  if (count_per_domain < 1) throw Error("sample_triplets: count must be positive");
  for (const DomainDataset& ds : datasets) {
    for (const Graph& g : ds.graphs) {
      if (g.edges().empty()) {
        throw Error("sample_triplets: domain '" + ds.domain_id + "' has a graph with no edges");
      }
      if (g.node_count() < negatives + 2) {
        throw Error("sample_triplets: domain '" + ds.domain_id +
                    "' has a graph with fewer than negatives+2 nodes");
      }
    }
  }

  TripletSet ts;
  ts.seed = seed;
  ts.negatives_per_triplet = negatives;
  ts.triplets.reserve(datasets.size() * static_cast<std::size_t>(count_per_domain));
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const DomainDataset& ds = datasets[d];
    Rng rng(derive_seed(seed, d));
    std::vector<Index> edge_offsets{0};
    for (const Graph& g : ds.graphs) {
      edge_offsets.push_back(edge_offsets.back() + static_cast<Index>(g.edges().size()));
    }
    const Index total_edges = edge_offsets.back();

    for (int t = 0; t < count_per_domain; ++t) {
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        const Index e = rng.uniform_int(total_edges);
        std::size_t gi = 0;
        while (e >= edge_offsets[gi + 1]) ++gi;
        const Graph& g = ds.graphs[gi];
        auto [u, v] = g.edges()[static_cast<std::size_t>(e - edge_offsets[gi])];
        if (rng.uniform_int(2) == 1) std::swap(u, v);
        std::vector<int> negs = draw_negatives(g, u, negatives, rng);
        if (negs.empty()) continue;  // non-neighbor pool too small for this anchor
        ts.triplets.push_back(Triplet{static_cast<int>(d), static_cast<int>(gi), u, v,
                                      std::move(negs)});
        placed = true;
      }
      if (!placed) {
        throw Error("sample_triplets: no anchor with " + std::to_string(negatives) +
                    " non-neighbors found in domain '" + ds.domain_id + "' after 100 attempts");
      }
    }
  }
  return ts;
}

const DimensionAligner& PretrainedBundle::aligner(const std::string& domain_id) const {
  for (const DimensionAligner& a : aligners) {
    if (a.domain_id == domain_id) return a;
  }
  throw Error("bundle has no aligner for domain '" + domain_id + "'");
}

bool PretrainedBundle::frozen() const {
  if (!gcn.frozen()) return false;
  for (const Tensor& t : tokens.tokens) {
    if (t.requires_grad()) return false;
  }
  return true;
}

void PretrainedBundle::freeze() {
  for (Tensor& w : gcn.weights) w.freeze();
  for (Tensor& t : tokens.tokens) t.freeze();
}

void PretrainedBundle::validate() const {
  if (!tokens.empty()) {
    if (tokens.domain_ids.size() != aligners.size()) {
      throw Error("bundle: token count does not match aligner count");
    }
    for (std::size_t i = 0; i < aligners.size(); ++i) {
      if (tokens.domain_ids[i] != aligners[i].domain_id) {
        throw Error("bundle: token/aligner domain order mismatch");
      }
      if (tokens.tokens[i].cols() != config.unified_dim) {
        throw Error("bundle: token length does not match unified_dim");
      }
    }
  }
  for (const DimensionAligner& a : aligners) {
    if (a.unified_dim != config.unified_dim) {
      throw Error("bundle: aligner unified_dim mismatch for '" + a.domain_id + "'");
    }
  }
  if (gcn.input_dim != config.unified_dim || gcn.hidden_dim != config.hidden_dim ||
      gcn.layers != config.layers) {
    throw Error("bundle: encoder shape does not match config echo");
  }
}

Tensor link_prediction_loss(const Tensor& embeddings, std::span<const Triplet> triplets,
                            double temperature, bool include_positive_in_denominator) {
  if (triplets.empty()) throw Error("link_prediction_loss: empty triplet list");
  if (temperature <= 0.0) throw Error("link_prediction_loss: temperature must be positive");
  std::vector<Tensor> terms;
  terms.reserve(triplets.size());
  std::vector<int> rows;
  for (const Triplet& t : triplets) {
    rows.clear();
    rows.push_back(t.positive);
    rows.insert(rows.end(), t.negatives.begin(), t.negatives.end());
    Tensor sims = cosine_rows(embeddings, t.anchor, embeddings, rows);
    terms.push_back(link_nll(sims, temperature, include_positive_in_denominator));
  }
  return add_all(terms);
}

namespace {

// Embeds every referenced graph once, then accumulates per-triplet terms in
// the order the set lists them.
Tensor loss_over_graphs(const std::vector<DomainDataset>& datasets,
                        const std::vector<std::vector<Matrix>>& aligned,
                        const std::vector<std::vector<Matrix>>& adj,
                        const DomainTokens& tokens, const GcnParams& gcn,
                        const TripletSet& ts, double temperature, bool include_positive) {
  if (ts.triplets.empty()) throw Error("pretrain_loss: empty triplet set");
  if (temperature <= 0.0) throw Error("pretrain_loss: temperature must be positive");

  std::vector<std::vector<Tensor>> embeddings(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    embeddings[d].resize(datasets[d].graphs.size());
  }
  auto embed = [&](int d, int g) -> const Tensor& {
    Tensor& slot = embeddings[static_cast<std::size_t>(d)][static_cast<std::size_t>(g)];
    if (!slot.defined()) {
      Tensor x{aligned[static_cast<std::size_t>(d)][static_cast<std::size_t>(g)]};
      if (!tokens.empty()) x = unify(tokens.at(datasets[static_cast<std::size_t>(d)].domain_id), x);
      slot = encode(adj[static_cast<std::size_t>(d)][static_cast<std::size_t>(g)], x, gcn);
    }
    return slot;
  };

  std::vector<Tensor> terms;
  terms.reserve(ts.triplets.size());
  std::vector<int> rows;
  for (const Triplet& t : ts.triplets) {
    const Tensor& h = embed(t.dataset, t.graph);
    rows.clear();
    rows.push_back(t.positive);
    rows.insert(rows.end(), t.negatives.begin(), t.negatives.end());
    Tensor sims = cosine_rows(h, t.anchor, h, rows);
    terms.push_back(link_nll(sims, temperature, include_positive));
  }
  return add_all(terms);
}

}  // namespace

Tensor pretrain_loss(const std::vector<DomainDataset>& datasets,
                     const std::vector<DimensionAligner>& aligners,
                     const DomainTokens& tokens, const GcnParams& gcn,
                     const TripletSet& triplets, double temperature,
                     bool include_positive_in_denominator) {
  if (aligners.size() != datasets.size()) {
    throw Error("pretrain_loss: aligner count does not match dataset count");
  }
  std::vector<std::vector<Matrix>> aligned(datasets.size());
  std::vector<std::vector<Matrix>> adj(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (const Graph& g : datasets[d].graphs) {
      aligned[d].push_back(apply_aligner(aligners[d], g.features()));
      adj[d].push_back(normalized_adjacency(g));
    }
  }
  return loss_over_graphs(datasets, aligned, adj, tokens, gcn, triplets, temperature,
                          include_positive_in_denominator);
}

PretrainResult pretrain(const std::vector<DomainDataset>& datasets, const PretrainConfig& cfg) {
  if (datasets.empty()) throw Error("pretrain: need at least one source domain");
  {
    std::unordered_set<std::string> ids;
    for (const DomainDataset& ds : datasets) {
      if (!ids.insert(ds.domain_id).second) {
        throw Error("pretrain: duplicate domain id '" + ds.domain_id + "'");
      }
    }
  }
  if (cfg.epochs < 0 || cfg.negatives < 1 || cfg.triplets_per_domain < 1 ||
      cfg.temperature <= 0.0) {
    throw Error("pretrain: invalid configuration");
  }

  std::vector<DimensionAligner> aligners;
  aligners.reserve(datasets.size());
  std::vector<std::string> ids;
  for (const DomainDataset& ds : datasets) {
    aligners.push_back(fit_aligner(ds, cfg.unified_dim));
    ids.push_back(ds.domain_id);
  }

  // Aligned features and propagation matrices are constants across epochs.
  std::vector<std::vector<Matrix>> aligned(datasets.size());
  std::vector<std::vector<Matrix>> adj(datasets.size());
  Index smallest_edge_total = std::numeric_limits<Index>::max();
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    Index edge_total = 0;
    for (const Graph& g : datasets[d].graphs) {
      aligned[d].push_back(apply_aligner(aligners[d], g.features()));
      adj[d].push_back(normalized_adjacency(g));
      edge_total += static_cast<Index>(g.edges().size());
    }
    smallest_edge_total = std::min(smallest_edge_total, edge_total);
  }
  const int count_per_domain =
      static_cast<int>(std::min<Index>(cfg.triplets_per_domain, smallest_edge_total));

  Tape tape;
  DomainTokens tokens;
  if (cfg.use_domain_tokens) tokens = init_tokens(ids, cfg.unified_dim, tape);
  GcnParams gcn = init_params(cfg.unified_dim, cfg.hidden_dim, cfg.layers,
                              derive_seed(cfg.seed, 0x1917), tape);

  std::vector<Tensor> learnable = gcn.weights;
  learnable.insert(learnable.end(), tokens.tokens.begin(), tokens.tokens.end());
  AdamState adam(learnable, AdamConfig{.learning_rate = cfg.learning_rate});

  PretrainResult result;
  result.epoch_losses.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    tape.clear();
    const TripletSet ts = sample_triplets(datasets, cfg.negatives, count_per_domain,
                                          derive_seed(cfg.seed, 0x7f1, epoch));
    Tensor loss = loss_over_graphs(datasets, aligned, adj, tokens, gcn, ts, cfg.temperature,
                                   cfg.include_positive_in_denominator);
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw Error("pretrain: non-finite loss at epoch " + std::to_string(epoch));
    }
    result.epoch_losses.push_back(value);
    tape.backward(loss);
    adam.step();
  }

  {
    tape.clear();
    const TripletSet ts = sample_triplets(datasets, cfg.negatives, count_per_domain,
                                          derive_seed(cfg.seed, 0x7f1, cfg.epochs));
    Tensor loss = loss_over_graphs(datasets, aligned, adj, tokens, gcn, ts, cfg.temperature,
                                   cfg.include_positive_in_denominator);
    result.final_loss = loss.value()(0, 0);
    tape.clear();
  }

  result.bundle.gcn = std::move(gcn);
  result.bundle.tokens = std::move(tokens);
  result.bundle.aligners = std::move(aligners);
  result.bundle.config = cfg;
  result.bundle.freeze();
  result.bundle.validate();
  return result;
}

// ---- checkpoint ---------------------------------------------------------

namespace {

void write_array(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "array " << name << " " << m.rows() << " " << m.cols() << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << " ";
      out << format_double(m(i, j));
    }
    out << "\n";
  }
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string checkpoint_to_string(const PretrainedBundle& bundle) {
  bundle.validate();
  const PretrainConfig& c = bundle.config;
  std::ostringstream out;
  out << "version = 1\n";
  out << "unified_dim = " << c.unified_dim << "\n";
  out << "hidden_dim = " << c.hidden_dim << "\n";
  out << "layers = " << c.layers << "\n";
  out << "temperature = " << format_double(c.temperature) << "\n";
  out << "negatives = " << c.negatives << "\n";
  out << "triplets_per_domain = " << c.triplets_per_domain << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "learning_rate = " << format_double(c.learning_rate) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "use_domain_tokens = " << (c.use_domain_tokens ? "true" : "false") << "\n";
  out << "include_positive_in_denominator = "
      << (c.include_positive_in_denominator ? "true" : "false") << "\n";
  std::vector<std::string> ids;
  for (const DimensionAligner& a : bundle.aligners) ids.push_back(a.domain_id);
  out << "domains = " << join(ids, ',') << "\n";
  for (std::size_t i = 0; i < bundle.aligners.size(); ++i) {
    write_array(out, "projection:" + ids[i], bundle.aligners[i].projection);
    if (!bundle.tokens.empty()) {
      write_array(out, "token:" + ids[i], bundle.tokens.tokens[i].value());
    }
  }
  for (int l = 0; l < bundle.gcn.layers; ++l) {
    write_array(out, "gcn.W" + std::to_string(l + 1),
                bundle.gcn.weights[static_cast<std::size_t>(l)].value());
  }
  return out.str();
}

void save_checkpoint(const PretrainedBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out << checkpoint_to_string(bundle);
  if (!out) throw Error("failed writing checkpoint: " + path.string());
}

PretrainedBundle checkpoint_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> header;
  std::map<std::string, Matrix> arrays;
  std::vector<std::string> array_order;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    if (stripped.rfind("array ", 0) == 0) {
      std::istringstream head(stripped.substr(6));
      std::string name;
      Index rows = 0, cols = 0;
      if (!(head >> name >> rows >> cols) || rows < 0 || cols < 1) {
        throw Error("checkpoint:" + std::to_string(line_no) + ": malformed array header");
      }
      Matrix m(rows, cols);
      for (Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) {
          throw Error("checkpoint: truncated array '" + name + "'");
        }
        ++line_no;
        const auto parts = split(trim(line), ' ');
        if (static_cast<Index>(parts.size()) != cols) {
          throw Error("checkpoint:" + std::to_string(line_no) + ": expected " +
                      std::to_string(cols) + " values");
        }
        for (Index j = 0; j < cols; ++j) {
          m(i, j) = parse_double(parts[static_cast<std::size_t>(j)]);
        }
      }
      if (arrays.count(name)) throw Error("checkpoint: duplicate array '" + name + "'");
      arrays.emplace(name, std::move(m));
      array_order.push_back(name);
    } else {
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw Error("checkpoint:" + std::to_string(line_no) + ": expected 'key = value'");
      }
      header.emplace_back(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
  }

  auto get = [&](const std::string& key) -> const std::string& {
    for (const auto& [k, v] : header) {
      if (k == key) return v;
    }
    throw Error("checkpoint: missing key '" + key + "'");
  };
  if (get("version") != "1") throw Error("checkpoint: unsupported version " + get("version"));

  PretrainConfig cfg;
  cfg.unified_dim = static_cast<Index>(parse_int(get("unified_dim")));
  cfg.hidden_dim = static_cast<Index>(parse_int(get("hidden_dim")));
  cfg.layers = static_cast<int>(parse_int(get("layers")));
  cfg.temperature = parse_double(get("temperature"));
  cfg.negatives = static_cast<int>(parse_int(get("negatives")));
  cfg.triplets_per_domain = static_cast<int>(parse_int(get("triplets_per_domain")));
  cfg.epochs = static_cast<int>(parse_int(get("epochs")));
  cfg.learning_rate = parse_double(get("learning_rate"));
  cfg.seed = static_cast<std::uint64_t>(parse_int(get("seed")));
  cfg.use_domain_tokens = parse_bool(get("use_domain_tokens"));
  cfg.include_positive_in_denominator = parse_bool(get("include_positive_in_denominator"));

  PretrainedBundle bundle;
  bundle.config = cfg;
  auto take = [&](const std::string& name) -> Matrix {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw Error("checkpoint: missing array '" + name + "'");
    return it->second;
  };
  for (const std::string& id : split(get("domains"), ',')) {
    DimensionAligner a;
    a.domain_id = id;
    a.projection = take("projection:" + id);
    a.source_dim = a.projection.rows();
    a.unified_dim = a.projection.cols();
    bundle.aligners.push_back(std::move(a));
    if (cfg.use_domain_tokens) {
      bundle.tokens.domain_ids.push_back(id);
      bundle.tokens.tokens.emplace_back(take("token:" + id));
    }
  }
  bundle.gcn.input_dim = cfg.unified_dim;
  bundle.gcn.hidden_dim = cfg.hidden_dim;
  bundle.gcn.layers = cfg.layers;
  for (int l = 0; l < cfg.layers; ++l) {
    bundle.gcn.weights.emplace_back(take("gcn.W" + std::to_string(l + 1)));
  }
  bundle.validate();
  return bundle;
}

PretrainedBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace mdg
