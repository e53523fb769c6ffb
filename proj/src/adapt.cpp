#include "mdg/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mdg {

TaskKind parse_task_kind(const std::string& s) {
  if (s == "node") return TaskKind::node;
  if (s == "graph") return TaskKind::graph;
  throw ConfigError("unknown task kind '" + s + "' (expected node or graph)");
}

std::string to_string(TaskKind kind) { return kind == TaskKind::node ? "node" : "graph"; }

void LabeledSet::validate() const {
  const std::size_t n = labels.size();
  if (kind == TaskKind::node) {
    if (nodes.size() != n || !graphs.empty()) throw Error("labeled set: bad node-task shape");
  } else {
    if (graphs.size() != n || !nodes.empty()) throw Error("labeled set: bad graph-task shape");
  }
  if (num_classes < 1) throw Error("labeled set: no classes");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error("labeled set: label out of range");
  }
}

void LabeledSet::validate_shots(int m) const {
  validate();
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] != m) {
      throw Error("labeled set: class " + std::to_string(c) + " has " +
                  std::to_string(counts[static_cast<std::size_t>(c)]) + " instances, expected " +
                  std::to_string(m));
    }
  }
}

Index DualPrompts::tunable_parameter_count() const {
  Index n = 0;
  if (has_unifying()) n += unifying.size();
  if (has_mixing()) n += mixing_weights.size();
  return n;
}

DualPrompts init_prompts(const PretrainedBundle& bundle, const AdaptConfig& cfg, Tape& tape) {
  DualPrompts p;
  if (cfg.use_unifying_prompt) {
    p.unifying = tape.parameter(Matrix::Ones(1, bundle.config.unified_dim));
  }
  if (cfg.use_mixing_prompt) {
    if (bundle.tokens.empty()) {
      throw ConfigError("mixing prompt requires a bundle pre-trained with domain tokens");
    }
    const Index k = bundle.tokens.size();
    p.mixing_weights =
        tape.parameter(Matrix::Constant(1, k, 1.0 / static_cast<double>(k)));
  }
  return p;
}

Matrix token_stack(const DomainTokens& tokens) {
  if (tokens.empty()) throw Error("token_stack: no tokens");
  Matrix t(tokens.size(), tokens.tokens[0].cols());
  for (Index i = 0; i < tokens.size(); ++i) {
    t.row(i) = tokens.tokens[static_cast<std::size_t>(i)].value().row(0);
  }
  return t;
}

Tensor mixing_prompt(const Tensor& mixing_weights, const Matrix& tokens) {
  if (mixing_weights.rows() != 1 || mixing_weights.cols() != tokens.rows()) {
    throw Error("mixing_prompt: weight count does not match token count");
  }
  return matmul(mixing_weights, Tensor{tokens});
}

Tensor prompted_encode(const Matrix& adj_hat, const Matrix& aligned_features,
                       const DualPrompts& prompts, const PretrainedBundle& bundle) {
  if (!bundle.frozen()) throw Error("prompted_encode: bundle is not frozen");
  if (aligned_features.cols() != bundle.config.unified_dim) {
    throw Error("prompted_encode: features are not aligned to the unified dimension");
  }
  const Tensor features{aligned_features};
  std::vector<Tensor> branches;
  if (prompts.has_unifying()) {
    branches.push_back(encode(adj_hat, elementwise_mul(prompts.unifying, features), bundle.gcn));
  }
  if (prompts.has_mixing()) {
    Tensor mix = mixing_prompt(prompts.mixing_weights, token_stack(bundle.tokens));
    branches.push_back(encode(adj_hat, elementwise_mul(mix, features), bundle.gcn));
  }
  if (branches.empty()) return encode(adj_hat, features, bundle.gcn);
  if (branches.size() == 1) return branches[0];
  return add(branches[0], branches[1]);
}

Tensor prompted_encode(const Graph& g, const Matrix& aligned_features,
                       const DualPrompts& prompts, const PretrainedBundle& bundle) {
  return prompted_encode(normalized_adjacency(g), aligned_features, prompts, bundle);
}

Tensor build_prototypes(const Tensor& embeddings, const std::vector<int>& rows,
                        const std::vector<int>& labels, int num_classes) {
  if (rows.size() != labels.size()) throw Error("build_prototypes: row/label size mismatch");
  if (rows.empty()) throw Error("build_prototypes: empty support");
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw Error("build_prototypes: bad label");
    if (rows[i] < 0 || rows[i] >= embeddings.rows()) throw Error("build_prototypes: bad row");
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw Error("build_prototypes: class " + std::to_string(c) + " has no support instances");
    }
  }
  Matrix mean_selector = Matrix::Zero(num_classes, embeddings.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    mean_selector(labels[i], rows[i]) +=
        1.0 / static_cast<double>(counts[static_cast<std::size_t>(labels[i])]);
  }
  return matmul(Tensor{std::move(mean_selector)}, embeddings);
}

Tensor downstream_loss(const Tensor& embeddings, const std::vector<int>& rows,
                       const std::vector<int>& labels, const Tensor& prototypes,
                       double temperature) {
  if (rows.empty()) throw Error("downstream_loss: empty instance list");
  if (rows.size() != labels.size()) throw Error("downstream_loss: row/label size mismatch");
  std::vector<int> all_classes(static_cast<std::size_t>(prototypes.rows()));
  for (int c = 0; c < prototypes.rows(); ++c) all_classes[static_cast<std::size_t>(c)] = c;
  std::vector<Tensor> terms;
  terms.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Tensor sims = cosine_rows(embeddings, rows[i], prototypes, all_classes);
    terms.push_back(class_nll(sims, labels[i], temperature));
  }
  return add_all(terms);
}

int classify(const Matrix& embedding, const Matrix& prototypes) {
  if (prototypes.rows() == 0) throw Error("classify: no prototypes");
  if (embedding.rows() != 1 || embedding.cols() != prototypes.cols()) {
    throw Error("classify: embedding/prototype shape mismatch");
  }
  int best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  const double en = embedding.row(0).norm();
  for (Index c = 0; c < prototypes.rows(); ++c) {
    const double pn = prototypes.row(c).norm();
    const double sim =
        (en == 0.0 || pn == 0.0) ? 0.0 : embedding.row(0).dot(prototypes.row(c)) / (en * pn);
    if (sim > best_sim) {  // strict: ties keep the lowest class index
      best_sim = sim;
      best = static_cast<int>(c);
    }
  }
  return best;
}

TargetContext make_target_context(const DomainDataset& target, const PretrainedBundle& bundle) {
  if (target.graphs.empty()) throw Error("target dataset '" + target.domain_id + "' is empty");
  TargetContext ctx;
  ctx.dataset = &target;
  ctx.aligner = fit_aligner(target, bundle.config.unified_dim);
  ctx.adj_hat = normalized_adjacency(target.graphs[0]);
  ctx.aligned_features = apply_aligner(ctx.aligner, target.graphs[0].features());
  return ctx;
}

namespace {

// Per-instance inputs for a graph task, computed once per episode.
struct EgoInputs {
  std::vector<Matrix> adj;
  std::vector<Matrix> features;
};

EgoInputs prepare_ego_inputs(const LabeledSet& set, const TargetContext& ctx) {
  EgoInputs in;
  in.adj.reserve(set.graphs.size());
  in.features.reserve(set.graphs.size());
  for (const EgoNetwork& ego : set.graphs) {
    in.adj.push_back(normalized_adjacency(ego.graph));
    in.features.push_back(apply_aligner(ctx.aligner, ego.graph.features()));
  }
  return in;
}

// Embeddings of every instance in the set: node tasks return the full target
// matrix with `rows` selecting instances; graph tasks return stacked readouts.
Tensor embed_instances(const LabeledSet& set, const EgoInputs& egos, const TargetContext& ctx,
                       const DualPrompts& prompts, const PretrainedBundle& bundle,
                       std::vector<int>& rows) {
  if (set.kind == TaskKind::node) {
    rows = set.nodes;
    return prompted_encode(ctx.adj_hat, ctx.aligned_features, prompts, bundle);
  }
  std::vector<Tensor> readouts;
  readouts.reserve(set.graphs.size());
  for (std::size_t i = 0; i < set.graphs.size(); ++i) {
    readouts.push_back(readout(prompted_encode(egos.adj[i], egos.features[i], prompts, bundle)));
  }
  rows.resize(set.graphs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return vstack(readouts);
}

DualPrompts frozen_copy(const DualPrompts& prompts) {
  DualPrompts out;
  if (prompts.has_unifying()) out.unifying = Tensor{prompts.unifying.value()};
  if (prompts.has_mixing()) out.mixing_weights = Tensor{prompts.mixing_weights.value()};
  return out;
}

}  // namespace

DualPrompts tune_prompts(const LabeledSet& support, const TargetContext& target,
                         const PretrainedBundle& bundle, const AdaptConfig& cfg) {
  support.validate();
  if (!bundle.frozen()) throw Error("tune_prompts: bundle is not frozen");

  Tape tape;
  DualPrompts prompts = init_prompts(bundle, cfg, tape);
  if (cfg.steps <= 0 || prompts.tunable_parameter_count() == 0) return prompts;

  std::vector<Tensor> learnable;
  if (prompts.has_unifying()) learnable.push_back(prompts.unifying);
  if (prompts.has_mixing()) learnable.push_back(prompts.mixing_weights);
  AdamState adam(learnable, AdamConfig{.learning_rate = cfg.learning_rate});

  const EgoInputs egos =
      support.kind == TaskKind::graph ? prepare_ego_inputs(support, target) : EgoInputs{};
  std::vector<int> rows;
  for (int step = 0; step < cfg.steps; ++step) {
    tape.clear();
    Tensor embeddings = embed_instances(support, egos, target, prompts, bundle, rows);
    Tensor prototypes = build_prototypes(embeddings, rows, support.labels, support.num_classes);
    Tensor loss =
        downstream_loss(embeddings, rows, support.labels, prototypes, cfg.temperature);
    if (!std::isfinite(loss.value()(0, 0))) {
      throw Error("tune_prompts: non-finite loss at step " + std::to_string(step));
    }
    tape.backward(loss);
    adam.step();
  }
  return prompts;
}

std::vector<int> classify_queries(const LabeledSet& support, const LabeledSet& query,
                                  const DualPrompts& prompts, const TargetContext& target,
                                  const PretrainedBundle& bundle) {
  support.validate();
  query.validate();
  if (query.kind != support.kind) throw Error("classify_queries: kind mismatch");

  const DualPrompts frozen = frozen_copy(prompts);
  const EgoInputs support_egos =
      support.kind == TaskKind::graph ? prepare_ego_inputs(support, target) : EgoInputs{};
  std::vector<int> support_rows;
  Tensor support_embeddings =
      embed_instances(support, support_egos, target, frozen, bundle, support_rows);
  Tensor prototypes =
      build_prototypes(support_embeddings, support_rows, support.labels, support.num_classes);
  const Matrix& protos = prototypes.value();

  std::vector<int> predictions;
  predictions.reserve(query.size());
  if (query.kind == TaskKind::node) {
    // Node queries reuse the same full-graph embedding matrix.
    const Matrix& h = support_embeddings.value();
    for (int v : query.nodes) predictions.push_back(classify(h.row(v), protos));
  } else {
    const EgoInputs query_egos = prepare_ego_inputs(query, target);
    for (std::size_t i = 0; i < query.graphs.size(); ++i) {
      Tensor e = readout(
          prompted_encode(query_egos.adj[i], query_egos.features[i], frozen, bundle));
      predictions.push_back(classify(e.value(), protos));
    }
  }
  return predictions;
}

std::string prompts_to_string(const DualPrompts& prompts) {
  std::ostringstream out;
  out << "version = 1\n";
  auto write_array = [&out](const std::string& name, const Matrix& m) {
    out << "array " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        if (j) out << " ";
        out << format_double(m(i, j));
      }
      out << "\n";
    }
  };
  if (prompts.has_unifying()) write_array("p_uni", prompts.unifying.value());
  if (prompts.has_mixing()) write_array("gamma", prompts.mixing_weights.value());
  return out.str();
}

void save_prompts(const DualPrompts& prompts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write prompts: " + path.string());
  out << prompts_to_string(prompts);
}

}  // namespace mdg
