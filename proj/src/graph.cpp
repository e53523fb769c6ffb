#include "mdg/graph.hpp"

#include "mdg/kv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <iostream>
#include <unordered_map>

namespace mdg {

namespace {

bool valid_domain_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

Graph::Graph(Index node_count, std::vector<std::pair<int, int>> edges, Matrix features,
             std::vector<int> labels)
    : node_count_(node_count), features_(std::move(features)), labels_(std::move(labels)) {
  if (node_count_ < 0) throw Error("graph: negative node count");
  if (features_.rows() != node_count_) {
    throw Error("graph: feature rows (" + std::to_string(features_.rows()) +
                ") do not match node count (" + std::to_string(node_count_) + ")");
  }
  if (!labels_.empty() && static_cast<Index>(labels_.size()) != node_count_) {
    throw Error("graph: label count does not match node count");
  }
  for (auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= node_count_ || v >= node_count_) {
      throw Error("graph: edge endpoint out of range: (" + std::to_string(u) + ", " +
                  std::to_string(v) + ")");
    }
    if (u == v) throw Error("graph: self-loop on node " + std::to_string(u));
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  adjacency_.assign(static_cast<std::size_t>(node_count_), {});
  for (const auto& [u, v] : edges_) {
    adjacency_[static_cast<std::size_t>(u)].push_back(v);
    adjacency_[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

const std::vector<int>& Graph::neighbors(int v) const {
  if (v < 0 || v >= node_count_) throw Error("graph: node out of range");
  return adjacency_[static_cast<std::size_t>(v)];
}

bool Graph::has_edge(int u, int v) const {
  const auto& nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

void DomainDataset::validate() const {
  if (!valid_domain_id(domain_id)) {
    throw Error("dataset: invalid domain_id '" + domain_id + "'");
  }
  for (const Graph& g : graphs) {
    if (g.feature_dim() != feature_dim) {
      throw Error("dataset " + domain_id + ": graph feature dim " +
                  std::to_string(g.feature_dim()) + " != declared " +
                  std::to_string(feature_dim));
    }
    for (int y : g.labels()) {
      if (y < -1 || y >= num_classes()) {
        throw Error("dataset " + domain_id + ": label index out of range");
      }
    }
  }
}

namespace {

struct NodesFile {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Matrix features;
  std::vector<std::string> label_names;
  std::unordered_map<std::string, int> id_to_index;
};

NodesFile read_nodes_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open nodes file: " + path.string());
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty nodes file");
  ++line_no;
  if (trim(line) != "node_id\tlabel\tfeatures") {
    throw Error(path.string() + ":1: expected header 'node_id<TAB>label<TAB>features'");
  }

  NodesFile nf;
  std::unordered_map<std::string, int> label_index;
  std::vector<std::vector<double>> rows;
  Index dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split(line, '\t');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 3) throw Error(where + ": expected 3 tab-separated columns");
    const std::string id = trim(cols[0]);
    if (id.empty()) throw Error(where + ": empty node id");
    if (nf.id_to_index.count(id)) throw Error(where + ": duplicate node id '" + id + "'");
    nf.id_to_index.emplace(id, static_cast<int>(nf.ids.size()));
    nf.ids.push_back(id);

    const std::string label = trim(cols[1]);
    if (label == "-") {
      nf.labels.push_back(-1);
    } else {
      auto [it, inserted] = label_index.try_emplace(label, static_cast<int>(nf.label_names.size()));
      if (inserted) nf.label_names.push_back(label);
      nf.labels.push_back(it->second);
    }

    std::vector<double> feat;
    for (const std::string& f : split(cols[2], ',')) {
      try {
        feat.push_back(parse_double(trim(f)));
      } catch (const Error&) {
        throw Error(where + ": malformed feature value '" + trim(f) + "'");
      }
    }
    if (dim < 0) {
      dim = static_cast<Index>(feat.size());
      if (dim == 0) throw Error(where + ": empty feature list");
    } else if (static_cast<Index>(feat.size()) != dim) {
      throw Error(where + ": row has " + std::to_string(feat.size()) +
                  " features, expected " + std::to_string(dim));
    }
    rows.push_back(std::move(feat));
  }
  if (rows.empty()) throw Error(path.string() + ": no node rows");

  nf.features.resize(static_cast<Index>(rows.size()), dim);
  for (Index i = 0; i < nf.features.rows(); ++i) {
    for (Index j = 0; j < dim; ++j) {
      nf.features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return nf;
}

std::vector<std::pair<int, int>> read_edges_file(const std::filesystem::path& path,
                                                 const NodesFile& nodes) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edges file: " + path.string());
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto cols = split(stripped, '\t');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 2) throw Error(where + ": expected 'src<TAB>dst'");
    auto lookup = [&](const std::string& raw) {
      const std::string id = trim(raw);
      auto it = nodes.id_to_index.find(id);
      if (it == nodes.id_to_index.end()) {
        throw Error(where + ": unknown node id '" + id + "'");
      }
      return it->second;
    };
    const int u = lookup(cols[0]);
    const int v = lookup(cols[1]);
    if (u == v) {
      std::cerr << "warning: " << where << ": dropping self-loop on '" << trim(cols[0])
                << "'\n";
      continue;
    }
    edges.emplace_back(u, v);
  }
  return edges;
}

}  // namespace

DomainDataset load_dataset(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path)) {
    throw Error("manifest not found: " + manifest_path.string());
  }
  const KvFile manifest = KvFile::parse_file(manifest_path);
  // a broken data file is a pipeline error, not a configuration error
  auto required = [&](const std::string& key) -> const std::string& {
    try {
      return manifest.require(key);
    } catch (const ConfigError& e) {
      throw Error(e.what());
    }
  };
  const std::string domain_id = required("domain_id");
  if (!valid_domain_id(domain_id)) {
    throw Error(manifest_path.string() + ": domain_id may only contain [A-Za-z0-9_.-]");
  }
  if (manifest.has("directed") && parse_bool(required("directed"))) {
    throw Error(manifest_path.string() + ": directed graphs are not supported");
  }
  const auto base = manifest_path.parent_path();
  const auto nodes_path = base / required("nodes");
  const auto edges_path = base / required("edges");

  NodesFile nodes = read_nodes_file(nodes_path);
  if (manifest.has("feature_dim")) {
    const Index declared = static_cast<Index>(parse_int(manifest.require("feature_dim")));
    if (declared != nodes.features.cols()) {
      throw Error(manifest_path.string() + ": feature_dim " + std::to_string(declared) +
                  " does not match nodes file (" + std::to_string(nodes.features.cols()) + ")");
    }
  }
  auto edges = read_edges_file(edges_path, nodes);

  DomainDataset ds;
  ds.domain_id = domain_id;
  ds.feature_dim = nodes.features.cols();
  ds.label_names = nodes.label_names;
  const bool any_label = std::any_of(nodes.labels.begin(), nodes.labels.end(),
                                     [](int y) { return y >= 0; });
  ds.graphs.emplace_back(nodes.features.rows(), std::move(edges), std::move(nodes.features),
                         any_label ? std::move(nodes.labels) : std::vector<int>{});
  ds.validate();
  return ds;
}

Matrix normalized_adjacency(const Graph& g) {
  const Index n = g.node_count();
  Matrix m = Matrix::Zero(n, n);
  Eigen::VectorXd inv_sqrt(n);
  for (Index i = 0; i < n; ++i) {
    inv_sqrt(i) = 1.0 / std::sqrt(static_cast<double>(g.degree(static_cast<int>(i)) + 1));
  }
  for (Index i = 0; i < n; ++i) m(i, i) = inv_sqrt(i) * inv_sqrt(i);
  for (const auto& [u, v] : g.edges()) {
    const double w = inv_sqrt(u) * inv_sqrt(v);
    m(u, v) = w;
    m(v, u) = w;
  }
  return m;
}

EgoNetwork extract_ego_network(const Graph& g, int center, int hops) {
  if (center < 0 || center >= g.node_count()) {
    throw Error("ego: center " + std::to_string(center) + " out of range");
  }
  if (hops < 1) throw Error("ego: hops must be positive");
  if (g.has_labels() && g.label(center) < 0) {
    throw Error("ego: center " + std::to_string(center) + " is unlabeled");
  }

  std::vector<int> local(static_cast<std::size_t>(g.node_count()), -1);
  std::vector<int> node_map;
  std::deque<std::pair<int, int>> frontier;  // (node, depth)
  local[static_cast<std::size_t>(center)] = 0;
  node_map.push_back(center);
  frontier.emplace_back(center, 0);
  while (!frontier.empty()) {
    const auto [u, depth] = frontier.front();
    frontier.pop_front();
    if (depth == hops) continue;
    for (int w : g.neighbors(u)) {
      if (local[static_cast<std::size_t>(w)] >= 0) continue;
      local[static_cast<std::size_t>(w)] = static_cast<int>(node_map.size());
      node_map.push_back(w);
      frontier.emplace_back(w, depth + 1);
    }
  }

  const Index k = static_cast<Index>(node_map.size());
  std::vector<std::pair<int, int>> edges;
  Matrix features(k, g.feature_dim());
  std::vector<int> labels;
  if (g.has_labels()) labels.resize(static_cast<std::size_t>(k), -1);
  for (Index i = 0; i < k; ++i) {
    const int parent = node_map[static_cast<std::size_t>(i)];
    features.row(i) = g.features().row(parent);
    if (g.has_labels()) labels[static_cast<std::size_t>(i)] = g.label(parent);
    for (int w : g.neighbors(parent)) {
      const int lw = local[static_cast<std::size_t>(w)];
      if (lw >= 0 && static_cast<Index>(lw) > i) edges.emplace_back(static_cast<int>(i), lw);
    }
  }

  EgoNetwork ego;
  ego.center = center;
  ego.center_local = 0;
  ego.label = g.has_labels() ? g.label(center) : -1;
  ego.node_map = std::move(node_map);
  ego.graph = Graph(k, std::move(edges), std::move(features), std::move(labels));
  return ego;
}

}  // namespace mdg
