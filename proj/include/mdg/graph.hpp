#pragma once

#include "mdg/types.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mdg {

// Undirected graph with dense node features and optional per-node labels.
// Edges are stored once as (min, max) pairs; immutable after construction.
class Graph {
 public:
  Graph() = default;
  // Canonicalizes and deduplicates edges; rejects self-loops and out-of-range
  // endpoints. `labels` is either empty or node_count long with -1 = unlabeled.
  Graph(Index node_count, std::vector<std::pair<int, int>> edges, Matrix features,
        std::vector<int> labels = {});

  Index node_count() const { return node_count_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const Matrix& features() const { return features_; }
  Index feature_dim() const { return features_.cols(); }

  bool has_labels() const { return !labels_.empty(); }
  const std::vector<int>& labels() const { return labels_; }
  int label(Index v) const { return labels_.empty() ? -1 : labels_[static_cast<std::size_t>(v)]; }

  const std::vector<int>& neighbors(int v) const;  // sorted ascending
  int degree(int v) const { return static_cast<int>(neighbors(v).size()); }
  bool has_edge(int u, int v) const;

 private:
  Index node_count_ = 0;
  std::vector<std::pair<int, int>> edges_;
  Matrix features_;
  std::vector<int> labels_;
  std::vector<std::vector<int>> adjacency_;
};

// One domain's graphs plus its label vocabulary. Graphs share feature_dim.
struct DomainDataset {
  std::string domain_id;
  std::vector<Graph> graphs;
  Index feature_dim = 0;
  std::vector<std::string> label_names;  // class index -> name, first-appearance order

  int num_classes() const { return static_cast<int>(label_names.size()); }
  void validate() const;  // throws Error on any broken invariant
};

// Induced subgraph within a hop radius of a center node, labeled by the center.
struct EgoNetwork {
  int center = 0;        // index in the parent graph
  int center_local = 0;  // image of the center in `graph`
  Graph graph;
  int label = -1;
  std::vector<int> node_map;  // local index -> parent index
};

// Reads a manifest (`domain_id`, `nodes`, `edges` keys; paths relative to the
// manifest) and its node/edge files into a validated single-graph dataset.
DomainDataset load_dataset(const std::filesystem::path& manifest_path);

// D̂^{-1/2} (A+I) D̂^{-1/2}: symmetric GCN propagation matrix with self-loops.
Matrix normalized_adjacency(const Graph& g);

// BFS out to `hops` edges from `center`; node indices remapped to 0..k-1 in
// discovery order (center first), edges induced from the parent graph.
EgoNetwork extract_ego_network(const Graph& g, int center, int hops);

}  // namespace mdg
