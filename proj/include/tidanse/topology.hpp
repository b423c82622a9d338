#pragma once

// Sensor-network graphs and per-iteration spanning-tree pruning.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tidanse/random.hpp"

namespace tidanse {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b);

/// Undirected edge with a < b.
struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

/// Connected, undirected sensor network. Construction validates that the
/// adjacency is symmetric with an empty diagonal and has a single component.
class WasnGraph {
 public:
  WasnGraph(std::vector<Point> positions, std::vector<std::vector<std::uint8_t>> adjacency);

  static WasnGraph fully_connected(std::vector<Point> positions);

  std::size_t size() const noexcept { return positions_.size(); }
  const std::vector<Point>& positions() const noexcept { return positions_; }
  const std::vector<std::vector<std::uint8_t>>& adjacency() const noexcept { return adjacency_; }

  bool linked(std::size_t a, std::size_t b) const { return adjacency_[a][b] != 0; }
  std::size_t degree(std::size_t q) const;
  std::vector<std::size_t> neighbors(std::size_t q) const;
  std::size_t edge_count() const;
  bool is_fully_connected() const;
  /// Edges with Euclidean weights, ordered by (a, b).
  std::vector<Edge> edges() const;

 private:
  std::vector<Point> positions_;
  std::vector<std::vector<std::uint8_t>> adjacency_;
};

bool is_connected(const std::vector<std::vector<std::uint8_t>>& adjacency);

/// Spanning tree oriented towards a root. "Upstream" points away from the root.
struct Tree {
  std::size_t root = 0;
  std::vector<std::optional<std::size_t>> parent;
  /// Upstream neighbours (children) per node, ascending.
  std::vector<std::vector<std::size_t>> upstream;
  /// All nodes upstream of each node, ascending.
  std::vector<std::vector<std::size_t>> upstream_closure;
  /// Root neighbour whose branch contains the node; empty for the root.
  std::vector<std::optional<std::size_t>> branch_of;
  std::vector<Edge> edges;
  /// Breadth-first order from the root (root first).
  std::vector<std::size_t> bfs_order;

  std::size_t size() const noexcept { return parent.size(); }
  double total_length() const;
};

/// Orients an edge set at `root`. Throws ConfigInvalid unless the edges form
/// a spanning tree on k_nodes nodes.
Tree orient_tree(std::size_t k_nodes, std::vector<Edge> edges, std::size_t root);

struct GeometryParams {
  double area_side = 5.0;
  double min_distance = 0.1;
  double initial_radius = 1.5;
  double radius_step = 0.25;
};

/// Uniform random node placement with a minimum pairwise distance; nodes are
/// linked within a communication radius grown until the graph is connected.
WasnGraph generate_geometric_wasn(std::size_t k_nodes, const GeometryParams& params, Rng& rng);

/// Links fixed positions within the smallest radius (initial_radius plus
/// whole radius steps) that connects the graph.
WasnGraph geometric_graph(std::vector<Point> positions, const GeometryParams& params);

/// (1^T A 1 - 2K) / (K(K-3)); DegenerateK for K <= 3.
double connectivity(const WasnGraph& graph);

/// Edge count realizing a connectivity target: round(K + c K (K-3) / 2).
std::size_t edges_for_connectivity(std::size_t k_nodes, double target_c);

/// Randomly adds links, or removes links while keeping the graph connected,
/// until the edge count matches `target_c`.
WasnGraph adjust_connectivity(const WasnGraph& graph, double target_c, Rng& rng);

/// Kruskal minimum spanning tree oriented at `root`.
Tree prune_mst(const WasnGraph& graph, std::size_t root);

/// Keeps every edge incident to `root`, then completes the tree with the
/// remaining edges in increasing-weight order.
Tree prune_mmut(const WasnGraph& graph, std::size_t root);

enum class Pruning { Mst, Mmut };
Tree prune(const WasnGraph& graph, std::size_t root, Pruning strategy);
std::string to_string(Pruning p);
Pruning pruning_from_string(std::string_view name);

/// Random connected graph over fixed positions: each link present with
/// probability 1/2, redrawn until connected (1000 tries, then spanning-tree
/// links are added to the last draw).
WasnGraph randomize_adjacency(std::vector<Point> positions, Rng& rng);

std::string graph_to_json(const WasnGraph& graph);
WasnGraph graph_from_json(std::string_view text);

}  // namespace tidanse
