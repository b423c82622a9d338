#include "tidanse/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <tuple>

#include <json.hpp>

#include "tidanse/error.hpp"

namespace tidanse {

namespace {

using Adjacency = std::vector<std::vector<std::uint8_t>>;

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Deterministic tie-breaking: weight, then lower endpoint, then upper endpoint.
bool edge_less(const Edge& x, const Edge& y) {
  return std::tie(x.weight, x.a, x.b) < std::tie(y.weight, y.a, y.b);
}

Edge make_edge(const std::vector<Point>& pos, std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  return {a, b, distance(pos[a], pos[b])};
}

Adjacency empty_adjacency(std::size_t k) { return Adjacency(k, std::vector<std::uint8_t>(k, 0)); }

std::size_t count_edges(const Adjacency& adj) {
  std::size_t m = 0;
  for (std::size_t a = 0; a < adj.size(); ++a)
    for (std::size_t b = a + 1; b < adj.size(); ++b) m += adj[a][b] ? 1 : 0;
  return m;
}

}  // namespace

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool is_connected(const Adjacency& adj) {
  const std::size_t k = adj.size();
  if (k == 0) return true;
  std::vector<bool> seen(k, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v = 0; v < k; ++v) {
      if (adj[u][v] && !seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == k;
}

WasnGraph::WasnGraph(std::vector<Point> positions, Adjacency adjacency)
    : positions_(std::move(positions)), adjacency_(std::move(adjacency)) {
  const std::size_t k = positions_.size();
  if (k == 0) throw Error(ErrorCode::ConfigInvalid, "graph needs at least one node");
  if (adjacency_.size() != k)
    throw Error(ErrorCode::DimensionMismatch, "adjacency rows do not match node count");
  for (std::size_t a = 0; a < k; ++a) {
    if (adjacency_[a].size() != k)
      throw Error(ErrorCode::DimensionMismatch, "adjacency must be square");
    if (adjacency_[a][a]) throw Error(ErrorCode::ConfigInvalid, "adjacency has a self-loop");
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      adjacency_[a][b] = adjacency_[a][b] ? 1 : 0;
      if ((adjacency_[a][b] != 0) != (adjacency_[b][a] != 0))
        throw Error(ErrorCode::ConfigInvalid, "adjacency is not symmetric");
    }
  if (!is_connected(adjacency_)) throw Error(ErrorCode::ConfigInvalid, "graph is not connected");
}

WasnGraph WasnGraph::fully_connected(std::vector<Point> positions) {
  const std::size_t k = positions.size();
  Adjacency adj(k, std::vector<std::uint8_t>(k, 1));
  for (std::size_t q = 0; q < k; ++q) adj[q][q] = 0;
  return WasnGraph(std::move(positions), std::move(adj));
}

std::size_t WasnGraph::degree(std::size_t q) const {
  return static_cast<std::size_t>(std::count(adjacency_[q].begin(), adjacency_[q].end(), 1));
}

std::vector<std::size_t> WasnGraph::neighbors(std::size_t q) const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < size(); ++v)
    if (adjacency_[q][v]) out.push_back(v);
  return out;
}

std::size_t WasnGraph::edge_count() const { return count_edges(adjacency_); }

bool WasnGraph::is_fully_connected() const {
  const std::size_t k = size();
  return edge_count() == k * (k - 1) / 2;
}

std::vector<Edge> WasnGraph::edges() const {
  std::vector<Edge> out;
  for (std::size_t a = 0; a < size(); ++a)
    for (std::size_t b = a + 1; b < size(); ++b)
      if (adjacency_[a][b]) out.push_back(make_edge(positions_, a, b));
  return out;
}

double Tree::total_length() const {
  double s = 0.0;
  for (const Edge& e : edges) s += e.weight;
  return s;
}

Tree orient_tree(std::size_t k_nodes, std::vector<Edge> edges, std::size_t root) {
  if (root >= k_nodes) throw Error(ErrorCode::ConfigInvalid, "tree root out of range");
  if (edges.size() + 1 != k_nodes)
    throw Error(ErrorCode::ConfigInvalid, "a spanning tree on K nodes has K-1 edges");
  Adjacency adj = empty_adjacency(k_nodes);
  for (Edge& e : edges) {
    if (e.a > e.b) std::swap(e.a, e.b);
    if (e.b >= k_nodes || e.a == e.b) throw Error(ErrorCode::ConfigInvalid, "invalid tree edge");
    adj[e.a][e.b] = adj[e.b][e.a] = 1;
  }
  std::sort(edges.begin(), edges.end(),
            [](const Edge& x, const Edge& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });

  Tree t;
  t.root = root;
  t.parent.assign(k_nodes, std::nullopt);
  t.upstream.assign(k_nodes, {});
  t.upstream_closure.assign(k_nodes, {});
  t.branch_of.assign(k_nodes, std::nullopt);
  t.edges = std::move(edges);

  std::vector<bool> seen(k_nodes, false);
  std::queue<std::size_t> frontier;
  frontier.push(root);
  seen[root] = true;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    t.bfs_order.push_back(u);
    for (std::size_t v = 0; v < k_nodes; ++v) {
      if (!adj[u][v] || seen[v]) continue;
      seen[v] = true;
      t.parent[v] = u;
      t.upstream[u].push_back(v);
      t.branch_of[v] = (u == root) ? v : *t.branch_of[u];
      frontier.push(v);
    }
  }
  if (t.bfs_order.size() != k_nodes)
    throw Error(ErrorCode::ConfigInvalid, "tree edges do not span all nodes");

  // Reverse BFS order visits every node after all of its descendants.
  for (auto it = t.bfs_order.rbegin(); it != t.bfs_order.rend(); ++it) {
    auto& closure = t.upstream_closure[*it];
    for (std::size_t c : t.upstream[*it]) {
      closure.push_back(c);
      closure.insert(closure.end(), t.upstream_closure[c].begin(), t.upstream_closure[c].end());
    }
    std::sort(closure.begin(), closure.end());
  }
  return t;
}

WasnGraph generate_geometric_wasn(std::size_t k_nodes, const GeometryParams& params, Rng& rng) {
  if (k_nodes == 0) throw Error(ErrorCode::ConfigInvalid, "k_nodes must be positive");
  constexpr int kMaxAttempts = 10000;
  std::uniform_real_distribution<double> coord(0.0, params.area_side);
  std::vector<Point> pos;
  pos.reserve(k_nodes);
  for (std::size_t q = 0; q < k_nodes; ++q) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const double x = coord(rng);
      const Point p{x, coord(rng)};
      placed = std::all_of(pos.begin(), pos.end(),
                           [&](const Point& o) { return distance(o, p) >= params.min_distance; });
      if (placed) pos.push_back(p);
    }
    if (!placed) throw Error(ErrorCode::PlacementFailed, "could not place node " + std::to_string(q));
  }

  return geometric_graph(std::move(pos), params);
}

WasnGraph geometric_graph(std::vector<Point> positions, const GeometryParams& params) {
  const std::size_t k = positions.size();
  if (k == 0) throw Error(ErrorCode::ConfigInvalid, "k_nodes must be positive");
  if (!(params.radius_step > 0.0)) throw Error(ErrorCode::ConfigInvalid, "radius step must be positive");
  double radius = params.initial_radius;
  for (;;) {
    Adjacency adj = empty_adjacency(k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b)
        if (distance(positions[a], positions[b]) <= radius) adj[a][b] = adj[b][a] = 1;
    if (is_connected(adj)) return WasnGraph(std::move(positions), std::move(adj));
    radius += params.radius_step;
  }
}

double connectivity(const WasnGraph& graph) {
  const std::size_t k = graph.size();
  if (k <= 3) throw Error(ErrorCode::DegenerateK, "connectivity is undefined for K <= 3");
  const double kd = static_cast<double>(k);
  return (2.0 * static_cast<double>(graph.edge_count()) - 2.0 * kd) / (kd * (kd - 3.0));
}

std::size_t edges_for_connectivity(std::size_t k_nodes, double target_c) {
  if (k_nodes <= 3) throw Error(ErrorCode::DegenerateK, "connectivity is undefined for K <= 3");
  const double kd = static_cast<double>(k_nodes);
  if (!(target_c >= 0.0 && target_c <= 1.0))
    throw Error(ErrorCode::ConfigInvalid, "connectivity target must lie in [0, 1]");
  const double m = std::round(kd + target_c * kd * (kd - 3.0) / 2.0);
  if (m < kd - 1.0) throw Error(ErrorCode::Unreachable, "target edge count cannot stay connected");
  return static_cast<std::size_t>(std::min(m, kd * (kd - 1.0) / 2.0));
}

WasnGraph adjust_connectivity(const WasnGraph& graph, double target_c, Rng& rng) {
  const std::size_t k = graph.size();
  const std::size_t target = edges_for_connectivity(k, target_c);
  Adjacency adj = graph.adjacency();
  std::size_t m = graph.edge_count();

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      if ((adj[a][b] != 0) == (m > target)) pairs.emplace_back(a, b);
  std::shuffle(pairs.begin(), pairs.end(), rng);

  for (const auto& [a, b] : pairs) {
    if (m == target) break;
    if (m < target) {
      adj[a][b] = adj[b][a] = 1;
      ++m;
    } else {
      adj[a][b] = adj[b][a] = 0;
      if (is_connected(adj)) {
        --m;
      } else {
        adj[a][b] = adj[b][a] = 1;
      }
    }
  }
  // Rolled-back links remain bridges, so one pass reaches any target >= K-1.
  return WasnGraph(graph.positions(), std::move(adj));
}

Tree prune_mst(const WasnGraph& graph, std::size_t root) {
  std::vector<Edge> candidates = graph.edges();
  std::sort(candidates.begin(), candidates.end(), edge_less);
  DisjointSets sets(graph.size());
  std::vector<Edge> kept;
  for (const Edge& e : candidates)
    if (sets.unite(e.a, e.b)) kept.push_back(e);
  return orient_tree(graph.size(), std::move(kept), root);
}

Tree prune_mmut(const WasnGraph& graph, std::size_t root) {
  std::vector<Edge> candidates = graph.edges();
  std::sort(candidates.begin(), candidates.end(), edge_less);
  DisjointSets sets(graph.size());
  std::vector<Edge> kept;
  for (const Edge& e : candidates)
    if ((e.a == root || e.b == root) && sets.unite(e.a, e.b)) kept.push_back(e);
  for (const Edge& e : candidates)
    if (sets.unite(e.a, e.b)) kept.push_back(e);
  return orient_tree(graph.size(), std::move(kept), root);
}

Tree prune(const WasnGraph& graph, std::size_t root, Pruning strategy) {
  return strategy == Pruning::Mst ? prune_mst(graph, root) : prune_mmut(graph, root);
}

std::string to_string(Pruning p) { return p == Pruning::Mst ? "mst" : "mmut"; }

Pruning pruning_from_string(std::string_view name) {
  if (name == "mst") return Pruning::Mst;
  if (name == "mmut") return Pruning::Mmut;
  throw Error(ErrorCode::ConfigInvalid, "unknown pruning strategy '" + std::string(name) + "'");
}

WasnGraph randomize_adjacency(std::vector<Point> positions, Rng& rng) {
  const std::size_t k = positions.size();
  if (k == 0) throw Error(ErrorCode::ConfigInvalid, "k_nodes must be positive");
  constexpr int kMaxDraws = 1000;
  std::bernoulli_distribution coin(0.5);
  Adjacency adj;
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    adj = empty_adjacency(k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b)
        if (coin(rng)) adj[a][b] = adj[b][a] = 1;
    if (is_connected(adj)) return WasnGraph(std::move(positions), std::move(adj));
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 1; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    const std::size_t a = order[i], b = order[pick(rng)];
    adj[a][b] = adj[b][a] = 1;
  }
  return WasnGraph(std::move(positions), std::move(adj));
}

std::string graph_to_json(const WasnGraph& graph) {
  nlohmann::json j;
  j["positions"] = nlohmann::json::array();
  for (const Point& p : graph.positions()) j["positions"].push_back({p.x, p.y});
  j["adjacency"] = nlohmann::json::array();
  for (const auto& row : graph.adjacency()) {
    nlohmann::json r = nlohmann::json::array();
    for (std::uint8_t v : row) r.push_back(static_cast<int>(v));
    j["adjacency"].push_back(std::move(r));
  }
  return j.dump();
}

WasnGraph graph_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("graph json: ") + e.what());
  }
  try {
    std::vector<Point> pos;
    for (const auto& p : j.at("positions")) {
      if (p.size() != 2) throw Error(ErrorCode::ConfigInvalid, "position must be [x, y]");
      pos.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    Adjacency adj;
    for (const auto& row : j.at("adjacency")) {
      std::vector<std::uint8_t> r;
      for (const auto& v : row) r.push_back(v.get<int>() != 0 ? 1 : 0);
      adj.push_back(std::move(r));
    }
    return WasnGraph(std::move(pos), std::move(adj));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("graph json: ") + e.what());
  }
}

}  // namespace tidanse
