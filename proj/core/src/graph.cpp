#include "dra/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

namespace dra {

namespace {

void check_sorted_unique(const std::vector<int>& ids) {
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (ids[i] <= ids[i - 1]) {
      throw std::invalid_argument("graph node ids must be strictly increasing");
    }
  }
}

}  // namespace

Graph::Graph(std::vector<int> node_ids, Eigen::MatrixXd adjacency)
    : node_ids_(std::move(node_ids)), adjacency_(std::move(adjacency)) {
  check_sorted_unique(node_ids_);
  const int n = size();
  if (adjacency_.rows() != n || adjacency_.cols() != n) {
    throw std::invalid_argument("adjacency dimension does not match node count");
  }
  for (int i = 0; i < n; ++i) {
    if (adjacency_(i, i) != 0.0) {
      throw std::invalid_argument("adjacency diagonal must be zero");
    }
    for (int j = 0; j < n; ++j) {
      if (adjacency_(i, j) < 0.0) {
        throw std::invalid_argument("adjacency weights must be nonnegative");
      }
      if (adjacency_(i, j) != adjacency_(j, i)) {
        throw std::invalid_argument("adjacency must be symmetric");
      }
    }
  }
}

Graph Graph::from_edges(std::vector<int> node_ids, const std::vector<Edge>& edges) {
  std::sort(node_ids.begin(), node_ids.end());
  check_sorted_unique(node_ids);
  const int n = static_cast<int>(node_ids.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  auto index = [&](int id) {
    auto it = std::lower_bound(node_ids.begin(), node_ids.end(), id);
    if (it == node_ids.end() || *it != id) {
      throw std::invalid_argument("edge references unknown node " + std::to_string(id));
    }
    return static_cast<int>(it - node_ids.begin());
  };
  for (const Edge& e : edges) {
    if (e.u == e.v) throw std::invalid_argument("self loops are not allowed");
    if (e.weight <= 0.0) throw std::invalid_argument("edge weights must be positive");
    const int i = index(e.u);
    const int j = index(e.v);
    a(i, j) = e.weight;
    a(j, i) = e.weight;
  }
  return Graph(std::move(node_ids), std::move(a));
}

bool Graph::has_node(int id) const {
  return std::binary_search(node_ids_.begin(), node_ids_.end(), id);
}

int Graph::index_of(int id) const {
  auto it = std::lower_bound(node_ids_.begin(), node_ids_.end(), id);
  if (it == node_ids_.end() || *it != id) {
    throw std::invalid_argument("unknown node id " + std::to_string(id));
  }
  return static_cast<int>(it - node_ids_.begin());
}

double Graph::weight(int u, int v) const { return adjacency_(index_of(u), index_of(v)); }

std::vector<int> Graph::neighbors(int id) const {
  const int i = index_of(id);
  std::vector<int> out;
  for (int j = 0; j < size(); ++j) {
    if (adjacency_(i, j) > 0.0) out.push_back(node_ids_[j]);
  }
  return out;
}

Graph Graph::induced(std::vector<int> ids) const {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const int n = static_cast<int>(ids.size());
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    const int gi = index_of(ids[i]);
    for (int j = 0; j < n; ++j) {
      a(i, j) = adjacency_(gi, index_of(ids[j]));
    }
  }
  return Graph(std::move(ids), std::move(a));
}

Eigen::MatrixXd laplacian(const Graph& g) {
  const Eigen::MatrixXd& a = g.adjacency();
  Eigen::MatrixXd l = -a;
  for (int i = 0; i < a.rows(); ++i) {
    l(i, i) = a.row(i).sum();
  }
  return l;
}

bool is_connected(const Graph& g) {
  const int n = g.size();
  if (n == 0) return false;
  std::vector<char> seen(n, 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    for (int j = 0; j < n; ++j) {
      if (!seen[j] && g.adjacency()(i, j) > 0.0) {
        seen[j] = 1;
        ++reached;
        queue.push_back(j);
      }
    }
  }
  return reached == n;
}

Spectrum spectrum(const Graph& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian(g));
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("laplacian eigensolver did not converge");
  }
  Spectrum s;
  s.eigenvalues = solver.eigenvalues();
  s.max_eig = s.eigenvalues(s.eigenvalues.size() - 1);
  s.fiedler = s.eigenvalues.size() > 1 ? s.eigenvalues(1) : 0.0;
  return s;
}

namespace {

// Hop distances from `src` (graph index), with BFS predecessors chosen in
// ascending index order so shortest paths are id-deterministic.
struct BfsTree {
  std::vector<int> dist;
  std::vector<int> pred;
};

BfsTree bfs(const Graph& g, int src) {
  const int n = g.size();
  BfsTree t{std::vector<int>(n, -1), std::vector<int>(n, -1)};
  t.dist[src] = 0;
  std::deque<int> queue{src};
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    for (int j = 0; j < n; ++j) {
      if (g.adjacency()(i, j) > 0.0 && t.dist[j] < 0) {
        t.dist[j] = t.dist[i] + 1;
        t.pred[j] = i;
        queue.push_back(j);
      }
    }
  }
  return t;
}

std::vector<std::vector<int>> components_of(const Graph& g) {
  const int n = g.size();
  std::vector<int> comp(n, -1);
  int count = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = count;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      for (int j = 0; j < n; ++j) {
        if (g.adjacency()(i, j) > 0.0 && comp[j] < 0) {
          comp[j] = count;
          queue.push_back(j);
        }
      }
    }
    ++count;
  }
  std::vector<std::vector<int>> groups(count);
  for (int i = 0; i < n; ++i) groups[comp[i]].push_back(g.node_ids()[i]);
  return groups;
}

}  // namespace

ClusterTrace connect_cluster_trace(const Graph& g, const std::vector<int>& core) {
  if (core.empty()) throw std::invalid_argument("cluster core must be non-empty");
  for (int id : core) {
    if (!g.has_node(id)) {
      throw std::invalid_argument("core node " + std::to_string(id) + " is not in the graph");
    }
  }
  if (!is_connected(g)) {
    throw std::invalid_argument("cluster construction requires a connected host graph");
  }

  ClusterTrace trace;
  trace.nodes = core;
  std::sort(trace.nodes.begin(), trace.nodes.end());
  trace.nodes.erase(std::unique(trace.nodes.begin(), trace.nodes.end()), trace.nodes.end());

  while (true) {
    Graph sub = g.induced(trace.nodes);
    auto comps = components_of(sub);
    if (comps.size() <= 1) break;

    // Nearest pair of components in the host graph; ties resolved by the
    // smallest (distance, source id, target id) triple.
    int best_dist = std::numeric_limits<int>::max();
    int best_src = -1;
    int best_dst = -1;
    std::vector<int> comp_of_id(g.size(), -1);
    for (std::size_t c = 0; c < comps.size(); ++c) {
      for (int id : comps[c]) comp_of_id[g.index_of(id)] = static_cast<int>(c);
    }
    std::vector<BfsTree> trees;
    trees.reserve(g.size());
    for (int i = 0; i < g.size(); ++i) trees.push_back(bfs(g, i));
    for (std::size_t c = 0; c < comps.size(); ++c) {
      for (int u : comps[c]) {
        const BfsTree& t = trees[g.index_of(u)];
        for (int j = 0; j < g.size(); ++j) {
          const int other = comp_of_id[j];
          if (other < 0 || other == static_cast<int>(c)) continue;
          const int d = t.dist[j];
          const int v = g.node_ids()[j];
          if (d < 0) continue;
          if (d < best_dist || (d == best_dist && (u < best_src || (u == best_src && v < best_dst)))) {
            best_dist = d;
            best_src = u;
            best_dst = v;
          }
        }
      }
    }
    if (best_src < 0) {
      throw std::runtime_error("internal error: no joinable components in a connected graph");
    }

    const BfsTree& t = trees[g.index_of(best_src)];
    std::vector<int> path;
    for (int at = g.index_of(best_dst); at >= 0; at = t.pred[at]) {
      path.push_back(g.node_ids()[at]);
      if (g.node_ids()[at] == best_src) break;
    }
    std::reverse(path.begin(), path.end());

    ClusterJoin join;
    join.path = path;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      if (!std::binary_search(trace.nodes.begin(), trace.nodes.end(), path[i])) {
        join.helpers.push_back(path[i]);
        trace.nodes.insert(
            std::upper_bound(trace.nodes.begin(), trace.nodes.end(), path[i]), path[i]);
      }
    }
    trace.joins.push_back(std::move(join));
  }
  return trace;
}

std::vector<int> connect_cluster(const Graph& g, const std::vector<int>& core) {
  return connect_cluster_trace(g, core).nodes;
}

int diameter(const Graph& g) {
  if (!is_connected(g)) throw std::invalid_argument("diameter of a disconnected graph");
  int d = 0;
  for (int i = 0; i < g.size(); ++i) {
    const BfsTree t = bfs(g, i);
    for (int dist : t.dist) d = std::max(d, dist);
  }
  return d;
}

std::vector<double> max_consensus(const Graph& g, const std::vector<double>& locals) {
  if (static_cast<int>(locals.size()) != g.size()) {
    throw std::invalid_argument("one local value per node required");
  }
  if (!is_connected(g)) {
    throw std::invalid_argument("max-consensus cannot reach agreement on a disconnected graph");
  }
  std::vector<double> z = locals;
  const int rounds = diameter(g);
  for (int r = 0; r < rounds; ++r) {
    std::vector<double> next = z;
    for (int i = 0; i < g.size(); ++i) {
      for (int j = 0; j < g.size(); ++j) {
        if (g.adjacency()(i, j) > 0.0) next[i] = std::max(next[i], z[j]);
      }
    }
    z = std::move(next);
  }
  return z;
}

double disagreement(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw std::invalid_argument("disagreement of an empty vector");
  const double mean = v.mean();
  return (v.array() - mean).matrix().norm();
}

}  // namespace dra
