#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dra {

/// Undirected weighted graph over a set of integer node ids.
///
/// The adjacency matrix is symmetric with nonnegative weights and a zero
/// diagonal; node ids are kept strictly increasing so that slot order is
/// well defined everywhere downstream.
class Graph {
 public:
  Graph() = default;
  Graph(std::vector<int> node_ids, Eigen::MatrixXd adjacency);

  struct Edge {
    int u = 0;
    int v = 0;
    double weight = 1.0;
  };
  static Graph from_edges(std::vector<int> node_ids, const std::vector<Edge>& edges);

  int size() const { return static_cast<int>(node_ids_.size()); }
  const std::vector<int>& node_ids() const { return node_ids_; }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }

  bool has_node(int id) const;
  /// Position of a node id in the ordered node set; throws if absent.
  int index_of(int id) const;
  double weight(int u, int v) const;
  std::vector<int> neighbors(int id) const;

  /// Subgraph induced on the given node ids (sorted ascending internally).
  Graph induced(std::vector<int> ids) const;

 private:
  std::vector<int> node_ids_;
  Eigen::MatrixXd adjacency_;
};

/// L = Diag(A*1) - A. Row sums vanish by construction.
Eigen::MatrixXd laplacian(const Graph& g);

/// Breadth-first connectivity over edges with positive weight. This is the
/// authoritative connectivity test; the spectral one below is diagnostic.
bool is_connected(const Graph& g);

struct Spectrum {
  Eigen::VectorXd eigenvalues;  // ascending
  double fiedler = 0.0;         // second smallest
  double max_eig = 0.0;         // largest
};

/// Eigenvalues of the Laplacian, ascending. The smallest is zero up to
/// solver tolerance for any valid graph.
Spectrum spectrum(const Graph& g);

/// One component-joining step performed while growing a cluster.
struct ClusterJoin {
  std::vector<int> path;     // node ids along the joining shortest path
  std::vector<int> helpers;  // interior nodes newly added by this step
};

struct ClusterTrace {
  std::vector<int> nodes;  // final node set, ascending
  std::vector<ClusterJoin> joins;
};

/// Smallest-id-deterministic growth of `core` into a node set whose induced
/// subgraph is connected. While more than one component remains, the two
/// nearest components (hop metric, ties broken by smallest node id) are
/// joined along a shortest path in `g`, adding path-interior nodes as
/// helpers.
std::vector<int> connect_cluster(const Graph& g, const std::vector<int>& core);
ClusterTrace connect_cluster_trace(const Graph& g, const std::vector<int>& core);

/// Hop-metric diameter (0 for a single node); throws on disconnected input.
int diameter(const Graph& g);

/// Synchronous max-consensus: diameter(g) rounds of z_i <- max over the
/// closed neighborhood. Returns one value per node, aligned with node_ids().
std::vector<double> max_consensus(const Graph& g, const std::vector<double>& locals);

/// Euclidean norm of the deviation from the mean vector, ||(I - 11^T/n) v||.
double disagreement(const Eigen::VectorXd& v);

}  // namespace dra
