#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "busroute/network.hpp"

namespace busroute {

/// Node index inside a StationGraph. Nodes are stored in topological order, so
/// a node's index is also its topological index.
using NodeIdx = std::uint32_t;

/// Feasibility rule for station graph edges: u -> v exists iff
/// min_spacing <= D(u,v) <= max_spacing and
/// D(v,t) <= D(u,t) - min_spacing * (1 - progress_slack), t being the target
/// of the segment being built.
struct GraphParams {
  double min_spacing_km = 0.3;
  double max_spacing_km = 2.0;
  double progress_slack = 0.5;

  /// Throws std::invalid_argument. Slack must stay below 1 so that every edge
  /// makes strict progress, which keeps the graph acyclic.
  void validate() const;
};

/// No origin-to-destination path exists under the given parameters.
class EmptyGraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An edit would violate the graph's anchoring (e.g. removing an anchor).
class GraphConstraintError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t n, double fill) : n_{n}, v_(n * n, fill) {}

  double operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }
  std::span<double const> row(std::size_t i) const {
    return std::span{v_}.subspan(i * n_, n_);
  }
  std::size_t size() const { return n_; }

  friend bool operator==(DenseMatrix const&, DenseMatrix const&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> v_;
};

struct GraphEdge {
  StopIdx from = 0;
  StopIdx to = 0;
  friend auto operator<=>(GraphEdge const&, GraphEdge const&) = default;
};

/// Exact path counts (stored as doubles; exact below 2^53).
struct PathCounts {
  std::vector<double> to_dest;  // n_i
  DenseMatrix between;          // N_uv, N_uu = 1
};

using StopSets = std::vector<std::vector<StopIdx>>;

/// How a graph was constructed; edit_graph replays it on a changed stop set.
struct GraphRecipe {
  enum class Kind { geometric, explicit_edges };
  Kind kind = Kind::geometric;
  GraphParams params;
  StopSets stop_sets;             // first set starts at origin, last ends at destination
  std::vector<GraphEdge> edges;   // explicit_edges only
  std::set<StopIdx> excluded;
};

/// Directed acyclic station graph between an origin and a destination.
/// Immutable value; edits produce new graphs.
class StationGraph {
 public:
  StationGraph() = default;

  std::size_t size() const { return stops_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  bool empty() const { return stops_.empty(); }

  StopIdx stop(NodeIdx n) const { return stops_[n]; }
  std::span<StopIdx const> stops() const { return stops_; }
  std::optional<NodeIdx> node_of(StopIdx s) const;
  bool contains(StopIdx s) const { return node_of(s).has_value(); }

  NodeIdx origin() const { return 0; }
  NodeIdx destination() const { return static_cast<NodeIdx>(size() - 1); }
  std::uint32_t topo_index(NodeIdx n) const { return n; }

  std::span<NodeIdx const> successors(NodeIdx n) const { return succ_[n]; }
  std::span<NodeIdx const> predecessors(NodeIdx n) const { return pred_[n]; }
  bool has_edge(NodeIdx u, NodeIdx v) const;
  std::vector<GraphEdge> edges() const;

  double paths_to_dest(NodeIdx n) const { return counts_.to_dest[n]; }
  double paths_between(NodeIdx u, NodeIdx v) const { return counts_.between(u, v); }
  PathCounts const& path_counts() const { return counts_; }

  /// Shortest-path distance inside the graph (km); +inf when unreachable,
  /// 0 on the diagonal.
  double transit_distance(NodeIdx u, NodeIdx v) const { return transit_(u, v); }
  /// Road distance D between the nodes' stops.
  double road_distance(NodeIdx u, NodeIdx v) const {
    return net_->road_distance(stops_[u], stops_[v]);
  }

  bool is_anchor(StopIdx s) const;
  StopSets const& anchors() const { return recipe_.stop_sets; }
  GraphRecipe const& recipe() const { return recipe_; }
  BusNetwork const& network() const { return *net_; }
  std::shared_ptr<BusNetwork const> const& network_ptr() const { return net_; }

  /// Node/edge/count identity (the recipe is not compared).
  bool structurally_equal(StationGraph const& o) const;

  bool is_path(std::span<NodeIdx const> nodes) const;
  std::optional<std::vector<NodeIdx>> nodes_of(std::span<StopIdx const> route) const;

 private:
  friend StationGraph finalize_graph(std::shared_ptr<BusNetwork const>,
                                     std::vector<GraphEdge> const&, StopIdx,
                                     StopIdx, GraphRecipe);

  std::shared_ptr<BusNetwork const> net_;
  std::vector<StopIdx> stops_;
  std::unordered_map<StopIdx, NodeIdx> node_of_;
  std::vector<std::vector<NodeIdx>> succ_, pred_;
  std::size_t edge_count_ = 0;
  PathCounts counts_;
  DenseMatrix transit_;
  GraphRecipe recipe_;
};

/// Graph between two stops using the spacing/progress edge rule.
StationGraph build_station_graph(std::shared_ptr<BusNetwork const> net,
                                 StopIdx origin, StopIdx destination,
                                 GraphParams params = {});

/// Graph through ordered anchor sets: stops inside a set are chained, a
/// subgraph joins last(S_i) to first(S_{i+1}). Every origin-destination path
/// visits every anchor in order. A non-anchor stop joins at most one segment
/// (the earliest that can use it).
StationGraph build_anchored_graph(std::shared_ptr<BusNetwork const> net,
                                  StopSets const& stop_sets,
                                  GraphParams params = {});

/// Graph for replanning an existing route: between its first and last stop,
/// through the optional `via` stop sets in order.
StationGraph graph_for_route(std::shared_ptr<BusNetwork const> net, RouteIdx route,
                             StopSets const& via = {}, GraphParams params = {});

/// Graph from an explicit edge list, pruned to origin-destination paths.
/// With more than two stop sets, edges that bypass an anchor are dropped.
StationGraph build_graph_from_edges(std::shared_ptr<BusNetwork const> net,
                                    StopIdx origin, StopIdx destination,
                                    std::vector<GraphEdge> edges,
                                    StopSets stop_sets = {});

/// Removes and re-admits stops. Equivalent to rebuilding from the recipe with
/// the modified stop set. Throws GraphConstraintError when removing the
/// origin, destination, or an anchor.
StationGraph edit_graph(StationGraph const& g, std::set<StopIdx> const& add,
                        std::set<StopIdx> const& remove);

/// Reverse-topological path counting.
PathCounts count_paths(StationGraph const& g);

/// Rebuilds from the recipe, ignoring any cached state.
StationGraph rebuild_graph(std::shared_ptr<BusNetwork const> net,
                           GraphRecipe recipe);

}  // namespace busroute
