#include "busroute/station_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <sstream>
#include <unordered_set>

namespace busroute {

StationGraph finalize_graph(std::shared_ptr<BusNetwork const> net,
                            std::vector<GraphEdge> const& raw, StopIdx origin,
                            StopIdx destination, GraphRecipe recipe);

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Adjacency = std::unordered_map<StopIdx, std::vector<StopIdx>>;

std::unordered_set<StopIdx> reachable(Adjacency const& adj, StopIdx from) {
  std::unordered_set<StopIdx> seen{from};
  std::vector<StopIdx> stack{from};
  while (!stack.empty()) {
    auto const u = stack.back();
    stack.pop_back();
    auto const it = adj.find(u);
    if (it == end(adj)) continue;
    for (auto const v : it->second) {
      if (seen.insert(v).second) stack.push_back(v);
    }
  }
  return seen;
}

/// Edges lying on some from -> to path.
std::vector<GraphEdge> prune_to_paths(std::vector<GraphEdge> const& edges,
                                      StopIdx from, StopIdx to) {
  Adjacency fwd, bwd;
  for (auto const& e : edges) {
    fwd[e.from].push_back(e.to);
    bwd[e.to].push_back(e.from);
  }
  auto const ahead = reachable(fwd, from);
  auto const behind = reachable(bwd, to);
  std::vector<GraphEdge> out;
  for (auto const& e : edges) {
    if (ahead.contains(e.from) && behind.contains(e.from) &&
        ahead.contains(e.to) && behind.contains(e.to)) {
      out.push_back(e);
    }
  }
  std::sort(begin(out), end(out));
  out.erase(std::unique(begin(out), end(out)), end(out));
  return out;
}

std::string describe_gap(BusNetwork const& net, StopIdx from, StopIdx to) {
  return "'" + net.stop(from).id + "' -> '" + net.stop(to).id + "'";
}

/// One segment of the spacing/progress graph, pruned to from -> to paths.
template <typename Allowed>
std::vector<GraphEdge> geometric_segment(BusNetwork const& net, StopIdx from,
                                         StopIdx to, GraphParams const& p,
                                         Allowed&& allowed) {
  double const step = p.min_spacing_km * (1.0 - p.progress_slack);
  double const radius =
      p.max_spacing_km / std::min(1.0, std::max(net.detour_factor(), 1e-9));

  std::vector<GraphEdge> edges;
  std::unordered_set<StopIdx> seen{from};
  std::deque<StopIdx> queue{from};
  double closest = net.road_distance(from, to);
  while (!queue.empty()) {
    auto const u = queue.front();
    queue.pop_front();
    if (u == to) continue;
    double const du = net.road_distance(u, to);
    closest = std::min(closest, du);
    auto candidates = net.spatial_index().within(net.stop(u).pos, radius);
    auto const partners = net.road_table_partners(u);
    candidates.insert(end(candidates), begin(partners), end(partners));
    std::sort(begin(candidates), end(candidates));
    candidates.erase(std::unique(begin(candidates), end(candidates)),
                     end(candidates));
    for (auto const v : candidates) {
      if (v == u || (v != to && !allowed(v))) continue;
      double const d = net.road_distance(u, v);
      if (d < p.min_spacing_km || d > p.max_spacing_km) continue;
      if (net.road_distance(v, to) > du - step) continue;
      edges.push_back({u, v});
      if (seen.insert(v).second) queue.push_back(v);
    }
  }

  auto pruned = prune_to_paths(edges, from, to);
  if (pruned.empty()) {
    std::ostringstream msg;
    msg << "no feasible path " << describe_gap(net, from, to) << " (reached "
        << seen.size() << " stops, closest approach " << closest << " km)";
    throw EmptyGraphError{msg.str()};
  }
  return pruned;
}

void validate_stop_sets(BusNetwork const& net, StopSets const& sets) {
  if (sets.size() < 2) {
    throw std::invalid_argument{"at least two stop sets are required"};
  }
  std::unordered_set<StopIdx> seen;
  for (auto const& s : sets) {
    if (s.empty()) throw std::invalid_argument{"stop sets must be non-empty"};
    for (auto const stop : s) {
      if (stop >= net.stops().size()) {
        throw std::invalid_argument{"stop set references unknown stop"};
      }
      if (!seen.insert(stop).second) {
        throw std::invalid_argument{"stop '" + net.stop(stop).id +
                                    "' appears in more than one anchor position"};
      }
    }
  }
}

void add_chain_edges(StopSets const& sets, std::vector<GraphEdge>& edges) {
  for (auto const& s : sets) {
    for (std::size_t i = 1; i < s.size(); ++i) edges.push_back({s[i - 1], s[i]});
  }
}

StationGraph build_geometric(std::shared_ptr<BusNetwork const> net,
                             GraphRecipe recipe) {
  recipe.params.validate();
  validate_stop_sets(*net, recipe.stop_sets);
  auto const& sets = recipe.stop_sets;

  std::unordered_set<StopIdx> anchors;
  for (auto const& s : sets) anchors.insert(begin(s), end(s));
  std::unordered_set<StopIdx> claimed;

  std::vector<GraphEdge> edges;
  add_chain_edges(sets, edges);
  for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
    auto const from = sets[i].back();
    auto const to = sets[i + 1].front();
    auto const allowed = [&](StopIdx s) {
      return !anchors.contains(s) && !claimed.contains(s) &&
             !recipe.excluded.contains(s);
    };
    auto seg = geometric_segment(*net, from, to, recipe.params, allowed);
    for (auto const& e : seg) {
      if (e.from != from) claimed.insert(e.from);
      if (e.to != to) claimed.insert(e.to);
    }
    edges.insert(end(edges), begin(seg), end(seg));
  }
  auto const o = sets.front().front();
  auto const d = sets.back().back();
  return finalize_graph(std::move(net), edges, o, d, std::move(recipe));
}

StationGraph build_explicit(std::shared_ptr<BusNetwork const> net,
                            GraphRecipe recipe) {
  validate_stop_sets(*net, recipe.stop_sets);
  auto const& sets = recipe.stop_sets;

  std::unordered_set<StopIdx> anchors;
  for (auto const& s : sets) anchors.insert(begin(s), end(s));

  std::vector<GraphEdge> usable;
  for (auto const& e : recipe.edges) {
    if (e.from == e.to) continue;
    if (recipe.excluded.contains(e.from) || recipe.excluded.contains(e.to)) {
      continue;
    }
    usable.push_back(e);
  }

  std::vector<GraphEdge> edges;
  add_chain_edges(sets, edges);
  for (std::size_t i = 0; i + 1 < sets.size(); ++i) {
    auto const from = sets[i].back();
    auto const to = sets[i + 1].front();
    // Segment edges may touch anchors only at the segment's own endpoints.
    std::vector<GraphEdge> seg;
    for (auto const& e : usable) {
      bool const from_ok = e.from == from || !anchors.contains(e.from);
      bool const to_ok = e.to == to || !anchors.contains(e.to);
      if (from_ok && to_ok && e.from != to && e.to != from) seg.push_back(e);
    }
    auto pruned = prune_to_paths(seg, from, to);
    if (pruned.empty()) {
      throw EmptyGraphError{"no feasible path " + describe_gap(*net, from, to)};
    }
    edges.insert(end(edges), begin(pruned), end(pruned));
  }
  auto const o = sets.front().front();
  auto const d = sets.back().back();
  return finalize_graph(std::move(net), edges, o, d, std::move(recipe));
}

}  // namespace

void GraphParams::validate() const {
  if (!(min_spacing_km > 0.0) || !(max_spacing_km > min_spacing_km)) {
    throw std::invalid_argument{"require 0 < min_spacing < max_spacing"};
  }
  if (!(progress_slack >= 0.0) || !(progress_slack < 1.0)) {
    throw std::invalid_argument{"progress_slack must lie in [0, 1)"};
  }
}

StationGraph finalize_graph(std::shared_ptr<BusNetwork const> net,
                            std::vector<GraphEdge> const& raw, StopIdx origin,
                            StopIdx destination, GraphRecipe recipe) {
  if (origin == destination) {
    throw std::invalid_argument{"origin and destination must differ"};
  }
  auto const edges = prune_to_paths(raw, origin, destination);
  if (edges.empty()) {
    throw EmptyGraphError{"no feasible path " +
                          describe_gap(*net, origin, destination)};
  }

  std::vector<StopIdx> nodes;
  for (auto const& e : edges) {
    nodes.push_back(e.from);
    nodes.push_back(e.to);
  }
  std::sort(begin(nodes), end(nodes));
  nodes.erase(std::unique(begin(nodes), end(nodes)), end(nodes));

  std::unordered_map<StopIdx, std::uint32_t> local;
  for (std::uint32_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = i;
  std::vector<std::vector<std::uint32_t>> out(nodes.size());
  std::vector<std::uint32_t> indeg(nodes.size(), 0);
  for (auto const& e : edges) {
    out[local[e.from]].push_back(local[e.to]);
    ++indeg[local[e.to]];
  }

  // Kahn's algorithm; ties by distance to destination (desc), then stop id.
  std::vector<double> to_dest(nodes.size());
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    to_dest[i] = net->road_distance(nodes[i], destination);
  }
  auto const later = [&](std::uint32_t a, std::uint32_t b) {
    if (to_dest[a] != to_dest[b]) return to_dest[a] < to_dest[b];
    return net->stop(nodes[a]).id > net->stop(nodes[b]).id;
  };
  std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, decltype(later)>
      ready{later};
  for (std::uint32_t i = 0; i < nodes.size(); ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<std::uint32_t> order;
  while (!ready.empty()) {
    auto const u = ready.top();
    ready.pop();
    order.push_back(u);
    for (auto const v : out[u]) {
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  if (order.size() != nodes.size()) {
    throw std::logic_error{"station graph contains a cycle"};
  }

  StationGraph g;
  g.net_ = std::move(net);
  g.recipe_ = std::move(recipe);
  std::vector<NodeIdx> topo(nodes.size());
  for (NodeIdx i = 0; i < order.size(); ++i) topo[order[i]] = i;
  g.stops_.resize(nodes.size());
  for (std::uint32_t i = 0; i < nodes.size(); ++i) g.stops_[topo[i]] = nodes[i];
  for (NodeIdx i = 0; i < g.stops_.size(); ++i) g.node_of_[g.stops_[i]] = i;
  g.succ_.assign(nodes.size(), {});
  g.pred_.assign(nodes.size(), {});
  for (auto const& e : edges) {
    auto const u = topo[local[e.from]];
    auto const v = topo[local[e.to]];
    g.succ_[u].push_back(v);
    g.pred_[v].push_back(u);
  }
  for (auto& s : g.succ_) std::sort(begin(s), end(s));
  for (auto& p : g.pred_) std::sort(begin(p), end(p));
  g.edge_count_ = edges.size();

  // origin and destination are the unique source and sink
  if (g.stops_.front() != origin || g.stops_.back() != destination) {
    throw std::logic_error{"origin/destination are not the graph source/sink"};
  }

  g.counts_ = count_paths(g);

  auto const n = g.size();
  std::vector<std::vector<double>> pred_km(n);  // parallel to pred_
  for (NodeIdx v = 0; v < n; ++v) {
    for (auto const p : g.pred_[v]) pred_km[v].push_back(g.road_distance(p, v));
  }
  g.transit_ = DenseMatrix{n, kInf};
  for (NodeIdx u = 0; u < n; ++u) {
    g.transit_(u, u) = 0.0;
    for (NodeIdx v = u + 1; v < n; ++v) {
      double best = kInf;
      auto const& preds = g.pred_[v];
      // preds are sorted, so those at or after u form a suffix
      auto const first = std::lower_bound(preds.begin(), preds.end(), u) - preds.begin();
      for (auto i = static_cast<std::size_t>(first); i < preds.size(); ++i) {
        double const via = g.transit_(u, preds[i]);
        if (via != kInf) best = std::min(best, via + pred_km[v][i]);
      }
      g.transit_(u, v) = best;
    }
  }
  return g;
}

PathCounts count_paths(StationGraph const& g) {
  auto const n = g.size();
  PathCounts pc;
  pc.to_dest.assign(n, 0.0);
  if (n == 0) return pc;
  pc.to_dest[g.destination()] = 1.0;
  for (NodeIdx u = static_cast<NodeIdx>(n - 1); u-- > 0;) {
    double sum = 0;
    for (auto const v : g.successors(u)) sum += pc.to_dest[v];
    pc.to_dest[u] = sum;
  }
  pc.between = DenseMatrix{n, 0.0};
  for (NodeIdx u = 0; u < n; ++u) {
    pc.between(u, u) = 1.0;
    for (NodeIdx v = u + 1; v < n; ++v) {
      double sum = 0;
      auto const preds = g.predecessors(v);
      for (auto it = std::lower_bound(preds.begin(), preds.end(), u); it != preds.end(); ++it) {
        sum += pc.between(u, *it);
      }
      pc.between(u, v) = sum;
    }
  }
  return pc;
}

// ---------------------------------------------------------------------------

std::optional<NodeIdx> StationGraph::node_of(StopIdx s) const {
  auto const it = node_of_.find(s);
  if (it == end(node_of_)) return std::nullopt;
  return it->second;
}

bool StationGraph::has_edge(NodeIdx u, NodeIdx v) const {
  auto const& s = succ_[u];
  return std::binary_search(begin(s), end(s), v);
}

std::vector<GraphEdge> StationGraph::edges() const {
  std::vector<GraphEdge> out;
  out.reserve(edge_count_);
  for (NodeIdx u = 0; u < size(); ++u) {
    for (auto const v : succ_[u]) out.push_back({stops_[u], stops_[v]});
  }
  std::sort(begin(out), end(out));
  return out;
}

bool StationGraph::is_anchor(StopIdx s) const {
  for (auto const& set : recipe_.stop_sets) {
    if (std::find(begin(set), end(set), s) != end(set)) return true;
  }
  return false;
}

bool StationGraph::structurally_equal(StationGraph const& o) const {
  return stops_ == o.stops_ && succ_ == o.succ_ &&
         counts_.to_dest == o.counts_.to_dest &&
         counts_.between == o.counts_.between;
}

bool StationGraph::is_path(std::span<NodeIdx const> nodes) const {
  if (nodes.size() < 2 || nodes.front() != origin() ||
      nodes.back() != destination()) {
    return false;
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i - 1] >= size() || nodes[i] >= size() ||
        !has_edge(nodes[i - 1], nodes[i])) {
      return false;
    }
  }
  return true;
}

std::optional<std::vector<NodeIdx>> StationGraph::nodes_of(
    std::span<StopIdx const> route) const {
  std::vector<NodeIdx> out;
  out.reserve(route.size());
  for (auto const s : route) {
    auto const n = node_of(s);
    if (!n) return std::nullopt;
    out.push_back(*n);
  }
  return out;
}

// ---------------------------------------------------------------------------

StationGraph rebuild_graph(std::shared_ptr<BusNetwork const> net,
                           GraphRecipe recipe) {
  if (recipe.kind == GraphRecipe::Kind::geometric) {
    return build_geometric(std::move(net), std::move(recipe));
  }
  return build_explicit(std::move(net), std::move(recipe));
}

StationGraph build_station_graph(std::shared_ptr<BusNetwork const> net,
                                 StopIdx origin, StopIdx destination,
                                 GraphParams params) {
  if (origin == destination) {
    throw std::invalid_argument{"origin and destination must differ"};
  }
  GraphRecipe r;
  r.kind = GraphRecipe::Kind::geometric;
  r.params = params;
  r.stop_sets = {{origin}, {destination}};
  return build_geometric(std::move(net), std::move(r));
}

StationGraph build_anchored_graph(std::shared_ptr<BusNetwork const> net,
                                  StopSets const& stop_sets,
                                  GraphParams params) {
  GraphRecipe r;
  r.kind = GraphRecipe::Kind::geometric;
  r.params = params;
  r.stop_sets = stop_sets;
  return build_geometric(std::move(net), std::move(r));
}

StationGraph graph_for_route(std::shared_ptr<BusNetwork const> net, RouteIdx route,
                             StopSets const& via, GraphParams params) {
  auto const& stops = net->route(route).stops;
  StopSets sets{{stops.front()}};
  sets.insert(sets.end(), via.begin(), via.end());
  sets.push_back({stops.back()});
  return build_anchored_graph(std::move(net), sets, params);
}

StationGraph build_graph_from_edges(std::shared_ptr<BusNetwork const> net,
                                    StopIdx origin, StopIdx destination,
                                    std::vector<GraphEdge> edges,
                                    StopSets stop_sets) {
  if (stop_sets.empty()) stop_sets = {{origin}, {destination}};
  if (stop_sets.front().front() != origin ||
      stop_sets.back().back() != destination) {
    throw std::invalid_argument{
        "stop sets must start at the origin and end at the destination"};
  }
  GraphRecipe r;
  r.kind = GraphRecipe::Kind::explicit_edges;
  r.stop_sets = std::move(stop_sets);
  r.edges = std::move(edges);
  return build_explicit(std::move(net), std::move(r));
}

StationGraph edit_graph(StationGraph const& g, std::set<StopIdx> const& add,
                        std::set<StopIdx> const& remove) {
  for (auto const s : remove) {
    if (g.is_anchor(s)) {
      throw GraphConstraintError{"cannot remove anchored stop '" +
                                 g.network().stop(s).id + "'"};
    }
  }
  auto recipe = g.recipe();
  bool readmits = false;
  for (auto const s : add) {
    if (recipe.excluded.erase(s) > 0) readmits = true;
  }
  for (auto const s : remove) {
    if (add.contains(s)) continue;
    recipe.excluded.insert(s);
  }

  // Removal only: when the edge rule is pairwise and segments cannot trade
  // stops, the new graph is the old one minus the removed stops, re-pruned.
  bool const pairwise =
      recipe.kind == GraphRecipe::Kind::explicit_edges ||
      (recipe.stop_sets.size() == 2 && recipe.stop_sets[0].size() == 1 &&
       recipe.stop_sets[1].size() == 1);
  if (!readmits && pairwise) {
    std::vector<GraphEdge> kept;
    for (auto const& e : g.edges()) {
      if (!recipe.excluded.contains(e.from) && !recipe.excluded.contains(e.to)) {
        kept.push_back(e);
      }
    }
    return finalize_graph(g.network_ptr(), kept, g.stop(g.origin()),
                          g.stop(g.destination()), std::move(recipe));
  }
  return rebuild_graph(g.network_ptr(), std::move(recipe));
}

}  // namespace busroute
