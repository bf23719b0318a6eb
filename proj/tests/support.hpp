// Shared fixtures and brute-force oracles for the test suites.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "busroute/criteria.hpp"
#include "busroute/network.hpp"
#include "busroute/pareto_search.hpp"
#include "busroute/station_graph.hpp"

namespace busroute::testing {

inline std::string stop_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%03zu", i);
  return buf;
}

/// Stops laid out west to east with small north-south jitter, so a stop with
/// a higher index is (roughly) closer to the eastern end.
inline std::shared_ptr<BusNetwork const> line_network(std::size_t n,
                                                      std::mt19937_64& rng,
                                                      double spacing_km = 0.8) {
  NetworkBuilder b;
  std::uniform_real_distribution<double> jitter(-0.004, 0.004);
  double const dlon = spacing_km / 111.0;
  for (std::size_t i = 0; i < n; ++i) {
    b.add_stop(stop_name(i), stop_name(i), 40.0 + jitter(rng),
               116.0 + dlon * static_cast<double>(i) + jitter(rng) * 0.2);
  }
  return b.build();
}

/// Random DAG over stops 0..n-1 with forward edges only, plus the backbone
/// chain so every stop lies on some origin-destination path.
struct RandomDag {
  std::shared_ptr<BusNetwork const> net;
  std::shared_ptr<StationGraph const> graph;
  DemandMatrix demand;
};

inline RandomDag random_dag(std::uint64_t seed, std::size_t n,
                            double edge_prob = 0.35,
                            StopSets const& anchors = {}) {
  std::mt19937_64 rng{seed};
  RandomDag d;
  d.net = line_network(n, rng);
  std::bernoulli_distribution coin(edge_prob);
  std::vector<GraphEdge> edges;
  for (StopIdx u = 0; u + 1 < n; ++u) {
    edges.push_back({u, u + 1});
    for (StopIdx v = u + 2; v < n; ++v) {
      if (coin(rng)) edges.push_back({u, v});
    }
  }
  d.graph = std::make_shared<StationGraph const>(build_graph_from_edges(
      d.net, 0, static_cast<StopIdx>(n - 1), edges, anchors));
  std::uniform_int_distribution<int> count(0, 9);
  std::bernoulli_distribution sparse(0.5);
  for (StopIdx u = 0; u < n; ++u) {
    for (StopIdx v = 0; v < n; ++v) {
      if (u != v && sparse(rng)) {
        auto const c = count(rng);
        if (c > 0) d.demand.add(u, v, static_cast<std::uint64_t>(c));
      }
    }
  }
  return d;
}

/// Chain graph 0 -> 1 -> ... -> n-1.
inline RandomDag chain(std::size_t n, std::uint64_t seed = 1) {
  std::mt19937_64 rng{seed};
  RandomDag d;
  d.net = line_network(n, rng);
  std::vector<GraphEdge> edges;
  for (StopIdx u = 0; u + 1 < n; ++u) edges.push_back({u, u + 1});
  d.graph = std::make_shared<StationGraph const>(
      build_graph_from_edges(d.net, 0, static_cast<StopIdx>(n - 1), edges));
  for (StopIdx u = 0; u < n; ++u) {
    for (StopIdx v = u + 1; v < n; ++v) d.demand.add(u, v, u + v + 1);
  }
  return d;
}

/// Every path from `from` to the destination (graph nodes).
inline std::vector<std::vector<NodeIdx>> enumerate_paths(StationGraph const& g,
                                                         NodeIdx from) {
  std::vector<std::vector<NodeIdx>> out;
  std::vector<NodeIdx> cur{from};
  std::function<void()> dfs = [&] {
    if (cur.back() == g.destination()) {
      out.push_back(cur);
      return;
    }
    for (auto const s : g.successors(cur.back())) {
      cur.push_back(s);
      dfs();
      cur.pop_back();
    }
  };
  dfs();
  return out;
}

inline std::vector<std::vector<NodeIdx>> enumerate_paths(StationGraph const& g) {
  return enumerate_paths(g, g.origin());
}

inline std::vector<StopIdx> stops_of(StationGraph const& g,
                                     std::vector<NodeIdx> const& nodes) {
  std::vector<StopIdx> s;
  for (auto const n : nodes) s.push_back(g.stop(n));
  return s;
}

/// Straight pairwise dominance check over every enumerated route.
inline std::set<std::vector<StopIdx>> brute_force_pareto(
    StationGraph const& g, DemandMatrix const& demand, CostParams const& cost,
    CriterionRanges const& ranges = {},
    Orientations const& orient = default_orientations()) {
  std::vector<std::pair<std::vector<StopIdx>, CriterionVector>> all;
  for (auto const& p : enumerate_paths(g)) {
    auto stops = stops_of(g, p);
    auto const c = evaluate_route(stops, g, demand, cost);
    if (ranges.admits(c)) all.emplace_back(std::move(stops), c);
  }
  std::set<std::vector<StopIdx>> front;
  for (auto const& [s, c] : all) {
    bool dominated = false;
    for (auto const& [t, d] : all) {
      if (dominates(d, c, orient)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.insert(s);
  }
  return front;
}

inline std::set<std::vector<StopIdx>> route_set(ParetoSet const& p) {
  std::set<std::vector<StopIdx>> s;
  for (auto const& r : p.routes()) s.insert(r.stops);
  return s;
}

/// Runs a session until the tree is exhausted (or `max_cycles` elapse).
inline void run_to_exhaustion(SearchSession& s, std::uint64_t max_cycles = 1'000'000) {
  s.resume();
  s.step(max_cycles);
}

}  // namespace busroute::testing
