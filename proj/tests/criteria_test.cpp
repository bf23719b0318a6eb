#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace busroute {
namespace {

using testing::chain;
using testing::enumerate_paths;
using testing::random_dag;
using testing::stops_of;

// Literal double sums over topological indices, no precomputed tables.
double hand_expanded_directness(StationGraph const& g,
                                std::vector<NodeIdx> const& prefix) {
  auto const n = static_cast<NodeIdx>(g.size());
  auto const rk = prefix.back();
  double fixed = 0.0;
  for (std::size_t j = 0; j + 1 < prefix.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) fixed += pair_ratio(g, prefix[i], prefix[j]);
  }
  double cross = 0.0;
  for (auto const u : prefix) {
    for (NodeIdx v = rk; v < n; ++v) cross += pair_ratio(g, u, v);
  }
  double inner = 0.0;
  for (NodeIdx v = rk; v < n; ++v) {
    for (NodeIdx u = rk + 1; u < v; ++u) inner += pair_ratio(g, u, v);
  }
  return fixed + (cross + inner) / g.paths_to_dest(rk);
}

// All prefixes of all routes, deduplicated by construction order.
std::vector<std::vector<NodeIdx>> all_prefixes(StationGraph const& g) {
  std::set<std::vector<NodeIdx>> seen;
  for (auto const& r : enumerate_paths(g)) {
    for (std::size_t k = 1; k <= r.size(); ++k) {
      seen.emplace(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  return {seen.begin(), seen.end()};
}

std::vector<std::vector<NodeIdx>> completions(StationGraph const& g,
                                              std::vector<NodeIdx> const& prefix) {
  std::vector<std::vector<NodeIdx>> out;
  for (auto const& tail : enumerate_paths(g, prefix.back())) {
    auto r = prefix;
    r.insert(r.end(), tail.begin() + 1, tail.end());
    out.push_back(std::move(r));
  }
  return out;
}

TEST(ServiceCost, ReferenceFixture) {
  CostParams c;
  c.service_span = 18;
  c.headway = 0.25;
  c.crew_wage = 30;
  c.fuel_cost = 1.2;
  c.maintenance_cost = 0.8;
  c.speed = 20;
  EXPECT_EQ(service_cost(1.5, c), 15120.0);
}

TEST(ServiceCost, RejectsNonPositiveParameters) {
  CostParams c;
  c.headway = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Criteria, NamesRoundTrip) {
  for (auto const c : kAllCriteria) EXPECT_EQ(parse_criterion(criterion_name(c)), c);
  EXPECT_FALSE(parse_criterion("speed").has_value());
}

TEST(SubspaceDirectness, MatchesHandExpansionOnRandomDags) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto d = random_dag(seed, 4 + seed % 9);
    auto const& g = *d.graph;
    auto const tables = precompute_directness_tables(g);
    for (auto const& p : all_prefixes(g)) {
      EXPECT_NEAR(subspace_directness(p, tables, g), hand_expanded_directness(g, p),
                  1e-9);
    }
  }
}

TEST(SubspaceDirectness, FullChainEqualsRouteDirectness) {
  for (std::size_t n = 2; n <= 12; ++n) {
    auto d = chain(n, n);
    auto const& g = *d.graph;
    auto const tables = precompute_directness_tables(g);
    auto const route = enumerate_paths(g).front();
    auto const exact = evaluate_route(stops_of(g, route), g, d.demand, {}).directness;
    for (std::size_t k = 1; k <= route.size(); ++k) {
      std::vector<NodeIdx> prefix(route.begin(), route.begin() + static_cast<std::ptrdiff_t>(k));
      EXPECT_NEAR(subspace_directness(prefix, tables, g), exact, 1e-9) << n << " " << k;
    }
  }
}

TEST(SubspaceDirectness, ThreeStopChainCountsEveryPair) {
  auto d = chain(3);
  auto const& g = *d.graph;
  auto const tables = precompute_directness_tables(g);
  std::vector<NodeIdx> full{0, 1, 2};
  double expected = 0.0;
  for (NodeIdx u = 0; u < 3; ++u) {
    for (NodeIdx v = u + 1; v < 3; ++v) expected += pair_ratio(g, u, v);
  }
  EXPECT_NEAR(subspace_directness(full, tables, g), expected, 1e-12);
}

TEST(SubspaceConstructionCost, EqualsEnumerationMean) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto d = random_dag(seed, 3 + seed % 10);
    auto const& g = *d.graph;
    double const cs = 7.5;
    for (auto const& p : all_prefixes(g)) {
      double sum = 0.0;
      auto const all = completions(g, p);
      for (auto const& r : all) sum += static_cast<double>(r.size()) * cs;
      EXPECT_NEAR(subspace_construction_cost(g, p, cs),
                  sum / static_cast<double>(all.size()), 1e-9);
    }
  }
}

TEST(SubspaceConstructionCost, DiamondIsThreeStops) {
  std::mt19937_64 rng{3};
  auto net = testing::line_network(4, rng);
  auto g = build_graph_from_edges(net, 0, 3, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  std::vector<NodeIdx> root{g.origin()};
  EXPECT_DOUBLE_EQ(subspace_construction_cost(g, root, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(subspace_construction_cost(g, root, 50.0), 150.0);
}

TEST(EvaluateRoute, RejectsNonPaths) {
  auto d = random_dag(5, 8);
  auto const& g = *d.graph;
  std::vector<StopIdx> backwards{g.stop(g.destination()), g.stop(g.origin())};
  EXPECT_THROW(evaluate_route(backwards, g, d.demand, {}), RouteEvaluationError);
  std::vector<StopIdx> not_ending{g.stop(g.origin()), g.stop(1)};
  if (g.destination() != 1) {
    EXPECT_THROW(evaluate_route(not_ending, g, d.demand, {}), RouteEvaluationError);
  }
}

TEST(EvaluateRoute, PairwiseDefinitions) {
  auto d = chain(4);
  auto const& g = *d.graph;
  CostParams cost;
  std::vector<StopIdx> r{0, 1, 2, 3};
  auto const c = evaluate_route(r, g, d.demand, cost);
  double len = 0.0;
  for (int i = 0; i < 3; ++i) len += d.net->road_distance(r[i], r[i + 1]);
  EXPECT_NEAR(c.service_time, len / 20.0 + 2 * 2.0 / 60.0, 1e-12);
  double flow = 0.0;
  for (StopIdx u = 0; u < 4; ++u) {
    for (StopIdx v = u + 1; v < 4; ++v) flow += static_cast<double>(d.demand.count(u, v));
  }
  EXPECT_EQ(c.passenger_flow, flow);
  EXPECT_EQ(c.construction_cost, 4 * cost.per_stop_cost);
  EXPECT_NEAR(c.service_cost, service_cost(c.service_time, cost), 1e-9);
}

TEST(CriteriaContext, EvaluateAgreesWithFreeFunction) {
  CostParams cost;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = random_dag(seed, 9);
    CriteriaContext ctx{d.graph, d.demand, cost};
    for (auto const& r : enumerate_paths(*d.graph)) {
      auto const a = ctx.evaluate(r);
      auto const b = evaluate_route(stops_of(*d.graph, r), *d.graph, d.demand, cost);
      for (auto const c : kAllCriteria) EXPECT_NEAR(a[c], b[c], 1e-9 * (1 + std::abs(b[c])));
    }
  }
}

TEST(CriteriaContext, EstimatesAreCompletionMeans) {
  CostParams cost;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto d = random_dag(seed, 3 + seed % 10);
    auto const& g = *d.graph;
    CriteriaContext ctx{d.graph, d.demand, cost};
    auto const tables = precompute_directness_tables(g);
    for (auto const& p : all_prefixes(g)) {
      auto const est = ctx.estimate(ctx.prefix_of(p));
      double time = 0, flow = 0, cons = 0;
      auto const all = completions(g, p);
      for (auto const& r : all) {
        auto const c = ctx.evaluate(r);
        time += c.service_time;
        flow += c.passenger_flow;
        cons += c.construction_cost;
      }
      auto const m = static_cast<double>(all.size());
      EXPECT_NEAR(est.service_time, time / m, 1e-9);
      EXPECT_NEAR(est.passenger_flow, flow / m, 1e-9 * (1 + flow / m));
      EXPECT_NEAR(est.construction_cost, cons / m, 1e-9 * (1 + cons / m));
      EXPECT_NEAR(est.directness, subspace_directness(p, tables, g), 1e-9);
    }
  }
}

TEST(CriteriaContext, BoundsContainEveryCompletion) {
  CostParams cost;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto d = random_dag(seed, 3 + seed % 10);
    auto const& g = *d.graph;
    CriteriaContext ctx{d.graph, d.demand, cost};
    for (auto const& p : all_prefixes(g)) {
      auto const b = ctx.bounds(ctx.prefix_of(p));
      CriterionVector lo, hi;
      bool first = true;
      for (auto const& r : completions(g, p)) {
        auto const c = ctx.evaluate(r);
        for (auto const k : kAllCriteria) {
          double const eps = 1e-9 * (1 + std::abs(c[k]));
          EXPECT_LE(b[k].min, c[k] + eps);
          EXPECT_GE(b[k].max, c[k] - eps);
          lo[k] = first ? c[k] : std::min(lo[k], c[k]);
          hi[k] = first ? c[k] : std::max(hi[k], c[k]);
        }
        first = false;
      }
      // Time and stop-count driven criteria are bounded exactly.
      for (auto const k : {Criterion::service_time, Criterion::construction_cost,
                           Criterion::service_cost}) {
        EXPECT_NEAR(b[k].min, lo[k], 1e-9 * (1 + std::abs(lo[k])));
        EXPECT_NEAR(b[k].max, hi[k], 1e-9 * (1 + std::abs(hi[k])));
      }
    }
  }
}

TEST(CriteriaContext, BoundsAreExactOnChains) {
  CostParams cost;
  for (std::size_t n = 2; n <= 10; ++n) {
    auto d = chain(n, n + 10);
    CriteriaContext ctx{d.graph, d.demand, cost};
    auto const route = enumerate_paths(*d.graph).front();
    auto const exact = ctx.evaluate(route);
    for (std::size_t k = 1; k <= route.size(); ++k) {
      std::vector<NodeIdx> p(route.begin(), route.begin() + static_cast<std::ptrdiff_t>(k));
      auto const b = ctx.bounds(ctx.prefix_of(p));
      for (auto const c : kAllCriteria) {
        EXPECT_NEAR(b[c].min, exact[c], 1e-9 * (1 + std::abs(exact[c])));
        EXPECT_NEAR(b[c].max, exact[c], 1e-9 * (1 + std::abs(exact[c])));
      }
    }
  }
}

}  // namespace
}  // namespace busroute
