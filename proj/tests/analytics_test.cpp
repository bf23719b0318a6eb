#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "busroute/analytics.hpp"
#include "support.hpp"

namespace busroute {
namespace {

using testing::stop_name;

geo::LocalProjection const kProj{geo::LatLon{40.0, 116.0}};

/// Builder with stops placed at local km coordinates.
void add_stop_km(NetworkBuilder& b, std::string const& id, double x, double y) {
  auto const p = kProj.inverse({x, y});
  b.add_stop(id, id, p.lat, p.lon);
}

Timestamp at(char const* iso) { return *parse_iso8601(iso); }

double polygon_area(geometry::MultiPolygon const& mp) {
  double a = 0.0;
  for (auto const& poly : mp) {
    a += std::abs(geometry::signed_area(poly.outer));
    for (auto const& h : poly.holes) a -= std::abs(geometry::signed_area(h));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Zones

TEST(Zones, ThreeSeparatedRowsBecomeThreeZones) {
  NetworkBuilder b;
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 5; ++col) {
      add_stop_km(b, stop_name(static_cast<std::size_t>(row * 5 + col)), col * 0.5,
                  row * 5.0);
    }
  }
  auto const net = b.build();
  auto const part = compute_zones(*net, 3);
  ASSERT_EQ(part.zones.size(), 3u);
  for (auto const& z : part.zones) {
    ASSERT_EQ(z.stops.size(), 5u);
    auto const row = z.stops.front() / 5;
    for (auto const s : z.stops) EXPECT_EQ(s / 5, row);
    for (auto const s : z.stops) EXPECT_TRUE(part.contains(z.id, net->stop(s).pos));
  }
}

TEST(Zones, SingleZoneCoversTheBox) {
  std::mt19937_64 rng{3};
  auto const net = testing::line_network(12, rng);
  auto const part = compute_zones(*net, 1);
  ASSERT_EQ(part.zones.size(), 1u);
  EXPECT_EQ(part.zones[0].stops.size(), 12u);
  ASSERT_EQ(part.zones[0].boundary.size(), 1u);
  EXPECT_EQ(part.zones[0].boundary[0].holes.size(), 0u);
  EXPECT_EQ(part.zones[0].boundary[0].outer.size(), 4u);
}

TEST(Zones, RejectsBadCounts) {
  std::mt19937_64 rng{4};
  auto const net = testing::line_network(5, rng);
  EXPECT_THROW(compute_zones(*net, 0), AnalyticsParameterError);
  EXPECT_THROW(compute_zones(*net, 6), AnalyticsParameterError);
  EXPECT_NO_THROW(compute_zones(*net, 5));
}

TEST(Zones, CoincidentStopsStillPartition) {
  NetworkBuilder b;
  for (int i = 0; i < 6; ++i) add_stop_km(b, stop_name(i), (i % 3) * 1.0, 0.0);
  auto const net = b.build();
  auto const part = compute_zones(*net, 3);
  for (StopIdx s = 0; s < 6; ++s) {
    EXPECT_TRUE(part.contains(part.zone_of[s], net->stop(s).pos));
  }
}

/// Random stop sets: exact partition, size ratio at most 2, every stop inside
/// its zone, zone areas tiling the grown box, and sample points falling in
/// the zone of their nearest stop.
TEST(Zones, RandomPartitionInvariants) {
  std::mt19937_64 rng{2024};
  for (int rep = 0; rep < 100; ++rep) {
    std::uniform_int_distribution<std::size_t> nd(2, 250);
    auto const n = nd(rng);
    std::uniform_int_distribution<std::size_t> zd(1, std::min<std::size_t>(n, 25));
    auto const zc = zd(rng);
    std::uniform_real_distribution<double> xd(-8.0, 8.0), yd(-5.0, 5.0);
    NetworkBuilder b;
    for (std::size_t i = 0; i < n; ++i) add_stop_km(b, stop_name(i), xd(rng), yd(rng));
    auto const net = b.build();
    auto const part = compute_zones(*net, zc);
    ASSERT_EQ(part.zones.size(), zc);

    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (auto const& z : part.zones) {
      lo = std::min(lo, z.stops.size());
      hi = std::max(hi, z.stops.size());
      for (auto const s : z.stops) {
        ++seen[s];
        EXPECT_EQ(part.zone_of[s], z.id);
        EXPECT_TRUE(part.contains(z.id, net->stop(s).pos)) << "rep " << rep;
      }
    }
    for (auto const c : seen) ASSERT_EQ(c, 1);
    ASSERT_GE(lo, 1u);
    EXPECT_LE(static_cast<double>(hi) / static_cast<double>(lo), 2.0);
    EXPECT_LE(hi - lo, 1u);

    std::vector<geo::XY> pts;
    double min_x = 1e18, min_y = 1e18, max_x = -1e18, max_y = -1e18;
    for (auto const& s : net->stops()) {
      auto const p = part.projection.forward(s.pos);
      pts.push_back(p);
      min_x = std::min(min_x, p.x), max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y), max_y = std::max(max_y, p.y);
    }
    double const mx = std::max((max_x - min_x) * 0.05, 0.05);
    double const my = std::max((max_y - min_y) * 0.05, 0.05);
    double const box_area = (max_x - min_x + 2 * mx) * (max_y - min_y + 2 * my);
    double total = 0.0;
    for (auto const& z : part.zones) total += polygon_area(z.boundary);
    EXPECT_NEAR(total, box_area, box_area * 1e-9) << "rep " << rep;

    std::uniform_real_distribution<double> sx(min_x - mx, max_x + mx), sy(min_y - my, max_y + my);
    for (int k = 0; k < 50; ++k) {
      geo::XY const q{sx(rng), sy(rng)};
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        double const d = std::hypot(pts[i].x - q.x, pts[i].y - q.y);
        if (d < best_d) best_d = d, best = i;
      }
      EXPECT_TRUE(part.contains(part.zone_of[best], part.projection.inverse(q)))
          << "rep " << rep << " sample " << k;
    }
  }
}

// ---------------------------------------------------------------------------
// Zone statistics and route metrics

/// West cluster (x ~ 0) and east cluster (x ~ 10), one route crossing, one
/// route staying west.
struct TwoClusters {
  std::shared_ptr<BusNetwork const> net;
  ZonePartition part;
};

TwoClusters two_clusters() {
  NetworkBuilder b;
  add_stop_km(b, "w0", 0.0, 0.0);
  add_stop_km(b, "w1", 0.0, 1.0);
  add_stop_km(b, "e0", 10.0, 0.0);
  add_stop_km(b, "e1", 10.0, 1.0);
  std::vector<std::string> cross{"w0", "e0"}, west{"w0", "w1"};
  b.add_route("cross", cross);
  b.add_route("west", west);
  b.add_trip("c1", at("2024-01-01T08:00:00Z"), "cross", "w0", "e0");
  b.add_trip("c2", at("2024-01-01T09:00:00Z"), "cross", "w0", "e0");
  b.add_trip("c3", at("2024-01-01T10:00:00Z"), "west", "w0", "w1");
  b.add_trip("c4", at("2024-01-03T10:00:00Z"), "west", "w0", "w1");
  TwoClusters t;
  t.net = b.build();
  t.part = compute_zones(*t.net, 2);
  return t;
}

TEST(ZoneStatistics, HandComputedTwoZones) {
  auto const t = two_clusters();
  auto const west = t.part.zone_of[*t.net->find_stop("w0")];
  auto const east = t.part.zone_of[*t.net->find_stop("e0")];
  ASSERT_NE(west, east);
  auto const stats = zone_statistics(t.part, *t.net, TimeWindow::all(), CostParams{});
  EXPECT_EQ(stats[west].route_count, 2u);
  EXPECT_EQ(stats[east].route_count, 1u);
  EXPECT_EQ(stats[west].passenger_volume, 4.0);
  EXPECT_EQ(stats[east].passenger_volume, 0.0);
  EXPECT_DOUBLE_EQ(stats[west].stop_count_avg, 2.0);

  // Both crossing trips leave westward zone heading east (sector 4 of 16)
  // and arrive in the east zone from the west (sector 12).
  for (int s = 0; s < kBearingSectors; ++s) {
    EXPECT_EQ(stats[west].outflow_by_bearing[s], s == 4 ? 2u : 0u) << s;
    EXPECT_EQ(stats[east].inflow_by_bearing[s], s == 12 ? 2u : 0u) << s;
    EXPECT_EQ(stats[west].inflow_by_bearing[s], 0u);
    EXPECT_EQ(stats[east].outflow_by_bearing[s], 0u);
  }

  auto const day = TimeWindow{at("2024-01-01T00:00:00Z"), at("2024-01-02T00:00:00Z")};
  auto const one_day = zone_statistics(t.part, *t.net, day, CostParams{});
  EXPECT_EQ(one_day[west].passenger_volume, 3.0);
}

TEST(ZoneStatistics, AveragesMatchPerRouteMetrics) {
  auto const t = two_clusters();
  CostParams const cost;
  auto const west = t.part.zone_of[*t.net->find_stop("w0")];
  auto const stats = zone_statistics(t.part, *t.net, TimeWindow::all(), cost);
  auto const a = route_metrics(*t.net, 0, TimeWindow::all(), cost);
  auto const c = route_metrics(*t.net, 1, TimeWindow::all(), cost);
  EXPECT_DOUBLE_EQ(stats[west].route_length_avg, (a.length_km + c.length_km) / 2);
  EXPECT_DOUBLE_EQ(stats[west].service_cost_avg,
                   (a.criteria.service_cost + c.criteria.service_cost) / 2);
  EXPECT_DOUBLE_EQ(stats[west].directness_avg,
                   (a.criteria.directness + c.criteria.directness) / 2);
  EXPECT_DOUBLE_EQ(stats[west].average_load,
                   (route_load(*t.net, 0, TimeWindow::all()) +
                    route_load(*t.net, 1, TimeWindow::all())) / 2);
}

std::shared_ptr<BusNetwork const> three_stop_route(int trips_ac, int trips_bc) {
  NetworkBuilder b;
  add_stop_km(b, "A", 0.0, 0.0);
  add_stop_km(b, "B", 1.5, 0.0);
  add_stop_km(b, "C", 3.0, 0.5);
  b.add_road_distance("A", "B", 2.0);
  b.add_road_distance("B", "C", 3.0);
  b.add_road_distance("A", "C", 4.0);
  std::vector<std::string> stops{"A", "B", "C"};
  b.add_route("R", stops);
  for (int i = 0; i < trips_ac; ++i) {
    b.add_trip("a" + std::to_string(i), at("2024-01-01T08:00:00Z"), "R", "A", "C");
  }
  for (int i = 0; i < trips_bc; ++i) {
    b.add_trip("b" + std::to_string(i), at("2024-01-01T12:00:00Z"), "R", "B", "C");
  }
  return b.build();
}

TEST(RouteMetrics, LoadIsLengthWeightedOnboardPerDay) {
  auto const net = three_stop_route(1, 1);
  // Segment A-B carries 1, B-C carries 2: (1*2 + 2*3) / (5 km * 1 day).
  EXPECT_DOUBLE_EQ(route_load(*net, 0, TimeWindow::all()), 1.6);
  auto const two_days = TimeWindow{at("2024-01-01T00:00:00Z"), at("2024-01-03T00:00:00Z")};
  EXPECT_DOUBLE_EQ(window_days(*net, two_days), 2.0);
  EXPECT_DOUBLE_EQ(route_load(*net, 0, two_days), 0.8);
}

TEST(RouteMetrics, HandComputedCriteria) {
  auto const net = three_stop_route(3, 2);
  CostParams const cost;
  auto const m = route_metrics(*net, 0, TimeWindow::all(), cost);
  EXPECT_EQ(m.stop_count, 3u);
  EXPECT_DOUBLE_EQ(m.length_km, 5.0);
  EXPECT_DOUBLE_EQ(m.criteria.passenger_flow, 5.0);
  EXPECT_DOUBLE_EQ(m.criteria.service_time, 5.0 / 20.0 + 2.0 / 60.0);
  // along/road: A-B 2/2, B-C 3/3, A-C 5/4.
  EXPECT_DOUBLE_EQ(m.criteria.directness, 1.0 + 1.0 + 1.25);
  EXPECT_DOUBLE_EQ(m.criteria.construction_cost, 3 * cost.per_stop_cost);
}

// ---------------------------------------------------------------------------
// Ranking

std::shared_ptr<BusNetwork const> ranking_network() {
  NetworkBuilder b;
  for (int i = 0; i < 6; ++i) add_stop_km(b, stop_name(i), i * 1.0, 0.0);
  std::vector<std::string> r1{stop_name(0), stop_name(1)};
  std::vector<std::string> r2{stop_name(0), stop_name(1), stop_name(2)};
  std::vector<std::string> r3{stop_name(0), stop_name(1), stop_name(2), stop_name(3),
                              stop_name(4), stop_name(5)};
  b.add_route("r1", r1);
  b.add_route("r2", r2);
  b.add_route("r3", r3);
  // Ridership 0, 5, 10.
  for (int i = 0; i < 5; ++i) {
    b.add_trip("x" + std::to_string(i), at("2024-01-01T08:00:00Z"), "r2", stop_name(0), stop_name(2));
  }
  for (int i = 0; i < 10; ++i) {
    b.add_trip("y" + std::to_string(i), at("2024-01-01T08:00:00Z"), "r3", stop_name(1), stop_name(4));
  }
  return b.build();
}

CriterionWeights only(Criterion c, double w = 1.0) {
  CriterionWeights ws{};
  ws[static_cast<std::size_t>(c)] = w;
  return ws;
}

TEST(Ranking, FlowOnlyScoresAreNormalisedRidership) {
  auto const net = ranking_network();
  auto const ranked = rank_routes(*net, only(Criterion::passenger_flow), {},
                                  TimeWindow::all(), CostParams{});
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].route_id, "r3");
  EXPECT_EQ(ranked[1].route_id, "r2");
  EXPECT_EQ(ranked[2].route_id, "r1");
  EXPECT_DOUBLE_EQ(ranked[0].score, 1.0);
  EXPECT_DOUBLE_EQ(ranked[1].score, 0.5);
  EXPECT_DOUBLE_EQ(ranked[2].score, 0.0);
}

TEST(Ranking, MinimisedCriterionPrefersFewerStops) {
  auto const net = ranking_network();
  auto const ranked = rank_routes(*net, only(Criterion::construction_cost), {},
                                  TimeWindow::all(), CostParams{});
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].route_id, "r1");
  EXPECT_EQ(ranked[1].route_id, "r2");
  EXPECT_EQ(ranked[2].route_id, "r3");
  // Stops 2, 3, 6 -> oriented scores 1, 3/4, 0.
  EXPECT_DOUBLE_EQ(ranked[1].score, 0.75);
}

TEST(Ranking, MixedWeightsHandComputed) {
  auto const net = ranking_network();
  CriterionWeights ws{};
  ws[static_cast<std::size_t>(Criterion::passenger_flow)] = 2.0;
  ws[static_cast<std::size_t>(Criterion::construction_cost)] = 1.0;
  auto const ranked = rank_routes(*net, ws, {}, TimeWindow::all(), CostParams{});
  // r1: 2*0 + 1; r2: 2*0.5 + 0.75; r3: 2*1 + 0.
  ASSERT_EQ(ranked.size(), 3u);
  EXPECT_EQ(ranked[0].route_id, "r3");
  EXPECT_DOUBLE_EQ(ranked[0].score, 2.0);
  EXPECT_EQ(ranked[1].route_id, "r2");
  EXPECT_DOUBLE_EQ(ranked[1].score, 1.75);
  EXPECT_EQ(ranked[2].route_id, "r1");
  EXPECT_DOUBLE_EQ(ranked[2].score, 1.0);
}

TEST(Ranking, InvariantUnderWeightRescaling) {
  auto const net = ranking_network();
  CriterionWeights ws{0.3, 1.1, 0.7, 0.2, 0.9};
  CriterionWeights scaled{};
  for (std::size_t i = 0; i < ws.size(); ++i) scaled[i] = ws[i] * 13.0;
  auto const a = rank_routes(*net, ws, {}, TimeWindow::all(), CostParams{});
  auto const b = rank_routes(*net, scaled, {}, TimeWindow::all(), CostParams{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].route_id, b[i].route_id);
    EXPECT_NEAR(b[i].score, a[i].score * 13.0, 1e-12);
  }
}

TEST(Ranking, FiltersAndValidation) {
  auto const net = ranking_network();
  RankFilters f;
  f.stop_count = Interval{3, 10};
  auto const ranked = rank_routes(*net, only(Criterion::passenger_flow), f,
                                  TimeWindow::all(), CostParams{});
  ASSERT_EQ(ranked.size(), 2u);
  EXPECT_EQ(ranked[0].route_id, "r3");
  RankFilters g;
  g.criteria[Criterion::passenger_flow] = Interval{1, 7};
  auto const mid = rank_routes(*net, only(Criterion::passenger_flow), g,
                               TimeWindow::all(), CostParams{});
  ASSERT_EQ(mid.size(), 1u);
  EXPECT_EQ(mid[0].route_id, "r2");

  EXPECT_THROW(rank_routes(*net, CriterionWeights{}, {}, TimeWindow::all(), CostParams{}),
               AnalyticsParameterError);
  EXPECT_THROW(rank_routes(*net, only(Criterion::directness, -1.0), {}, TimeWindow::all(),
                           CostParams{}),
               AnalyticsParameterError);
}

// ---------------------------------------------------------------------------
// Flow matrices and transfers

TEST(FlowMatrix, IntensitySaturatesAtThreshold) {
  auto const net = three_stop_route(10, 5);
  auto const f = flow_matrix(*net, "R", TimeWindow::all(), 10.0);
  EXPECT_DOUBLE_EQ(f.cells(0, 2), 10.0);
  EXPECT_DOUBLE_EQ(f.intensities(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(f.cells(1, 2), 5.0);
  EXPECT_DOUBLE_EQ(f.intensities(1, 2), 0.5);
  EXPECT_DOUBLE_EQ(f.intensities(0, 1), 0.0);
  auto const low = flow_matrix(*net, "R", TimeWindow::all(), 4.0);
  EXPECT_DOUBLE_EQ(low.intensities(1, 2), 1.0);
}

TEST(FlowMatrix, EmptyWindowIsAllZero) {
  auto const net = three_stop_route(10, 5);
  auto const w = TimeWindow{at("2025-01-01T00:00:00Z"), at("2025-01-02T00:00:00Z")};
  auto const f = flow_matrix(*net, "R", w, 10.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(f.boardings[i], 0u);
    EXPECT_EQ(f.alightings[i], 0u);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(f.cells(i, j), 0.0);
    for (auto const c : f.check_in[i]) EXPECT_EQ(c, 0u);
    EXPECT_TRUE(f.transfers[i].in_routes.empty());
  }
}

TEST(FlowMatrix, ConservationOnRandomTrips) {
  std::mt19937_64 rng{11};
  NetworkBuilder b;
  for (int i = 0; i < 8; ++i) add_stop_km(b, stop_name(i), i * 0.7, 0.0);
  std::vector<std::string> all;
  for (int i = 0; i < 8; ++i) all.push_back(stop_name(i));
  b.add_route("L", all);
  std::uniform_int_distribution<int> sd(0, 7), hd(0, 23 * 60);
  int added = 0;
  for (int k = 0; k < 400; ++k) {
    int u = sd(rng), v = sd(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    auto const t = at("2024-03-04T00:00:00Z") + std::chrono::minutes{hd(rng)};
    if (b.add_trip("k" + std::to_string(k), t, "L", stop_name(u), stop_name(v))) ++added;
  }
  auto const net = b.build();
  auto const f = flow_matrix(*net, "L", TimeWindow::all(), 5.0);
  double cells = 0;
  std::uint64_t board = 0, alight = 0, in = 0, out = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    double row = 0, col = 0;
    for (std::size_t j = 0; j < 8; ++j) row += f.cells(i, j), col += f.cells(j, i);
    EXPECT_EQ(row, static_cast<double>(f.boardings[i]));
    EXPECT_EQ(col, static_cast<double>(f.alightings[i]));
    for (std::size_t j = 0; j <= i; ++j) EXPECT_EQ(f.cells(i, j), 0.0);
    cells += row;
    board += f.boardings[i];
    alight += f.alightings[i];
    for (auto const c : f.check_in[i]) in += c;
    for (auto const c : f.check_out[i]) out += c;
  }
  EXPECT_EQ(cells, static_cast<double>(added));
  EXPECT_EQ(board, static_cast<std::uint64_t>(added));
  EXPECT_EQ(alight, board);
  EXPECT_EQ(in, board);
  EXPECT_EQ(out, board);
}

TEST(FlowMatrix, ErrorsAndTimeBins) {
  auto const net = three_stop_route(1, 0);
  EXPECT_THROW(flow_matrix(*net, "nope", TimeWindow::all(), 10.0), UnknownRouteError);
  EXPECT_THROW(flow_matrix(*net, "R", TimeWindow::all(), 0.0), AnalyticsParameterError);
  // 2024-01-01 is a Monday.
  EXPECT_EQ(time_bin_of(at("2024-01-01T08:30:00Z"), TimeBin::hourly), 8u);
  EXPECT_EQ(time_bin_of(at("2024-01-01T08:30:00Z"), TimeBin::weekday), 0u);
  EXPECT_EQ(time_bin_of(at("2024-01-07T23:59:59Z"), TimeBin::weekday), 6u);
  EXPECT_EQ(time_bin_of(at("2024-01-07T23:59:59Z"), TimeBin::hourly), 23u);
  EXPECT_EQ(time_bin_of(at("1969-12-31T22:00:00Z"), TimeBin::hourly), 22u);
  EXPECT_EQ(time_bin_of(at("1969-12-31T22:00:00Z"), TimeBin::weekday), 2u);
}

/// Card rides R1 from P to Q, then boards R2 at a stop 200 m from Q.
std::shared_ptr<BusNetwork const> transfer_network(int wait_after_estimate_min) {
  NetworkBuilder b;
  add_stop_km(b, "P", 0.0, 0.0);
  add_stop_km(b, "Q", 4.0, 0.0);
  add_stop_km(b, "Q2", 4.0, 0.2);
  add_stop_km(b, "Z", 8.0, 0.2);
  b.add_road_distance("P", "Q", 5.0);
  b.add_road_distance("Q2", "Z", 5.0);
  std::vector<std::string> r1{"P", "Q"}, r2{"Q2", "Z"};
  b.add_route("R1", r1);
  b.add_route("R2", r2);
  auto const t0 = at("2024-01-01T08:00:00Z");
  b.add_trip("card", t0, "R1", "P", "Q");
  // Driving estimate for 5 km at 20 km/h: 15 minutes.
  b.add_trip("card", t0 + std::chrono::minutes{15 + wait_after_estimate_min}, "R2", "Q2",
             "Z");
  return b.build();
}

TEST(Transfers, NearbyQuickReboardingIsLinked) {
  auto const net = transfer_network(10);
  auto const links = detect_transfers(*net);
  ASSERT_EQ(links.size(), 1u);
  EXPECT_EQ(net->route(links[0].from_route).id, "R1");
  EXPECT_EQ(net->route(links[0].to_route).id, "R2");
  EXPECT_EQ(net->stop(links[0].from_stop).id, "Q");
  EXPECT_EQ(net->stop(links[0].to_stop).id, "Q2");
  EXPECT_LE(links[0].tap_off, links[0].tap_on);

  auto const f = flow_matrix(*net, "R1", TimeWindow::all(), 1.0);
  EXPECT_EQ(f.transfers[1].out_routes.at(*net->find_route("R2")), 1u);
  auto const g = flow_matrix(*net, "R2", TimeWindow::all(), 1.0);
  EXPECT_EQ(g.transfers[0].in_routes.at(*net->find_route("R1")), 1u);
}

TEST(Transfers, LongWaitIsNotLinked) {
  auto const net = transfer_network(45);
  EXPECT_TRUE(detect_transfers(*net).empty());
}

TEST(Transfers, WalkLimitApplies) {
  auto const net = transfer_network(10);
  EXPECT_TRUE(detect_transfers(*net, TransferParams{150.0, 30.0}).empty());
  EXPECT_THROW(detect_transfers(*net, TransferParams{-1.0, 30.0}), AnalyticsParameterError);
}

TEST(Transfers, BadgeTotalsMatchLinks) {
  std::mt19937_64 rng{5};
  NetworkBuilder b;
  for (int i = 0; i < 6; ++i) add_stop_km(b, stop_name(i), i * 0.3, 0.0);
  std::vector<std::string> fwd{stop_name(0), stop_name(1), stop_name(2), stop_name(3),
                               stop_name(4), stop_name(5)};
  std::vector<std::string> bwd(fwd.rbegin(), fwd.rend());
  b.add_route("F", fwd);
  b.add_route("B", bwd);
  std::uniform_int_distribution<int> sd(0, 5), gap(1, 40);
  for (int c = 0; c < 60; ++c) {
    auto t = at("2024-01-02T07:00:00Z") + std::chrono::minutes{c};
    for (int leg = 0; leg < 3; ++leg) {
      int u = sd(rng), v = sd(rng);
      if (u == v) continue;
      auto const route = leg % 2 == 0 ? "F" : "B";
      if ((leg % 2 == 0) != (u < v)) std::swap(u, v);
      b.add_trip("c" + std::to_string(c), t, route, stop_name(u), stop_name(v));
      t += std::chrono::minutes{gap(rng)};
    }
  }
  auto const net = b.build();
  auto const links = detect_transfers(*net);
  ASSERT_FALSE(links.empty());
  std::uint64_t out = 0, in = 0;
  for (auto const id : {"F", "B"}) {
    auto const f = flow_matrix(*net, id, TimeWindow::all(), 1.0);
    for (auto const& badge : f.transfers) {
      for (auto const& [r, n] : badge.out_routes) out += n;
      for (auto const& [r, n] : badge.in_routes) in += n;
    }
  }
  EXPECT_EQ(out, links.size());
  EXPECT_EQ(in, links.size());
}

}  // namespace
}  // namespace busroute
