#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <sstream>

#include "busroute/network.hpp"
#include "support.hpp"

namespace busroute {
namespace {

using namespace std::chrono_literals;
using testing::stop_name;

geo::LocalProjection const kProj{geo::LatLon{39.9, 116.4}};

void add_stop_km(NetworkBuilder& b, std::string const& id, double x, double y) {
  auto const p = kProj.inverse({x, y});
  b.add_stop(id, id, p.lat, p.lon);
}

Timestamp at(char const* iso) { return *parse_iso8601(iso); }

IngestResult ingest(std::string const& stops, std::string const& routes,
                    std::string const& trips, std::string const* road = nullptr) {
  std::istringstream s{stops}, r{routes}, t{trips};
  std::istringstream d{road ? *road : std::string{}};
  return ingest_network(s, r, t, road ? &d : nullptr);
}

std::string const kStops =
    "stop_id,name,lat,lon\n"
    "A,Alpha,39.90,116.40\n"
    "B,Beta,39.90,116.41\n"
    "C,\"Gamma, east\",39.90,116.42\n";
std::string const kRoutes = "route_id,stop_ids\nR1,A|B|C\n";

TEST(Ingest, ParsesAllThreeSources) {
  auto const res = ingest(kStops, kRoutes,
                          "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n"
                          "k1,2024-01-01T08:00:00Z,R1,A,C\n"
                          "k2,2024-01-01T09:00:00Z,R1,B,C\n");
  auto const& net = *res.network;
  EXPECT_EQ(net.stops().size(), 3u);
  EXPECT_EQ(net.routes().size(), 1u);
  EXPECT_EQ(net.trips().size(), 2u);
  EXPECT_EQ(net.stop(*net.find_stop("C")).name, "Gamma, east");
  EXPECT_EQ(net.route(0).stops.size(), 3u);
  for (auto const& t : net.trips()) EXPECT_LT(t.tap_on, t.tap_off);
}

TEST(Ingest, MinimalNetwork) {
  auto const res = ingest("stop_id,name,lat,lon\nA,a,1,2\n", "route_id,stop_ids\n",
                          "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n");
  EXPECT_EQ(res.network->stops().size(), 1u);
  EXPECT_EQ(res.network->routes().size(), 0u);
  EXPECT_EQ(res.network->trips().size(), 0u);
}

TEST(Ingest, DropsRowsBreakingReferentialIntegrity) {
  auto const res = ingest(kStops + "D,bad,95,116\n",
                          kRoutes + "R2,A|Z\nR3,A|A|B\n",
                          "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n"
                          "k1,2024-01-01T08:00:00Z,R1,A,C\n"
                          "k2,2024-01-01T08:00:00Z,NOPE,A,C\n");
  EXPECT_EQ(res.report.dropped_stops, 1u);
  EXPECT_EQ(res.report.dropped_routes, 2u);
  EXPECT_EQ(res.report.dropped_trips, 1u);
  EXPECT_EQ(res.network->trips().size(), 1u);
}

TEST(Ingest, DropsTripsRunningBackwards) {
  auto const res = ingest(kStops, kRoutes,
                          "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n"
                          "k1,2024-01-01T08:00:00Z,R1,C,A\n"
                          "k1,not-a-time,R1,A,C\n");
  EXPECT_EQ(res.report.dropped_trips, 2u);
  EXPECT_TRUE(res.network->trips().empty());
}

TEST(Ingest, RejectsMalformedHeaderWithLine) {
  try {
    ingest("id,name,lat,lon\nA,a,1,2\n", kRoutes, "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n");
    FAIL() << "expected IngestError";
  } catch (IngestError const& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(ingest(kStops, "route,stops\n", "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n"),
               IngestError);
}

TEST(Ingest, RejectsEmptyStopFile) {
  EXPECT_THROW(ingest("", kRoutes, ""), IngestError);
  EXPECT_THROW(ingest("stop_id,name,lat,lon\n", "route_id,stop_ids\n",
                      "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n"),
               IngestError);
}

TEST(Ingest, UsesRoadDistanceTable) {
  std::string const road = "from_stop_id,to_stop_id,km\nA,B,2.5\n";
  auto const res = ingest(kStops, kRoutes,
                          "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n", &road);
  auto const& net = *res.network;
  auto const a = *net.find_stop("A"), b = *net.find_stop("B"), c = *net.find_stop("C");
  EXPECT_DOUBLE_EQ(net.road_distance(a, b), 2.5);
  EXPECT_DOUBLE_EQ(net.road_distance(b, c),
                   geo::haversine_km(net.stop(b).pos, net.stop(c).pos) * 1.3);
}

TEST(Ingest, IsIdempotent) {
  std::string const trips =
      "card_id,tap_on,route_id,board_stop_id,alight_stop_id\n"
      "k1,2024-01-01T08:00:00Z,R1,A,C\n"
      "k1,2024-01-01T08:20:00Z,R1,A,B\n";
  auto const x = ingest(kStops, kRoutes, trips);
  auto const y = ingest(kStops, kRoutes, trips);
  ASSERT_EQ(x.network->trips().size(), y.network->trips().size());
  for (std::size_t i = 0; i < x.network->trips().size(); ++i) {
    auto const& p = x.network->trips()[i];
    auto const& q = y.network->trips()[i];
    EXPECT_EQ(p.tap_on, q.tap_on);
    EXPECT_EQ(p.tap_off, q.tap_off);
    EXPECT_EQ(p.board, q.board);
    EXPECT_EQ(p.alight, q.alight);
  }
}

// ---------------------------------------------------------------------------
// Tap-off inference

/// Route A-B-C-D with road segments 3, 3 and 4 km.
std::shared_ptr<BusNetwork const> ten_km_route(
    std::function<void(NetworkBuilder&)> const& extra = {}) {
  NetworkBuilder b;
  add_stop_km(b, "A", 0, 0);
  add_stop_km(b, "B", 2.5, 0);
  add_stop_km(b, "C", 5, 0);
  add_stop_km(b, "D", 8, 0);
  add_stop_km(b, "E", 8.3, 0);
  b.add_road_distance("A", "B", 3);
  b.add_road_distance("B", "C", 3);
  b.add_road_distance("C", "D", 4);
  b.add_road_distance("D", "E", 0.4);
  std::vector<std::string> r{"A", "B", "C", "D", "E"};
  b.add_route("R", r);
  if (extra) extra(b);
  return b.build();
}

TEST(TapOff, TenKilometresTwoIntermediateStops) {
  auto const net = ten_km_route([](NetworkBuilder& b) {
    b.add_trip("k", at("2024-01-01T08:00:00Z"), "R", "A", "D");
  });
  EXPECT_EQ(net->trips()[0].tap_off, at("2024-01-01T08:34:00Z"));
}

TEST(TapOff, AdjacentStop) {
  auto const net = ten_km_route([](NetworkBuilder& b) {
    b.add_trip("k", at("2024-01-01T08:00:00Z"), "R", "D", "E");
  });
  EXPECT_EQ(net->trips()[0].tap_off - net->trips()[0].tap_on, 72s);
}

TEST(TapOff, TransferTapOnWins) {
  auto const net = ten_km_route([](NetworkBuilder& b) {
    add_stop_km(b, "F", 12, 0);
    b.add_road_distance("D", "F", 4);
    std::vector<std::string> r2{"D", "F"};
    b.add_route("R2", r2);
    b.add_trip("k", at("2024-01-01T08:00:00Z"), "R", "A", "D");
    b.add_trip("k", at("2024-01-01T08:31:00Z"), "R2", "D", "F");
  });
  auto const r = *net->find_route("R");
  for (auto const& t : net->trips()) {
    if (t.route == r) EXPECT_EQ(t.tap_off, at("2024-01-01T08:31:00Z"));
  }
}

TEST(TapOff, LateOrSameRouteTapOnDoesNotOverride) {
  auto const net = ten_km_route([](NetworkBuilder& b) {
    b.add_trip("k", at("2024-01-01T08:00:00Z"), "R", "A", "D");
    b.add_trip("k", at("2024-01-01T08:31:00Z"), "R", "D", "E");
    b.add_trip("m", at("2024-01-01T08:00:00Z"), "R", "A", "D");
  });
  for (auto const& t : net->trips()) {
    if (t.tap_on == at("2024-01-01T08:00:00Z")) {
      EXPECT_EQ(t.tap_off, at("2024-01-01T08:34:00Z"));
    }
  }
}

TEST(TapOff, InvalidDirectionThrows) {
  auto const net = ten_km_route([](NetworkBuilder& b) {
    b.add_trip("k", at("2024-01-01T08:00:00Z"), "R", "A", "D");
  });
  auto trip = net->trips()[0];
  std::swap(trip.board_pos, trip.alight_pos);
  std::swap(trip.board, trip.alight);
  EXPECT_THROW(infer_tap_off_time(trip, *net), InvalidTripError);
}

TEST(TapOff, MonotoneInDistanceAndStops) {
  auto const net = ten_km_route([](NetworkBuilder& b) {
    b.add_trip("k", at("2024-01-01T08:00:00Z"), "R", "A", "D");
  });
  auto const base = net->trips()[0];
  Timestamp prev = base.tap_on;
  for (std::uint32_t a = 1; a < 5; ++a) {
    auto t = base;
    t.alight_pos = a;
    t.alight = net->route(t.route).stops[a];
    auto const off = estimate_tap_off_time(t, *net);
    EXPECT_GT(off, prev);
    prev = off;
  }
}

// ---------------------------------------------------------------------------
// Demand

TEST(Demand, ExactStopMatching) {
  auto const net = ten_km_route([](NetworkBuilder& b) {
    for (int i = 0; i < 5; ++i) {
      b.add_trip("k" + std::to_string(i), at("2024-01-01T08:00:00Z"), "R", "A", "B");
    }
  });
  auto const d = build_demand_matrix(*net, TimeWindow::all());
  EXPECT_EQ(d.count(*net->find_stop("A"), *net->find_stop("B")), 5u);
  EXPECT_EQ(d.total(), 5u);
  auto const empty = build_demand_matrix(
      *net, TimeWindow{at("2024-01-01T08:00:00Z"), at("2024-01-01T08:00:00Z")});
  EXPECT_TRUE(empty.empty());
  EXPECT_THROW(build_demand_matrix(*net, TimeWindow::all(), -1.0), std::invalid_argument);
}

TEST(Demand, CatchmentMatchesHaversineScan) {
  std::mt19937_64 rng{17};
  NetworkBuilder b;
  std::uniform_real_distribution<double> xd(0, 3), yd(0, 1);
  for (int i = 0; i < 30; ++i) add_stop_km(b, stop_name(i), xd(rng), yd(rng));
  std::vector<std::string> all;
  for (int i = 0; i < 30; ++i) all.push_back(stop_name(i));
  b.add_route("L", all);
  std::uniform_int_distribution<int> sd(0, 29), md(0, 600);
  for (int k = 0; k < 300; ++k) {
    int u = sd(rng), v = sd(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    b.add_trip("c" + std::to_string(k), at("2024-01-01T06:00:00Z") + std::chrono::minutes{md(rng)},
               "L", stop_name(u), stop_name(v));
  }
  auto const net = b.build();
  TimeWindow const w{at("2024-01-01T07:00:00Z"), at("2024-01-01T13:00:00Z")};
  double const radius = 300.0;
  auto const d = build_demand_matrix(*net, w, radius);
  auto const n = net->stops().size();
  std::uint64_t in_window = 0;
  for (auto const& t : net->trips()) in_window += w.contains(t.tap_on);
  auto const d0 = build_demand_matrix(*net, w, 0.0);
  EXPECT_EQ(d0.total(), in_window);
  for (StopIdx u = 0; u < n; ++u) {
    for (StopIdx v = 0; v < n; ++v) {
      std::uint64_t expect = 0;
      for (auto const& t : net->trips()) {
        if (!w.contains(t.tap_on)) continue;
        if (geo::haversine_km(net->stop(t.board).pos, net->stop(u).pos) * 1000 <= radius &&
            geo::haversine_km(net->stop(t.alight).pos, net->stop(v).pos) * 1000 <= radius) {
          ++expect;
        }
      }
      ASSERT_EQ(d.count(u, v), expect) << u << "->" << v;
    }
  }
}

}  // namespace
}  // namespace busroute
