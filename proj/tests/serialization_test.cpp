#include <gtest/gtest.h>

#include <cmath>

#include "busroute/serialization.hpp"
#include "dataset.hpp"
#include "support.hpp"

namespace busroute {
namespace {

using io::FormatError;
using io::Json;

TEST(CostParamsJson, RoundTrips) {
  CostParams c;
  c.per_stop_cost = 77;
  c.speed = 18.5;
  auto const back = io::cost_params_from_json(Json::parse(io::cost_params_json(c).dump()));
  EXPECT_EQ(back.per_stop_cost, 77);
  EXPECT_EQ(back.speed, 18.5);
  EXPECT_EQ(back.headway, c.headway);
}

TEST(CostParamsJson, PartialObjectKeepsDefaults) {
  auto const c = io::cost_params_from_json(Json{{"headway", 0.5}});
  EXPECT_EQ(c.headway, 0.5);
  EXPECT_EQ(c.per_stop_cost, CostParams{}.per_stop_cost);
}

TEST(CostParamsJson, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(io::cost_params_from_json(Json{{"speeed", 3}}), FormatError);
  EXPECT_THROW(io::cost_params_from_json(Json{{"speed", "fast"}}), FormatError);
  EXPECT_THROW(io::cost_params_from_json(Json{{"speed", 0}}), FormatError);
  EXPECT_THROW(io::cost_params_from_json(Json::array()), FormatError);
}

TEST(CostParamsJson, LoadsFromFile) {
  testing::TempDir d{"cost"};
  testing::write_file(d / "cost.json", R"({"crew_wage": 40})");
  EXPECT_EQ(io::load_cost_params(d / "cost.json").crew_wage, 40);
  testing::write_file(d / "broken.json", "{");
  EXPECT_THROW(io::load_cost_params(d / "broken.json"), FormatError);
  EXPECT_THROW(io::load_cost_params(d / "missing.json"), FormatError);
}

TEST(Ranges, ParsesBoundsAndOpenEnds) {
  auto const r = io::parse_ranges("service_time=0.1:0.5, construction_cost=:300,passenger_flow=10:");
  ASSERT_TRUE(r[Criterion::service_time]);
  EXPECT_EQ(r[Criterion::service_time]->min, 0.1);
  EXPECT_EQ(r[Criterion::service_time]->max, 0.5);
  EXPECT_TRUE(std::isinf(r[Criterion::construction_cost]->min));
  EXPECT_EQ(r[Criterion::construction_cost]->max, 300);
  EXPECT_TRUE(std::isinf(r[Criterion::passenger_flow]->max));
  EXPECT_FALSE(r[Criterion::directness]);
  EXPECT_FALSE(io::parse_ranges("")[Criterion::service_time]);
}

TEST(Ranges, Rejects) {
  EXPECT_THROW(io::parse_ranges("service_time"), FormatError);
  EXPECT_THROW(io::parse_ranges("speed=1:2"), FormatError);
  EXPECT_THROW(io::parse_ranges("service_time=2:1"), FormatError);
  EXPECT_THROW(io::parse_ranges("service_time=a:1"), FormatError);
}

TEST(Ranges, JsonListsOnlyActiveCriteria) {
  auto const j = io::ranges_json(io::parse_ranges("directness=1:2"));
  EXPECT_EQ(j.dump(), R"({"directness":[1.0,2.0]})");
}

TEST(RankFilters, SplitsGeometryFromCriteria) {
  auto const f = io::parse_rank_filters("length_km=2:10,stop_count=3:,directness=:5");
  ASSERT_TRUE(f.length_km);
  EXPECT_EQ(f.length_km->min, 2);
  ASSERT_TRUE(f.stop_count);
  EXPECT_EQ(f.stop_count->min, 3);
  ASSERT_TRUE(f.criteria[Criterion::directness]);
  EXPECT_EQ(f.criteria[Criterion::directness]->max, 5);
  EXPECT_FALSE(io::parse_rank_filters("").length_km);
}

TEST(Weights, PositionalAndNamed) {
  auto const a = io::parse_weights("1,2,3,4,5");
  EXPECT_EQ(a[0], 1);
  EXPECT_EQ(a[4], 5);
  auto const b = io::parse_weights("directness=2,service_cost=0.5");
  EXPECT_EQ(b[static_cast<std::size_t>(Criterion::directness)], 2);
  EXPECT_EQ(b[static_cast<std::size_t>(Criterion::service_cost)], 0.5);
  EXPECT_EQ(b[static_cast<std::size_t>(Criterion::service_time)], 0);
  EXPECT_THROW(io::parse_weights("1,2"), FormatError);
  EXPECT_THROW(io::parse_weights("flow=1"), FormatError);
  EXPECT_THROW(io::parse_weights("directness=2,3"), FormatError);
}

TEST(StopSets, ParsesGroups) {
  std::mt19937_64 rng{1};
  auto const net = testing::line_network(4, rng);
  auto const sets = io::parse_stop_sets("s000; s001,s002 ;s003", *net);
  ASSERT_EQ(sets.size(), 3u);
  EXPECT_EQ(sets[1], (std::vector<StopIdx>{1, 2}));
  EXPECT_THROW(io::parse_stop_sets("s000;;s003", *net), FormatError);
  EXPECT_THROW(io::parse_stop_sets("s000;zz", *net), FormatError);
}

TEST(Window, ParsesAndValidates) {
  auto const all = io::parse_window("", "");
  EXPECT_FALSE(all.bounded());
  auto const w = io::parse_window("2024-03-01T00:00:00Z", "2024-03-02T00:00:00Z");
  EXPECT_TRUE(w.bounded());
  EXPECT_EQ(w.end - w.begin, std::chrono::hours{24});
  EXPECT_TRUE(io::parse_window("2024-03-01T00:00:00Z", "2024-03-01T00:00:00Z").empty());
  EXPECT_THROW(io::parse_window("yesterday", ""), FormatError);
  EXPECT_THROW(io::parse_window("2024-03-02T00:00:00Z", "2024-03-01T00:00:00Z"), FormatError);
}

TEST(ParetoJson, RoundTripsThroughFile) {
  auto const dag = testing::random_dag(5, 9, 0.4);
  auto s = create_session(dag.graph, dag.demand, CostParams{});
  testing::run_to_exhaustion(*s);
  auto const& routes = s->pareto().routes();
  ASSERT_GT(routes.size(), 0u);
  auto const name = io::namer(*dag.net);
  auto const text = io::pareto_json(routes, dag.graph->stops(), name).dump();

  auto const file = io::parse_pareto(Json::parse(text));
  ASSERT_EQ(file.routes.size(), routes.size());
  std::map<std::uint64_t, ParetoRoute const*> by_id;
  for (auto const& r : routes) by_id[r.id] = &r;
  for (auto const& c : file.routes) {
    auto const* orig = by_id.at(c.id);
    ASSERT_EQ(c.stops.size(), orig->stops.size());
    for (std::size_t i = 0; i < c.stops.size(); ++i) {
      EXPECT_EQ(file.stop_ids[c.stops[i]], name(orig->stops[i]));
    }
    for (auto const k : kAllCriteria) EXPECT_EQ(c.criteria[k], orig->criteria[k]);
  }
  // Re-serialising the parsed file reproduces the original bytes.
  std::vector<ParetoRoute> again;
  for (auto const& c : file.routes) again.push_back({c.id, c.stops, c.criteria});
  EXPECT_EQ(io::pareto_json(again, file.stop_order, file.namer()).dump(), text);
}

TEST(ParetoJson, RejectsMalformed) {
  EXPECT_THROW(io::parse_pareto(Json::object()), FormatError);
  EXPECT_THROW(io::parse_pareto(Json{{"routes", Json::array({Json{{"id", -1}}})}}), FormatError);
  EXPECT_THROW(io::parse_pareto(Json::parse(
                   R"({"routes":[{"id":1,"stops":["a",2],"criteria":{}}]})")),
               FormatError);
}

TEST(SnapshotJson, OmitsTimestampOnRequest) {
  auto const dag = testing::chain(4);
  auto s = create_session(dag.graph, dag.demand, CostParams{});
  s->resume();
  s->step(3);
  auto const name = io::namer(*dag.net);
  auto const plain = io::snapshot_json(s->snapshot(), name, false);
  EXPECT_FALSE(plain.contains("timestamp"));
  EXPECT_EQ(plain["routes"].size(), 1u);
  EXPECT_EQ(plain["histograms"].size(), kCriterionCount);
  EXPECT_TRUE(io::snapshot_json(s->snapshot(), name, true).contains("timestamp"));
}

TEST(RankCsv, QuotesAwkwardIdsAndKeepsPrecision) {
  RankedRoute r;
  r.route_id = "line \"7\", east";
  r.metrics.criteria[Criterion::directness] = 0.1 + 0.2;
  r.score = 1.0 / 3.0;
  auto const csv = io::rank_csv(std::vector<RankedRoute>{r});
  EXPECT_NE(csv.find("\"line \"\"7\"\", east\""), std::string::npos) << csv;
  EXPECT_NE(csv.find("0.30000000000000004"), std::string::npos) << csv;
}

}  // namespace
}  // namespace busroute
