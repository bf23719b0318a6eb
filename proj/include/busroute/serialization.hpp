#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "busroute/analytics.hpp"
#include "busroute/conflict_resolution.hpp"
#include "busroute/criteria.hpp"
#include "busroute/network.hpp"
#include "busroute/pareto_search.hpp"
#include "busroute/station_graph.hpp"

namespace busroute::io {

/// Keys keep insertion order so that output files are stable and readable.
using Json = nlohmann::ordered_json;

/// Malformed JSON document or command-line value.
class FormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Maps stop indices to external ids.
using StopNamer = std::function<std::string(StopIdx)>;
StopNamer namer(BusNetwork const& net);

Json criteria_json(CriterionVector const& c);
CriterionVector criteria_from_json(Json const& j);

Json cost_params_json(CostParams const& c);
/// Missing fields keep their defaults; unknown fields are rejected.
CostParams cost_params_from_json(Json const& j);
CostParams load_cost_params(std::filesystem::path const& path);

Json ranges_json(CriterionRanges const& r);

/// {iteration, pareto_count, status, [timestamp], histograms, histogram_ranges,
/// routes: [{id, stops, criteria}]}.
Json snapshot_json(ProgressSnapshot const& s, StopNamer const& name,
                   bool with_timestamp = true);

Json route_json(std::uint64_t id, std::span<StopIdx const> stops,
                CriterionVector const& c, StopNamer const& name);

/// Pareto set file: {stop_order, routes}. Routes are listed by id.
Json pareto_json(std::span<ParetoRoute const> routes,
                 std::span<StopIdx const> stop_order, StopNamer const& name);

/// A Pareto file read back without a network: stop ids are interned in order
/// of first appearance in `stop_order` (then in the routes).
struct ParetoFile {
  std::vector<std::string> stop_ids;
  std::vector<CandidateRoute> routes;
  std::vector<StopIdx> stop_order;

  StopNamer namer() const;
};
ParetoFile parse_pareto(Json const& j);

/// {candidates, final_route, clusters: [{id, pattern ("*" for wildcards),
/// core, members, criterion_stats}], conflicts, active_conflict, markers,
/// history_depth}.
Json resolution_json(ResolutionSession const& s, StopNamer const& name);

/// FeatureCollection: Point per node, LineString per edge.
Json graph_geojson(StationGraph const& g);

/// One (Multi)Polygon feature per zone; stats are attached when given.
Json zones_geojson(ZonePartition const& p, BusNetwork const& net,
                   std::span<ZoneStats const> stats = {});

/// LineString per route through its stop positions.
Json routes_geojson(BusNetwork const& net, std::span<ParetoRoute const> routes);

/// Header `route_id,service_time,passenger_flow,directness,construction_cost,service_cost,score`.
std::string rank_csv(std::span<RankedRoute const> rows);
Json rank_json(std::span<RankedRoute const> rows);

Json matrix_json(FlowMatrix const& f, BusNetwork const& net);
Json transfers_json(std::span<TransferLink const> links, BusNetwork const& net);

/// Complete network dump (stops, routes, road table size, trips with inferred
/// tap-off) plus the ingest report. Used to check ingest idempotence.
Json network_json(BusNetwork const& net, IngestReport const& report);

// ---------------------------------------------------------------------------
// Flag values

/// `name=lo:hi` items separated by commas; either bound may be empty.
CriterionRanges parse_ranges(std::string_view text);
/// Criterion ranges plus `length_km=lo:hi` and `stop_count=lo:hi`.
RankFilters parse_rank_filters(std::string_view text);
/// Five comma-separated numbers in criterion order, or `name=w` items (others 0).
std::array<double, kCriterionCount> parse_weights(std::string_view text);
/// Stop sets separated by `;`, stops inside a set by `,`.
StopSets parse_stop_sets(std::string_view text, BusNetwork const& net);
/// ISO-8601 bounds; empty strings leave the side open.
TimeWindow parse_window(std::string_view from, std::string_view to);

}  // namespace busroute::io
