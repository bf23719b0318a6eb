#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "busroute/criteria.hpp"
#include "busroute/geometry.hpp"
#include "busroute/network.hpp"
#include "busroute/pareto_search.hpp"

namespace busroute {

class AnalyticsParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownRouteError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// ---------------------------------------------------------------------------
// Zones

struct Zone {
  std::uint32_t id = 0;
  std::vector<StopIdx> stops;  // ascending
  geometry::MultiPolygon boundary;  // local km coordinates, see projection
  geo::LatLon centroid;             // mean of member stop positions
};

struct ZonePartition {
  geo::LocalProjection projection;
  std::vector<Zone> zones;
  std::vector<std::uint32_t> zone_of;  // per stop

  /// Whether the point lies inside (or on the boundary of) the zone.
  bool contains(std::uint32_t zone, geo::LatLon p) const;
  /// Boundary rings in lat/lon; per polygon the outer ring first.
  std::vector<std::vector<std::vector<geo::LatLon>>> boundary_latlon(
      std::uint32_t zone) const;
};

constexpr double kZoneBoxMargin = 0.05;

/// Balanced divisive clustering along principal axes into exactly
/// `zone_count` zones whose sizes differ by at most one; zone boundaries are
/// unions of Voronoi cells clipped to the network box grown by 5%.
ZonePartition compute_zones(BusNetwork const& net, std::size_t zone_count);

/// Stop groups only (no geometry), exposed for testing the split.
std::vector<std::vector<StopIdx>> balanced_bisection(std::span<geo::XY const> pts,
                                                     std::size_t groups);

constexpr int kBearingSectors = 16;

struct ZoneStats {
  std::size_t route_count = 0;  // routes with a stop in the zone
  double route_length_avg = 0;
  double stop_count_avg = 0;
  double passenger_volume = 0;  // in-window boardings at zone stops
  double average_load = 0;      // mean of route_load over the zone's routes
  double directness_avg = 0;
  double service_cost_avg = 0;
  std::array<std::uint64_t, kBearingSectors> outflow_by_bearing{};
  std::array<std::uint64_t, kBearingSectors> inflow_by_bearing{};
};

std::vector<ZoneStats> zone_statistics(ZonePartition const& partition,
                                       BusNetwork const& net, TimeWindow window,
                                       CostParams const& cost);

// ---------------------------------------------------------------------------
// Existing routes

/// Trip tap-ons inside the window.
std::vector<std::uint32_t> trips_in_window(BusNetwork const& net, RouteIdx r,
                                           TimeWindow window);

/// Days covered by the window; for unbounded windows the span of the
/// corpus' tap-on times. At least one.
double window_days(BusNetwork const& net, TimeWindow window);

/// Length-weighted onboard passengers per day:
/// sum over segments of (onboard x km) / (route km x days).
double route_load(BusNetwork const& net, RouteIdx r, TimeWindow window);

struct RouteMetrics {
  CriterionVector criteria;  // flow = in-window ridership
  double length_km = 0;
  std::size_t stop_count = 0;
};

/// Criteria of an operating route. Directness uses the along-route distance
/// as the transit distance.
RouteMetrics route_metrics(BusNetwork const& net, RouteIdx r, TimeWindow window,
                           CostParams const& cost);

struct RankFilters {
  CriterionRanges criteria;
  std::optional<Interval> length_km;
  std::optional<Interval> stop_count;
};

struct RankedRoute {
  RouteIdx route = 0;
  std::string route_id;
  RouteMetrics metrics;
  double score = 0;
};

using CriterionWeights = std::array<double, kCriterionCount>;

/// Filtered, min-max normalised (orientation-adjusted) weighted ranking,
/// best first, ties by route id.
std::vector<RankedRoute> rank_routes(BusNetwork const& net, CriterionWeights const& weights,
                                     RankFilters const& filters, TimeWindow window,
                                     CostParams const& cost,
                                     Orientations const& orient = default_orientations());

/// Same scoring for arbitrary metric rows (e.g. generated routes).
std::vector<double> weighted_scores(std::span<CriterionVector const> rows,
                                    CriterionWeights const& weights,
                                    Orientations const& orient = default_orientations());

// ---------------------------------------------------------------------------
// Transfers and flow matrices

struct TransferLink {
  CardIdx card = 0;
  std::uint32_t from_trip = 0;
  std::uint32_t to_trip = 0;
  RouteIdx from_route = 0;
  StopIdx from_stop = 0;
  Timestamp tap_off{};
  RouteIdx to_route = 0;
  StopIdx to_stop = 0;
  Timestamp tap_on{};
};

/// Consecutive trips of one card on different routes with the next tap-on
/// within [0, max_wait] of the previous tap-off and the stops within max_walk.
std::vector<TransferLink> detect_transfers(BusNetwork const& net,
                                           TransferParams params = {});

enum class TimeBin : std::uint8_t { hourly, weekday };

struct TransferBadge {
  std::map<RouteIdx, std::uint64_t> in_routes;   // arrived from route, boarded here
  std::map<RouteIdx, std::uint64_t> out_routes;  // alighted here, left on route
};

struct FlowMatrix {
  RouteIdx route = 0;
  std::vector<StopIdx> stops;
  DenseMatrix cells;        // cells(i, j) for i < j in route order
  DenseMatrix intensities;  // min(count / threshold, 1)
  TimeBin bin = TimeBin::hourly;
  std::vector<std::vector<std::uint64_t>> check_in;   // per stop, 24 or 7 bins
  std::vector<std::vector<std::uint64_t>> check_out;
  std::vector<std::uint64_t> boardings, alightings;
  std::vector<TransferBadge> transfers;
};

FlowMatrix flow_matrix(BusNetwork const& net, std::string_view route_id,
                       TimeWindow window, double intensity_threshold,
                       TimeBin bin = TimeBin::hourly,
                       TransferParams transfer = {});

/// 0-23 (UTC hour) or 0-6 (Monday = 0).
std::size_t time_bin_of(Timestamp t, TimeBin bin);

}  // namespace busroute
