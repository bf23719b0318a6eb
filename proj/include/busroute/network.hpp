#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "busroute/geo.hpp"
#include "busroute/spatial_index.hpp"
#include "busroute/time.hpp"

namespace busroute {

using StopIdx = std::uint32_t;
using RouteIdx = std::uint32_t;
using CardIdx = std::uint32_t;

struct Stop {
  std::string id;
  std::string name;
  geo::LatLon pos;
};

struct BusRoute {
  std::string id;
  std::vector<StopIdx> stops;
};

struct TripRecord {
  CardIdx card = 0;
  Timestamp tap_on{};
  Timestamp tap_off{};
  RouteIdx route = 0;
  StopIdx board = 0;
  StopIdx alight = 0;
  std::uint32_t board_pos = 0;   // index into the route's stop list
  std::uint32_t alight_pos = 0;
};

/// Walk/wait bounds shared by transfer detection and tap-off inference.
struct TransferParams {
  double max_walk_m = 500.0;
  double max_wait_min = 30.0;
};

constexpr double kBusSpeedKmh = 20.0;
constexpr double kDwellMinutes = 2.0;
constexpr double kDefaultDetourFactor = 1.3;

struct IngestReport {
  std::size_t dropped_stops = 0;
  std::size_t dropped_routes = 0;
  std::size_t dropped_trips = 0;
  std::size_t dropped_road_distances = 0;
  std::vector<std::string> messages;
};

/// Fatal ingestion problem (bad header, empty stop file, unreadable source).
class IngestError : public std::runtime_error {
 public:
  IngestError(std::string file, std::size_t line, std::string const& what)
      : std::runtime_error{file + ":" + std::to_string(line) + ": " + what},
        file_{std::move(file)}, line_{line} {}

  std::string const& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class InvalidTripError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NetworkBuilder;

/// Immutable stops/routes/trips corpus. Create through NetworkBuilder or
/// ingest_network; share as `std::shared_ptr<BusNetwork const>`.
class BusNetwork {
 public:
  std::span<Stop const> stops() const { return stops_; }
  std::span<BusRoute const> routes() const { return routes_; }
  std::span<TripRecord const> trips() const { return trips_; }
  std::span<std::string const> cards() const { return cards_; }

  Stop const& stop(StopIdx s) const { return stops_[s]; }
  BusRoute const& route(RouteIdx r) const { return routes_[r]; }

  std::optional<StopIdx> find_stop(std::string_view id) const;
  std::optional<RouteIdx> find_route(std::string_view id) const;

  /// Shortest road distance in km. Uses the supplied road table where present,
  /// otherwise haversine times the detour factor.
  double road_distance(StopIdx from, StopIdx to) const;
  double detour_factor() const { return detour_factor_; }

  /// Along-route distance between two positions of a route's stop list.
  double route_distance(RouteIdx r, std::uint32_t from_pos,
                        std::uint32_t to_pos) const;
  double route_length(RouteIdx r) const;

  /// Trips of one card ordered by tap-on time.
  std::span<std::uint32_t const> card_trips(CardIdx c) const;
  std::span<std::uint32_t const> route_trips(RouteIdx r) const;

  TransferParams const& transfer_params() const { return transfer_; }
  SpatialIndex const& spatial_index() const { return index_; }

  std::size_t road_table_size() const { return road_.size(); }
  /// Stops paired with `s` in the road distance table (either direction).
  std::span<StopIdx const> road_table_partners(StopIdx s) const;

 private:
  friend class NetworkBuilder;
  friend Timestamp infer_tap_off_time(TripRecord const&, BusNetwork const&);

  std::vector<Stop> stops_;
  std::vector<BusRoute> routes_;
  std::vector<TripRecord> trips_;
  std::vector<std::string> cards_;
  std::unordered_map<std::string, StopIdx> stop_ids_;
  std::unordered_map<std::string, RouteIdx> route_ids_;
  std::unordered_map<std::uint64_t, double> road_;
  std::vector<std::vector<StopIdx>> road_partners_;
  std::vector<std::vector<double>> route_cum_km_;
  std::vector<std::uint32_t> card_offsets_, card_trip_list_;
  std::vector<std::uint32_t> route_offsets_, route_trip_list_;
  TransferParams transfer_;
  SpatialIndex index_;
  double detour_factor_ = kDefaultDetourFactor;
};

/// Validating builder. Invalid rows are dropped and recorded in the report,
/// mirroring how CSV ingestion treats noisy smart-card data.
class NetworkBuilder {
 public:
  explicit NetworkBuilder(TransferParams transfer = {},
                          double detour_factor = kDefaultDetourFactor);

  bool add_stop(std::string id, std::string name, double lat, double lon);
  bool add_route(std::string id, std::span<std::string const> stop_ids);
  bool add_road_distance(std::string_view from, std::string_view to, double km);
  /// tap_off is inferred in build().
  bool add_trip(std::string_view card_id, Timestamp tap_on,
                std::string_view route_id, std::string_view board_stop,
                std::string_view alight_stop);

  IngestReport& report() { return report_; }
  std::size_t stop_count() const { return net_.stops_.size(); }

  /// Finalises indices and infers tap-off times. The builder is left empty.
  std::shared_ptr<BusNetwork const> build();

 private:
  void note(std::string msg);

  BusNetwork net_;
  std::unordered_map<std::string, CardIdx> card_ids_;
  IngestReport report_;
};

struct IngestResult {
  std::shared_ptr<BusNetwork const> network;
  IngestReport report;
};

/// Parses the CSV sources described in the README. `road_distances` may be
/// null. Throws IngestError on a malformed header or an empty stop file.
IngestResult ingest_network(std::istream& stops, std::istream& routes,
                            std::istream& trips,
                            std::istream* road_distances = nullptr,
                            TransferParams transfer = {});

/// Reads stops.csv, routes.csv, trips.csv and optional road_distances.csv from
/// a directory.
IngestResult ingest_directory(std::filesystem::path const& dir,
                              TransferParams transfer = {});

/// Tap-off inference: a same-card tap-on on another route at (or within the
/// walk radius of) the alight stop inside the transfer window wins; otherwise
/// tap_on + route distance at 20 km/h + 2 min per stop strictly between board
/// and alight. Throws InvalidTripError unless alight follows board on the
/// route.
Timestamp infer_tap_off_time(TripRecord const& trip, BusNetwork const& net);

/// The driving-time half of infer_tap_off_time.
Timestamp estimate_tap_off_time(TripRecord const& trip, BusNetwork const& net);

/// Sparse origin-destination passenger counts.
class DemandMatrix {
 public:
  DemandMatrix() = default;
  explicit DemandMatrix(TimeWindow w) : window_{w} {}

  TimeWindow const& window() const { return window_; }
  std::uint64_t count(StopIdx from, StopIdx to) const;
  void add(StopIdx from, StopIdx to, std::uint64_t n = 1);
  std::uint64_t total() const { return total_; }
  bool empty() const { return counts_.empty(); }
  std::size_t size() const { return counts_.size(); }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (auto const& [k, v] : counts_) {
      fn(static_cast<StopIdx>(k >> 32), static_cast<StopIdx>(k & 0xffffffffu),
         v);
    }
  }

 private:
  static std::uint64_t key(StopIdx a, StopIdx b) {
    return (std::uint64_t{a} << 32) | b;
  }

  TimeWindow window_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Counts in-window trips by (origin, destination). With a positive catchment
/// radius every stop within the radius of the boarding (alighting) stop is
/// credited. An empty window yields an empty matrix. Throws
/// std::invalid_argument on a negative radius.
DemandMatrix build_demand_matrix(BusNetwork const& net, TimeWindow window,
                                 double catchment_radius_m = 0.0);

}  // namespace busroute
