#include "busroute/network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "busroute/csv.hpp"

namespace busroute {

namespace {

constexpr std::size_t kMaxReportMessages = 1000;

std::uint64_t pair_key(StopIdx a, StopIdx b) {
  return (std::uint64_t{a} << 32) | b;
}

std::optional<double> parse_double(std::string const& s) {
  double v = 0;
  auto const* first = s.data();
  auto const* last = s.data() + s.size();
  while (first != last && *first == ' ') ++first;
  while (last != first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  if (first != last && *first == '+') ++first;
  auto const [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string trim(std::string s) {
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string const& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto const p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p - start)));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

/// Maps required column names to their positions in the header row.
std::vector<std::size_t> parse_header(csv::Reader& reader,
                                      std::string const& file,
                                      std::vector<std::string> const& required,
                                      bool allow_empty) {
  std::vector<std::string> fields;
  if (!reader.next(fields)) {
    if (allow_empty) return {};
    throw IngestError{file, 1, "missing header row"};
  }
  std::vector<std::size_t> pos;
  for (auto const& name : required) {
    auto const it = std::find_if(begin(fields), end(fields), [&](auto const& f) {
      return trim(f) == name;
    });
    if (it == end(fields)) {
      throw IngestError{file, reader.line(),
                        "malformed header: missing column '" + name + "'"};
    }
    pos.push_back(static_cast<std::size_t>(it - begin(fields)));
  }
  return pos;
}

struct Positions {
  std::uint32_t board = 0;
  std::uint32_t alight = 0;
};

std::optional<Positions> locate(BusRoute const& r, StopIdx board,
                                StopIdx alight) {
  auto const b = std::find(begin(r.stops), end(r.stops), board);
  if (b == end(r.stops)) return std::nullopt;
  auto const a = std::find(std::next(b), end(r.stops), alight);
  if (a == end(r.stops)) return std::nullopt;
  return Positions{static_cast<std::uint32_t>(b - begin(r.stops)),
                   static_cast<std::uint32_t>(a - begin(r.stops))};
}

Positions checked_positions(TripRecord const& t, BusNetwork const& net) {
  if (t.route >= net.routes().size()) {
    throw InvalidTripError{"trip references unknown route"};
  }
  auto const& r = net.route(t.route);
  if (t.board_pos < t.alight_pos && t.alight_pos < r.stops.size() &&
      r.stops[t.board_pos] == t.board && r.stops[t.alight_pos] == t.alight) {
    return {t.board_pos, t.alight_pos};
  }
  auto const p = locate(r, t.board, t.alight);
  if (!p) {
    throw InvalidTripError{"alight stop does not follow board stop on route " +
                           r.id};
  }
  return *p;
}

}  // namespace

// ---------------------------------------------------------------------------
// BusNetwork

std::optional<StopIdx> BusNetwork::find_stop(std::string_view id) const {
  auto const it = stop_ids_.find(std::string{id});
  if (it == end(stop_ids_)) return std::nullopt;
  return it->second;
}

std::optional<RouteIdx> BusNetwork::find_route(std::string_view id) const {
  auto const it = route_ids_.find(std::string{id});
  if (it == end(route_ids_)) return std::nullopt;
  return it->second;
}

double BusNetwork::road_distance(StopIdx from, StopIdx to) const {
  if (from == to) return 0.0;
  if (!road_.empty()) {
    if (auto const it = road_.find(pair_key(from, to)); it != end(road_)) {
      return it->second;
    }
    if (auto const it = road_.find(pair_key(to, from)); it != end(road_)) {
      return it->second;
    }
  }
  return geo::haversine_km(stops_[from].pos, stops_[to].pos) * detour_factor_;
}

double BusNetwork::route_distance(RouteIdx r, std::uint32_t from_pos,
                                  std::uint32_t to_pos) const {
  auto const& cum = route_cum_km_[r];
  return cum[to_pos] - cum[from_pos];
}

double BusNetwork::route_length(RouteIdx r) const {
  return route_cum_km_[r].empty() ? 0.0 : route_cum_km_[r].back();
}

std::span<StopIdx const> BusNetwork::road_table_partners(StopIdx s) const {
  if (s >= road_partners_.size()) return {};
  return road_partners_[s];
}

std::span<std::uint32_t const> BusNetwork::card_trips(CardIdx c) const {
  if (c + 1 >= card_offsets_.size()) return {};
  return std::span{card_trip_list_}.subspan(
      card_offsets_[c], card_offsets_[c + 1] - card_offsets_[c]);
}

std::span<std::uint32_t const> BusNetwork::route_trips(RouteIdx r) const {
  if (r + 1 >= route_offsets_.size()) return {};
  return std::span{route_trip_list_}.subspan(
      route_offsets_[r], route_offsets_[r + 1] - route_offsets_[r]);
}

// ---------------------------------------------------------------------------
// NetworkBuilder

NetworkBuilder::NetworkBuilder(TransferParams transfer, double detour_factor) {
  net_.transfer_ = transfer;
  net_.detour_factor_ = detour_factor;
}

void NetworkBuilder::note(std::string msg) {
  if (report_.messages.size() < kMaxReportMessages) {
    report_.messages.push_back(std::move(msg));
  }
}

bool NetworkBuilder::add_stop(std::string id, std::string name, double lat,
                              double lon) {
  if (id.empty() || !(lat >= -90.0 && lat <= 90.0) ||
      !(lon >= -180.0 && lon <= 180.0)) {
    ++report_.dropped_stops;
    note("stop '" + id + "': invalid id or coordinates");
    return false;
  }
  if (net_.stop_ids_.contains(id)) {
    ++report_.dropped_stops;
    note("stop '" + id + "': duplicate id");
    return false;
  }
  auto const idx = static_cast<StopIdx>(net_.stops_.size());
  net_.stop_ids_.emplace(id, idx);
  net_.stops_.push_back(Stop{std::move(id), std::move(name), {lat, lon}});
  return true;
}

bool NetworkBuilder::add_route(std::string id,
                               std::span<std::string const> stop_ids) {
  auto const drop = [&](std::string const& why) {
    ++report_.dropped_routes;
    note("route '" + id + "': " + why);
    return false;
  };
  if (id.empty()) return drop("empty id");
  if (net_.route_ids_.contains(id)) return drop("duplicate id");
  if (stop_ids.size() < 2) return drop("fewer than two stops");
  BusRoute r{id, {}};
  for (auto const& s : stop_ids) {
    auto const it = net_.stop_ids_.find(s);
    if (it == end(net_.stop_ids_)) return drop("unknown stop '" + s + "'");
    if (!r.stops.empty() && r.stops.back() == it->second) {
      return drop("stop '" + s + "' repeated immediately");
    }
    r.stops.push_back(it->second);
  }
  net_.route_ids_.emplace(id, static_cast<RouteIdx>(net_.routes_.size()));
  net_.routes_.push_back(std::move(r));
  return true;
}

bool NetworkBuilder::add_road_distance(std::string_view from,
                                       std::string_view to, double km) {
  auto const a = net_.find_stop(from);
  auto const b = net_.find_stop(to);
  if (!a || !b || !(km >= 0.0) || !std::isfinite(km)) {
    ++report_.dropped_road_distances;
    note("road distance " + std::string{from} + "->" + std::string{to} +
         ": unknown stop or invalid distance");
    return false;
  }
  net_.road_[pair_key(*a, *b)] = km;
  return true;
}

bool NetworkBuilder::add_trip(std::string_view card_id, Timestamp tap_on,
                              std::string_view route_id,
                              std::string_view board_stop,
                              std::string_view alight_stop) {
  auto const drop = [&](std::string const& why) {
    ++report_.dropped_trips;
    note("trip of card '" + std::string{card_id} + "': " + why);
    return false;
  };
  auto const r = net_.find_route(route_id);
  if (!r) return drop("unknown route '" + std::string{route_id} + "'");
  auto const b = net_.find_stop(board_stop);
  auto const a = net_.find_stop(alight_stop);
  if (!b || !a) return drop("unknown stop");
  auto const pos = locate(net_.routes_[*r], *b, *a);
  if (!pos) return drop("alight stop does not follow board stop on route");

  std::string key{card_id};
  auto [it, inserted] =
      card_ids_.try_emplace(key, static_cast<CardIdx>(net_.cards_.size()));
  if (inserted) net_.cards_.push_back(std::move(key));

  TripRecord t;
  t.card = it->second;
  t.tap_on = tap_on;
  t.route = *r;
  t.board = *b;
  t.alight = *a;
  t.board_pos = pos->board;
  t.alight_pos = pos->alight;
  net_.trips_.push_back(t);
  return true;
}

std::shared_ptr<BusNetwork const> NetworkBuilder::build() {
  auto& n = net_;

  n.route_cum_km_.clear();
  for (auto const& r : n.routes_) {
    std::vector<double> cum(r.stops.size(), 0.0);
    for (std::size_t i = 1; i < r.stops.size(); ++i) {
      cum[i] = cum[i - 1] + n.road_distance(r.stops[i - 1], r.stops[i]);
    }
    n.route_cum_km_.push_back(std::move(cum));
  }

  auto const bucket = [&](std::size_t groups, auto&& group_of, auto&& less,
                          std::vector<std::uint32_t>& offsets,
                          std::vector<std::uint32_t>& list) {
    offsets.assign(groups + 1, 0);
    for (auto const& t : n.trips_) ++offsets[group_of(t) + 1];
    std::partial_sum(begin(offsets), end(offsets), begin(offsets));
    list.assign(n.trips_.size(), 0);
    auto fill = offsets;
    for (std::uint32_t i = 0; i < n.trips_.size(); ++i) {
      list[fill[group_of(n.trips_[i])]++] = i;
    }
    for (std::size_t g = 0; g < groups; ++g) {
      std::stable_sort(begin(list) + offsets[g], begin(list) + offsets[g + 1],
                       less);
    }
  };
  auto const by_time = [&](std::uint32_t a, std::uint32_t b) {
    return n.trips_[a].tap_on < n.trips_[b].tap_on;
  };
  bucket(n.cards_.size(), [](TripRecord const& t) { return t.card; }, by_time,
         n.card_offsets_, n.card_trip_list_);
  bucket(n.routes_.size(), [](TripRecord const& t) { return t.route; }, by_time,
         n.route_offsets_, n.route_trip_list_);

  n.road_partners_.assign(n.stops_.size(), {});
  for (auto const& [k, km] : n.road_) {
    auto const a = static_cast<StopIdx>(k >> 32);
    auto const b = static_cast<StopIdx>(k & 0xffffffffu);
    n.road_partners_[a].push_back(b);
    n.road_partners_[b].push_back(a);
  }
  for (auto& p : n.road_partners_) {
    std::sort(begin(p), end(p));
    p.erase(std::unique(begin(p), end(p)), end(p));
  }

  std::vector<geo::LatLon> pts;
  pts.reserve(n.stops_.size());
  for (auto const& s : n.stops_) pts.push_back(s.pos);
  n.index_ = SpatialIndex{pts, 0.5};

  for (auto& t : n.trips_) t.tap_off = infer_tap_off_time(t, n);

  auto out = std::make_shared<BusNetwork const>(std::move(net_));
  net_ = BusNetwork{};
  card_ids_.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Tap-off inference

Timestamp estimate_tap_off_time(TripRecord const& trip, BusNetwork const& net) {
  auto const pos = checked_positions(trip, net);
  double const km = net.route_distance(trip.route, pos.board, pos.alight);
  auto const intermediate = pos.alight - pos.board - 1;
  double const hours =
      km / kBusSpeedKmh + intermediate * kDwellMinutes / 60.0;
  return trip.tap_on + hours_to_duration(hours);
}

Timestamp infer_tap_off_time(TripRecord const& trip, BusNetwork const& net) {
  auto const estimate = estimate_tap_off_time(trip, net);
  auto const& tp = net.transfer_params();
  auto const latest = estimate + hours_to_duration(tp.max_wait_min / 60.0);

  // The card's next tap-on after this trip, if it is a transfer at the
  // alight stop within the window.
  for (auto const idx : net.card_trips(trip.card)) {
    auto const& next = net.trips()[idx];
    if (next.tap_on <= trip.tap_on) continue;
    if (next.tap_on > latest || next.route == trip.route) break;
    double const walk_m =
        geo::haversine_km(net.stop(trip.alight).pos, net.stop(next.board).pos) *
        1000.0;
    if (walk_m <= tp.max_walk_m) return next.tap_on;
    break;
  }
  return estimate;
}

// ---------------------------------------------------------------------------
// CSV ingestion

IngestResult ingest_network(std::istream& stops, std::istream& routes,
                            std::istream& trips, std::istream* road_distances,
                            TransferParams transfer) {
  NetworkBuilder b{transfer};
  std::vector<std::string> f;

  {
    csv::Reader r{stops};
    auto const col =
        parse_header(r, "stops.csv", {"stop_id", "name", "lat", "lon"}, false);
    auto const width = *std::max_element(begin(col), end(col)) + 1;
    while (r.next(f)) {
      if (f.size() < width) {
        ++b.report().dropped_stops;
        b.report().messages.push_back("stops.csv:" + std::to_string(r.line()) +
                                      ": too few fields");
        continue;
      }
      auto const lat = parse_double(f[col[2]]);
      auto const lon = parse_double(f[col[3]]);
      if (!lat || !lon) {
        ++b.report().dropped_stops;
        b.report().messages.push_back("stops.csv:" + std::to_string(r.line()) +
                                      ": unparsable coordinate");
        continue;
      }
      b.add_stop(trim(f[col[0]]), f[col[1]], *lat, *lon);
    }
    if (b.stop_count() == 0) {
      throw IngestError{"stops.csv", r.line(), "no valid stops"};
    }
  }

  {
    csv::Reader r{routes};
    auto const col = parse_header(r, "routes.csv", {"route_id", "stop_ids"}, true);
    if (!col.empty()) {
      auto const width = std::max(col[0], col[1]) + 1;
      while (r.next(f)) {
        if (f.size() < width) {
          ++b.report().dropped_routes;
          b.report().messages.push_back("routes.csv:" +
                                        std::to_string(r.line()) +
                                        ": too few fields");
          continue;
        }
        auto const ids = split(f[col[1]], '|');
        b.add_route(trim(f[col[0]]), ids);
      }
    }
  }

  if (road_distances != nullptr) {
    csv::Reader r{*road_distances};
    auto const col = parse_header(r, "road_distances.csv",
                                  {"from_stop_id", "to_stop_id", "km"}, true);
    if (!col.empty()) {
      auto const width = *std::max_element(begin(col), end(col)) + 1;
      while (r.next(f)) {
        auto const km = f.size() >= width ? parse_double(f[col[2]]) : std::nullopt;
        if (!km) {
          ++b.report().dropped_road_distances;
          continue;
        }
        b.add_road_distance(trim(f[col[0]]), trim(f[col[1]]), *km);
      }
    }
  }

  {
    csv::Reader r{trips};
    auto const col = parse_header(
        r, "trips.csv",
        {"card_id", "tap_on", "route_id", "board_stop_id", "alight_stop_id"},
        true);
    if (!col.empty()) {
      auto const width = *std::max_element(begin(col), end(col)) + 1;
      while (r.next(f)) {
        auto const tap_on =
            f.size() >= width ? parse_iso8601(f[col[1]]) : std::nullopt;
        if (!tap_on) {
          ++b.report().dropped_trips;
          if (b.report().messages.size() < kMaxReportMessages) {
            b.report().messages.push_back("trips.csv:" +
                                          std::to_string(r.line()) +
                                          ": malformed row or timestamp");
          }
          continue;
        }
        b.add_trip(trim(f[col[0]]), *tap_on, trim(f[col[2]]), trim(f[col[3]]),
                   trim(f[col[4]]));
      }
    }
  }

  IngestResult out;
  out.report = std::move(b.report());
  out.network = b.build();
  return out;
}

IngestResult ingest_directory(std::filesystem::path const& dir,
                              TransferParams transfer) {
  auto const open = [&](char const* name) {
    std::ifstream in{dir / name};
    if (!in) {
      throw IngestError{(dir / name).string(), 0, "cannot open file"};
    }
    return in;
  };
  auto stops = open("stops.csv");
  auto routes = open("routes.csv");
  auto trips = open("trips.csv");
  std::ifstream road{dir / "road_distances.csv"};
  return ingest_network(stops, routes, trips, road ? &road : nullptr, transfer);
}

// ---------------------------------------------------------------------------
// Demand

std::uint64_t DemandMatrix::count(StopIdx from, StopIdx to) const {
  auto const it = counts_.find(key(from, to));
  return it == end(counts_) ? 0 : it->second;
}

void DemandMatrix::add(StopIdx from, StopIdx to, std::uint64_t n) {
  if (n == 0) return;
  counts_[key(from, to)] += n;
  total_ += n;
}

DemandMatrix build_demand_matrix(BusNetwork const& net, TimeWindow window,
                                 double catchment_radius_m) {
  if (catchment_radius_m < 0.0 || !std::isfinite(catchment_radius_m)) {
    throw std::invalid_argument{"catchment radius must be non-negative"};
  }
  DemandMatrix m{window};
  if (window.empty()) return m;
  double const radius_km = catchment_radius_m / 1000.0;
  for (auto const& t : net.trips()) {
    if (!window.contains(t.tap_on)) continue;
    if (catchment_radius_m == 0.0) {
      m.add(t.board, t.alight);
      continue;
    }
    auto const from = net.spatial_index().within(net.stop(t.board).pos, radius_km);
    auto const to = net.spatial_index().within(net.stop(t.alight).pos, radius_km);
    for (auto const u : from) {
      for (auto const v : to) m.add(u, v);
    }
  }
  return m;
}

}  // namespace busroute
