#include "busroute/analytics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

namespace busroute {

namespace {

// Coincident stops are nudged apart by this much (km) before building Voronoi
// cells; containment checks allow for it.
constexpr double kJitterKm = 1e-6;
constexpr double kContainToleranceKm = 1e-5;

void split_groups(std::span<geo::XY const> pts, std::vector<StopIdx> idx,
                  std::size_t groups, std::vector<std::vector<StopIdx>>& out) {
  if (groups == 1) {
    std::sort(idx.begin(), idx.end());
    out.push_back(std::move(idx));
    return;
  }
  double mx = 0, my = 0;
  for (auto const i : idx) mx += pts[i].x, my += pts[i].y;
  mx /= static_cast<double>(idx.size());
  my /= static_cast<double>(idx.size());
  double sxx = 0, syy = 0, sxy = 0;
  for (auto const i : idx) {
    double const dx = pts[i].x - mx, dy = pts[i].y - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  // Principal axis of the 2x2 covariance.
  double const theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  double const ux = std::cos(theta), uy = std::sin(theta);
  std::sort(idx.begin(), idx.end(), [&](StopIdx a, StopIdx b) {
    double const pa = pts[a].x * ux + pts[a].y * uy;
    double const pb = pts[b].x * ux + pts[b].y * uy;
    if (pa != pb) return pa < pb;
    if (pts[a].x != pts[b].x) return pts[a].x < pts[b].x;
    if (pts[a].y != pts[b].y) return pts[a].y < pts[b].y;
    return a < b;
  });
  auto const first_groups = groups / 2;
  auto const first_size = idx.size() * first_groups / groups;
  std::vector<StopIdx> rest(idx.begin() + static_cast<std::ptrdiff_t>(first_size), idx.end());
  idx.resize(first_size);
  split_groups(pts, std::move(idx), first_groups, out);
  split_groups(pts, std::move(rest), groups - first_groups, out);
}

template <typename T>
double mean_of(std::vector<T> const& xs) {
  if (xs.empty()) return 0.0;
  return static_cast<double>(std::accumulate(xs.begin(), xs.end(), T{})) /
         static_cast<double>(xs.size());
}

}  // namespace

bool ZonePartition::contains(std::uint32_t zone, geo::LatLon p) const {
  return geometry::contains(zones.at(zone).boundary, projection.forward(p),
                            kContainToleranceKm);
}

std::vector<std::vector<std::vector<geo::LatLon>>> ZonePartition::boundary_latlon(
    std::uint32_t zone) const {
  std::vector<std::vector<std::vector<geo::LatLon>>> out;
  auto const convert = [&](geometry::Ring const& r) {
    std::vector<geo::LatLon> ring;
    for (auto const& p : r) ring.push_back(projection.inverse(p));
    return ring;
  };
  for (auto const& poly : zones.at(zone).boundary) {
    std::vector<std::vector<geo::LatLon>> rings{convert(poly.outer)};
    for (auto const& h : poly.holes) rings.push_back(convert(h));
    out.push_back(std::move(rings));
  }
  return out;
}

std::vector<std::vector<StopIdx>> balanced_bisection(std::span<geo::XY const> pts,
                                                     std::size_t groups) {
  if (groups == 0 || groups > pts.size()) {
    throw AnalyticsParameterError{"zone count must be between 1 and the stop count"};
  }
  std::vector<StopIdx> idx(pts.size());
  std::iota(idx.begin(), idx.end(), StopIdx{0});
  std::vector<std::vector<StopIdx>> out;
  split_groups(pts, std::move(idx), groups, out);
  return out;
}

ZonePartition compute_zones(BusNetwork const& net, std::size_t zone_count) {
  auto const stops = net.stops();
  if (zone_count == 0 || zone_count > stops.size()) {
    throw AnalyticsParameterError{"zone count must be between 1 and the stop count (" +
                                  std::to_string(stops.size()) + ")"};
  }
  geo::LatLon ref{};
  for (auto const& s : stops) ref.lat += s.pos.lat, ref.lon += s.pos.lon;
  ref.lat /= static_cast<double>(stops.size());
  ref.lon /= static_cast<double>(stops.size());

  ZonePartition part;
  part.projection = geo::LocalProjection{ref};
  std::vector<geo::XY> pts;
  for (auto const& s : stops) pts.push_back(part.projection.forward(s.pos));

  auto sites = pts;
  std::map<std::pair<double, double>, int> seen;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    int const k = seen[{pts[i].x, pts[i].y}]++;
    if (k > 0) {
      sites[i].x += kJitterKm * std::cos(k);
      sites[i].y += kJitterKm * std::sin(k);
    }
  }

  auto const groups = balanced_bisection(pts, zone_count);
  auto const box = geometry::bounding_box(pts, kZoneBoxMargin, 0.05);
  auto const cells = geometry::voronoi_cells(sites, box);
  double const tol = std::max(box.width(), box.height()) * 1e-9;

  part.zone_of.assign(stops.size(), 0);
  for (std::uint32_t z = 0; z < groups.size(); ++z) {
    Zone zone;
    zone.id = z;
    zone.stops = groups[z];
    std::unique_ptr<bool[]> member(new bool[stops.size()]());
    for (auto const s : zone.stops) {
      member[s] = true;
      part.zone_of[s] = z;
      zone.centroid.lat += stops[s].pos.lat;
      zone.centroid.lon += stops[s].pos.lon;
    }
    zone.centroid.lat /= static_cast<double>(zone.stops.size());
    zone.centroid.lon /= static_cast<double>(zone.stops.size());
    zone.boundary = geometry::union_cells(
        cells, std::span<bool const>(member.get(), stops.size()), tol);
    part.zones.push_back(std::move(zone));
  }
  return part;
}

// ---------------------------------------------------------------------------

std::vector<std::uint32_t> trips_in_window(BusNetwork const& net, RouteIdx r,
                                           TimeWindow window) {
  std::vector<std::uint32_t> out;
  if (window.empty()) return out;
  for (auto const t : net.route_trips(r)) {
    if (window.contains(net.trips()[t].tap_on)) out.push_back(t);
  }
  return out;
}

double window_days(BusNetwork const& net, TimeWindow window) {
  using namespace std::chrono;
  constexpr double kDayMs = 86'400'000.0;
  if (window.bounded()) {
    return std::max(1.0, std::ceil(static_cast<double>(
                                       (window.end - window.begin).count()) / kDayMs));
  }
  std::optional<Timestamp> lo, hi;
  for (auto const& t : net.trips()) {
    if (!window.contains(t.tap_on)) continue;
    if (!lo || t.tap_on < *lo) lo = t.tap_on;
    if (!hi || t.tap_on > *hi) hi = t.tap_on;
  }
  if (!lo) return 1.0;
  return std::max(1.0, std::ceil(static_cast<double>((*hi - *lo).count()) / kDayMs));
}

double route_load(BusNetwork const& net, RouteIdx r, TimeWindow window) {
  auto const& route = net.route(r);
  double const length = net.route_length(r);
  if (route.stops.size() < 2 || length <= 0) return 0.0;
  std::vector<std::int64_t> diff(route.stops.size(), 0);
  for (auto const t : trips_in_window(net, r, window)) {
    auto const& trip = net.trips()[t];
    ++diff[trip.board_pos];
    --diff[trip.alight_pos];
  }
  double weighted = 0.0;
  std::int64_t onboard = 0;
  for (std::uint32_t s = 0; s + 1 < route.stops.size(); ++s) {
    onboard += diff[s];
    weighted += static_cast<double>(onboard) * net.route_distance(r, s, s + 1);
  }
  return weighted / (length * window_days(net, window));
}

RouteMetrics route_metrics(BusNetwork const& net, RouteIdx r, TimeWindow window,
                           CostParams const& cost) {
  auto const& route = net.route(r);
  RouteMetrics m;
  m.stop_count = route.stops.size();
  m.length_km = net.route_length(r);
  auto const interior = m.stop_count >= 2 ? static_cast<double>(m.stop_count - 2) : 0.0;
  m.criteria.service_time = m.length_km / cost.speed + kInteriorDwellHours * interior;
  m.criteria.passenger_flow = static_cast<double>(trips_in_window(net, r, window).size());
  for (std::uint32_t i = 0; i < m.stop_count; ++i) {
    for (std::uint32_t j = i + 1; j < m.stop_count; ++j) {
      double const road = net.road_distance(route.stops[i], route.stops[j]);
      if (road > 0) m.criteria.directness += net.route_distance(r, i, j) / road;
    }
  }
  m.criteria.construction_cost = static_cast<double>(m.stop_count) * cost.per_stop_cost;
  m.criteria.service_cost = service_cost(m.criteria.service_time, cost);
  return m;
}

std::vector<ZoneStats> zone_statistics(ZonePartition const& partition,
                                       BusNetwork const& net, TimeWindow window,
                                       CostParams const& cost) {
  auto const zones = partition.zones.size();
  std::vector<ZoneStats> out(zones);
  std::vector<std::vector<RouteIdx>> zone_routes(zones);
  for (RouteIdx r = 0; r < net.routes().size(); ++r) {
    std::vector<char> hit(zones, 0);
    for (auto const s : net.route(r).stops) hit[partition.zone_of[s]] = 1;
    for (std::size_t z = 0; z < zones; ++z) {
      if (hit[z]) zone_routes[z].push_back(r);
    }
  }
  std::map<RouteIdx, std::pair<RouteMetrics, double>> cache;
  auto const metrics = [&](RouteIdx r) -> std::pair<RouteMetrics, double> const& {
    auto it = cache.find(r);
    if (it == cache.end()) {
      it = cache.emplace(r, std::pair{route_metrics(net, r, window, cost),
                                      route_load(net, r, window)}).first;
    }
    return it->second;
  };
  for (std::size_t z = 0; z < zones; ++z) {
    auto& st = out[z];
    std::vector<double> len, stops, load, dir, svc;
    for (auto const r : zone_routes[z]) {
      auto const& [m, l] = metrics(r);
      len.push_back(m.length_km);
      stops.push_back(static_cast<double>(m.stop_count));
      load.push_back(l);
      dir.push_back(m.criteria.directness);
      svc.push_back(m.criteria.service_cost);
    }
    st.route_count = zone_routes[z].size();
    st.route_length_avg = mean_of(len);
    st.stop_count_avg = mean_of(stops);
    st.average_load = mean_of(load);
    st.directness_avg = mean_of(dir);
    st.service_cost_avg = mean_of(svc);
  }
  if (window.empty()) return out;
  for (auto const& t : net.trips()) {
    if (!window.contains(t.tap_on)) continue;
    auto const zb = partition.zone_of[t.board];
    auto const za = partition.zone_of[t.alight];
    out[zb].passenger_volume += 1;
    if (zb == za) continue;
    auto const out_b = geo::bearing_deg(partition.zones[zb].centroid, net.stop(t.alight).pos);
    ++out[zb].outflow_by_bearing[static_cast<std::size_t>(geo::bearing_sector(out_b, kBearingSectors))];
    auto const in_b = geo::bearing_deg(partition.zones[za].centroid, net.stop(t.board).pos);
    ++out[za].inflow_by_bearing[static_cast<std::size_t>(geo::bearing_sector(in_b, kBearingSectors))];
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> weighted_scores(std::span<CriterionVector const> rows,
                                    CriterionWeights const& weights,
                                    Orientations const& orient) {
  std::vector<double> score(rows.size(), 0.0);
  if (rows.empty()) return score;
  for (auto const c : kAllCriteria) {
    auto const ci = static_cast<std::size_t>(c);
    if (weights[ci] == 0.0) continue;
    double lo = rows[0][c], hi = rows[0][c];
    for (auto const& r : rows) lo = std::min(lo, r[c]), hi = std::max(hi, r[c]);
    if (!(hi > lo)) continue;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double x = (rows[i][c] - lo) / (hi - lo);
      if (orient[ci] == Orientation::minimize) x = 1.0 - x;
      score[i] += weights[ci] * x;
    }
  }
  return score;
}

std::vector<RankedRoute> rank_routes(BusNetwork const& net, CriterionWeights const& weights,
                                     RankFilters const& filters, TimeWindow window,
                                     CostParams const& cost, Orientations const& orient) {
  double total = 0.0;
  for (auto const w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw AnalyticsParameterError{"weights must be finite and non-negative"};
    }
    total += w;
  }
  if (total <= 0.0) throw AnalyticsParameterError{"at least one weight must be positive"};

  std::vector<RankedRoute> out;
  for (RouteIdx r = 0; r < net.routes().size(); ++r) {
    RankedRoute row{r, net.route(r).id, route_metrics(net, r, window, cost), 0.0};
    auto const& m = row.metrics;
    if (!filters.criteria.admits(m.criteria)) continue;
    if (filters.length_km && !filters.length_km->contains(m.length_km)) continue;
    if (filters.stop_count &&
        !filters.stop_count->contains(static_cast<double>(m.stop_count))) {
      continue;
    }
    out.push_back(std::move(row));
  }
  std::vector<CriterionVector> rows;
  for (auto const& r : out) rows.push_back(r.metrics.criteria);
  auto const scores = weighted_scores(rows, weights, orient);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].score = scores[i];
  std::sort(out.begin(), out.end(), [](RankedRoute const& a, RankedRoute const& b) {
    return a.score != b.score ? a.score > b.score : a.route_id < b.route_id;
  });
  return out;
}

// ---------------------------------------------------------------------------

std::vector<TransferLink> detect_transfers(BusNetwork const& net, TransferParams params) {
  if (!(params.max_walk_m >= 0) || !(params.max_wait_min >= 0)) {
    throw AnalyticsParameterError{"transfer bounds must be non-negative"};
  }
  auto const max_wait = hours_to_duration(params.max_wait_min / 60.0);
  std::vector<TransferLink> out;
  auto const trips = net.trips();
  for (CardIdx c = 0; c < net.cards().size(); ++c) {
    auto const list = net.card_trips(c);
    for (std::size_t i = 0; i + 1 < list.size(); ++i) {
      auto const& a = trips[list[i]];
      auto const& b = trips[list[i + 1]];
      if (a.route == b.route) continue;
      auto const gap = b.tap_on - a.tap_off;
      if (gap < Duration::zero() || gap > max_wait) continue;
      if (geo::haversine_km(net.stop(a.alight).pos, net.stop(b.board).pos) * 1000.0 >
          params.max_walk_m) {
        continue;
      }
      out.push_back({c, list[i], list[i + 1], a.route, a.alight, a.tap_off, b.route,
                     b.board, b.tap_on});
    }
  }
  return out;
}

std::size_t time_bin_of(Timestamp t, TimeBin bin) {
  using namespace std::chrono;
  auto const day = floor<days>(t);
  if (bin == TimeBin::weekday) {
    return weekday{sys_days{day}}.iso_encoding() - 1;
  }
  return static_cast<std::size_t>(floor<hours>(t - day).count());
}

FlowMatrix flow_matrix(BusNetwork const& net, std::string_view route_id,
                       TimeWindow window, double intensity_threshold, TimeBin bin,
                       TransferParams transfer) {
  auto const r = net.find_route(route_id);
  if (!r) throw UnknownRouteError{"unknown route '" + std::string{route_id} + "'"};
  if (!(intensity_threshold > 0)) {
    throw AnalyticsParameterError{"intensity threshold must be positive"};
  }
  auto const& route = net.route(*r);
  auto const m = route.stops.size();
  std::size_t const bins = bin == TimeBin::hourly ? 24 : 7;
  FlowMatrix f;
  f.route = *r;
  f.stops = route.stops;
  f.bin = bin;
  f.cells = DenseMatrix{m, 0.0};
  f.intensities = DenseMatrix{m, 0.0};
  f.check_in.assign(m, std::vector<std::uint64_t>(bins, 0));
  f.check_out.assign(m, std::vector<std::uint64_t>(bins, 0));
  f.boardings.assign(m, 0);
  f.alightings.assign(m, 0);
  f.transfers.assign(m, {});

  auto const in_window = trips_in_window(net, *r, window);
  for (auto const t : in_window) {
    auto const& trip = net.trips()[t];
    f.cells(trip.board_pos, trip.alight_pos) += 1;
    ++f.check_in[trip.board_pos][time_bin_of(trip.tap_on, bin)];
    ++f.check_out[trip.alight_pos][time_bin_of(trip.tap_off, bin)];
    ++f.boardings[trip.board_pos];
    ++f.alightings[trip.alight_pos];
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      f.intensities(i, j) = std::min(f.cells(i, j) / intensity_threshold, 1.0);
    }
  }
  if (in_window.empty()) return f;
  for (auto const& link : detect_transfers(net, transfer)) {
    auto const& from = net.trips()[link.from_trip];
    auto const& to = net.trips()[link.to_trip];
    if (link.from_route == *r && window.contains(from.tap_on)) {
      ++f.transfers[from.alight_pos].out_routes[link.to_route];
    }
    if (link.to_route == *r && window.contains(to.tap_on)) {
      ++f.transfers[to.board_pos].in_routes[link.from_route];
    }
  }
  return f;
}

}  // namespace busroute
