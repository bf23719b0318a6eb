#include "busroute/serialization.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "busroute/csv.hpp"

namespace busroute::io {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto const end = s.find(sep, start);
    out.push_back(s.substr(start, end == std::string_view::npos ? end : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0;
  auto const [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError{"invalid number '" + std::string{s} + "' in " + std::string{what}};
  }
  return v;
}

Json lonlat(geo::LatLon p) { return Json::array({p.lon, p.lat}); }

Json stop_list(std::span<StopIdx const> stops, StopNamer const& name) {
  Json a = Json::array();
  for (auto const s : stops) a.push_back(name(s));
  return a;
}

Json pattern_json(Pattern const& p, StopNamer const& name) {
  Json a = Json::array();
  for (auto const& e : p) a.push_back(e.wildcard() ? std::string{"*"} : name(*e.stop));
  return a;
}

std::string_view conflict_status_name(ConflictStatus s) {
  switch (s) {
    case ConflictStatus::resolved: return "resolved";
    case ConflictStatus::active: return "active";
    case ConflictStatus::pending: return "pending";
  }
  return "pending";
}

Json summary_json(FiveNumberSummary const& s) {
  return Json{{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3},
              {"max", s.max}};
}

Json feature(Json geometry, Json properties) {
  return Json{{"type", "Feature"}, {"geometry", std::move(geometry)},
              {"properties", std::move(properties)}};
}

Json feature_collection(Json features) {
  return Json{{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace

StopNamer namer(BusNetwork const& net) {
  return [&net](StopIdx s) { return net.stop(s).id; };
}

Json criteria_json(CriterionVector const& c) {
  Json j = Json::object();
  for (auto const k : kAllCriteria) j[std::string{criterion_name(k)}] = c[k];
  return j;
}

CriterionVector criteria_from_json(Json const& j) {
  if (!j.is_object()) throw FormatError{"criteria must be an object"};
  CriterionVector c;
  for (auto const k : kAllCriteria) {
    auto const it = j.find(std::string{criterion_name(k)});
    if (it == j.end() || !it->is_number()) {
      throw FormatError{"criteria missing numeric '" + std::string{criterion_name(k)} + "'"};
    }
    c[k] = it->get<double>();
  }
  return c;
}

Json cost_params_json(CostParams const& c) {
  return Json{{"per_stop_cost", c.per_stop_cost}, {"headway", c.headway},
              {"service_span", c.service_span},   {"crew_wage", c.crew_wage},
              {"fuel_cost", c.fuel_cost},         {"maintenance_cost", c.maintenance_cost},
              {"speed", c.speed}};
}

CostParams cost_params_from_json(Json const& j) {
  if (!j.is_object()) throw FormatError{"cost parameters must be an object"};
  CostParams c;
  std::unordered_map<std::string, double*> const fields{
      {"per_stop_cost", &c.per_stop_cost}, {"headway", &c.headway},
      {"service_span", &c.service_span},   {"crew_wage", &c.crew_wage},
      {"fuel_cost", &c.fuel_cost},         {"maintenance_cost", &c.maintenance_cost},
      {"speed", &c.speed}};
  for (auto const& [key, value] : j.items()) {
    auto const it = fields.find(key);
    if (it == fields.end()) throw FormatError{"unknown cost parameter '" + key + "'"};
    if (!value.is_number()) throw FormatError{"cost parameter '" + key + "' must be a number"};
    *it->second = value.get<double>();
  }
  try {
    c.validate();
  } catch (std::invalid_argument const& e) {
    throw FormatError{e.what()};
  }
  return c;
}

CostParams load_cost_params(std::filesystem::path const& path) {
  std::ifstream in{path};
  if (!in) throw FormatError{"cannot open " + path.string()};
  try {
    return cost_params_from_json(Json::parse(in));
  } catch (Json::parse_error const& e) {
    throw FormatError{path.string() + ": " + e.what()};
  }
}

Json ranges_json(CriterionRanges const& r) {
  Json j = Json::object();
  for (auto const k : kAllCriteria) {
    if (auto const& iv = r[k]) {
      j[std::string{criterion_name(k)}] = Json::array({iv->min, iv->max});
    }
  }
  return j;
}

Json route_json(std::uint64_t id, std::span<StopIdx const> stops, CriterionVector const& c,
                StopNamer const& name) {
  return Json{{"id", id}, {"stops", stop_list(stops, name)}, {"criteria", criteria_json(c)}};
}

Json snapshot_json(ProgressSnapshot const& s, StopNamer const& name, bool with_timestamp) {
  Json j{{"iteration", s.iteration},
         {"pareto_count", s.pareto_count},
         {"status", std::string{status_name(s.status)}}};
  if (with_timestamp) j["timestamp"] = format_iso8601(s.timestamp);
  Json hist = Json::object(), ranges = Json::object();
  for (auto const k : kAllCriteria) {
    auto const i = static_cast<std::size_t>(k);
    hist[std::string{criterion_name(k)}] = s.histograms[i];
    ranges[std::string{criterion_name(k)}] =
        Json::array({s.histogram_ranges[i].min, s.histogram_ranges[i].max});
  }
  j["histograms"] = std::move(hist);
  j["histogram_ranges"] = std::move(ranges);
  Json routes = Json::array();
  for (auto const& r : s.routes) routes.push_back(route_json(r.id, r.stops, r.criteria, name));
  j["routes"] = std::move(routes);
  return j;
}

Json pareto_json(std::span<ParetoRoute const> routes, std::span<StopIdx const> stop_order,
                 StopNamer const& name) {
  std::vector<ParetoRoute const*> sorted;
  for (auto const& r : routes) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](ParetoRoute const* a, ParetoRoute const* b) { return a->id < b->id; });
  Json list = Json::array();
  for (auto const* r : sorted) list.push_back(route_json(r->id, r->stops, r->criteria, name));
  return Json{{"stop_order", stop_list(stop_order, name)}, {"routes", std::move(list)}};
}

StopNamer ParetoFile::namer() const {
  return [this](StopIdx s) { return stop_ids.at(s); };
}

ParetoFile parse_pareto(Json const& j) {
  if (!j.is_object() || !j.contains("routes") || !j["routes"].is_array()) {
    throw FormatError{"Pareto file needs a 'routes' array"};
  }
  ParetoFile f;
  std::unordered_map<std::string, StopIdx> index;
  auto const intern = [&](Json const& v) {
    if (!v.is_string()) throw FormatError{"stop ids must be strings"};
    auto const id = v.get<std::string>();
    auto const [it, fresh] = index.emplace(id, static_cast<StopIdx>(f.stop_ids.size()));
    if (fresh) f.stop_ids.push_back(id);
    return it->second;
  };
  if (j.contains("stop_order")) {
    for (auto const& s : j["stop_order"]) f.stop_order.push_back(intern(s));
  }
  for (auto const& r : j["routes"]) {
    CandidateRoute c;
    if (!r.contains("id") || !r["id"].is_number_unsigned()) {
      throw FormatError{"route needs a non-negative integer 'id'"};
    }
    c.id = r["id"].get<std::uint64_t>();
    if (!r.contains("stops") || !r["stops"].is_array() || r["stops"].size() < 2) {
      throw FormatError{"route " + std::to_string(c.id) + " needs at least two stops"};
    }
    for (auto const& s : r["stops"]) c.stops.push_back(intern(s));
    c.criteria = criteria_from_json(r.value("criteria", Json::object()));
    f.routes.push_back(std::move(c));
  }
  return f;
}

Json resolution_json(ResolutionSession const& s, StopNamer const& name) {
  Json j;
  j["candidates"] = s.state().candidates;
  if (auto const f = s.final_route()) {
    j["final_route"] = route_json(f->id, f->stops, f->criteria, name);
  } else {
    j["final_route"] = nullptr;
  }
  Json clusters = Json::array();
  for (std::size_t i = 0; i < s.clusters().size(); ++i) {
    auto const& c = s.clusters()[i];
    Json stats = Json::object();
    for (auto const k : kAllCriteria) {
      stats[std::string{criterion_name(k)}] =
          summary_json(c.criterion_stats[static_cast<std::size_t>(k)]);
    }
    clusters.push_back(Json{{"id", i},
                            {"pattern", pattern_json(c.pattern, name)},
                            {"core", stop_list(c.core, name)},
                            {"members", c.members},
                            {"criterion_stats", std::move(stats)}});
  }
  j["clusters"] = std::move(clusters);
  Json conflicts = Json::array();
  Json active = nullptr;
  for (std::size_t i = 0; i < s.conflicts().size(); ++i) {
    auto const& c = s.conflicts()[i];
    if (c.status == ConflictStatus::active) active = i;
    Json alts = Json::array();
    for (auto const& a : c.alternatives) alts.push_back(pattern_json(a, name));
    conflicts.push_back(Json{{"index", i},
                             {"from", name(c.from)},
                             {"to", name(c.to)},
                             {"status", std::string{conflict_status_name(c.status)}},
                             {"alternatives", std::move(alts)}});
  }
  j["conflicts"] = std::move(conflicts);
  j["active_conflict"] = active;
  Json markers = Json::object();
  for (auto const& [stop, m] : s.marker_states()) markers[name(stop)] = std::string{marker_name(m)};
  j["markers"] = std::move(markers);
  j["history_depth"] = s.history_depth();
  return j;
}

Json graph_geojson(StationGraph const& g) {
  auto const& net = g.network();
  Json features = Json::array();
  for (NodeIdx n = 0; n < g.size(); ++n) {
    auto const& s = net.stop(g.stop(n));
    features.push_back(feature(
        Json{{"type", "Point"}, {"coordinates", lonlat(s.pos)}},
        Json{{"kind", "node"}, {"stop_id", s.id}, {"name", s.name}, {"topo_index", n},
             {"paths_to_dest", g.paths_to_dest(n)}, {"anchor", g.is_anchor(g.stop(n))}}));
  }
  for (auto const& e : g.edges()) {
    auto const& a = net.stop(e.from);
    auto const& b = net.stop(e.to);
    features.push_back(feature(
        Json{{"type", "LineString"}, {"coordinates", Json::array({lonlat(a.pos), lonlat(b.pos)})}},
        Json{{"kind", "edge"}, {"from", a.id}, {"to", b.id},
             {"road_km", net.road_distance(e.from, e.to)}}));
  }
  return feature_collection(std::move(features));
}

Json zones_geojson(ZonePartition const& p, BusNetwork const& net,
                   std::span<ZoneStats const> stats) {
  Json features = Json::array();
  for (auto const& z : p.zones) {
    Json polys = Json::array();
    for (auto const& rings : p.boundary_latlon(z.id)) {
      Json poly = Json::array();
      for (auto const& ring : rings) {
        Json coords = Json::array();
        for (auto const& q : ring) coords.push_back(lonlat(q));
        if (!ring.empty()) coords.push_back(lonlat(ring.front()));
        poly.push_back(std::move(coords));
      }
      polys.push_back(std::move(poly));
    }
    Json geometry = polys.size() == 1
                        ? Json{{"type", "Polygon"}, {"coordinates", polys[0]}}
                        : Json{{"type", "MultiPolygon"}, {"coordinates", polys}};
    Json props{{"zone", z.id}, {"stop_count", z.stops.size()},
               {"centroid", lonlat(z.centroid)}, {"stops", stop_list(z.stops, namer(net))}};
    if (z.id < stats.size()) {
      auto const& s = stats[z.id];
      props["route_count"] = s.route_count;
      props["route_length_avg"] = s.route_length_avg;
      props["stop_count_avg"] = s.stop_count_avg;
      props["passenger_volume"] = s.passenger_volume;
      props["average_load"] = s.average_load;
      props["directness_avg"] = s.directness_avg;
      props["service_cost_avg"] = s.service_cost_avg;
      props["outflow_by_bearing"] = s.outflow_by_bearing;
      props["inflow_by_bearing"] = s.inflow_by_bearing;
    }
    features.push_back(feature(std::move(geometry), std::move(props)));
  }
  return feature_collection(std::move(features));
}

Json routes_geojson(BusNetwork const& net, std::span<ParetoRoute const> routes) {
  Json features = Json::array();
  for (auto const& r : routes) {
    Json coords = Json::array();
    for (auto const s : r.stops) coords.push_back(lonlat(net.stop(s).pos));
    features.push_back(feature(Json{{"type", "LineString"}, {"coordinates", std::move(coords)}},
                               Json{{"id", r.id},
                                    {"stops", stop_list(r.stops, namer(net))},
                                    {"criteria", criteria_json(r.criteria)}}));
  }
  return feature_collection(std::move(features));
}

std::string rank_csv(std::span<RankedRoute const> rows) {
  std::ostringstream out;
  out.precision(17);
  out << "route_id";
  for (auto const k : kAllCriteria) out << ',' << criterion_name(k);
  out << ",score\n";
  for (auto const& r : rows) {
    out << csv::quote(r.route_id);
    for (auto const k : kAllCriteria) out << ',' << r.metrics.criteria[k];
    out << ',' << r.score << '\n';
  }
  return out.str();
}

Json rank_json(std::span<RankedRoute const> rows) {
  Json a = Json::array();
  for (auto const& r : rows) {
    a.push_back(Json{{"route_id", r.route_id},
                     {"criteria", criteria_json(r.metrics.criteria)},
                     {"length_km", r.metrics.length_km},
                     {"stop_count", r.metrics.stop_count},
                     {"score", r.score}});
  }
  return a;
}

Json matrix_json(FlowMatrix const& f, BusNetwork const& net) {
  auto const m = f.stops.size();
  Json cells = Json::array(), intensity = Json::array();
  for (std::size_t i = 0; i < m; ++i) {
    Json row = Json::array(), irow = Json::array();
    for (std::size_t j = 0; j < m; ++j) {
      row.push_back(f.cells(i, j));
      irow.push_back(f.intensities(i, j));
    }
    cells.push_back(std::move(row));
    intensity.push_back(std::move(irow));
  }
  auto const route_ids = [&](std::map<RouteIdx, std::uint64_t> const& counts) {
    Json o = Json::object();
    for (auto const& [r, n] : counts) o[net.route(r).id] = n;
    return o;
  };
  Json stops = Json::array();
  for (std::size_t i = 0; i < m; ++i) {
    stops.push_back(Json{{"stop_id", net.stop(f.stops[i]).id},
                         {"boardings", f.boardings[i]},
                         {"alightings", f.alightings[i]},
                         {"check_in", f.check_in[i]},
                         {"check_out", f.check_out[i]},
                         {"transfers_in", route_ids(f.transfers[i].in_routes)},
                         {"transfers_out", route_ids(f.transfers[i].out_routes)}});
  }
  return Json{{"route_id", net.route(f.route).id},
              {"bin", f.bin == TimeBin::hourly ? "hourly" : "weekday"},
              {"stops", std::move(stops)},
              {"cells", std::move(cells)},
              {"intensities", std::move(intensity)}};
}

Json transfers_json(std::span<TransferLink const> links, BusNetwork const& net) {
  Json a = Json::array();
  for (auto const& l : links) {
    a.push_back(Json{{"card_id", net.cards()[l.card]},
                     {"from_route", net.route(l.from_route).id},
                     {"from_stop", net.stop(l.from_stop).id},
                     {"tap_off", format_iso8601(l.tap_off)},
                     {"to_route", net.route(l.to_route).id},
                     {"to_stop", net.stop(l.to_stop).id},
                     {"tap_on", format_iso8601(l.tap_on)}});
  }
  return a;
}

Json network_json(BusNetwork const& net, IngestReport const& report) {
  Json stops = Json::array();
  for (auto const& s : net.stops()) {
    stops.push_back(Json{{"stop_id", s.id}, {"name", s.name}, {"lat", s.pos.lat}, {"lon", s.pos.lon}});
  }
  Json routes = Json::array();
  for (auto const& r : net.routes()) {
    routes.push_back(Json{{"route_id", r.id}, {"stops", stop_list(r.stops, namer(net))}});
  }
  Json trips = Json::array();
  for (auto const& t : net.trips()) {
    trips.push_back(Json::array({net.cards()[t.card], format_iso8601(t.tap_on),
                                 format_iso8601(t.tap_off), net.route(t.route).id,
                                 net.stop(t.board).id, net.stop(t.alight).id}));
  }
  return Json{{"counts",
               Json{{"stops", net.stops().size()},
                    {"routes", net.routes().size()},
                    {"trips", net.trips().size()},
                    {"cards", net.cards().size()},
                    {"road_distances", net.road_table_size()}}},
              {"report",
               Json{{"dropped_stops", report.dropped_stops},
                    {"dropped_routes", report.dropped_routes},
                    {"dropped_trips", report.dropped_trips},
                    {"dropped_road_distances", report.dropped_road_distances},
                    {"messages", report.messages}}},
              {"stops", std::move(stops)},
              {"routes", std::move(routes)},
              {"trip_fields", Json::array({"card_id", "tap_on", "tap_off", "route_id",
                                           "board_stop_id", "alight_stop_id"})},
              {"trips", std::move(trips)}};
}

// ---------------------------------------------------------------------------

CriterionRanges parse_ranges(std::string_view text) {
  CriterionRanges r;
  if (trim(text).empty()) return r;
  for (auto const item : split(text, ',')) {
    auto const eq = item.find('=');
    auto const colon = item.find(':', eq == std::string_view::npos ? 0 : eq);
    if (eq == std::string_view::npos || colon == std::string_view::npos) {
      throw FormatError{"range '" + std::string{item} + "' must look like name=lo:hi"};
    }
    auto const key = trim(item.substr(0, eq));
    auto const c = parse_criterion(key);
    if (!c) throw FormatError{"unknown criterion '" + std::string{key} + "'"};
    auto const lo = trim(item.substr(eq + 1, colon - eq - 1));
    auto const hi = trim(item.substr(colon + 1));
    Interval iv{lo.empty() ? -std::numeric_limits<double>::infinity() : parse_number(lo, "ranges"),
                hi.empty() ? std::numeric_limits<double>::infinity() : parse_number(hi, "ranges")};
    if (iv.min > iv.max) throw FormatError{"empty range for " + std::string{key}};
    r[*c] = iv;
  }
  return r;
}

RankFilters parse_rank_filters(std::string_view text) {
  RankFilters f;
  std::string rest;
  for (auto const item : split(text, ',')) {
    auto const eq = item.find('=');
    auto const key = trim(item.substr(0, eq));
    if (eq != std::string_view::npos && (key == "length_km" || key == "stop_count")) {
      auto const r = parse_ranges("service_time" + std::string{item.substr(eq)});
      (key == "length_km" ? f.length_km : f.stop_count) = r[Criterion::service_time];
    } else if (!trim(item).empty()) {
      if (!rest.empty()) rest += ',';
      rest += item;
    }
  }
  f.criteria = parse_ranges(rest);
  return f;
}

std::array<double, kCriterionCount> parse_weights(std::string_view text) {
  std::array<double, kCriterionCount> w{};
  auto const items = split(text, ',');
  if (text.find('=') == std::string_view::npos) {
    if (items.size() != kCriterionCount) {
      throw FormatError{"weights need five values or name=value items"};
    }
    for (std::size_t i = 0; i < kCriterionCount; ++i) w[i] = parse_number(items[i], "weights");
    return w;
  }
  for (auto const item : items) {
    auto const eq = item.find('=');
    if (eq == std::string_view::npos) throw FormatError{"weight '" + std::string{item} + "' needs name=value"};
    auto const key = trim(item.substr(0, eq));
    auto const c = parse_criterion(key);
    if (!c) throw FormatError{"unknown criterion '" + std::string{key} + "'"};
    w[static_cast<std::size_t>(*c)] = parse_number(item.substr(eq + 1), "weights");
  }
  return w;
}

StopSets parse_stop_sets(std::string_view text, BusNetwork const& net) {
  StopSets sets;
  for (auto const group : split(text, ';')) {
    std::vector<StopIdx> set;
    for (auto const id : split(group, ',')) {
      auto const t = trim(id);
      if (t.empty()) continue;
      auto const s = net.find_stop(t);
      if (!s) throw FormatError{"unknown stop '" + std::string{t} + "'"};
      set.push_back(*s);
    }
    if (set.empty()) throw FormatError{"empty stop set in '" + std::string{text} + "'"};
    sets.push_back(std::move(set));
  }
  return sets;
}

TimeWindow parse_window(std::string_view from, std::string_view to) {
  TimeWindow w;
  if (!from.empty()) {
    auto const t = parse_iso8601(from);
    if (!t) throw FormatError{"invalid timestamp '" + std::string{from} + "'"};
    w.begin = *t;
  }
  if (!to.empty()) {
    auto const t = parse_iso8601(to);
    if (!t) throw FormatError{"invalid timestamp '" + std::string{to} + "'"};
    w.end = *t;
  }
  if (w.end < w.begin) throw FormatError{"window ends before it starts"};
  return w;
}

}  // namespace busroute::io
