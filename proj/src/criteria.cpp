#include "busroute/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace busroute {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<std::string_view, kCriterionCount> kNames{
    "service_time", "passenger_flow", "directness", "construction_cost",
    "service_cost"};

/// Node-weighted min/max over completions: x(t, u) = extreme over paths
/// t -> ... -> d of the sum of w(u, v) for v strictly after t.
void completion_extremes(StationGraph const& g, DenseMatrix const& w,
                         DenseMatrix& xmin, DenseMatrix& xmax) {
  auto const n = g.size();
  xmin = DenseMatrix{n, 0.0};
  xmax = DenseMatrix{n, 0.0};
  DenseMatrix wt{n, 0.0};  // wt(s, u) = w(u, s): keeps the inner loop on rows
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t s = 0; s < n; ++s) wt(s, u) = w(u, s);
  }
  for (NodeIdx t = static_cast<NodeIdx>(n - 1); t-- > 0;) {
    // Only prefix stops (u <= t) are ever looked up; the rest stays zero.
    std::size_t const m = t + 1;
    double* lo = &xmin(t, 0);
    double* hi = &xmax(t, 0);
    std::fill(lo, lo + m, kInf);
    std::fill(hi, hi + m, -kInf);
    for (auto const s : g.successors(t)) {
      double const* ws = &wt(s, 0);
      double const* smin = &xmin(s, 0);
      double const* smax = &xmax(s, 0);
      for (std::size_t u = 0; u < m; ++u) {
        lo[u] = std::min(lo[u], ws[u] + smin[u]);
        hi[u] = std::max(hi[u], ws[u] + smax[u]);
      }
    }
  }
}

/// Bounds on the pair sum over stops strictly after t.
void suffix_pair_extremes(StationGraph const& g, DenseMatrix const& xmin,
                          DenseMatrix const& xmax, std::vector<double>& qmin,
                          std::vector<double>& qmax) {
  auto const n = g.size();
  qmin.assign(n, 0.0);
  qmax.assign(n, 0.0);
  for (NodeIdx t = static_cast<NodeIdx>(n - 1); t-- > 0;) {
    double lo = kInf;
    double hi = -kInf;
    for (auto const s : g.successors(t)) {
      lo = std::min(lo, xmin(s, s) + qmin[s]);
      hi = std::max(hi, xmax(s, s) + qmax[s]);
    }
    qmin[t] = lo;
    qmax[t] = hi;
  }
}

}  // namespace

std::string_view criterion_name(Criterion c) {
  return kNames[static_cast<std::size_t>(c)];
}

std::optional<Criterion> parse_criterion(std::string_view name) {
  for (auto const c : kAllCriteria) {
    if (criterion_name(c) == name) return c;
  }
  return std::nullopt;
}

double CriterionVector::operator[](Criterion c) const {
  switch (c) {
    case Criterion::service_time: return service_time;
    case Criterion::passenger_flow: return passenger_flow;
    case Criterion::directness: return directness;
    case Criterion::construction_cost: return construction_cost;
    case Criterion::service_cost: return service_cost;
  }
  return 0.0;
}

double& CriterionVector::operator[](Criterion c) {
  switch (c) {
    case Criterion::service_time: return service_time;
    case Criterion::passenger_flow: return passenger_flow;
    case Criterion::directness: return directness;
    case Criterion::construction_cost: return construction_cost;
    case Criterion::service_cost: break;
  }
  return service_cost;
}

void CostParams::validate() const {
  for (double const v : {per_stop_cost, headway, service_span, crew_wage,
                         fuel_cost, maintenance_cost, speed}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument{"cost parameters must be strictly positive"};
    }
  }
}

double service_cost(double service_time_h, CostParams const& c) {
  return c.service_span / c.headway *
         (2.0 * service_time_h * c.crew_wage +
          2.0 * service_time_h * c.speed * (c.maintenance_cost + c.fuel_cost));
}

double pair_ratio(StationGraph const& g, NodeIdx u, NodeIdx v) {
  if (u == v) return 0.0;
  double const transit = g.transit_distance(u, v);
  if (!std::isfinite(transit)) return 0.0;
  double const road = g.road_distance(u, v);
  if (!(road > 0.0)) return 0.0;
  return transit / road;
}

namespace {

DirectnessTables tables_from_ratios(DenseMatrix const& ratio) {
  auto const n = ratio.size();
  DirectnessTables t;
  t.a = DenseMatrix{n, 0.0};
  t.b.assign(n, 0.0);
  if (n == 0) return t;

  // A(p, q): suffix sums of row p over topological index.
  std::vector<double> row_after(n, 0.0);  // sum_{v > u} ratio(u, v)
  for (NodeIdx p = 0; p < n; ++p) {
    double acc = 0.0;
    for (NodeIdx q = static_cast<NodeIdx>(n); q-- > 0;) {
      acc += ratio(p, q);
      t.a(p, q) = acc;
    }
    row_after[p] = t.a(p, p);  // the diagonal term is zero
  }
  // B(q) = sum_{u > q} sum_{v > u} ratio(u, v).
  double acc = 0.0;
  for (NodeIdx q = static_cast<NodeIdx>(n); q-- > 0;) {
    t.b[q] = acc;
    acc += row_after[q];
  }
  return t;
}

/// Transit/road ratio of every ordered node pair; zero unless u precedes v.
DenseMatrix pair_ratios(StationGraph const& g) {
  auto const n = g.size();
  DenseMatrix r{n, 0.0};
  for (NodeIdx u = 0; u < n; ++u) {
    for (NodeIdx v = u + 1; v < n; ++v) r(u, v) = pair_ratio(g, u, v);
  }
  return r;
}

}  // namespace

DirectnessTables precompute_directness_tables(StationGraph const& g) {
  return tables_from_ratios(pair_ratios(g));
}

double subspace_directness(std::span<NodeIdx const> prefix,
                           DirectnessTables const& tables,
                           StationGraph const& g) {
  if (prefix.empty()) throw std::invalid_argument{"empty prefix"};
  auto const tail = prefix.back();
  if (tail >= g.size() || g.paths_to_dest(tail) == 0.0) {
    throw UnreachableSubspaceError{"prefix tail cannot reach the destination"};
  }
  double fixed = 0.0;
  for (std::size_t j = 1; j + 1 < prefix.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      fixed += pair_ratio(g, prefix[i], prefix[j]);
    }
  }
  double a_sum = 0.0;
  for (auto const u : prefix) a_sum += tables.a(u, tail);
  return fixed + (a_sum + tables.b[tail]) / g.paths_to_dest(tail);
}

double subspace_construction_cost(StationGraph const& g,
                                  std::span<NodeIdx const> prefix,
                                  double per_stop_cost) {
  if (prefix.empty()) throw std::invalid_argument{"empty prefix"};
  auto const tail = prefix.back();
  if (tail >= g.size() || g.paths_to_dest(tail) == 0.0) {
    throw UnreachableSubspaceError{"prefix tail cannot reach the destination"};
  }
  std::vector<double> c(g.size(), 0.0);
  for (NodeIdx i = g.destination(); i-- > tail;) {
    double acc = 0.0;
    for (auto const j : g.successors(i)) {
      acc += g.paths_to_dest(j) * (c[j] + per_stop_cost);
    }
    c[i] = acc / g.paths_to_dest(i);
  }
  return static_cast<double>(prefix.size()) * per_stop_cost + c[tail];
}

CriterionVector evaluate_route(std::span<StopIdx const> route,
                               StationGraph const& g, DemandMatrix const& demand,
                               CostParams const& cost) {
  auto const nodes = g.nodes_of(route);
  if (!nodes || !g.is_path(*nodes)) {
    throw RouteEvaluationError{"route is not an origin-destination path of the "
                               "station graph"};
  }
  double length = 0.0;
  for (std::size_t i = 1; i < route.size(); ++i) {
    length += g.road_distance((*nodes)[i - 1], (*nodes)[i]);
  }
  CriterionVector c;
  auto const m = route.size();
  c.service_time = length / cost.speed +
                   kInteriorDwellHours * static_cast<double>(m - 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      c.passenger_flow += static_cast<double>(demand.count(route[i], route[j]));
      c.directness += pair_ratio(g, (*nodes)[i], (*nodes)[j]);
    }
  }
  c.construction_cost = static_cast<double>(m) * cost.per_stop_cost;
  c.service_cost = service_cost(c.service_time, cost);
  return c;
}

// ---------------------------------------------------------------------------
// CriteriaContext

CriteriaContext::CriteriaContext(std::shared_ptr<StationGraph const> graph,
                                 DemandMatrix const& demand, CostParams cost)
    : g_{std::move(graph)}, cost_{cost} {
  cost_.validate();
  auto const& g = *g_;
  auto const n = g.size();

  ratio_ = pair_ratios(g);
  demand_ = DenseMatrix{n, 0.0};
  demand.for_each([&](StopIdx a, StopIdx b, std::uint64_t count) {
    auto const u = g.node_of(a);
    auto const v = g.node_of(b);
    if (u && v) demand_(*u, *v) = static_cast<double>(count);
  });
  tables_ = tables_from_ratios(ratio_);

  mean_time_.assign(n, 0.0);
  mean_stops_after_.assign(n, 0.0);
  min_time_.assign(n, 0.0);
  max_time_.assign(n, 0.0);
  min_stops_after_.assign(n, 0.0);
  max_stops_after_.assign(n, 0.0);
  for (NodeIdx t = static_cast<NodeIdx>(n - 1); t-- > 0;) {
    double mt = 0, ms = 0;
    double lo_t = kInf, hi_t = -kInf, lo_s = kInf, hi_s = -kInf;
    for (auto const s : g.successors(t)) {
      double const w = g.paths_to_dest(s);
      double const et = edge_time(t, s);
      mt += w * (et + mean_time_[s]);
      ms += w * (1.0 + mean_stops_after_[s]);
      lo_t = std::min(lo_t, et + min_time_[s]);
      hi_t = std::max(hi_t, et + max_time_[s]);
      lo_s = std::min(lo_s, 1.0 + min_stops_after_[s]);
      hi_s = std::max(hi_s, 1.0 + max_stops_after_[s]);
    }
    mean_time_[t] = mt / g.paths_to_dest(t);
    mean_stops_after_[t] = ms / g.paths_to_dest(t);
    min_time_[t] = lo_t;
    max_time_[t] = hi_t;
    min_stops_after_[t] = lo_s;
    max_stops_after_[t] = hi_s;
  }

  completion_extremes(g, ratio_, ratio_x_min_, ratio_x_max_);
  completion_extremes(g, demand_, flow_x_min_, flow_x_max_);
  suffix_pair_extremes(g, ratio_x_min_, ratio_x_max_, ratio_q_min_, ratio_q_max_);
  suffix_pair_extremes(g, flow_x_min_, flow_x_max_, flow_q_min_, flow_q_max_);

  // Expected flow over a uniformly drawn completion. A stop v after t lies on
  // such a completion with probability N_tv n_v / n_t.
  auto const& nb = g.path_counts().between;
  expected_cross_ = DenseMatrix{n, 0.0};
  std::vector<double> first_end(n, 0.0);  // G(v) = sum_w dem(v,w) N_vw n_w
  for (NodeIdx u = 0; u < n; ++u) {
    for (NodeIdx v = 0; v < n; ++v) {
      double const c = demand_(u, v);
      if (c == 0.0) continue;
      double const nv = g.paths_to_dest(v);
      for (NodeIdx t = u; t < v; ++t) {  // read only with u on the prefix
        double const ntv = nb(t, v);
        if (ntv != 0.0) expected_cross_(t, u) += c * ntv * nv;
      }
      if (v > u) first_end[u] += c * nb(u, v) * nv;
    }
  }
  std::vector<double> h(n, 0.0);
  suffix_flow_expected_.assign(n, 0.0);
  for (NodeIdx q = static_cast<NodeIdx>(n); q-- > 0;) {
    double acc = first_end[q];
    for (auto const s : g.successors(q)) acc += h[s];
    h[q] = acc;
    suffix_flow_expected_[q] = (h[q] - first_end[q]) / g.paths_to_dest(q);
  }
}

double CriteriaContext::edge_time(NodeIdx u, NodeIdx v) const {
  double t = g_->road_distance(u, v) / cost_.speed;
  if (v != g_->destination()) t += kInteriorDwellHours;
  return t;
}

CriterionVector CriteriaContext::evaluate(std::span<NodeIdx const> route) const {
  auto const& g = *g_;
  if (!g.is_path(route)) {
    throw RouteEvaluationError{"route is not an origin-destination path of the "
                               "station graph"};
  }
  double length = 0.0;
  for (std::size_t i = 1; i < route.size(); ++i) {
    length += g.road_distance(route[i - 1], route[i]);
  }
  CriterionVector c;
  auto const m = route.size();
  c.service_time = length / cost_.speed +
                   kInteriorDwellHours * static_cast<double>(m - 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      c.passenger_flow += demand_(route[i], route[j]);
      c.directness += ratio_(route[i], route[j]);
    }
  }
  c.construction_cost = static_cast<double>(m) * cost_.per_stop_cost;
  c.service_cost = busroute::service_cost(c.service_time, cost_);
  return c;
}

PrefixState CriteriaContext::start() const {
  PrefixState p;
  auto const o = g_->origin();
  p.nodes = {o};
  p.a_sum = tables_.a(o, o);
  p.expected_cross_flow = expected_cross_(o, o);
  p.ratio_cross_min = ratio_x_min_(o, o);
  p.ratio_cross_max = ratio_x_max_(o, o);
  p.flow_cross_min = flow_x_min_(o, o);
  p.flow_cross_max = flow_x_max_(o, o);
  return p;
}

PrefixState CriteriaContext::extend(PrefixState const& p, NodeIdx e) const {
  PrefixState q;
  q.nodes.reserve(p.nodes.size() + 1);
  q.nodes = p.nodes;
  q.nodes.push_back(e);
  auto const t = p.tail();
  q.length_km = p.length_km + g_->road_distance(t, e);
  q.time_h = p.time_h + edge_time(t, e);
  double ratio_add = 0.0;
  double flow_add = 0.0;
  for (auto const u : p.nodes) {
    ratio_add += ratio_(u, e);
    flow_add += demand_(u, e);
  }
  q.pair_ratio_before = p.pair_ratio_sum;
  q.pair_ratio_sum = p.pair_ratio_sum + ratio_add;
  q.flow = p.flow + flow_add;
  for (auto const u : q.nodes) {
    q.a_sum += tables_.a(u, e);
    q.expected_cross_flow += expected_cross_(e, u);
    q.ratio_cross_min += ratio_x_min_(e, u);
    q.ratio_cross_max += ratio_x_max_(e, u);
    q.flow_cross_min += flow_x_min_(e, u);
    q.flow_cross_max += flow_x_max_(e, u);
  }
  return q;
}

PrefixState CriteriaContext::prefix_of(std::span<NodeIdx const> nodes) const {
  if (nodes.empty() || nodes.front() != g_->origin()) {
    throw std::invalid_argument{"prefix must start at the origin"};
  }
  auto p = start();
  for (std::size_t i = 1; i < nodes.size(); ++i) p = extend(p, nodes[i]);
  return p;
}

CriterionVector CriteriaContext::estimate(PrefixState const& p) const {
  auto const t = p.tail();
  double const nt = g_->paths_to_dest(t);
  CriterionVector c;
  c.service_time = p.time_h + mean_time_[t];
  c.passenger_flow =
      p.flow + p.expected_cross_flow / nt + suffix_flow_expected_[t];
  c.directness = p.pair_ratio_before + (p.a_sum + tables_.b[t]) / nt;
  c.construction_cost =
      (static_cast<double>(p.nodes.size()) + mean_stops_after_[t]) *
      cost_.per_stop_cost;
  c.service_cost = busroute::service_cost(c.service_time, cost_);
  return c;
}

CriterionBounds CriteriaContext::bounds(PrefixState const& p) const {
  auto const t = p.tail();
  auto const k = static_cast<double>(p.nodes.size());
  CriterionBounds b;
  b[Criterion::service_time] = {p.time_h + min_time_[t],
                                p.time_h + max_time_[t]};
  b[Criterion::construction_cost] = {
      (k + min_stops_after_[t]) * cost_.per_stop_cost,
      (k + max_stops_after_[t]) * cost_.per_stop_cost};
  b[Criterion::service_cost] = {
      busroute::service_cost(b[Criterion::service_time].min, cost_),
      busroute::service_cost(b[Criterion::service_time].max, cost_)};
  b[Criterion::directness] = {
      p.pair_ratio_sum + p.ratio_cross_min + ratio_q_min_[t],
      p.pair_ratio_sum + p.ratio_cross_max + ratio_q_max_[t]};
  b[Criterion::passenger_flow] = {
      p.flow + p.flow_cross_min + flow_q_min_[t],
      p.flow + p.flow_cross_max + flow_q_max_[t]};
  return b;
}

}  // namespace busroute
