#include "busroute/conflict_resolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_map>

namespace busroute {

namespace {

using StopSet = std::vector<StopIdx>;  // sorted

StopSet sorted_set(std::span<StopIdx const> stops) {
  StopSet s(stops.begin(), stops.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

StopSet intersect(StopSet const& a, StopSet const& b) {
  StopSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

bool subset_of(StopSet const& small, StopSet const& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

using OrderIndex = std::unordered_map<StopIdx, std::size_t>;

OrderIndex index_order(std::span<StopIdx const> order) {
  OrderIndex idx;
  for (std::size_t i = 0; i < order.size(); ++i) idx.emplace(order[i], i);
  return idx;
}

std::size_t position(OrderIndex const& idx, StopIdx s) {
  auto const it = idx.find(s);
  if (it == idx.end()) {
    throw std::invalid_argument{"stop missing from stop order"};
  }
  return it->second;
}

std::vector<StopIdx> in_order(StopSet const& s, OrderIndex const& idx) {
  std::vector<StopIdx> out = s;
  std::sort(out.begin(), out.end(), [&](StopIdx a, StopIdx b) {
    return position(idx, a) < position(idx, b);
  });
  return out;
}

double quantile(std::vector<double> const& sorted, double p) {
  double const h = (static_cast<double>(sorted.size()) - 1.0) * p;
  auto const lo = static_cast<std::size_t>(std::floor(h));
  auto const hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Core stops in order, with a wildcard wherever some member has extra stops.
Pattern make_pattern(std::vector<StopIdx> const& ordered_core,
                     std::vector<CandidateRoute const*> const& members,
                     OrderIndex const& idx) {
  // gap g sits before ordered_core[g]; gap core.size() is after the last.
  std::vector<bool> gap(ordered_core.size() + 1, false);
  std::vector<std::size_t> core_pos;
  for (auto const s : ordered_core) core_pos.push_back(position(idx, s));
  for (auto const* r : members) {
    for (auto const s : r->stops) {
      auto const p = position(idx, s);
      auto const it = std::lower_bound(core_pos.begin(), core_pos.end(), p);
      if (it != core_pos.end() && *it == p) continue;
      gap[static_cast<std::size_t>(it - core_pos.begin())] = true;
    }
  }
  Pattern out;
  for (std::size_t i = 0; i <= ordered_core.size(); ++i) {
    if (gap[i]) out.push_back({std::nullopt});
    if (i < ordered_core.size()) out.push_back({ordered_core[i]});
  }
  return out;
}

}  // namespace

double CriterionScale::score(CriterionVector const& c) const {
  double sum = 0.0;
  for (auto const k : kAllCriteria) {
    auto const i = static_cast<std::size_t>(k);
    auto const r = range[i];
    double x = r.max > r.min ? (c[k] - r.min) / (r.max - r.min) : 0.0;
    if (orientations[i] == Orientation::minimize) x = 1.0 - x;
    sum += weights[i] * x;
  }
  return sum;
}

CriterionScale make_scale(std::span<CandidateRoute const> routes,
                          std::array<double, kCriterionCount> weights,
                          Orientations orientations) {
  CriterionScale s;
  s.weights = weights;
  s.orientations = orientations;
  for (auto const k : kAllCriteria) {
    auto& r = s.range[static_cast<std::size_t>(k)];
    if (routes.empty()) continue;
    r.min = r.max = routes.front().criteria[k];
    for (auto const& route : routes) {
      r.min = std::min(r.min, route.criteria[k]);
      r.max = std::max(r.max, route.criteria[k]);
    }
  }
  return s;
}

double population_stddev(std::span<double const> xs) {
  if (xs.empty()) return 0.0;
  auto const n = static_cast<double>(xs.size());
  double const mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (auto const x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n);
}

FiveNumberSummary five_number_summary(std::vector<double> xs) {
  if (xs.empty()) return {};
  std::sort(xs.begin(), xs.end());
  return {xs.front(), quantile(xs, 0.25), quantile(xs, 0.5), quantile(xs, 0.75),
          xs.back()};
}

std::vector<std::vector<StopIdx>> cluster_cores(std::span<CandidateRoute const> routes,
                                                CriterionScale const& scale,
                                                std::size_t beta) {
  std::vector<StopSet> route_sets;
  std::vector<double> scores;
  for (auto const& r : routes) {
    route_sets.push_back(sorted_set(r.stops));
    scores.push_back(scale.score(r.criteria));
  }
  std::set<StopSet> g(route_sets.begin(), route_sets.end());

  while (g.size() > beta) {
    std::vector<StopSet> const gs(g.begin(), g.end());
    std::size_t best = 0;
    std::set<StopSet> p;  // intersections of the best-sharing pairs
    for (std::size_t u = 0; u < gs.size(); ++u) {
      for (std::size_t v = u + 1; v < gs.size(); ++v) {
        auto inter = intersect(gs[u], gs[v]);
        if (inter.size() > best || p.empty()) {
          best = inter.size();
          p.clear();
        }
        if (inter.size() == best) p.insert(std::move(inter));
      }
    }
    std::vector<StopSet> candidates;
    for (auto const& inter : p) {
      bool const leaves_choice = std::any_of(
          gs.begin(), gs.end(), [&](StopSet const& gi) { return !subset_of(inter, gi); });
      if (leaves_choice) candidates.push_back(inter);
    }
    if (candidates.empty()) break;

    StopSet const* chosen = nullptr;
    double chosen_sd = std::numeric_limits<double>::infinity();
    for (auto const& c : candidates) {  // ascending, so ties keep the smallest
      std::vector<double> xs;
      for (std::size_t i = 0; i < route_sets.size(); ++i) {
        if (subset_of(c, route_sets[i])) xs.push_back(scores[i]);
      }
      if (xs.empty()) continue;
      double const sd = population_stddev(xs);
      if (chosen == nullptr || sd < chosen_sd) {
        chosen = &c;
        chosen_sd = sd;
      }
    }
    if (chosen == nullptr) break;
    std::set<StopSet> next;
    for (auto const& gi : g) {
      if (!subset_of(*chosen, gi)) next.insert(gi);
    }
    next.insert(*chosen);
    g = std::move(next);
  }
  return {g.begin(), g.end()};
}

std::vector<StopIdx> derive_stop_order(std::span<CandidateRoute const> routes) {
  std::set<StopIdx> stops;
  std::map<StopIdx, std::set<StopIdx>> succ;
  for (auto const& r : routes) {
    for (std::size_t i = 0; i < r.stops.size(); ++i) {
      stops.insert(r.stops[i]);
      if (i + 1 < r.stops.size()) succ[r.stops[i]].insert(r.stops[i + 1]);
    }
  }
  std::map<StopIdx, std::size_t> indeg;
  for (auto const s : stops) indeg[s] = 0;
  for (auto const& [s, next] : succ) {
    for (auto const t : next) ++indeg[t];
  }
  std::priority_queue<StopIdx, std::vector<StopIdx>, std::greater<>> ready;
  for (auto const& [s, d] : indeg) {
    if (d == 0) ready.push(s);
  }
  std::vector<StopIdx> order;
  while (!ready.empty()) {
    auto const s = ready.top();
    ready.pop();
    order.push_back(s);
    for (auto const t : succ[s]) {
      if (--indeg[t] == 0) ready.push(t);
    }
  }
  if (order.size() != stops.size()) {
    throw std::invalid_argument{"routes visit stops in contradictory orders"};
  }
  return order;
}

std::vector<RouteCluster> cluster_routes(std::span<CandidateRoute const> routes,
                                         CriterionScale const& scale,
                                         std::size_t beta,
                                         std::span<StopIdx const> stop_order) {
  auto const idx = index_order(stop_order);
  auto const cores = cluster_cores(routes, scale, beta);
  std::vector<std::vector<StopIdx>> ordered;
  for (auto const& c : cores) ordered.push_back(in_order(c, idx));

  std::vector<std::vector<CandidateRoute const*>> members(cores.size());
  for (auto const& r : routes) {
    auto const set = sorted_set(r.stops);
    std::size_t best = cores.size();
    for (std::size_t i = 0; i < cores.size(); ++i) {
      if (!subset_of(cores[i], set)) continue;
      if (best == cores.size() || cores[i].size() > cores[best].size() ||
          (cores[i].size() == cores[best].size() && ordered[i] < ordered[best])) {
        best = i;
      }
    }
    if (best < cores.size()) members[best].push_back(&r);
  }

  std::vector<RouteCluster> out;
  for (std::size_t i = 0; i < cores.size(); ++i) {
    if (members[i].empty()) continue;
    RouteCluster c;
    c.core = cores[i];
    c.pattern = make_pattern(ordered[i], members[i], idx);
    for (auto const* m : members[i]) c.members.push_back(m->id);
    std::sort(c.members.begin(), c.members.end());
    for (auto const k : kAllCriteria) {
      std::vector<double> xs;
      for (auto const* m : members[i]) xs.push_back(m->criteria[k]);
      c.criterion_stats[static_cast<std::size_t>(k)] = five_number_summary(std::move(xs));
    }
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](RouteCluster const& a, RouteCluster const& b) {
    return a.pattern < b.pattern;
  });
  return out;
}

std::string_view marker_name(MarkerState m) {
  switch (m) {
    case MarkerState::resolved: return "resolved";
    case MarkerState::active: return "active";
    case MarkerState::pending: return "pending";
  }
  return "unknown";
}

std::vector<Conflict> detect_conflicts(std::span<RouteCluster const> clusters,
                                       std::span<StopIdx const> stop_order) {
  if (clusters.empty()) return {};
  StopSet shared = clusters.front().core;
  for (auto const& c : clusters) shared = intersect(shared, c.core);
  if (shared.empty()) throw AlignmentError{"clusters share no stop"};
  auto const idx = index_order(stop_order);
  auto const ordered = in_order(shared, idx);

  std::vector<Conflict> out;
  for (std::size_t g = 0; g + 1 < ordered.size(); ++g) {
    Conflict conflict;
    conflict.from = ordered[g];
    conflict.to = ordered[g + 1];
    for (auto const& c : clusters) {
      auto const is = [](StopIdx s) {
        return [s](PatternElement const& e) { return e.stop == s; };
      };
      auto const a = std::find_if(c.pattern.begin(), c.pattern.end(), is(conflict.from));
      auto const b = std::find_if(a, c.pattern.end(), is(conflict.to));
      conflict.alternatives.emplace_back(a + 1, b);
    }
    std::set<Pattern> distinct(conflict.alternatives.begin(),
                               conflict.alternatives.end());
    if (distinct.size() >= 2) out.push_back(std::move(conflict));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].status = i == 0 ? ConflictStatus::active : ConflictStatus::pending;
  }
  return out;
}

// ---------------------------------------------------------------------------

ResolutionSession::ResolutionSession(std::vector<CandidateRoute> routes,
                                     std::vector<StopIdx> stop_order,
                                     ResolutionParams params)
    : routes_{std::move(routes)}, stop_order_{std::move(stop_order)}, params_{params} {
  if (routes_.empty()) throw std::invalid_argument{"no candidate routes"};
  if (params_.beta < 2) throw std::invalid_argument{"beta must be at least 2"};
  for (std::size_t i = 0; i < routes_.size(); ++i) {
    if (!by_id_.emplace(routes_[i].id, i).second) {
      throw std::invalid_argument{"duplicate route id"};
    }
  }
  if (stop_order_.empty()) stop_order_ = derive_stop_order(routes_);
  scale_ = make_scale(routes_, params_.weights, params_.orientations);
  std::vector<std::uint64_t> ids;
  for (auto const& r : routes_) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  state_ = make_state(std::move(ids));
}

CandidateRoute const& ResolutionSession::route(std::uint64_t id) const {
  return routes_[by_id_.at(id)];
}

std::vector<CandidateRoute> ResolutionSession::candidates() const {
  std::vector<CandidateRoute> out;
  for (auto const id : state_.candidates) out.push_back(route(id));
  return out;
}

ResolutionSession::State ResolutionSession::make_state(
    std::vector<std::uint64_t> ids) const {
  State s;
  s.candidates = std::move(ids);
  std::vector<CandidateRoute> live;
  for (auto const id : s.candidates) live.push_back(route(id));
  s.clusters = cluster_routes(live, scale_, params_.beta, stop_order_);
  if (s.clusters.size() < 2 && live.size() > 1) {
    // Membership can leave one cluster holding every candidate; fall back to
    // one cluster per route so a choice still narrows the set.
    s.clusters = cluster_routes(live, scale_, live.size(), stop_order_);
  }
  s.conflicts = detect_conflicts(s.clusters, stop_order_);
  return s;
}

std::optional<CandidateRoute> ResolutionSession::final_route() const {
  if (!is_final()) return std::nullopt;
  return route(state_.candidates.front());
}

void ResolutionSession::resolve(std::size_t conflict, std::size_t cluster) {
  if (is_final()) throw ResolutionStateError{"session is already final"};
  if (state_.conflicts.empty() || conflict != 0) {
    throw ResolutionStateError{"only the active conflict can be resolved"};
  }
  if (cluster >= state_.clusters.size()) {
    throw ResolutionStateError{"no such cluster"};
  }
  auto next = make_state(state_.clusters[cluster].members);
  history_.push_back(std::move(state_));
  state_ = std::move(next);
}

void ResolutionSession::undo() {
  if (history_.empty()) throw ResolutionStateError{"nothing to undo"};
  state_ = std::move(history_.back());
  history_.pop_back();
}

std::map<StopIdx, MarkerState> ResolutionSession::marker_states() const {
  std::map<StopIdx, MarkerState> out;
  StopSet shared;
  bool first = true;
  for (auto const& c : state_.clusters) {
    shared = first ? c.core : intersect(shared, c.core);
    first = false;
    for (auto const& e : c.pattern) {
      if (e.stop) out.emplace(*e.stop, MarkerState::pending);
    }
  }
  if (!state_.conflicts.empty()) {
    for (auto const& alt : state_.conflicts.front().alternatives) {
      for (auto const& e : alt) {
        if (e.stop) out[*e.stop] = MarkerState::active;
      }
    }
  }
  for (auto const s : shared) out[s] = MarkerState::resolved;
  return out;
}

std::vector<CandidateRoute> candidates_from(std::span<ParetoRoute const> routes) {
  std::vector<CandidateRoute> out;
  for (auto const& r : routes) out.push_back({r.id, r.stops, r.criteria});
  return out;
}

}  // namespace busroute
