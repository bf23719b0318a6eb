#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "busroute/network.hpp"
#include "busroute/station_graph.hpp"

namespace busroute {

enum class Criterion : std::uint8_t {
  service_time,
  passenger_flow,
  directness,
  construction_cost,
  service_cost,
};

constexpr std::size_t kCriterionCount = 5;
constexpr std::array<Criterion, kCriterionCount> kAllCriteria{
    Criterion::service_time, Criterion::passenger_flow, Criterion::directness,
    Criterion::construction_cost, Criterion::service_cost};

std::string_view criterion_name(Criterion c);
std::optional<Criterion> parse_criterion(std::string_view name);

enum class Orientation : std::uint8_t { minimize, maximize };

/// Passenger flow is maximised; time, directness and both costs are minimised.
constexpr Orientation default_orientation(Criterion c) {
  return c == Criterion::passenger_flow ? Orientation::maximize
                                        : Orientation::minimize;
}

struct CriterionVector {
  double service_time = 0.0;       // hours, T_R
  double passenger_flow = 0.0;     // passengers
  double directness = 0.0;         // dimensionless, lower is better
  double construction_cost = 0.0;  // money, C_R
  double service_cost = 0.0;       // money, C_v

  double operator[](Criterion c) const;
  double& operator[](Criterion c);

  friend bool operator==(CriterionVector const&, CriterionVector const&) = default;
};

struct CostParams {
  double per_stop_cost = 50.0;    // C_s
  double headway = 0.25;          // H, hours
  double service_span = 18.0;     // T_s, hours
  double crew_wage = 30.0;        // C_w, per hour
  double fuel_cost = 1.2;         // C_f, per km
  double maintenance_cost = 0.8;  // C_b, per km
  double speed = 20.0;            // v, km/h

  /// Throws std::invalid_argument unless every field is strictly positive.
  void validate() const;
};

/// C_v = T_s / H * (2 T_R C_w + 2 T_R v (C_b + C_f)).
double service_cost(double service_time_h, CostParams const& cost);

/// Dwell added per interior stop, hours.
constexpr double kInteriorDwellHours = 2.0 / 60.0;

/// Route is not a path of the station graph.
class RouteEvaluationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The prefix tail cannot reach the destination.
class UnreachableSubspaceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// delta_uv / D_uv; zero on the diagonal, for unreachable pairs, and for a zero
/// road distance.
double pair_ratio(StationGraph const& g, NodeIdx u, NodeIdx v);

/// A(p,q) = sum over topological indices v in [q, d] of ratio(p, v);
/// B(q) = sum over v in [q, d], u in (q, v) of ratio(u, v).
struct DirectnessTables {
  DenseMatrix a;
  std::vector<double> b;
};

DirectnessTables precompute_directness_tables(StationGraph const& g);

/// Directness estimate of the subspace of routes that start with `prefix`:
/// the pairs already fixed inside the prefix (both ends before the tail r_k)
/// plus (sum_{u in prefix} A(u, r_k) + B(r_k)) / N_{r_k d}.
double subspace_directness(std::span<NodeIdx const> prefix,
                           DirectnessTables const& tables,
                           StationGraph const& g);

/// Mean construction cost over all completions of `prefix`:
/// |prefix| * C_s + c_{r_k}, with c_i = (1/n_i) sum_j n_j (c_j + C_s), c_d = 0.
double subspace_construction_cost(StationGraph const& g,
                                  std::span<NodeIdx const> prefix,
                                  double per_stop_cost);

/// Exact criteria of a complete route. Throws RouteEvaluationError if the
/// route is not an origin-destination path of `g`.
CriterionVector evaluate_route(std::span<StopIdx const> route,
                               StationGraph const& g, DemandMatrix const& demand,
                               CostParams const& cost);

struct Interval {
  double min = 0.0;
  double max = 0.0;
  bool contains(double x) const { return x >= min && x <= max; }
  bool overlaps(Interval const& o) const { return max >= o.min && min <= o.max; }
  friend bool operator==(Interval const&, Interval const&) = default;
};

struct CriterionBounds {
  std::array<Interval, kCriterionCount> range{};
  Interval operator[](Criterion c) const {
    return range[static_cast<std::size_t>(c)];
  }
  Interval& operator[](Criterion c) { return range[static_cast<std::size_t>(c)]; }
};

/// Incrementally maintained summary of a route prefix.
struct PrefixState {
  std::vector<NodeIdx> nodes;
  double length_km = 0.0;
  double time_h = 0.0;              // exact time of the prefix's edges
  double pair_ratio_sum = 0.0;      // all ordered pairs inside the prefix
  double pair_ratio_before = 0.0;   // pairs with both ends before the tail
  double flow = 0.0;                // demand over ordered pairs inside
  double a_sum = 0.0;               // sum_u A(u, tail)
  double expected_cross_flow = 0.0; // sum_u sum_v dem(u,v) N_tv n_v
  double ratio_cross_min = 0.0, ratio_cross_max = 0.0;
  double flow_cross_min = 0.0, flow_cross_max = 0.0;

  NodeIdx tail() const { return nodes.back(); }
};

/// Per-graph caches behind route evaluation, subspace estimates and bounds.
/// Immutable after construction; share freely across threads.
class CriteriaContext {
 public:
  CriteriaContext(std::shared_ptr<StationGraph const> g,
                  DemandMatrix const& demand, CostParams cost);

  StationGraph const& graph() const { return *g_; }
  CostParams const& cost() const { return cost_; }
  DirectnessTables const& tables() const { return tables_; }

  double ratio(NodeIdx u, NodeIdx v) const { return ratio_(u, v); }
  double demand(NodeIdx u, NodeIdx v) const { return demand_(u, v); }

  CriterionVector evaluate(std::span<NodeIdx const> route) const;

  PrefixState start() const;
  PrefixState extend(PrefixState const& p, NodeIdx next) const;
  PrefixState prefix_of(std::span<NodeIdx const> nodes) const;

  /// Subspace heuristic estimate of each criterion for routes starting with p.
  CriterionVector estimate(PrefixState const& p) const;

  /// Sound range of each criterion over every completion of p.
  CriterionBounds bounds(PrefixState const& p) const;

  /// Bounds of the subspace reached by appending `station` to `prefix`.
  CriterionBounds criterion_bounds(PrefixState const& prefix,
                                   NodeIdx station) const {
    return bounds(extend(prefix, station));
  }

 private:
  double edge_time(NodeIdx u, NodeIdx v) const;

  std::shared_ptr<StationGraph const> g_;
  CostParams cost_;
  DenseMatrix ratio_, demand_;
  DirectnessTables tables_;
  // suffix statistics, indexed by node
  std::vector<double> mean_time_, mean_stops_after_;
  std::vector<double> min_time_, max_time_;
  std::vector<double> min_stops_after_, max_stops_after_;
  std::vector<double> suffix_flow_expected_;
  // min/max over completions from t of sum_{v after t} w(u, v)
  DenseMatrix ratio_x_min_, ratio_x_max_, flow_x_min_, flow_x_max_;
  // bounds on pairs lying entirely after t
  std::vector<double> ratio_q_min_, ratio_q_max_, flow_q_min_, flow_q_max_;
  DenseMatrix expected_cross_;  // sum_v dem(u,v) N_tv n_v, v != t
};

}  // namespace busroute
