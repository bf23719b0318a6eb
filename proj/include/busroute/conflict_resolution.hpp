#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "busroute/criteria.hpp"
#include "busroute/pareto_search.hpp"

namespace busroute {

struct CandidateRoute {
  std::uint64_t id = 0;
  std::vector<StopIdx> stops;
  CriterionVector criteria;
  friend bool operator==(CandidateRoute const&, CandidateRoute const&) = default;
};

/// Min-max scaling fixed at session start, oriented so that 1 is best, then
/// weighted and summed.
struct CriterionScale {
  std::array<Interval, kCriterionCount> range{};
  std::array<double, kCriterionCount> weights{1, 1, 1, 1, 1};
  Orientations orientations = default_orientations();

  double score(CriterionVector const& c) const;
};

CriterionScale make_scale(std::span<CandidateRoute const> routes,
                          std::array<double, kCriterionCount> weights = {1, 1, 1, 1, 1},
                          Orientations orientations = default_orientations());

/// Population standard deviation.
double population_stddev(std::span<double const> xs);

/// Pattern element: a concrete stop or a wildcard standing for one or more
/// member-specific stops.
struct PatternElement {
  std::optional<StopIdx> stop;
  bool wildcard() const { return !stop.has_value(); }
  friend auto operator<=>(PatternElement const&, PatternElement const&) = default;
};

using Pattern = std::vector<PatternElement>;

struct FiveNumberSummary {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  friend bool operator==(FiveNumberSummary const&, FiveNumberSummary const&) = default;
};

/// Linear-interpolation quantiles of a non-empty sample.
FiveNumberSummary five_number_summary(std::vector<double> xs);

struct RouteCluster {
  Pattern pattern;
  std::vector<StopIdx> core;  // sorted stop ids
  std::vector<std::uint64_t> members;
  std::array<FiveNumberSummary, kCriterionCount> criterion_stats{};
  friend bool operator==(RouteCluster const&, RouteCluster const&) = default;
};

/// The clustering loop on stop sets: one cluster per route, then repeatedly
/// merge the pair sharing the most stops into their intersection, preferring
/// the intersection whose matching routes have the least spread of scores.
/// Stops at `beta` clusters or when every best pair's intersection is
/// contained in all clusters. Returns sorted cores in sorted order.
std::vector<std::vector<StopIdx>> cluster_cores(std::span<CandidateRoute const> routes,
                                                CriterionScale const& scale,
                                                std::size_t beta);

/// Cores plus membership (each route joins the largest core it contains,
/// ties by pattern), patterns and criterion summaries. Clusters that end up
/// without members are dropped.
std::vector<RouteCluster> cluster_routes(std::span<CandidateRoute const> routes,
                                         CriterionScale const& scale,
                                         std::size_t beta,
                                         std::span<StopIdx const> stop_order);

/// A topological order consistent with every route's stop sequence
/// (ties by stop index). Throws std::invalid_argument on contradictory orders.
std::vector<StopIdx> derive_stop_order(std::span<CandidateRoute const> routes);

enum class ConflictStatus : std::uint8_t { resolved, active, pending };
enum class MarkerState : std::uint8_t { resolved, active, pending };

std::string_view marker_name(MarkerState m);

struct Conflict {
  StopIdx from = 0;  // shared stop before the gap
  StopIdx to = 0;    // shared stop after the gap
  std::vector<Pattern> alternatives;  // indexed like the clusters
  ConflictStatus status = ConflictStatus::pending;
  friend bool operator==(Conflict const&, Conflict const&) = default;
};

/// Clusters that cannot be aligned (no common stop).
class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Gaps between consecutive stops shared by every cluster where at least two
/// clusters disagree. The first conflict is active, the rest pending.
std::vector<Conflict> detect_conflicts(std::span<RouteCluster const> clusters,
                                       std::span<StopIdx const> stop_order);

class ResolutionStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ResolutionParams {
  std::array<double, kCriterionCount> weights{1, 1, 1, 1, 1};
  std::size_t beta = 4;
  Orientations orientations = default_orientations();
};

/// Progressive narrowing of a candidate set by choosing clusters.
class ResolutionSession {
 public:
  struct State {
    std::vector<std::uint64_t> candidates;  // ids, ascending
    std::vector<RouteCluster> clusters;
    std::vector<Conflict> conflicts;
    friend bool operator==(State const&, State const&) = default;
  };

  /// An empty `stop_order` is derived from the routes.
  ResolutionSession(std::vector<CandidateRoute> routes,
                    std::vector<StopIdx> stop_order = {},
                    ResolutionParams params = {});

  State const& state() const { return state_; }
  std::vector<RouteCluster> const& clusters() const { return state_.clusters; }
  std::vector<Conflict> const& conflicts() const { return state_.conflicts; }
  std::vector<CandidateRoute> candidates() const;
  std::vector<StopIdx> const& stop_order() const { return stop_order_; }
  CriterionScale const& scale() const { return scale_; }
  ResolutionParams const& params() const { return params_; }
  std::size_t history_depth() const { return history_.size(); }
  std::span<CandidateRoute const> all_routes() const { return routes_; }

  bool is_final() const { return state_.candidates.size() == 1; }
  std::optional<CandidateRoute> final_route() const;

  /// Keeps the chosen cluster's members. `conflict` must be the active one.
  void resolve(std::size_t conflict, std::size_t cluster);
  void undo();

  std::map<StopIdx, MarkerState> marker_states() const;

 private:
  State make_state(std::vector<std::uint64_t> ids) const;
  CandidateRoute const& route(std::uint64_t id) const;

  std::vector<CandidateRoute> routes_;
  std::map<std::uint64_t, std::size_t> by_id_;
  std::vector<StopIdx> stop_order_;
  ResolutionParams params_;
  CriterionScale scale_;
  State state_;
  std::vector<State> history_;
};

/// Pareto routes as resolution candidates.
std::vector<CandidateRoute> candidates_from(std::span<ParetoRoute const> routes);

}  // namespace busroute
