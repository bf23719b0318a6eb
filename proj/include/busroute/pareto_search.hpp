#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "busroute/criteria.hpp"
#include "busroute/station_graph.hpp"
#include "busroute/time.hpp"

namespace busroute {

using Orientations = std::array<Orientation, kCriterionCount>;

constexpr Orientations default_orientations() {
  Orientations o{};
  for (auto const c : kAllCriteria) {
    o[static_cast<std::size_t>(c)] = default_orientation(c);
  }
  return o;
}

/// Better-or-equal on every criterion and strictly better on at least one.
bool dominates(CriterionVector const& a, CriterionVector const& b,
               Orientations const& orient = default_orientations());

/// Optional closed [lo, hi] per criterion.
struct CriterionRanges {
  std::array<std::optional<Interval>, kCriterionCount> range{};

  std::optional<Interval> const& operator[](Criterion c) const {
    return range[static_cast<std::size_t>(c)];
  }
  std::optional<Interval>& operator[](Criterion c) {
    return range[static_cast<std::size_t>(c)];
  }
  bool any() const;
  bool admits(CriterionVector const& v) const;
  /// Whether a subspace with these bounds may hold an admissible route.
  bool may_admit(CriterionBounds const& b) const;
};

struct SearchParams {
  double c_ucb = std::sqrt(2.0);
  std::size_t k = 1;            // parallel expansion width, also the batch size
  std::size_t threads = 1;      // simulation workers; results do not depend on it
  std::uint64_t seed = 0;
  int max_retries = 16;         // dead-end simulation attempts
  double sampling_floor = 0.1;  // added to every normalized gain when sampling
  Orientations orientations = default_orientations();

  void validate() const;
};

/// Bad session parameters or infeasible ranges.
class SearchParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation not allowed in the session's current status.
class SessionStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class SessionStatus : std::uint8_t { running, paused, exhausted, stopped };
std::string_view status_name(SessionStatus s);

struct ParetoRoute {
  std::uint64_t id = 0;
  std::vector<StopIdx> stops;
  CriterionVector criteria;
};

/// Mutually non-dominating routes; no duplicate stop sequences.
class ParetoSet {
 public:
  explicit ParetoSet(Orientations orient = default_orientations())
      : orient_{orient} {}

  struct InsertResult {
    bool admitted = false;
    std::vector<ParetoRoute> evicted;
  };

  /// Admits `stops` unless a member dominates it or holds the same sequence.
  InsertResult insert(std::vector<StopIdx> stops, CriterionVector const& c);

  std::vector<ParetoRoute> const& routes() const { return routes_; }
  std::size_t size() const { return routes_.size(); }
  bool empty() const { return routes_.empty(); }
  void clear() { routes_.clear(); }
  Orientations const& orientations() const { return orient_; }

 private:
  Orientations orient_;
  std::vector<ParetoRoute> routes_;
  std::uint64_t next_id_ = 1;
};

/// Fixed-width histograms over the observed range of each criterion.
constexpr std::size_t kHistogramBins = 20;

struct ProgressSnapshot {
  std::uint64_t iteration = 0;
  std::size_t pareto_count = 0;
  SessionStatus status = SessionStatus::paused;
  Timestamp timestamp{};
  std::array<std::array<std::uint64_t, kHistogramBins>, kCriterionCount>
      histograms{};
  std::array<Interval, kCriterionCount> histogram_ranges{};
  std::vector<ParetoRoute> routes;
};

using TreeNodeId = std::uint32_t;
constexpr TreeNodeId kNoTreeNode = static_cast<TreeNodeId>(-1);

struct SearchNode {
  NodeIdx node = 0;  // graph node
  TreeNodeId parent = kNoTreeNode;
  std::vector<TreeNodeId> children;
  std::uint64_t visits = 0;
  std::uint64_t pareto_hits = 0;
  std::vector<NodeIdx> pruned;  // neighbours excluded by range pruning
  bool exhausted = false;
  PrefixState prefix;
};

/// UCB score used by selection; +inf for unvisited children.
double ucb_score(std::uint64_t hits, std::uint64_t visits,
                 std::uint64_t parent_visits, double c);

/// Monte-Carlo tree search over the station graph's origin-destination paths.
/// Not internally synchronized: one writer at a time. Simulations inside a
/// cycle may run on worker threads.
class SearchSession {
 public:
  SearchSession(std::shared_ptr<StationGraph const> graph, DemandMatrix demand,
                CostParams cost, SearchParams params = {},
                CriterionRanges ranges = {});

  SessionStatus status() const { return status_; }
  std::uint64_t iteration() const { return iteration_; }
  /// Rollouts run so far, one per expanded child.
  std::uint64_t simulations() const { return simulations_; }
  StationGraph const& graph() const { return *graph_; }
  std::shared_ptr<StationGraph const> const& graph_ptr() const { return graph_; }
  CriteriaContext const& context() const { return *ctx_; }
  SearchParams const& params() const { return params_; }
  CriterionRanges const& ranges() const { return ranges_; }
  ParetoSet const& pareto() const { return pareto_; }
  std::vector<SearchNode> const& tree() const { return tree_; }
  SearchNode const& root() const { return tree_.front(); }

  void resume();
  void pause();
  void stop();

  /// Runs up to `iterations` cycles or until exhaustion. Requires running.
  ProgressSnapshot step(std::uint64_t iterations);

  /// One select/expand/simulate/backpropagate cycle. Returns false once the
  /// tree is exhausted.
  bool cycle();

  // The stages, exposed for tests and instrumentation.

  /// Tree node to expand next, or nullopt when the whole tree is exhausted.
  std::optional<TreeNodeId> select();
  /// Adds up to k children by descending average normalized gain.
  std::vector<TreeNodeId> expand(TreeNodeId node);
  /// Completes the node's prefix to the destination; nullopt after
  /// max_retries dead ends.
  std::optional<std::vector<NodeIdx>> simulate(TreeNodeId node,
                                               std::uint64_t seed) const;
  /// Counts one visit along each leaf's path and offers the candidates to the
  /// Pareto set. Returns the number admitted.
  std::size_t backpropagate(std::span<TreeNodeId const> leaves,
                            std::span<std::vector<NodeIdx> const> candidates);

  /// Removes and re-admits stations; see edit_graph.
  void edit_stations(std::set<StopIdx> const& add,
                     std::set<StopIdx> const& remove);

  ProgressSnapshot snapshot() const;

  /// Stops of a graph-node route.
  std::vector<StopIdx> to_stops(std::span<NodeIdx const> nodes) const;

 private:
  struct Gain {
    NodeIdx node;
    double score;
  };
  std::vector<Gain> neighbour_gains(PrefixState const& p,
                                    std::vector<NodeIdx> const& candidates) const;
  bool has_open_neighbour(SearchNode const& n) const;
  void propagate_exhaustion(TreeNodeId id);
  void simulate_batch(std::vector<TreeNodeId> const& kids);
  TreeNodeId add_child(TreeNodeId parent, NodeIdx node);
  std::uint64_t hits_for(std::span<NodeIdx const> prefix) const;
  void adjust_hits(std::span<StopIdx const> stops, int delta);
  void rebuild_hits();
  bool offer(std::vector<StopIdx> stops, CriterionVector const& c);

  std::shared_ptr<StationGraph const> graph_;
  DemandMatrix demand_;
  CostParams cost_;
  SearchParams params_;
  CriterionRanges ranges_;
  std::unique_ptr<CriteriaContext> ctx_;
  ParetoSet pareto_;
  std::vector<SearchNode> tree_;
  SessionStatus status_ = SessionStatus::paused;
  std::uint64_t iteration_ = 0;
  std::uint64_t simulations_ = 0;
  std::mt19937_64 rng_;
};

/// Validates inputs and returns a paused session with a root-only tree.
std::unique_ptr<SearchSession> create_session(
    std::shared_ptr<StationGraph const> graph, DemandMatrix demand,
    CostParams cost, SearchParams params = {}, CriterionRanges ranges = {});

/// Snapshot of an arbitrary route list (histograms over their criteria).
ProgressSnapshot make_snapshot(std::vector<ParetoRoute> routes,
                               std::uint64_t iteration, SessionStatus status);

}  // namespace busroute
