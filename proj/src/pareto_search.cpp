#include "busroute/pareto_search.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <thread>

namespace busroute {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Bounds and exact values are summed in different orders, so a route sitting
// exactly on a range edge could otherwise be pruned by rounding noise.
double slack(double x) { return 1e-9 * (1.0 + std::abs(x)); }

double oriented(double x, Orientation o) {
  return o == Orientation::maximize ? x : -x;
}

// Portable uniform double in [0, 1) from a 64-bit engine.
double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

bool starts_with(std::span<StopIdx const> route, std::span<StopIdx const> prefix) {
  return route.size() >= prefix.size() &&
         std::equal(prefix.begin(), prefix.end(), route.begin());
}

}  // namespace

bool dominates(CriterionVector const& a, CriterionVector const& b,
               Orientations const& orient) {
  bool strict = false;
  for (auto const c : kAllCriteria) {
    double const x = oriented(a[c], orient[static_cast<std::size_t>(c)]);
    double const y = oriented(b[c], orient[static_cast<std::size_t>(c)]);
    if (x < y) return false;
    if (x > y) strict = true;
  }
  return strict;
}

bool CriterionRanges::any() const {
  return std::any_of(range.begin(), range.end(),
                     [](auto const& r) { return r.has_value(); });
}

bool CriterionRanges::admits(CriterionVector const& v) const {
  for (auto const c : kAllCriteria) {
    auto const& r = (*this)[c];
    if (r && !r->contains(v[c])) return false;
  }
  return true;
}

bool CriterionRanges::may_admit(CriterionBounds const& b) const {
  for (auto const c : kAllCriteria) {
    auto const& r = (*this)[c];
    if (!r) continue;
    auto const x = b[c];
    if (x.max + slack(x.max) < r->min || x.min - slack(x.min) > r->max) {
      return false;
    }
  }
  return true;
}

void SearchParams::validate() const {
  if (!(c_ucb >= 0.0) || !std::isfinite(c_ucb)) {
    throw SearchParameterError{"c_ucb must be a finite non-negative number"};
  }
  if (k == 0) throw SearchParameterError{"k must be at least 1"};
  if (threads == 0) throw SearchParameterError{"threads must be at least 1"};
  if (max_retries < 1) throw SearchParameterError{"max_retries must be >= 1"};
  if (!(sampling_floor > 0.0) || !std::isfinite(sampling_floor)) {
    throw SearchParameterError{"sampling_floor must be positive"};
  }
}

std::string_view status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::running: return "running";
    case SessionStatus::paused: return "paused";
    case SessionStatus::exhausted: return "exhausted";
    case SessionStatus::stopped: return "stopped";
  }
  return "unknown";
}

ParetoSet::InsertResult ParetoSet::insert(std::vector<StopIdx> stops,
                                          CriterionVector const& c) {
  InsertResult res;
  for (auto const& r : routes_) {
    if (r.stops == stops || dominates(r.criteria, c, orient_)) return res;
  }
  auto const keep_end = std::stable_partition(
      routes_.begin(), routes_.end(),
      [&](ParetoRoute const& r) { return !dominates(c, r.criteria, orient_); });
  res.evicted.assign(std::make_move_iterator(keep_end),
                     std::make_move_iterator(routes_.end()));
  routes_.erase(keep_end, routes_.end());
  routes_.push_back({next_id_++, std::move(stops), c});
  res.admitted = true;
  return res;
}

double ucb_score(std::uint64_t hits, std::uint64_t visits,
                 std::uint64_t parent_visits, double c) {
  if (visits == 0) return kInf;
  auto const v = static_cast<double>(visits);
  double const ln = std::log(static_cast<double>(std::max<std::uint64_t>(parent_visits, 1)));
  return static_cast<double>(hits) / v + c * std::sqrt(ln / v);
}

ProgressSnapshot make_snapshot(std::vector<ParetoRoute> routes,
                               std::uint64_t iteration, SessionStatus status) {
  ProgressSnapshot s;
  s.iteration = iteration;
  s.pareto_count = routes.size();
  s.status = status;
  s.timestamp = std::chrono::floor<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
  for (auto const c : kAllCriteria) {
    auto const ci = static_cast<std::size_t>(c);
    if (routes.empty()) continue;
    double lo = kInf, hi = -kInf;
    for (auto const& r : routes) {
      lo = std::min(lo, r.criteria[c]);
      hi = std::max(hi, r.criteria[c]);
    }
    s.histogram_ranges[ci] = {lo, hi};
    for (auto const& r : routes) {
      std::size_t bin = 0;
      if (hi > lo) {
        bin = static_cast<std::size_t>((r.criteria[c] - lo) / (hi - lo) *
                                       static_cast<double>(kHistogramBins));
        bin = std::min(bin, kHistogramBins - 1);
      }
      ++s.histograms[ci][bin];
    }
  }
  s.routes = std::move(routes);
  return s;
}

// ---------------------------------------------------------------------------

SearchSession::SearchSession(std::shared_ptr<StationGraph const> graph,
                             DemandMatrix demand, CostParams cost,
                             SearchParams params, CriterionRanges ranges)
    : graph_{std::move(graph)},
      demand_{std::move(demand)},
      cost_{cost},
      params_{params},
      ranges_{ranges},
      pareto_{params.orientations},
      rng_{params.seed} {
  if (!graph_ || graph_->empty()) {
    throw SearchParameterError{"station graph is empty"};
  }
  params_.validate();
  for (auto const c : kAllCriteria) {
    auto const& r = ranges_[c];
    if (r && !(r->min <= r->max)) {
      throw SearchParameterError{"range for " + std::string{criterion_name(c)} +
                                 " has lo > hi"};
    }
  }
  ctx_ = std::make_unique<CriteriaContext>(graph_, demand_, cost_);
  SearchNode root;
  root.node = graph_->origin();
  root.prefix = ctx_->start();
  root.exhausted = graph_->size() == 1;
  tree_.push_back(std::move(root));
}

void SearchSession::resume() {
  if (status_ == SessionStatus::stopped) {
    throw SessionStateError{"session is stopped"};
  }
  if (status_ == SessionStatus::paused) status_ = SessionStatus::running;
}

void SearchSession::pause() {
  if (status_ == SessionStatus::stopped) {
    throw SessionStateError{"session is stopped"};
  }
  if (status_ == SessionStatus::running) status_ = SessionStatus::paused;
}

void SearchSession::stop() { status_ = SessionStatus::stopped; }

ProgressSnapshot SearchSession::step(std::uint64_t iterations) {
  if (status_ == SessionStatus::stopped) {
    throw SessionStateError{"cannot step a stopped session"};
  }
  if (status_ == SessionStatus::paused) {
    throw SessionStateError{"cannot step a paused session"};
  }
  for (std::uint64_t i = 0; i < iterations && status_ == SessionStatus::running;
       ++i) {
    cycle();
  }
  return snapshot();
}

bool SearchSession::cycle() {
  auto const sel = select();
  if (!sel) {
    if (status_ != SessionStatus::stopped) status_ = SessionStatus::exhausted;
    return false;
  }
  auto const kids = expand(*sel);
  ++iteration_;
  if (!kids.empty()) simulate_batch(kids);
  propagate_exhaustion(*sel);
  for (auto const id : kids) propagate_exhaustion(id);
  if (tree_.front().exhausted) {
    if (status_ != SessionStatus::stopped) status_ = SessionStatus::exhausted;
    return false;
  }
  return true;
}

void SearchSession::simulate_batch(std::vector<TreeNodeId> const& kids) {
  std::vector<std::uint64_t> seeds(kids.size());
  for (auto& s : seeds) s = rng_();
  std::vector<std::vector<NodeIdx>> results(kids.size());
  auto run_one = [&](std::size_t i) {
    if (auto r = simulate(kids[i], seeds[i])) results[i] = std::move(*r);
  };
  auto const workers = std::min(params_.threads, kids.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < kids.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < kids.size();) run_one(i);
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  simulations_ += kids.size();
  backpropagate(kids, results);
}

void SearchSession::propagate_exhaustion(TreeNodeId id) {
  while (id != kNoTreeNode) {
    auto& n = tree_[id];
    if (!n.exhausted) {
      if (has_open_neighbour(n)) return;
      for (auto const c : n.children) {
        if (!tree_[c].exhausted) return;
      }
      n.exhausted = true;
    }
    id = n.parent;
  }
}

bool SearchSession::has_open_neighbour(SearchNode const& n) const {
  for (auto const s : graph_->successors(n.node)) {
    bool const taken =
        std::any_of(n.children.begin(), n.children.end(),
                    [&](TreeNodeId c) { return tree_[c].node == s; }) ||
        std::find(n.pruned.begin(), n.pruned.end(), s) != n.pruned.end();
    if (!taken) return true;
  }
  return false;
}

std::optional<TreeNodeId> SearchSession::select() {
  TreeNodeId cur = 0;
  while (true) {
    auto& n = tree_[cur];
    if (n.exhausted) {
      if (cur == 0) return std::nullopt;
      cur = n.parent;
      continue;
    }
    if (has_open_neighbour(n)) return cur;
    TreeNodeId best = kNoTreeNode;
    double best_score = -kInf;
    for (auto const c : n.children) {
      auto const& ch = tree_[c];
      if (ch.exhausted) continue;
      double const s =
          ucb_score(ch.pareto_hits, ch.visits, n.visits, params_.c_ucb);
      if (best == kNoTreeNode || s > best_score) {
        best = c;
        best_score = s;
      }
    }
    if (best == kNoTreeNode) {
      n.exhausted = true;
      if (cur == 0) return std::nullopt;
      cur = n.parent;
      continue;
    }
    cur = best;
  }
}

std::vector<SearchSession::Gain> SearchSession::neighbour_gains(
    PrefixState const& p, std::vector<NodeIdx> const& candidates) const {
  std::vector<Gain> out;
  if (candidates.empty()) return out;
  auto const base = ctx_->estimate(p);
  std::vector<CriterionVector> gains;
  gains.reserve(candidates.size());
  for (auto const e : candidates) {
    auto const est = ctx_->estimate(ctx_->extend(p, e));
    CriterionVector g;
    for (auto const c : kAllCriteria) {
      g[c] = oriented(est[c] - base[c],
                      params_.orientations[static_cast<std::size_t>(c)]);
    }
    gains.push_back(g);
  }
  out.reserve(candidates.size());
  for (auto const e : candidates) out.push_back({e, 0.0});
  for (auto const c : kAllCriteria) {
    double lo = kInf, hi = -kInf;
    for (auto const& g : gains) {
      lo = std::min(lo, g[c]);
      hi = std::max(hi, g[c]);
    }
    if (!(hi > lo)) continue;
    for (std::size_t i = 0; i < gains.size(); ++i) {
      out[i].score += (gains[i][c] - lo) / (hi - lo);
    }
  }
  for (auto& g : out) g.score /= static_cast<double>(kCriterionCount);
  return out;
}

TreeNodeId SearchSession::add_child(TreeNodeId parent, NodeIdx node) {
  SearchNode n;
  n.node = node;
  n.parent = parent;
  n.prefix = ctx_->extend(tree_[parent].prefix, node);
  n.exhausted = node == graph_->destination();
  n.pareto_hits = hits_for(n.prefix.nodes);
  auto const id = static_cast<TreeNodeId>(tree_.size());
  tree_.push_back(std::move(n));
  tree_[parent].children.push_back(id);
  return id;
}

std::vector<TreeNodeId> SearchSession::expand(TreeNodeId id) {
  std::vector<NodeIdx> open;
  {
    auto const& n = tree_[id];
    for (auto const s : graph_->successors(n.node)) {
      bool const taken =
          std::any_of(n.children.begin(), n.children.end(),
                      [&](TreeNodeId c) { return tree_[c].node == s; }) ||
          std::find(n.pruned.begin(), n.pruned.end(), s) != n.pruned.end();
      if (!taken) open.push_back(s);
    }
  }
  if (ranges_.any()) {
    std::vector<NodeIdx> kept;
    for (auto const e : open) {
      if (ranges_.may_admit(ctx_->criterion_bounds(tree_[id].prefix, e))) {
        kept.push_back(e);
      } else {
        tree_[id].pruned.push_back(e);
      }
    }
    open = std::move(kept);
  }
  auto gains = neighbour_gains(tree_[id].prefix, open);
  std::sort(gains.begin(), gains.end(), [](Gain const& a, Gain const& b) {
    return a.score != b.score ? a.score > b.score : a.node < b.node;
  });
  if (gains.size() > params_.k) gains.resize(params_.k);
  std::vector<TreeNodeId> added;
  for (auto const& g : gains) added.push_back(add_child(id, g.node));
  if (open.empty() && tree_[id].children.empty()) tree_[id].exhausted = true;
  return added;
}

std::optional<std::vector<NodeIdx>> SearchSession::simulate(
    TreeNodeId id, std::uint64_t seed) const {
  std::mt19937_64 gen{seed};
  auto const dest = graph_->destination();
  bool const prune = ranges_.any();
  std::vector<NodeIdx> open;
  for (int attempt = 0; attempt < params_.max_retries; ++attempt) {
    PrefixState p = tree_[id].prefix;
    bool dead = false;
    while (p.tail() != dest) {
      open.clear();
      for (auto const s : graph_->successors(p.tail())) {
        if (!prune || ranges_.may_admit(ctx_->criterion_bounds(p, s))) {
          open.push_back(s);
        }
      }
      if (open.empty()) {
        dead = true;
        break;
      }
      NodeIdx pick = open.front();
      if (open.size() > 1) {
        auto const gains = neighbour_gains(p, open);
        double total = 0.0;
        for (auto const& g : gains) total += g.score + params_.sampling_floor;
        double x = uniform01(gen) * total;
        pick = gains.back().node;
        for (auto const& g : gains) {
          x -= g.score + params_.sampling_floor;
          if (x < 0.0) {
            pick = g.node;
            break;
          }
        }
      }
      p = ctx_->extend(p, pick);
    }
    if (!dead) return std::move(p.nodes);
  }
  return std::nullopt;
}

std::vector<StopIdx> SearchSession::to_stops(std::span<NodeIdx const> nodes) const {
  std::vector<StopIdx> out;
  out.reserve(nodes.size());
  for (auto const n : nodes) out.push_back(graph_->stop(n));
  return out;
}

std::uint64_t SearchSession::hits_for(std::span<NodeIdx const> prefix) const {
  auto const stops = to_stops(prefix);
  std::uint64_t n = 0;
  for (auto const& r : pareto_.routes()) n += starts_with(r.stops, stops);
  return n;
}

void SearchSession::adjust_hits(std::span<StopIdx const> stops, int delta) {
  if (stops.empty() || graph_->stop(tree_[0].node) != stops[0]) return;
  TreeNodeId cur = 0;
  tree_[cur].pareto_hits += static_cast<std::uint64_t>(delta);
  for (std::size_t i = 1; i < stops.size(); ++i) {
    auto const& ch = tree_[cur].children;
    auto const it = std::find_if(ch.begin(), ch.end(), [&](TreeNodeId c) {
      return graph_->stop(tree_[c].node) == stops[i];
    });
    if (it == ch.end()) return;
    cur = *it;
    tree_[cur].pareto_hits += static_cast<std::uint64_t>(delta);
  }
}

void SearchSession::rebuild_hits() {
  for (auto& n : tree_) n.pareto_hits = 0;
  for (auto const& r : pareto_.routes()) adjust_hits(r.stops, +1);
}

bool SearchSession::offer(std::vector<StopIdx> stops, CriterionVector const& c) {
  // Every admitted route must pass the anchors in order.
  std::size_t pos = 0;
  for (auto const& set : graph_->anchors()) {
    for (auto const a : set) {
      auto const it = std::find(stops.begin() + static_cast<std::ptrdiff_t>(pos),
                                stops.end(), a);
      if (it == stops.end()) {
        throw std::logic_error{"candidate route skips an anchor stop"};
      }
      pos = static_cast<std::size_t>(it - stops.begin());
    }
  }
  auto res = pareto_.insert(std::move(stops), c);
  if (!res.admitted) return false;
  adjust_hits(pareto_.routes().back().stops, +1);
  for (auto const& e : res.evicted) adjust_hits(e.stops, -1);
  return true;
}

std::size_t SearchSession::backpropagate(
    std::span<TreeNodeId const> leaves,
    std::span<std::vector<NodeIdx> const> candidates) {
  for (auto const leaf : leaves) {
    for (auto cur = leaf; cur != kNoTreeNode; cur = tree_[cur].parent) {
      ++tree_[cur].visits;
    }
  }
  std::size_t admitted = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto const& cand = candidates[i];
    if (cand.empty()) continue;  // dead-end simulation
    // A subspace holding a single route is settled once that route is seen.
    if (i < leaves.size() && graph_->paths_to_dest(tree_[leaves[i]].node) == 1.0) {
      tree_[leaves[i]].exhausted = true;
    }
    auto const c = ctx_->evaluate(cand);
    if (!ranges_.admits(c)) continue;
    admitted += offer(to_stops(cand), c);
  }
  return admitted;
}

void SearchSession::edit_stations(std::set<StopIdx> const& add,
                                  std::set<StopIdx> const& remove) {
  if (status_ == SessionStatus::stopped) {
    throw SessionStateError{"session is stopped"};
  }
  auto next = std::make_shared<StationGraph const>(edit_graph(*graph_, add, remove));
  if (next->structurally_equal(*graph_)) {
    graph_ = std::move(next);
    return;
  }
  auto const old_graph = graph_;
  auto old_tree = std::move(tree_);
  graph_ = std::move(next);
  ctx_ = std::make_unique<CriteriaContext>(graph_, demand_, cost_);

  // Keep every tree path that is still a path of the new graph.
  tree_.clear();
  SearchNode root;
  root.node = graph_->origin();
  root.prefix = ctx_->start();
  root.visits = old_tree.front().visits;
  root.exhausted = graph_->size() == 1;
  tree_.push_back(std::move(root));
  std::vector<std::pair<TreeNodeId, TreeNodeId>> stack{{0, 0}};  // old, new
  std::vector<std::vector<StopIdx>> leaf_routes;
  while (!stack.empty()) {
    auto const [old_id, new_id] = stack.back();
    stack.pop_back();
    for (auto const c : old_tree[old_id].children) {
      auto const node = graph_->node_of(old_graph->stop(old_tree[c].node));
      if (!node || !graph_->has_edge(tree_[new_id].node, *node)) continue;
      auto const id = add_child(new_id, *node);
      tree_[id].visits = old_tree[c].visits;
      if (*node == graph_->destination()) {
        leaf_routes.push_back(to_stops(tree_[id].prefix.nodes));
      }
      stack.emplace_back(c, id);
    }
  }

  // Re-evaluate surviving routes on the new graph: transit distances and
  // hence directness change when stations come and go.
  std::vector<std::vector<StopIdx>> routes;
  for (auto const& r : pareto_.routes()) routes.push_back(r.stops);
  routes.insert(routes.end(), leaf_routes.begin(), leaf_routes.end());
  pareto_.clear();
  for (auto& stops : routes) {
    auto const nodes = graph_->nodes_of(stops);
    if (!nodes || !graph_->is_path(*nodes)) continue;
    auto const c = ctx_->evaluate(*nodes);
    if (ranges_.admits(c)) pareto_.insert(std::move(stops), c);
  }
  rebuild_hits();
  if (status_ == SessionStatus::exhausted) status_ = SessionStatus::paused;
}

ProgressSnapshot SearchSession::snapshot() const {
  return make_snapshot(pareto_.routes(), iteration_, status_);
}

std::unique_ptr<SearchSession> create_session(
    std::shared_ptr<StationGraph const> graph, DemandMatrix demand,
    CostParams cost, SearchParams params, CriterionRanges ranges) {
  return std::make_unique<SearchSession>(std::move(graph), std::move(demand),
                                         cost, params, ranges);
}

}  // namespace busroute
