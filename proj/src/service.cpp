#include "busroute/service.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <stop_token>
#include <thread>

#include <httplib.h>

#include "busroute/analytics.hpp"
#include "busroute/conflict_resolution.hpp"
#include "busroute/network.hpp"
#include "busroute/pareto_search.hpp"
#include "busroute/serialization.hpp"

namespace busroute {

namespace {

using io::Json;
using Clock = std::chrono::steady_clock;
using Req = httplib::Request;
using Res = httplib::Response;

/// Request-level failure mapped onto {code, message}.
struct HttpError : std::runtime_error {
  HttpError(int status, std::string code, std::string const& message)
      : std::runtime_error{message}, status{status}, code{std::move(code)} {}
  int status;
  std::string code;
};

HttpError not_found(std::string const& what) { return {404, "not_found", what}; }
HttpError bad_request(std::string const& what) { return {400, "bad_request", what}; }

void reply(httplib::Response& res, Json const& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string const& code,
                 std::string const& message) {
  reply(res, Json{{"code", code}, {"message", message}}, status);
}

Json parse_body(httplib::Request const& req) {
  if (req.body.empty()) return Json::object();
  try {
    auto j = Json::parse(req.body);
    if (!j.is_object()) throw bad_request("request body must be a JSON object");
    return j;
  } catch (Json::parse_error const& e) {
    throw bad_request(std::string{"invalid JSON: "} + e.what());
  }
}

std::string param(httplib::Request const& req, char const* key, std::string fallback = {}) {
  return req.has_param(key) ? req.get_param_value(key) : fallback;
}

double number_param(httplib::Request const& req, char const* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  auto const v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    double const x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument{v};
    return x;
  } catch (std::exception const&) {
    throw bad_request(std::string{"parameter '"} + key + "' must be a number");
  }
}

TimeWindow window_of(httplib::Request const& req) {
  return io::parse_window(param(req, "from"), param(req, "to"));
}

struct Dataset {
  std::string id;
  std::shared_ptr<BusNetwork const> net;
  IngestReport report;
  DemandMatrix demand;
};

std::shared_ptr<Dataset> make_dataset(std::string id, IngestResult r) {
  auto d = std::make_shared<Dataset>();
  d->id = std::move(id);
  d->net = std::move(r.network);
  d->report = std::move(r.report);
  d->demand = build_demand_matrix(*d->net, TimeWindow::all());
  return d;
}

SearchParams search_params_from(Json const& j) {
  SearchParams p;
  for (auto const& [key, v] : j.items()) {
    if (key == "c_ucb") {
      p.c_ucb = v.get<double>();
    } else if (key == "k") {
      p.k = v.get<std::size_t>();
    } else if (key == "seed") {
      p.seed = v.get<std::uint64_t>();
    } else if (key == "threads") {
      p.threads = v.get<std::size_t>();
    } else if (key == "max_retries") {
      p.max_retries = v.get<int>();
    } else if (key == "sampling_floor") {
      p.sampling_floor = v.get<double>();
    } else {
      throw bad_request("unknown search parameter '" + key + "'");
    }
  }
  return p;
}

GraphParams graph_params_from(Json const& j, GraphParams p) {
  for (auto const& [key, v] : j.items()) {
    if (key == "min_spacing_km") {
      p.min_spacing_km = v.get<double>();
    } else if (key == "max_spacing_km") {
      p.max_spacing_km = v.get<double>();
    } else if (key == "progress_slack") {
      p.progress_slack = v.get<double>();
    } else {
      throw bad_request("unknown graph parameter '" + key + "'");
    }
  }
  return p;
}

CriterionRanges ranges_from(Json const& j) {
  CriterionRanges r;
  if (!j.is_object()) throw bad_request("ranges must be an object");
  for (auto const& [key, v] : j.items()) {
    auto const c = parse_criterion(key);
    if (!c) throw bad_request("unknown criterion '" + key + "'");
    if (!v.is_array() || v.size() != 2) throw bad_request("range for " + key + " must be [lo, hi]");
    Interval iv{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    if (!v[0].is_null()) iv.min = v[0].get<double>();
    if (!v[1].is_null()) iv.max = v[1].get<double>();
    r[*c] = iv;
  }
  return r;
}

StopSets stop_sets_from(Json const& j, BusNetwork const& net) {
  StopSets sets;
  if (!j.is_array()) throw bad_request("stop sets must be an array of arrays");
  for (auto const& group : j) {
    std::vector<StopIdx> set;
    for (auto const& id : group) {
      auto const s = net.find_stop(id.get<std::string>());
      if (!s) throw bad_request("unknown stop '" + id.get<std::string>() + "'");
      set.push_back(*s);
    }
    if (set.empty()) throw bad_request("stop sets must not be empty");
    sets.push_back(std::move(set));
  }
  return sets;
}

std::set<StopIdx> stop_ids_from(Json const& j, BusNetwork const& net) {
  std::set<StopIdx> out;
  if (j.is_null()) return out;
  if (!j.is_array()) throw bad_request("stop lists must be arrays of ids");
  for (auto const& id : j) {
    auto const s = net.find_stop(id.get<std::string>());
    if (!s) throw bad_request("unknown stop '" + id.get<std::string>() + "'");
    out.insert(*s);
  }
  return out;
}

struct SearchEntry {
  std::string id;
  std::shared_ptr<Dataset const> dataset;
  std::uint64_t interval = 1;

  std::mutex mu;  // guards session
  std::unique_ptr<SearchSession> session;
  std::condition_variable_any wake;
  std::atomic<int> waiting{0};  // requests queued for `mu`; the worker yields to them

  std::mutex pub_mu;  // guards the fields below
  std::condition_variable pub_cv;
  std::uint64_t seq = 0;
  std::string event;
  bool closed = false;

  std::atomic<Clock::rep> last_access{Clock::now().time_since_epoch().count()};

  std::jthread worker;  // last member: joined before the rest is destroyed

  void touch() { last_access = Clock::now().time_since_epoch().count(); }

  /// Lock for request handlers; applied between step chunks.
  std::unique_lock<std::mutex> lock() {
    ++waiting;
    std::unique_lock lk{mu};
    --waiting;
    return lk;
  }

  Json snapshot_locked() const {
    auto j = io::snapshot_json(session->snapshot(), io::namer(*dataset->net));
    j["session_id"] = id;
    return j;
  }

  /// Requires `mu`.
  void publish_locked() {
    auto text = snapshot_locked().dump();
    auto const terminal = session->status() == SessionStatus::stopped ||
                          session->status() == SessionStatus::exhausted;
    {
      std::lock_guard lk{pub_mu};
      ++seq;
      event = std::move(text);
      closed = closed || terminal;
    }
    pub_cv.notify_all();
  }

  void close() {
    {
      std::lock_guard lk{pub_mu};
      closed = true;
    }
    pub_cv.notify_all();
  }

  void run(std::stop_token st) {
    while (!st.stop_requested()) {
      while (waiting > 0) std::this_thread::yield();
      std::unique_lock lk{mu};
      if (!wake.wait(lk, st, [&] { return session->status() == SessionStatus::running; })) {
        break;
      }
      try {
        session->step(interval);
      } catch (std::exception const&) {
        session->stop();
      }
      publish_locked();
    }
  }
};

struct ResolveEntry {
  std::string id;
  std::shared_ptr<Dataset const> dataset;
  std::mutex mu;
  std::unique_ptr<ResolutionSession> session;
  std::atomic<Clock::rep> last_access{Clock::now().time_since_epoch().count()};

  void touch() { last_access = Clock::now().time_since_epoch().count(); }
  Json state_locked() const {
    auto j = io::resolution_json(*session, io::namer(*dataset->net));
    j["resolve_session_id"] = id;
    return j;
  }
};

}  // namespace

void ServiceConfig::validate() const {
  if (snapshot_interval < 1) throw ServiceError{"snapshot interval must be at least 1"};
  if (max_sessions < 1) throw ServiceError{"max sessions must be at least 1"};
  if (worker_threads < 2) throw ServiceError{"need at least two worker threads"};
  try {
    cost.validate();
    graph.validate();
  } catch (std::invalid_argument const& e) {
    throw ServiceError{e.what()};
  }
}

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  int bound_port = -1;
  std::thread listener;

  std::mutex mu;  // guards the maps and counters
  std::map<std::string, std::shared_ptr<Dataset>> datasets;
  std::string default_dataset;
  std::map<std::string, std::shared_ptr<SearchEntry>> searches;
  std::map<std::string, std::shared_ptr<ResolveEntry>> resolutions;
  std::uint64_t next_id = 1;

  std::jthread janitor;

  explicit Impl(ServiceConfig c) : config{std::move(c)} {
    config.validate();
    if (!config.dataset_dir.empty()) {
      try {
        datasets["default"] = make_dataset("default", ingest_directory(config.dataset_dir));
        default_dataset = "default";
      } catch (std::exception const& e) {
        throw ServiceError{"cannot load dataset: " + std::string{e.what()}};
      }
    }
    auto const threads = config.worker_threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    routes();
    janitor = std::jthread{[this](std::stop_token st) { sweep(st); }};
  }

  ~Impl() {
    janitor = {};
    shutdown();
  }

  void shutdown() {
    std::map<std::string, std::shared_ptr<SearchEntry>> s;
    {
      std::lock_guard lk{mu};
      s.swap(searches);
      resolutions.clear();
    }
    for (auto& [id, e] : s) e->close();
    server.stop();
    if (listener.joinable()) listener.join();
    for (auto& [id, e] : s) {
      e->worker.request_stop();
      e->wake.notify_all();
    }
  }

  void sweep(std::stop_token st) {
    std::mutex m;
    std::condition_variable_any cv;
    auto const period = std::clamp<std::chrono::milliseconds>(
        config.idle_timeout / 4, std::chrono::milliseconds{50}, std::chrono::seconds{30});
    while (!st.stop_requested()) {
      {
        std::unique_lock lk{m};
        cv.wait_for(lk, st, period, [] { return false; });
      }
      auto const cutoff = (Clock::now() - config.idle_timeout).time_since_epoch().count();
      std::vector<std::shared_ptr<SearchEntry>> evicted;
      {
        std::lock_guard lk{mu};
        for (auto it = searches.begin(); it != searches.end();) {
          if (it->second->last_access < cutoff) {
            evicted.push_back(it->second);
            it = searches.erase(it);
          } else {
            ++it;
          }
        }
        std::erase_if(resolutions, [&](auto const& kv) { return kv.second->last_access < cutoff; });
      }
      for (auto& e : evicted) e->close();
    }
  }

  std::string fresh_id(char prefix) {
    std::lock_guard lk{mu};
    return std::string{prefix} + std::to_string(next_id++);
  }

  std::shared_ptr<Dataset const> dataset_for(std::string const& id) {
    std::lock_guard lk{mu};
    auto const key = id.empty() ? default_dataset : id;
    if (key.empty()) throw not_found("no dataset loaded; upload one with POST /datasets");
    auto const it = datasets.find(key);
    if (it == datasets.end()) throw not_found("unknown dataset '" + key + "'");
    return it->second;
  }

  std::shared_ptr<Dataset const> dataset_for(httplib::Request const& req) {
    return dataset_for(param(req, "dataset"));
  }

  std::shared_ptr<SearchEntry> search(std::string const& id) {
    std::lock_guard lk{mu};
    auto const it = searches.find(id);
    if (it == searches.end()) throw not_found("unknown search session '" + id + "'");
    it->second->touch();
    return it->second;
  }

  std::shared_ptr<ResolveEntry> resolution(std::string const& id) {
    std::lock_guard lk{mu};
    auto const it = resolutions.find(id);
    if (it == resolutions.end()) throw not_found("unknown resolution session '" + id + "'");
    it->second->touch();
    return it->second;
  }

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [fn = std::move(fn)](httplib::Request const& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (HttpError const& e) {
        reply_error(res, e.status, e.code, e.what());
      } catch (UnknownRouteError const& e) {
        reply_error(res, 404, "not_found", e.what());
      } catch (EmptyGraphError const& e) {
        reply_error(res, 422, "empty_graph", e.what());
      } catch (GraphConstraintError const& e) {
        reply_error(res, 409, "constraint_violation", e.what());
      } catch (SessionStateError const& e) {
        reply_error(res, 409, "invalid_state", e.what());
      } catch (ResolutionStateError const& e) {
        reply_error(res, 409, "invalid_state", e.what());
      } catch (IngestError const& e) {
        reply_error(res, 400, "invalid_dataset", e.what());
      } catch (Json::exception const& e) {
        reply_error(res, 400, "bad_request", e.what());
      } catch (std::invalid_argument const& e) {
        reply_error(res, 400, "bad_request", e.what());
      } catch (std::out_of_range const& e) {
        reply_error(res, 400, "bad_request", e.what());
      } catch (std::exception const& e) {
        reply_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    server.Get("/health", guarded([](Req const&, Res& res) {
      reply(res, Json{{"status", "ok"}});
    }));

    server.Post("/datasets", guarded([this](Req const& req, Res& res) {
      if (!req.is_multipart_form_data()) {
        throw bad_request("upload stops, routes and trips as multipart form fields");
      }
      for (auto const* key : {"stops", "routes", "trips"}) {
        if (!req.has_file(key)) throw bad_request(std::string{"missing form field '"} + key + "'");
      }
      std::istringstream stops{req.get_file_value("stops").content};
      std::istringstream routes{req.get_file_value("routes").content};
      std::istringstream trips{req.get_file_value("trips").content};
      std::optional<std::istringstream> road;
      if (req.has_file("road_distances")) road.emplace(req.get_file_value("road_distances").content);
      auto const id = fresh_id('d');
      auto d = make_dataset(id, ingest_network(stops, routes, trips, road ? &*road : nullptr));
      Json body = io::network_json(*d->net, d->report);
      Json out{{"dataset_id", id}, {"counts", body["counts"]}, {"report", body["report"]}};
      {
        std::lock_guard lk{mu};
        datasets[id] = std::move(d);
        if (default_dataset.empty()) default_dataset = id;
      }
      reply(res, out, 201);
    }));

    server.Get("/zones", guarded([this](Req const& req, Res& res) {
      auto const d = dataset_for(req);
      if (!req.has_param("count")) throw bad_request("parameter 'count' is required");
      auto const count = number_param(req, "count", 0);
      if (count < 1 || count != std::floor(count)) throw bad_request("count must be a positive integer");
      auto const part = compute_zones(*d->net, static_cast<std::size_t>(count));
      auto const stats = zone_statistics(part, *d->net, window_of(req), config.cost);
      reply(res, io::zones_geojson(part, *d->net, stats));
    }));

    server.Get("/routes", guarded([this](Req const& req, Res& res) {
      auto const d = dataset_for(req);
      auto const weights = io::parse_weights(param(req, "weights", "1,1,1,1,1"));
      auto const filters = io::parse_rank_filters(param(req, "filters"));
      auto const rows = rank_routes(*d->net, weights, filters, window_of(req), config.cost);
      reply(res, Json{{"routes", io::rank_json(rows)}});
    }));

    server.Get(R"(/routes/([^/]+)/matrix)", guarded([this](Req const& req, Res& res) {
      auto const d = dataset_for(req);
      auto const bin_name = param(req, "bin", "hourly");
      if (bin_name != "hourly" && bin_name != "weekday") {
        throw bad_request("bin must be 'hourly' or 'weekday'");
      }
      auto const f = flow_matrix(*d->net, req.matches[1].str(), window_of(req),
                                 number_param(req, "threshold", 10.0),
                                 bin_name == "hourly" ? TimeBin::hourly : TimeBin::weekday,
                                 d->net->transfer_params());
      reply(res, io::matrix_json(f, *d->net));
    }));

    server.Get(R"(/routes/([^/]+)/transfers/([^/]+))", guarded([this](Req const& req, Res& res) {
      auto const d = dataset_for(req);
      auto const& net = *d->net;
      auto const route_id = req.matches[1].str();
      auto const stop_id = req.matches[2].str();
      auto const r = net.find_route(route_id);
      if (!r) throw not_found("unknown route '" + route_id + "'");
      auto const s = net.find_stop(stop_id);
      if (!s) throw not_found("unknown stop '" + stop_id + "'");
      auto const w = window_of(req);
      std::vector<TransferLink> links;
      std::map<std::string, std::uint64_t> in, out;
      for (auto const& l : detect_transfers(net, net.transfer_params())) {
        if (l.from_route == *r && l.from_stop == *s && w.contains(net.trips()[l.from_trip].tap_on)) {
          ++out[net.route(l.to_route).id];
          links.push_back(l);
        } else if (l.to_route == *r && l.to_stop == *s && w.contains(net.trips()[l.to_trip].tap_on)) {
          ++in[net.route(l.from_route).id];
          links.push_back(l);
        }
      }
      auto const shares = [](std::map<std::string, std::uint64_t> const& m) {
        std::uint64_t total = 0;
        for (auto const& [k, n] : m) total += n;
        Json a = Json::array();
        for (auto const& [k, n] : m) {
          a.push_back(Json{{"route_id", k}, {"count", n},
                           {"share", static_cast<double>(n) / static_cast<double>(total)}});
        }
        return a;
      };
      reply(res, Json{{"route_id", route_id}, {"stop_id", stop_id},
                      {"incoming", shares(in)}, {"outgoing", shares(out)},
                      {"links", io::transfers_json(links, net)}});
    }));

    server.Post("/search/sessions", guarded([this](Req const& req, Res& res) {
      auto const body = parse_body(req);
      auto const d = dataset_for(body.value("dataset", std::string{}));
      {
        std::lock_guard lk{mu};
        if (searches.size() >= config.max_sessions) {
          throw HttpError{429, "too_many_sessions",
                          "at most " + std::to_string(config.max_sessions) + " search sessions"};
        }
      }
      auto const gp = graph_params_from(body.value("graph_params", Json::object()), config.graph);
      StationGraph graph;
      if (body.contains("route_id")) {
        auto const r = d->net->find_route(body["route_id"].get<std::string>());
        if (!r) throw not_found("unknown route '" + body["route_id"].get<std::string>() + "'");
        StopSets via;
        if (body.contains("via")) via = stop_sets_from(body["via"], *d->net);
        graph = graph_for_route(d->net, *r, via, gp);
      } else if (body.contains("stop_sets")) {
        graph = build_anchored_graph(d->net, stop_sets_from(body["stop_sets"], *d->net), gp);
      } else {
        throw bad_request("give either 'route_id' or 'stop_sets'");
      }
      auto const cost = body.contains("cost") ? io::cost_params_from_json(body["cost"]) : config.cost;
      auto params = search_params_from(body.value("params", Json::object()));
      auto const ranges = ranges_from(body.value("ranges", Json::object()));

      auto e = std::make_shared<SearchEntry>();
      e->id = fresh_id('s');
      e->dataset = d;
      e->interval = config.snapshot_interval;
      e->session = create_session(std::make_shared<StationGraph const>(std::move(graph)),
                                  d->demand, cost, params, ranges);
      {
        auto const lk = e->lock();
        e->publish_locked();
        if (body.value("start", false)) e->session->resume();
      }
      auto* raw = e.get();
      e->worker = std::jthread{[raw](std::stop_token st) { raw->run(st); }};
      Json out{{"session_id", e->id},
               {"graph", Json{{"nodes", e->session->graph().size()},
                              {"edges", e->session->graph().edge_count()},
                              {"paths", e->session->graph().paths_to_dest(0)}}}};
      {
        // Re-checked here: concurrent creations may have raced past the first check.
        std::lock_guard lk{mu};
        if (searches.size() >= config.max_sessions) {
          throw HttpError{429, "too_many_sessions",
                          "at most " + std::to_string(config.max_sessions) + " search sessions"};
        }
        searches[e->id] = e;
      }
      reply(res, out, 201);
    }));

    server.Get(R"(/search/sessions/([^/]+))", guarded([this](Req const& req, Res& res) {
      auto const e = search(req.matches[1].str());
      auto const lk = e->lock();
      reply(res, e->snapshot_locked());
    }));

    server.Get(R"(/search/sessions/([^/]+)/graph)", guarded([this](Req const& req, Res& res) {
      auto const e = search(req.matches[1].str());
      auto const lk = e->lock();
      reply(res, io::graph_geojson(e->session->graph()));
    }));

    server.Get(R"(/search/sessions/([^/]+)/stream)", guarded([this](Req const& req, Res& res) {
      auto const e = search(req.matches[1].str());
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [e, last = std::uint64_t{0}](std::size_t, httplib::DataSink& sink) mutable {
            std::unique_lock lk{e->pub_mu};
            e->pub_cv.wait_for(lk, std::chrono::seconds{15},
                               [&] { return e->seq > last || e->closed; });
            if (e->seq > last) {
              last = e->seq;
              auto const msg = "id: " + std::to_string(last) + "\nevent: snapshot\ndata: " +
                               e->event + "\n\n";
              lk.unlock();
              e->touch();
              return sink.write(msg.data(), msg.size());
            }
            if (e->closed) {
              lk.unlock();
              sink.done();
              return true;
            }
            lk.unlock();
            static constexpr char keep_alive[] = ": keep-alive\n\n";
            return sink.write(keep_alive, sizeof keep_alive - 1);
          });
    }));

    server.Post(R"(/search/sessions/([^/]+)/control)", guarded([this](Req const& req, Res& res) {
      auto const e = search(req.matches[1].str());
      auto const body = parse_body(req);
      auto const action = body.value("action", std::string{});
      auto const lk = e->lock();
      auto& s = *e->session;
      if (s.status() == SessionStatus::stopped) throw HttpError{409, "invalid_state", "session is stopped"};
      if (action == "pause") {
        s.pause();
      } else if (action == "resume") {
        s.resume();
      } else if (action == "stop") {
        s.stop();
      } else {
        throw bad_request("action must be pause, resume or stop");
      }
      if (s.status() == SessionStatus::running) {
        e->wake.notify_all();
      } else {
        e->publish_locked();
      }
      reply(res, Json{{"session_id", e->id}, {"action", action},
                      {"status", std::string{status_name(s.status())}}});
    }));

    server.Post(R"(/search/sessions/([^/]+)/stations)", guarded([this](Req const& req, Res& res) {
      auto const e = search(req.matches[1].str());
      auto const body = parse_body(req);
      auto const& net = *e->dataset->net;
      auto const add = stop_ids_from(body.value("add", Json::array()), net);
      auto const remove = stop_ids_from(body.value("remove", Json::array()), net);
      auto const lk = e->lock();
      e->session->edit_stations(add, remove);
      e->publish_locked();
      reply(res, e->snapshot_locked());
    }));

    server.Delete(R"(/search/sessions/([^/]+))", guarded([this](Req const& req, Res& res) {
      auto const e = search(req.matches[1].str());
      {
        std::lock_guard lk{mu};
        searches.erase(e->id);
      }
      {
        auto const lk = e->lock();
        e->session->stop();
        e->publish_locked();
      }
      e->close();
      reply(res, Json{{"session_id", e->id}, {"status", "stopped"}});
    }));

    server.Post("/resolve/sessions", guarded([this](Req const& req, Res& res) {
      auto const body = parse_body(req);
      auto const e = search(body.value("search_session_id", std::string{}));
      ResolutionParams params;
      params.beta = body.value("beta", std::size_t{4});
      if (params.beta < 1) throw bad_request("beta must be at least 1");
      if (body.contains("weights")) {
        auto const& w = body["weights"];
        if (w.is_string()) {
          params.weights = io::parse_weights(w.get<std::string>());
        } else if (w.is_array() && w.size() == kCriterionCount) {
          for (std::size_t i = 0; i < kCriterionCount; ++i) params.weights[i] = w[i].get<double>();
        } else {
          throw bad_request("weights must be five numbers");
        }
      }
      auto r = std::make_shared<ResolveEntry>();
      {
        auto const lk = e->lock();
        auto const& routes = e->session->pareto().routes();
        if (routes.empty()) throw HttpError{409, "invalid_state", "search session has no routes yet"};
        auto const order = e->session->graph().stops();
        r->session = std::make_unique<ResolutionSession>(
            candidates_from(routes), std::vector<StopIdx>(order.begin(), order.end()), params);
      }
      r->id = fresh_id('r');
      r->dataset = e->dataset;
      auto const state = r->state_locked();
      {
        std::lock_guard lk{mu};
        resolutions[r->id] = r;
      }
      reply(res, state, 201);
    }));

    server.Get(R"(/resolve/sessions/([^/]+))", guarded([this](Req const& req, Res& res) {
      auto const r = resolution(req.matches[1].str());
      std::lock_guard lk{r->mu};
      reply(res, r->state_locked());
    }));

    server.Post(R"(/resolve/sessions/([^/]+)/resolve)", guarded([this](Req const& req, Res& res) {
      auto const r = resolution(req.matches[1].str());
      auto const body = parse_body(req);
      if (!body.contains("conflict_index") || !body.contains("cluster_id")) {
        throw bad_request("give conflict_index and cluster_id");
      }
      std::lock_guard lk{r->mu};
      r->session->resolve(body["conflict_index"].get<std::size_t>(),
                          body["cluster_id"].get<std::size_t>());
      reply(res, r->state_locked());
    }));

    server.Post(R"(/resolve/sessions/([^/]+)/undo)", guarded([this](Req const& req, Res& res) {
      auto const r = resolution(req.matches[1].str());
      std::lock_guard lk{r->mu};
      r->session->undo();
      reply(res, r->state_locked());
    }));

    server.set_error_handler([](Req const& req, Res& res) {
      if (res.body.empty()) {
        reply_error(res, res.status, res.status == 404 ? "not_found" : "http_error",
                    "no handler for " + req.method + " " + req.path);
      }
    });
  }
};

Service::Service(ServiceConfig config) : impl_{std::make_unique<Impl>(std::move(config))} {}

Service::~Service() = default;

int Service::bind() {
  auto& s = impl_->server;
  auto const& c = impl_->config;
  if (c.port == 0) {
    impl_->bound_port = s.bind_to_any_port(c.host);
  } else {
    impl_->bound_port = s.bind_to_port(c.host, c.port) ? c.port : -1;
  }
  if (impl_->bound_port < 0) {
    throw ServiceError{"cannot listen on " + c.host + ":" + std::to_string(c.port)};
  }
  return impl_->bound_port;
}

void Service::listen() {
  if (impl_->bound_port < 0) throw ServiceError{"bind() first"};
  impl_->server.listen_after_bind();
}

int Service::start() {
  auto const port = bind();
  impl_->listener = std::thread{[this] { impl_->server.listen_after_bind(); }};
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() { impl_->shutdown(); }

int Service::port() const { return impl_->bound_port; }

int serve(ServiceConfig const& config) {
  Service s{config};
  auto const port = s.bind();
  std::printf("listening on %s:%d\n", config.host.c_str(), port);
  std::fflush(stdout);
  s.listen();
  return 0;
}

}  // namespace busroute
