#include "busroute/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "busroute/analytics.hpp"
#include "busroute/conflict_resolution.hpp"
#include "busroute/network.hpp"
#include "busroute/pareto_search.hpp"
#include "busroute/serialization.hpp"
#include "busroute/service.hpp"

namespace busroute::cli {

namespace {

using io::Json;

/// Failure with an exit code and a short machine-readable code.
struct CliError : std::runtime_error {
  CliError(int exit, std::string code, std::string const& message)
      : std::runtime_error{message}, exit{exit}, code{std::move(code)} {}
  int exit;
  std::string code;
};

struct Common {
  std::string data;
  std::string out;
  std::string from, to;
};

void add_data(CLI::App& cmd, Common& c, bool window = true) {
  cmd.add_option("--data", c.data, "Dataset directory (stops.csv, routes.csv, trips.csv)")
      ->required();
  cmd.add_option("--out", c.out, "Output path (default: stdout)");
  if (window) {
    cmd.add_option("--from", c.from, "Window start, ISO-8601");
    cmd.add_option("--to", c.to, "Window end (exclusive), ISO-8601");
  }
}

void write_text(Common const& c, std::string const& text, std::ostream& out) {
  if (c.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f{c.out, std::ios::binary};
  if (!f) throw CliError{kExitFailure, "io", "cannot write " + c.out};
  f << text;
}

void write_json(Common const& c, Json const& j, std::ostream& out) {
  write_text(c, j.dump(2) + "\n", out);
}

IngestResult load(Common const& c, TransferParams transfer = {}) {
  try {
    return ingest_directory(c.data, transfer);
  } catch (IngestError const& e) {
    throw CliError{kExitFailure, "dataset", e.what()};
  } catch (std::filesystem::filesystem_error const& e) {
    throw CliError{kExitFailure, "dataset", e.what()};
  }
}

RouteIdx find_route(BusNetwork const& net, std::string const& id) {
  auto const r = net.find_route(id);
  if (!r) throw CliError{kExitFailure, "unknown_route", "unknown route '" + id + "'"};
  return *r;
}

std::vector<std::size_t> parse_choices(std::string const& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream in{text};
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      auto const v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument{item};
      out.push_back(v);
    } catch (std::exception const&) {
      throw io::FormatError{"--choose expects comma-separated cluster indices, got '" + item + "'"};
    }
  }
  return out;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bus network analytics and route replanning"};
  app.name("busroute");
  app.require_subcommand(1);

  Common common;
  TransferParams transfer;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset and write a network snapshot");
  add_data(*ingest, common, false);

  // zones
  std::size_t zone_count = 0;
  auto* zones = app.add_subcommand("zones", "Transportation zones as GeoJSON");
  add_data(*zones, common);
  zones->add_option("--count", zone_count, "Number of zones")->required()->check(CLI::PositiveNumber);

  // rank
  std::string weights = "1,1,1,1,1", filters, format = "csv";
  std::string cost_file;
  auto* rank = app.add_subcommand("rank", "Rank existing routes (CSV or JSON)");
  add_data(*rank, common);
  rank->add_option("--weights", weights, "Five weights in criterion order, or name=w items");
  rank->add_option("--filter", filters, "name=lo:hi items (criteria, length_km, stop_count)");
  rank->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  rank->add_option("--cost", cost_file, "Cost parameters JSON");

  // matrix
  std::string route_id, bin = "hourly";
  double threshold = 10.0;
  auto* matrix = app.add_subcommand("matrix", "Flow matrix of one route as JSON");
  add_data(*matrix, common);
  matrix->add_option("--route", route_id, "Route id")->required();
  matrix->add_option("--bin", bin, "hourly or weekday")->check(CLI::IsMember({"hourly", "weekday"}));
  matrix->add_option("--threshold", threshold, "Count rendered at full intensity")
      ->check(CLI::PositiveNumber);

  // transfers
  std::string stop_id;
  auto* transfers = app.add_subcommand("transfers", "Detected transfers as JSON");
  add_data(*transfers, common);
  transfers->add_option("--route", route_id, "Only transfers touching this route");
  transfers->add_option("--stop", stop_id, "Only transfers at this stop");
  transfers->add_option("--max-walk", transfer.max_walk_m, "Walk limit in metres")
      ->check(CLI::NonNegativeNumber);
  transfers->add_option("--max-wait", transfer.max_wait_min, "Wait limit in minutes")
      ->check(CLI::NonNegativeNumber);

  // search
  std::string anchors, stop_sets, ranges;
  std::uint64_t iterations = 0, seed = 0;
  SearchParams sp;
  GraphParams gp;
  auto* search = app.add_subcommand("search", "Pareto route search; writes the Pareto set JSON");
  add_data(*search, common);
  auto* by_route = search->add_option("--route", route_id, "Route to replan (its terminals)");
  auto* by_sets = search->add_option("--stop-sets", stop_sets,
                                     "Explicit anchored stop sets: 'a,b;c;d'");
  by_route->excludes(by_sets);
  search->add_option("--anchors", anchors, "Intermediate stop sets for --route: 'a;b,c'")
      ->needs(by_route);
  search->add_option("--ranges", ranges, "name=lo:hi items");
  search->add_option("--iterations", iterations, "Search cycles")->required();
  search->add_option("--seed", seed, "Random seed")->required();
  search->add_option("--parallel", sp.k, "Expansion width k")->check(CLI::PositiveNumber);
  search->add_option("--threads", sp.threads, "Simulation threads")->check(CLI::PositiveNumber);
  search->add_option("--c-ucb", sp.c_ucb, "Exploration constant");
  search->add_option("--min-spacing", gp.min_spacing_km, "km");
  search->add_option("--max-spacing", gp.max_spacing_km, "km");
  search->add_option("--progress-slack", gp.progress_slack, "0 <= slack < 1");
  search->add_option("--cost", cost_file, "Cost parameters JSON");

  // resolve
  std::string input, choose;
  std::size_t beta = 4;
  auto* resolve = app.add_subcommand("resolve", "Replay a conflict-resolution script");
  resolve->add_option("--input", input, "Pareto set JSON from `search`")->required();
  resolve->add_option("--beta", beta, "Maximum cluster count")->check(CLI::PositiveNumber);
  resolve->add_option("--choose", choose, "Cluster index per step: k1,k2,...");
  resolve->add_option("--weights", weights, "Criterion weights for clustering");
  resolve->add_option("--out", common.out, "Output path (default: stdout)");

  // serve
  ServiceConfig sc;
  std::uint64_t idle_minutes = 30;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--data", common.data, "Dataset directory loaded as 'default'");
  serve_cmd->add_option("--host", sc.host, "Listen address");
  serve_cmd->add_option("--port", sc.port, "Listen port (0 = any)");
  serve_cmd->add_option("--snapshot-interval", sc.snapshot_interval, "Iterations per snapshot")
      ->check(CLI::PositiveNumber);
  serve_cmd->add_option("--max-sessions", sc.max_sessions, "Concurrent search sessions")
      ->check(CLI::PositiveNumber);
  serve_cmd->add_option("--idle-minutes", idle_minutes, "Session idle eviction");
  serve_cmd->add_option("--cost", cost_file, "Default cost parameters JSON");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (CLI::CallForHelp const&) {
    out << app.help();
    return kExitOk;
  } catch (CLI::CallForAllHelp const&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (CLI::ParseError const& e) {
    err << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    CostParams cost;
    if (!cost_file.empty()) cost = io::load_cost_params(cost_file);
    auto const window = io::parse_window(common.from, common.to);

    if (ingest->parsed()) {
      auto const r = load(common);
      write_json(common, io::network_json(*r.network, r.report), out);
    } else if (zones->parsed()) {
      auto const r = load(common);
      auto const part = compute_zones(*r.network, zone_count);
      auto const stats = zone_statistics(part, *r.network, window, cost);
      write_json(common, io::zones_geojson(part, *r.network, stats), out);
    } else if (rank->parsed()) {
      auto const r = load(common);
      auto const rows = rank_routes(*r.network, io::parse_weights(weights),
                                    io::parse_rank_filters(filters), window, cost);
      if (format == "csv") {
        write_text(common, io::rank_csv(rows), out);
      } else {
        write_json(common, io::rank_json(rows), out);
      }
    } else if (matrix->parsed()) {
      auto const r = load(common);
      auto const f = flow_matrix(*r.network, route_id, window, threshold,
                                 bin == "hourly" ? TimeBin::hourly : TimeBin::weekday);
      write_json(common, io::matrix_json(f, *r.network), out);
    } else if (transfers->parsed()) {
      auto const r = load(common, transfer);
      auto const& net = *r.network;
      std::optional<RouteIdx> route;
      std::optional<StopIdx> stop;
      if (!route_id.empty()) route = find_route(net, route_id);
      if (!stop_id.empty()) {
        stop = net.find_stop(stop_id);
        if (!stop) throw CliError{kExitFailure, "unknown_stop", "unknown stop '" + stop_id + "'"};
      }
      std::vector<TransferLink> links;
      for (auto const& l : detect_transfers(net, transfer)) {
        if (!window.contains(l.tap_on)) continue;
        bool const at_from = (!route || l.from_route == *route) && (!stop || l.from_stop == *stop);
        bool const at_to = (!route || l.to_route == *route) && (!stop || l.to_stop == *stop);
        if (at_from || at_to) links.push_back(l);
      }
      write_json(common, io::transfers_json(links, net), out);
    } else if (search->parsed()) {
      auto const r = load(common);
      auto const& net = r.network;
      StationGraph graph;
      Json head = Json::object();
      if (!route_id.empty()) {
        auto const route = find_route(*net, route_id);
        StopSets via;
        if (!anchors.empty()) via = io::parse_stop_sets(anchors, *net);
        graph = graph_for_route(net, route, via, gp);
        head["route_id"] = route_id;
      } else if (!stop_sets.empty()) {
        graph = build_anchored_graph(net, io::parse_stop_sets(stop_sets, *net), gp);
      } else {
        throw CliError{kExitUsage, "usage", "search needs --route or --stop-sets"};
      }
      sp.seed = seed;
      auto session = create_session(std::make_shared<StationGraph const>(std::move(graph)),
                                    build_demand_matrix(*net, window), cost, sp,
                                    io::parse_ranges(ranges));
      session->resume();
      if (iterations > 0) session->step(iterations);
      auto const& g = session->graph();
      auto const name = io::namer(*net);
      auto const body = io::pareto_json(session->pareto().routes(), g.stops(), name);
      head["origin"] = name(g.stop(g.origin()));
      head["destination"] = name(g.stop(g.destination()));
      head["seed"] = seed;
      head["parallel"] = sp.k;
      head["iterations"] = session->iteration();
      head["status"] = std::string{status_name(session->status())};
      head["graph"] = Json{{"nodes", g.size()}, {"edges", g.edge_count()},
                           {"paths", g.paths_to_dest(g.origin())}};
      head["ranges"] = io::ranges_json(session->ranges());
      head["cost"] = io::cost_params_json(cost);
      for (auto const& [k, v] : body.items()) head[k] = v;
      write_json(common, head, out);
    } else if (resolve->parsed()) {
      std::ifstream in{input};
      if (!in) throw CliError{kExitFailure, "io", "cannot read " + input};
      Json doc;
      try {
        doc = Json::parse(in);
      } catch (Json::parse_error const& e) {
        throw CliError{kExitFailure, "format", input + ": " + e.what()};
      }
      auto const file = io::parse_pareto(doc);
      if (file.routes.empty()) throw CliError{kExitFailure, "empty", "no routes to resolve"};
      ResolutionParams rp;
      rp.beta = beta;
      rp.weights = io::parse_weights(weights);
      ResolutionSession session{file.routes, file.stop_order, rp};
      auto const choices = parse_choices(choose);
      Json steps = Json::array();
      for (auto const k : choices) {
        if (session.is_final()) {
          throw CliError{kExitFailure, "already_final", "more choices than conflicts"};
        }
        auto const& cs = session.conflicts();
        auto const active = std::find_if(cs.begin(), cs.end(), [](Conflict const& c) {
          return c.status == ConflictStatus::active;
        });
        if (active == cs.end()) throw CliError{kExitFailure, "no_conflict", "no active conflict"};
        auto const idx = static_cast<std::size_t>(active - cs.begin());
        if (k >= session.clusters().size()) {
          throw CliError{kExitFailure, "bad_choice",
                         "cluster " + std::to_string(k) + " does not exist (have " +
                             std::to_string(session.clusters().size()) + ")"};
        }
        session.resolve(idx, k);
        steps.push_back(Json{{"conflict_index", idx}, {"cluster_id", k},
                             {"candidates", session.state().candidates.size()}});
      }
      auto state = io::resolution_json(session, file.namer());
      Json result{{"final", session.is_final()}, {"steps", std::move(steps)}};
      for (auto const& [k, v] : state.items()) result[k] = v;
      write_json(common, result, out);
      if (!session.is_final()) {
        err << "error: not_final: " << session.state().candidates.size()
            << " candidates remain; add choices for the active conflict\n";
        return kExitFailure;
      }
    } else if (serve_cmd->parsed()) {
      sc.dataset_dir = common.data;
      sc.cost = cost;
      sc.idle_timeout = std::chrono::minutes{idle_minutes};
      return serve(sc);
    }
    return kExitOk;
  } catch (CliError const& e) {
    err << "error: " << e.code << ": " << e.what() << "\n";
    return e.exit;
  } catch (io::FormatError const& e) {
    err << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (IngestError const& e) {
    err << "error: dataset: " << e.what() << "\n";
    return kExitFailure;
  } catch (EmptyGraphError const& e) {
    err << "error: empty_graph: " << e.what() << "\n";
    return kExitFailure;
  } catch (UnknownRouteError const& e) {
    err << "error: unknown_route: " << e.what() << "\n";
    return kExitFailure;
  } catch (ServiceError const& e) {
    err << "error: service: " << e.what() << "\n";
    return kExitFailure;
  } catch (std::exception const& e) {
    err << "error: failed: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace busroute::cli
