#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include "busroute/criteria.hpp"
#include "busroute/station_graph.hpp"

namespace busroute {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// Loaded at startup as dataset "default" when non-empty.
  std::filesystem::path dataset_dir;
  CostParams cost;
  GraphParams graph;
  std::size_t max_sessions = 8;
  std::uint64_t snapshot_interval = 10;  // iterations between streamed snapshots
  std::chrono::milliseconds idle_timeout = std::chrono::minutes{30};
  std::size_t worker_threads = 32;  // HTTP handlers, including open streams

  void validate() const;
};

/// Startup failure: unreadable dataset, port in use, bad configuration.
class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// HTTP/JSON front end over the engine. Search sessions each own a worker
/// thread that steps the search and publishes snapshots to server-sent-event
/// streams; resolution sessions are plain state machines behind a mutex.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(Service const&) = delete;
  Service& operator=(Service const&) = delete;

  /// Binds the listening socket. Returns the bound port.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void listen();
  /// bind() plus listen() on a background thread.
  int start();
  void stop();

  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Runs a service in the foreground (the CLI `serve` subcommand).
int serve(ServiceConfig const& config);

}  // namespace busroute
