#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "xstore/conformance.hpp"
#include "xstore/error.hpp"
#include "xstore/pseudo_ric.hpp"
#include "xstore/registry.hpp"

namespace httplib {
class Server;
}

namespace xstore {

struct ApiError {
  int status = 500;
  std::string code;
  std::string detail;
};

/// One (status, code) per error kind; the mapping is total.
ApiError to_api_error(ErrorCode code, std::string detail = {});
std::string to_json(const ApiError& e);

struct GatewayConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::filesystem::path data_dir = "data";
  std::optional<std::filesystem::path> static_dir;
  /// Wall-clock milliseconds between live scenario ticks; 0 uses the
  /// scenario's own tick_ms.
  std::int64_t tick_ms = 0;
  std::optional<std::uint64_t> seed;
  /// Live world; defaults to the acceptance scenario.
  std::optional<ScenarioConfig> scenario;
  /// World used for acceptance runs of submitted packages.
  std::optional<ScenarioConfig> acceptance_scenario;
  bool start_scenario = false;
};

class EventHub;

/// HTTP/JSON front end over the registry, the onboarding pipeline and a live
/// Pseudo-RIC. Submissions are queued to a single pipeline worker; every
/// mutation is persisted before the response is sent.
class Gateway {
 public:
  /// Loads the store from data_dir. Throws kIoFailure or kCorruptStore.
  explicit Gateway(GatewayConfig config);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds the listening socket and returns the port.
  int bind();
  /// Serves until stop(). bind() must have succeeded.
  void listen();
  /// Stops serving, drains background work and persists the store.
  void stop();

  /// Blocks until the pipeline queue is empty and idle.
  void wait_idle();

  Registry& registry() { return *registry_; }
  PseudoRic& ric() { return *ric_; }
  int port() const { return port_; }

 private:
  void routes();
  void enqueue(const std::string& record_id);
  void pipeline_loop();
  void ticker_loop();
  void persist();

  GatewayConfig config_;
  std::unique_ptr<Registry> registry_;
  std::unique_ptr<PseudoRic> ric_;
  ScenarioConfig acceptance_scenario_;
  std::shared_ptr<EventHub> hub_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = -1;

  std::mutex persist_mu_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<std::string> queue_;
  bool busy_ = false;

  std::mutex tick_mu_;
  std::condition_variable tick_cv_;
  bool running_scenario_ = false;

  std::atomic<bool> stopping_{false};
  bool stopped_ = false;
  std::thread pipeline_;
  std::thread ticker_;
};

}  // namespace xstore
