#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "xstore/behavior.hpp"
#include "xstore/manifest.hpp"
#include "xstore/router.hpp"
#include "xstore/scenario.hpp"

namespace xstore {

class Registry;
struct XAppRecord;

/// Endpoint of the simulated E2 termination inside the Pseudo-RIC.
inline constexpr const char* kE2TermEndpoint = "e2term";

/// Runtime log kinds: DEPLOYED, DEPLOY_FAILED, UNDEPLOYED, SUBSCRIBED, SUBSCRIPTION_FAILED,
/// SEND_REJECTED, PROBE_FAILED, XAPP_DIED, SCENARIO_LOADED.
struct RuntimeEvent {
  std::uint64_t seq = 0;
  std::int64_t sim_time_ms = 0;
  std::string kind;
  std::string endpoint;
  std::string record_id;
  std::string detail;
};

std::string to_json_line(const RuntimeEvent& ev);

struct XAppStatus {
  std::string record_id;
  std::string endpoint;  // name@version
  std::set<Mtype> declared_rx;
  std::set<Mtype> declared_tx;
  bool alive = false;
  std::int64_t deployed_at = 0;
  std::optional<std::int64_t> died_at;
  std::int64_t probes = 0;
  std::int64_t consecutive_failures = 0;
  std::vector<std::uint64_t> subscriptions;
  std::map<Mtype, std::uint64_t> received;
  std::map<Mtype, std::uint64_t> sent;
  std::uint64_t ignored = 0;
  std::map<std::int64_t, std::uint64_t> indications_by_gnb;
};

std::string to_json(const XAppStatus& s);

/// What the gateway streams to dashboards: `type` is "scenario" or
/// "runtime", `data` a JSON object.
struct StreamEvent {
  std::string type;
  std::string data;
};

/// Embedded near-RT RIC stand-in: a router, a scenario, an E2 termination
/// and the behavior-script interpreters of deployed xApps, all advanced by
/// the scenario clock. Thread-safe; every public call is serialized.
///
/// xApps only observe the world. The sole path from an xApp into the
/// scenario is a subscription request, which selects reports but never
/// changes radio or mobility state.
class PseudoRic {
 public:
  explicit PseudoRic(ScenarioConfig scenario, std::size_t router_log_retention = 0);

  /// Registers the endpoint with exactly the manifest's rx/tx sets and issues
  /// the on_start subscriptions. Lifecycle bookkeeping is the caller's job.
  /// Throws kAlreadyRegistered, kRouterRegistrationFailed.
  std::string deploy(const XAppRecord& record);
  /// Throws kNotRunning.
  void undeploy(const std::string& record_id);
  bool is_running(const std::string& record_id) const;

  /// One scenario tick: mobility and handovers, indications to subscribers,
  /// the E2 termination, every live xApp in endpoint order, then due probes.
  TickResult step();
  void run_for(std::int64_t duration_ms);

  /// Replaces the world. Live xApps keep running and re-issue their
  /// on_start subscriptions against the new gNB set.
  void load_scenario(ScenarioConfig scenario);

  std::vector<XAppStatus> xapps() const;
  std::optional<XAppStatus> xapp(const std::string& record_id) const;

  std::vector<RuntimeEvent> runtime_log() const;
  std::vector<ScenarioEvent> scenario_log() const;
  std::vector<DeliveryRecord> router_log() const { return router_.log_since(0); }

  WorldView snapshot(std::size_t recent = 50) const;
  ScenarioConfig scenario_config() const;
  std::int64_t sim_time_ms() const;
  std::string radio_state_digest() const;
  std::vector<Subscription> subscriptions() const;

  Router& router() { return router_; }
  const Router& router() const { return router_; }

  void set_listener(std::function<void(const StreamEvent&)> listener);

 private:
  struct Instance {
    XAppStatus status;
    BehaviorScript behavior;
    HealthSpec health;
    std::int64_t next_probe_at = 0;
    std::uint64_t next_correlation = 1;
  };

  using Pending = std::vector<StreamEvent>;

  void log_locked(Pending& out, std::string kind, const Instance* inst, std::string detail);
  void subscribe_on_start_locked(Pending& out, Instance& inst);
  void pump_e2term_locked(Pending& out);
  void step_xapp_locked(Pending& out, Instance& inst);
  void probe_locked(Pending& out, Instance& inst);
  void kill_locked(Pending& out, Instance& inst, const std::string& reason);
  Instance* find_locked(const std::string& record_id);
  const Instance* find_locked(const std::string& record_id) const;
  void emit(const Pending& events);

  mutable std::mutex mu_;
  Router router_;
  std::unique_ptr<Scenario> scenario_;
  std::map<std::string, Instance> instances_;  // by endpoint
  std::vector<RuntimeEvent> runtime_log_;
  std::function<void(const StreamEvent&)> listener_;
  std::mutex listener_mu_;
};

/// Deploys a registry record: TESTING is an acceptance deploy and leaves the
/// state alone, AVAILABLE becomes DEPLOYED. Throws kWrongState otherwise.
std::string deploy_record(Registry& registry, PseudoRic& ric, const std::string& record_id);
/// Stops the xApp and moves a DEPLOYED record back to AVAILABLE. Throws
/// kNotRunning.
void undeploy_record(Registry& registry, PseudoRic& ric, const std::string& record_id);

}  // namespace xstore
