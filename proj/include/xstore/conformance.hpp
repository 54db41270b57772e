#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xstore/pseudo_ric.hpp"
#include "xstore/registry.hpp"
#include "xstore/report.hpp"
#include "xstore/scenario.hpp"

namespace xstore {

inline constexpr std::int64_t kDefaultAcceptanceDurationMs = 20000;

struct AcceptancePlan {
  ScenarioConfig scenario;
  std::int64_t duration_ms = 0;  // 0 picks default_duration_ms(script)
  /// Per subscription; defaults to floor(duration / period) - 1.
  std::optional<std::int64_t> min_rx_indications;
  bool require_health = true;
};

/// max(20 s, twice the longest on_start period).
std::int64_t default_duration_ms(const BehaviorScript& script);

/// The world used when no plan is given: two gNBs 800 m apart with one UE
/// crossing between them. Identical to scenarios/two-gnb-crossing.json.
ScenarioConfig default_acceptance_scenario();

/// Declared-vs-observed message types. Errors for undeclared traffic,
/// warnings for declarations never exercised. Checks carry the mtype but no
/// evidence; run_acceptance resolves that against the router log.
std::vector<Check> check_message_conformance(const std::map<Mtype, std::uint64_t>& observed_tx,
                                             const std::map<Mtype, std::uint64_t>& observed_rx,
                                             const XAppManifest& manifest);

/// HEALTH_OK, or HEALTH_DEAD (an error, or a warning when health is not
/// required) pointing at the XAPP_DIED runtime entry.
Check check_liveness(const XAppStatus& status, const std::vector<RuntimeEvent>& runtime_log,
                     bool require_health);

struct AcceptanceOutcome {
  ConformanceReport report;  // as stored, report_id assigned
  LifecycleState final_state = LifecycleState::kTesting;
  std::string endpoint;
  std::optional<XAppStatus> status;
  std::vector<DeliveryRecord> router_log;
  std::vector<ScenarioEvent> scenario_log;
  std::vector<RuntimeEvent> runtime_log;
};

/// Deploys the TESTING record into a fresh Pseudo-RIC, runs the plan, links
/// the report and moves the record to AVAILABLE or TEST_FAILED. A failed
/// deploy is reported as DEPLOY_FAILURE, not thrown. Throws kWrongState when
/// the record is not in TESTING.
AcceptanceOutcome run_acceptance(Registry& registry, const std::string& record_id,
                                 AcceptancePlan plan);

struct OnboardingOutcome {
  ValidationResult validation;
  std::optional<AcceptanceOutcome> acceptance;
  LifecycleState final_state = LifecycleState::kSubmitted;
};

/// Validation then, if it passed, acceptance against `scenario`.
OnboardingOutcome onboard(Registry& registry, const std::string& record_id,
                          const ScenarioConfig& scenario = default_acceptance_scenario());

}  // namespace xstore
