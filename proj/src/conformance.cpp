#include "xstore/conformance.hpp"

#include <algorithm>
#include <set>

#include "xstore/error.hpp"

namespace xstore {

namespace {

// Keep in step with scenarios/two-gnb-crossing.json; a unit test compares them.
constexpr const char* kTwoGnbCrossing = R"({
  "seed": 7,
  "tick_ms": 1000,
  "arena": {"width_m": 1000, "height_m": 500},
  "gnbs": [
    {"id": 1, "position": {"x_m": 100, "y_m": 250}, "tx_power_dbm": 30},
    {"id": 2, "position": {"x_m": 900, "y_m": 250}, "tx_power_dbm": 30}
  ],
  "ues": [
    {"id": 1, "start": {"x_m": 150, "y_m": 250}, "waypoints": [{"x_m": 850, "y_m": 250}], "speed_mps": 10},
    {"id": 2, "start": {"x_m": 200, "y_m": 300}, "waypoints": [], "speed_mps": 1}
  ],
  "radio": {
    "pl0_db": 40,
    "ref_dist_m": 1,
    "path_loss_exponent": 3,
    "noise_floor_dbm": -100,
    "handover_hysteresis_db": 3,
    "bandwidth_hz": 20000000
  }
})";

constexpr std::size_t kMaxEvidence = 3;

Check deploy_failure(const std::string& what, const std::vector<RuntimeEvent>& runtime) {
  Check c{"DEPLOY_FAILURE", Severity::kError, what, std::nullopt, {}};
  for (auto it = runtime.rbegin(); it != runtime.rend(); ++it) {
    if (it->kind == "DEPLOY_FAILED") {
      c.evidence.push_back({EvidenceLog::kRuntime, it->seq, std::nullopt, it->sim_time_ms});
      break;
    }
  }
  return c;
}

bool delivered_to(const DeliveryRecord& rec, const std::string& endpoint) {
  return std::find(rec.delivered_to.begin(), rec.delivered_to.end(), endpoint) !=
         rec.delivered_to.end();
}

// Router entries behind a message-conformance check.
void attach_message_evidence(Check& c, const std::vector<DeliveryRecord>& log,
                             const std::string& endpoint) {
  if (!c.mtype) return;
  const bool tx = c.code == "UNDECLARED_TX";
  const bool rx = c.code == "UNDECLARED_RX";
  if (!tx && !rx) return;
  for (const auto& rec : log) {
    if (rec.message.mtype != *c.mtype) continue;
    const bool hit = tx ? rec.message.source == endpoint : delivered_to(rec, endpoint);
    if (!hit) continue;
    c.evidence.push_back({EvidenceLog::kRouter, rec.seq, std::nullopt, rec.message.sim_time_ms});
    if (c.evidence.size() == kMaxEvidence) break;
  }
}

}  // namespace

std::int64_t default_duration_ms(const BehaviorScript& script) {
  std::int64_t longest = 0;
  for (const auto& intent : script.on_start) longest = std::max(longest, intent.report_period_ms);
  return std::max(kDefaultAcceptanceDurationMs, 2 * longest);
}

ScenarioConfig default_acceptance_scenario() { return parse_scenario(kTwoGnbCrossing); }

std::vector<Check> check_message_conformance(const std::map<Mtype, std::uint64_t>& observed_tx,
                                             const std::map<Mtype, std::uint64_t>& observed_rx,
                                             const XAppManifest& manifest) {
  const std::set<Mtype> tx(manifest.tx().begin(), manifest.tx().end());
  const std::set<Mtype> rx(manifest.rx().begin(), manifest.rx().end());
  std::vector<Check> out;
  auto undeclared = [&out](const std::map<Mtype, std::uint64_t>& seen, const std::set<Mtype>& decl,
                           const char* code, const char* verb) {
    for (const auto& [t, n] : seen) {
      if (n == 0 || decl.count(t)) continue;
      out.push_back({code, Severity::kError,
                     std::string(verb) + " mtype " + std::to_string(t) + " " + std::to_string(n) +
                         " time(s) without declaring it",
                     t, {}});
    }
  };
  undeclared(observed_tx, tx, "UNDECLARED_TX", "sent");
  undeclared(observed_rx, rx, "UNDECLARED_RX", "received");

  auto unused = [&out](const std::map<Mtype, std::uint64_t>& seen, const std::set<Mtype>& decl,
                       const char* side) {
    for (Mtype t : decl) {
      auto it = seen.find(t);
      if (it != seen.end() && it->second > 0) continue;
      out.push_back({"UNUSED_DECLARATION", Severity::kWarning,
                     std::string(side) + " mtype " + std::to_string(t) + " declared but never observed",
                     t, {}});
    }
  };
  unused(observed_tx, tx, "tx");
  unused(observed_rx, rx, "rx");
  return out;
}

Check check_liveness(const XAppStatus& status, const std::vector<RuntimeEvent>& runtime_log,
                     bool require_health) {
  if (status.alive && !status.died_at) {
    return {"HEALTH_OK", Severity::kInfo,
            std::to_string(status.probes) + " liveness probe(s), none fatal", std::nullopt, {}};
  }
  Check c{"HEALTH_DEAD", require_health ? Severity::kError : Severity::kWarning,
          "xApp died at sim time " + std::to_string(status.died_at.value_or(0)) + " ms after " +
              std::to_string(status.probes) + " probe(s)",
          std::nullopt, {}};
  for (const auto& ev : runtime_log) {
    if (ev.kind == "XAPP_DIED" && ev.endpoint == status.endpoint)
      c.evidence.push_back({EvidenceLog::kRuntime, ev.seq, std::nullopt, ev.sim_time_ms});
  }
  return c;
}

AcceptanceOutcome run_acceptance(Registry& registry, const std::string& record_id,
                                 AcceptancePlan plan) {
  const auto rec = registry.get(record_id);
  if (rec.state != LifecycleState::kTesting)
    throw Error(ErrorCode::kWrongState,
                record_id + " is " + std::string(to_string(rec.state)) + ", not TESTING");
  if (plan.duration_ms <= 0) plan.duration_ms = default_duration_ms(rec.package.behavior);

  PseudoRic ric(plan.scenario);
  AcceptanceOutcome out;
  ConformanceReport report;
  report.started_at = ric.sim_time_ms();

  try {
    out.endpoint = ric.deploy(rec);
  } catch (const Error& e) {
    report.checks.push_back(deploy_failure(e.what(), ric.runtime_log()));
  }

  if (!out.endpoint.empty()) {
    ric.run_for(plan.duration_ms);
    out.status = ric.xapp(record_id);
    out.router_log = ric.router_log();
    out.runtime_log = ric.runtime_log();
    const auto& st = *out.status;

    auto checks = check_message_conformance(st.sent, st.received, rec.manifest);
    for (auto& c : checks) attach_message_evidence(c, out.router_log, out.endpoint);
    std::stable_sort(checks.begin(), checks.end(), [](const Check& a, const Check& b) {
      if (a.code != b.code) return a.code < b.code;
      return a.mtype < b.mtype;
    });
    report.checks.insert(report.checks.end(), checks.begin(), checks.end());
    report.checks.push_back(check_liveness(st, out.runtime_log, plan.require_health));

    // One indication check per subscription the script asked for.
    if (!rec.package.behavior.on_start.empty()) {
      std::vector<Subscription> subs;
      for (const auto& s : ric.subscriptions())
        if (s.endpoint == out.endpoint) subs.push_back(s);
      if (subs.empty()) {
        Check c{"INDICATIONS_MISSING", Severity::kError,
                "on_start asked for reports but no subscription was established", std::nullopt, {}};
        for (const auto& ev : out.runtime_log)
          if (ev.kind == "SUBSCRIPTION_FAILED" && c.evidence.size() < kMaxEvidence)
            c.evidence.push_back({EvidenceLog::kRuntime, ev.seq, std::nullopt, ev.sim_time_ms});
        report.checks.push_back(std::move(c));
      }
      for (const auto& s : subs) {
        const std::int64_t expected = plan.duration_ms / s.report_period_ms;
        const std::int64_t minimum = plan.min_rx_indications.value_or(expected - 1);
        const std::string corr = "sub-" + std::to_string(s.id);
        std::int64_t got = 0;
        std::optional<DeliveryRecord> first;
        for (const auto& r : out.router_log) {
          if (r.message.mtype != mtypes::kRicIndication || r.message.correlation_id != corr ||
              !delivered_to(r, out.endpoint))
            continue;
          if (!first) first = r;
          ++got;
        }
        const bool ok = got >= minimum;
        Check c{ok ? "INDICATIONS_OK" : "INDICATIONS_MISSING", ok ? Severity::kInfo : Severity::kError,
                "gNB " + std::to_string(s.gnb_id) + ": " + std::to_string(got) + " of " +
                    std::to_string(expected) + " indication(s) every " +
                    std::to_string(s.report_period_ms) + " ms, minimum " + std::to_string(minimum),
                mtypes::kRicIndication, {}};
        if (first) {
          c.evidence.push_back({EvidenceLog::kRouter, first->seq, std::nullopt, first->message.sim_time_ms});
        } else {
          for (const auto& ev : out.runtime_log) {
            if (ev.kind == "SUBSCRIBED" && ev.endpoint == out.endpoint &&
                ev.detail.rfind(corr + " ", 0) == 0) {
              c.evidence.push_back({EvidenceLog::kRuntime, ev.seq, std::nullopt, ev.sim_time_ms});
              break;
            }
          }
        }
        report.checks.push_back(std::move(c));
      }
    }
  }

  out.scenario_log = ric.scenario_log();
  if (out.runtime_log.empty()) out.runtime_log = ric.runtime_log();
  report.finished_at = ric.sim_time_ms();
  report.verdict = verdict_for(report.checks);
  const auto rid = registry.attach_report(record_id, report);
  out.report = registry.report(rid);
  out.final_state = registry.transition(
      record_id, report.verdict == Verdict::kPass ? LifecycleEvent::kTestPassed
                                                  : LifecycleEvent::kTestFailed);
  return out;
}

OnboardingOutcome onboard(Registry& registry, const std::string& record_id,
                          const ScenarioConfig& scenario) {
  OnboardingOutcome out;
  out.validation = registry.validate(record_id);
  if (out.validation.valid) {
    AcceptancePlan plan;
    plan.scenario = scenario;
    out.acceptance = run_acceptance(registry, record_id, std::move(plan));
    out.final_state = out.acceptance->final_state;
  } else {
    out.final_state = registry.get(record_id).state;
  }
  return out;
}

}  // namespace xstore
