// End-to-end acceptance run: one PASS/FAIL line per criterion, each with its
// own time limit. Exit status is nonzero when any criterion fails.
//
// Every expectation below comes from an oracle in tests/support or from a
// table written out here, never from the code under test.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evidence.hpp"
#include "manifest_gen.hpp"
#include "radio_oracle.hpp"
#include "registry_support.hpp"
#include "router_oracle.hpp"
#include "test_support.hpp"
#include "xstore/conformance.hpp"
#include "xstore/pseudo_ric.hpp"
#include "xstore/registry.hpp"
#include "xstore/scenario.hpp"

namespace {

using namespace xstore;
namespace t = xstore::testing;
namespace fs = std::filesystem;

// Pinned limits and tolerances.
constexpr double kLimitSeconds = 5.0;
constexpr double kRouterLimitSeconds = 10.0;
constexpr int kManifestCount = 200;
constexpr int kCorruptionCount = 200;
constexpr int kRouterInterleavings = 1000;
constexpr std::size_t kRouterSteps = 200;
constexpr int kLifecycleSequences = 500;
constexpr int kLifecycleSteps = 60;
constexpr std::int64_t kKpmDurationMs = 20000;
constexpr std::int64_t kKpmPeriodMs = 2000;
constexpr std::int64_t kIndicationsPerGnb = 10;
constexpr std::int64_t kIndicationTolerance = 1;
constexpr std::int64_t kCrossingTicks = 100;
constexpr int kFuzzMessages = 1000;
constexpr int kPersistRuns = 8;
constexpr int kPersistRounds = 40;

struct Outcome {
  std::string failure;  // empty on success
  std::string summary;
};

using S = LifecycleState;
using E = LifecycleEvent;

// Rows in kAllStates order, columns in kAllEvents order; "-" is illegal.
const char* kTable[8][8] = {
    /* SUBMITTED         */ {"VALIDATING", "-", "-", "-", "-", "-", "-", "-"},
    /* VALIDATING        */ {"-", "TESTING", "VALIDATION_FAILED", "-", "-", "-", "-", "-"},
    /* VALIDATION_FAILED */ {"-", "-", "-", "-", "-", "-", "-", "RETIRED"},
    /* TESTING           */ {"-", "-", "-", "AVAILABLE", "TEST_FAILED", "-", "-", "-"},
    /* TEST_FAILED       */ {"-", "-", "-", "-", "-", "-", "-", "RETIRED"},
    /* AVAILABLE         */ {"-", "-", "-", "-", "-", "DEPLOYED", "-", "RETIRED"},
    /* DEPLOYED          */ {"-", "-", "-", "-", "-", "-", "AVAILABLE", "RETIRED"},
    /* RETIRED           */ {"-", "-", "-", "-", "-", "-", "-", "-"},
};

int index_of(S s) {
  for (int i = 0; i < 8; ++i)
    if (kAllStates[i] == s) return i;
  return -1;
}

std::string oracle_next(S s, E e) {
  for (int i = 0; i < 8; ++i)
    if (kAllEvents[i] == e) return kTable[index_of(s)][i];
  return "?";
}

// ---- 1: manifests -------------------------------------------------------------

Outcome manifests() {
  std::mt19937_64 rng(101);
  for (int i = 0; i < kManifestCount; ++i) {
    const auto m = t::random_valid_manifest(rng);
    const auto bytes = canonicalize(m);
    const auto back = parse_manifest(bytes);
    if (!(back == m)) return {"parse(canonicalize(m)) != m for " + bytes, {}};
    if (canonicalize(back) != bytes) return {"canonical bytes changed on round trip: " + bytes, {}};
    if (!validate_manifest(m, RicProfile{}).valid) return {"generated manifest rejected: " + bytes, {}};
  }
  std::map<std::string, int> kinds;
  for (int i = 0; i < kCorruptionCount; ++i) {
    const auto c = t::corrupt_one_field(t::random_valid_manifest(rng), rng);
    const auto r = validate_manifest(c.manifest, RicProfile{});
    bool named = false;
    for (const auto& v : r.violations) named = named || t::names_field(v.path, c.path);
    if (!named) return {c.what + ": no violation names " + c.path, {}};
    ++kinds[c.path.substr(0, c.path.find_first_of(".["))];
  }
  return {{}, std::to_string(kManifestCount) + " round trips, " + std::to_string(kCorruptionCount) +
                  " corruptions over " + std::to_string(kinds.size()) + " fields"};
}

// ---- 2: router ----------------------------------------------------------------

Outcome router() {
  std::size_t routes = 0;
  for (int seed = 0; seed < kRouterInterleavings; ++seed) {
    const auto r = t::run_router_interleaving(static_cast<std::uint64_t>(seed) + 1000, kRouterSteps);
    if (!r.failure.empty()) return {"seed " + std::to_string(seed + 1000) + ": " + r.failure, {}};
    routes += r.routes;
  }
  return {{}, std::to_string(kRouterInterleavings) + " interleavings, " + std::to_string(routes) +
                  " routes checked against a brute-force scan"};
}

// ---- 3: lifecycle -------------------------------------------------------------

bool has_linked_pass(const Registry& reg, const std::string& id) {
  for (const auto& r : reg.reports(id))
    if (r.verdict == Verdict::kPass && r.record_id == id) return true;
  return false;
}

Outcome lifecycle() {
  for (int s = 0; s < 8; ++s) {
    for (int e = 0; e < 8; ++e) {
      const auto got = next_state(kAllStates[s], kAllEvents[e]);
      const std::string name = got ? std::string(to_string(*got)) : "-";
      if (name != kTable[s][e])
        return {std::string(to_string(kAllStates[s])) + " --" + std::string(to_string(kAllEvents[e])) +
                    "--> gave " + name + ", table says " + kTable[s][e],
                {}};
    }
  }

  std::mt19937_64 rng(303);
  std::size_t gated = 0;
  std::size_t reached = 0;
  for (int seq = 0; seq < kLifecycleSequences; ++seq) {
    Registry reg;
    std::vector<std::string> ids;
    std::map<std::string, S> model;
    for (int step = 0; step < kLifecycleSteps; ++step) {
      const int op = std::uniform_int_distribution<int>(0, 9)(rng);
      if (ids.empty() || op == 0) {
        auto m = t::random_valid_manifest(rng);
        m.name = "app" + std::to_string(ids.size());
        if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) m = t::corrupt_one_field(m, rng).manifest;
        try {
          const auto rec = reg.submit(t::make_package(m));
          if (!model.count(rec.id)) ids.push_back(rec.id);
          model[rec.id] = rec.state;
        } catch (const Error&) {
        }
        continue;
      }
      const auto& id = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
      const S before = model.at(id);
      if (op == 1) {
        try {
          reg.validate(id);
          if (before != S::kSubmitted) return {"validate accepted a record in " + std::string(to_string(before)), {}};
        } catch (const Error&) {
          if (before == S::kSubmitted) return {"validate refused a SUBMITTED record", {}};
        }
        model[id] = reg.get(id).state;
        if (before == S::kSubmitted && model[id] != S::kTesting && model[id] != S::kValidationFailed)
          return {"validate left " + id + " in " + std::string(to_string(model[id])), {}};
      } else if (op <= 3) {
        const auto v = std::uniform_int_distribution<int>(0, 1)(rng) ? Verdict::kPass : Verdict::kFail;
        try {
          reg.attach_report(id, t::simple_report(v));
        } catch (const Error&) {
        }
        if (reg.get(id).state != before) return {"attaching a report changed the state", {}};
      } else {
        const E ev = kAllEvents[std::uniform_int_distribution<int>(0, 7)(rng)];
        std::string want = oracle_next(before, ev);
        if (ev == E::kTestPassed && want != "-") {
          ++gated;
          const auto reps = reg.reports(id);
          if (reps.empty() || reps.back().verdict != Verdict::kPass) want = "-";
        }
        std::string got;
        try {
          got = std::string(to_string(reg.transition(id, ev)));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kInvalidTransition) return {std::string("unexpected error ") + e.what(), {}};
          got = "-";
        }
        if (got != want)
          return {std::string(to_string(before)) + " --" + std::string(to_string(ev)) + "--> gave " + got +
                      ", oracle " + want,
                  {}};
        model[id] = reg.get(id).state;
      }

      for (const auto& rid : ids) {
        const auto st = reg.get(rid).state;
        if (st != model.at(rid)) return {rid + " changed state behind the model's back", {}};
        if ((st == S::kAvailable || st == S::kDeployed) && !has_linked_pass(reg, rid))
          return {rid + " is " + std::string(to_string(st)) + " without a linked PASS report", {}};
        if (st == S::kAvailable) ++reached;
      }
    }
  }
  return {{}, "64 table cells, " + std::to_string(kLifecycleSequences) + " sequences, " +
                  std::to_string(gated) + " gated TestPassed attempts, " + std::to_string(reached) +
                  " AVAILABLE observations all backed by PASS"};
}

// ---- 4: kpm-monitor -----------------------------------------------------------

Outcome kpm_monitor() {
  Registry reg;
  const auto pkg = t::shipped_package("kpm-monitor");
  if (pkg.behavior.on_start.size() != 1 || pkg.behavior.on_start[0].report_period_ms != kKpmPeriodMs)
    return {"kpm-monitor no longer asks for one " + std::to_string(kKpmPeriodMs) + " ms subscription", {}};
  const auto id = reg.submit(pkg).id;
  if (!reg.validate(id).valid) return {"kpm-monitor failed validation", {}};

  AcceptancePlan plan;
  plan.scenario = parse_scenario(t::slurp(t::source_dir() / "scenarios" / "two-gnb-crossing.json"));
  plan.duration_ms = kKpmDurationMs;
  const auto out = run_acceptance(reg, id, plan);
  if (out.final_state != S::kAvailable)
    return {"ended in " + std::string(to_string(out.final_state)) + ": " + render_report(out.report), {}};
  if (out.report.verdict != Verdict::kPass) return {"verdict FAIL: " + render_report(out.report), {}};
  if (reg.get(id).state != S::kAvailable) return {"registry disagrees on the final state", {}};

  // Count indications straight from the router log, keyed by the gNB in the
  // payload.
  std::map<std::int64_t, std::int64_t> per_gnb;
  for (const auto& rec : out.router_log) {
    if (rec.message.mtype != mtypes::kRicIndication) continue;
    bool to_app = false;
    for (const auto& ep : rec.delivered_to) to_app = to_app || ep == out.endpoint;
    if (!to_app) continue;
    ++per_gnb[parse_kpm_indication(rec.message.payload).gnb_id];
  }
  std::ostringstream summary;
  summary << "AVAILABLE with PASS;";
  for (const auto& g : plan.scenario.gnbs) {
    const auto n = per_gnb[g.id];
    if (n < kIndicationsPerGnb - kIndicationTolerance || n > kIndicationsPerGnb + kIndicationTolerance)
      return {"gNB " + std::to_string(g.id) + " delivered " + std::to_string(n) + " indications", {}};
    if (out.status->indications_by_gnb.count(g.id) == 0 ||
        static_cast<std::int64_t>(out.status->indications_by_gnb.at(g.id)) != n)
      return {"status counter for gNB " + std::to_string(g.id) + " disagrees with the router log", {}};
    summary << " gNB " << g.id << ": " << n;
  }
  if (per_gnb.size() != plan.scenario.gnbs.size()) return {"indications from an unknown gNB", {}};
  summary << " indications (want " << kIndicationsPerGnb << " +/- " << kIndicationTolerance << ")";
  return {{}, summary.str()};
}

// ---- 5: misbehaving packages --------------------------------------------------

std::string check_evidence_content(const Check& c, const t::Logs& logs, const std::string& endpoint) {
  for (const auto& e : c.evidence) {
    if (c.code == "UNDECLARED_TX") {
      if (e.log != EvidenceLog::kRouter) return "UNDECLARED_TX evidence outside the router log";
      for (const auto& r : logs.router) {
        if (r.seq != *e.seq) continue;
        if (r.message.mtype != c.mtype || r.message.source != endpoint)
          return "UNDECLARED_TX evidence points at someone else's message";
      }
    } else if (c.code == "HEALTH_DEAD") {
      if (e.log != EvidenceLog::kRuntime) return "HEALTH_DEAD evidence outside the runtime log";
      for (const auto& r : logs.runtime)
        if (r.seq == *e.seq && r.kind != "XAPP_DIED") return "HEALTH_DEAD evidence is a " + r.kind + " entry";
    } else if (c.code == "MISSING_FIELD") {
      if (e.log != EvidenceLog::kManifest || e.path != "author") return "MISSING_FIELD evidence is not the author path";
    }
  }
  return {};
}

Outcome misbehaving() {
  const std::pair<const char*, const char*> cases[] = {
      {"bad-undeclared-tx", "UNDECLARED_TX"},
      {"bad-missing-author", "MISSING_FIELD"},
      {"bad-health-dead", "HEALTH_DEAD"},
  };
  std::string summary;
  for (const auto& [package, code] : cases) {
    Registry reg;
    const auto id = reg.submit(t::shipped_package(package)).id;
    const auto out = onboard(reg, id);
    const auto report = reg.latest_report(id);
    if (!report) return {std::string(package) + " produced no report", {}};
    if (report->verdict != Verdict::kFail) return {std::string(package) + " passed", {}};
    const auto* c = report->find(code);
    if (!c || c->severity != Severity::kError)
      return {std::string(package) + " has no " + code + " error: " + render_report(*report), {}};
    if (c->evidence.empty()) return {std::string(package) + ": " + code + " carries no evidence", {}};
    const t::Logs logs = out.acceptance ? t::logs_of(*out.acceptance) : t::Logs{};
    if (auto bad = t::unresolved_evidence(*report, logs); !bad.empty()) return {std::string(package) + ": " + bad, {}};
    const std::string endpoint = out.acceptance ? out.acceptance->endpoint : "";
    if (auto bad = check_evidence_content(*c, logs, endpoint); !bad.empty())
      return {std::string(package) + ": " + bad, {}};
    const S want = std::string(code) == "MISSING_FIELD" ? S::kValidationFailed : S::kTestFailed;
    if (reg.get(id).state != want)
      return {std::string(package) + " ended in " + std::string(to_string(reg.get(id).state)), {}};
    if (!summary.empty()) summary += ", ";
    summary += std::string(package) + " -> " + code;
  }
  return {{}, summary + ", all evidence resolves"};
}

// ---- 6: scenario determinism and handover -------------------------------------

Outcome crossing() {
  const auto cfg = parse_scenario(t::slurp(t::source_dir() / "scenarios" / "two-gnb-crossing.json"));
  auto run = [&cfg] {
    Scenario world(cfg);
    for (std::int64_t i = 0; i < kCrossingTicks; ++i) world.tick();
    std::string log;
    for (const auto& ev : world.event_log()) log += to_json_line(ev) + "\n";
    return std::pair{log, world.event_log()};
  };
  const auto [log_a, events] = run();
  const auto [log_b, unused] = run();
  if (log_a != log_b) return {"two runs produced different logs", {}};

  std::vector<std::pair<std::int64_t, Handover>> handovers;
  for (const auto& ev : events)
    if (const auto* h = std::get_if<HandoverEvent>(&ev.body)) handovers.push_back({ev.sim_time_ms, h->handover});
  const auto oracle = t::oracle_handovers(cfg, kCrossingTicks);
  if (oracle.size() != 1) return {"oracle expects " + std::to_string(oracle.size()) + " handovers", {}};
  if (handovers.size() != 1) return {std::to_string(handovers.size()) + " HANDOVER events", {}};
  const auto& [at, h] = handovers[0];
  const auto& o = oracle[0];
  if (at != o.tick * cfg.tick_ms || h.ue != o.ue || h.from != o.from || h.to != o.to)
    return {"HANDOVER ue " + std::to_string(h.ue) + " " + std::to_string(h.from) + "->" + std::to_string(h.to) +
                " at " + std::to_string(at) + " ms, oracle says tick " + std::to_string(o.tick),
            {}};
  return {{}, "byte-identical " + std::to_string(log_a.size()) + "-byte logs, one HANDOVER (UE " +
                  std::to_string(h.ue) + ", gNB " + std::to_string(h.from) + " -> " + std::to_string(h.to) +
                  ") at tick " + std::to_string(o.tick) + " as the brute-force oracle"};
}

// ---- 7: router fuzzing cannot move the world ----------------------------------

Outcome fuzz() {
  const auto cfg = default_acceptance_scenario();
  Registry reg;
  const auto id = reg.submit(t::shipped_package("kpm-monitor")).id;
  reg.validate(id);
  const auto rec = reg.get(id);

  PseudoRic fuzzed(cfg);
  PseudoRic twin(cfg);
  const auto endpoint = fuzzed.deploy(rec);
  twin.deploy(rec);

  std::mt19937_64 rng(707);
  const std::vector<Mtype> known = {mtypes::kSubscriptionReq, mtypes::kSubscriptionResp,
                                    mtypes::kRicIndication,   mtypes::kHealthProbe,
                                    mtypes::kHealthReply,     0};
  const std::vector<std::string> sources = {endpoint, kE2TermEndpoint, "intruder", ""};
  const std::vector<std::string> payloads = {
      "", "{}", R"({"gnb_id":1,"report_period_ms":1})", R"({"gnb_id":2,"period_ms":0,"per_ue":[]})",
      R"({"ue":1,"position":{"x_m":0,"y_m":0}})", R"({"handover":{"ue":1,"to":2}})", "not json at all"};
  std::uniform_int_distribution<Mtype> any_mtype(0, (Mtype{1} << 31) - 1);
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> len(0, 512);

  std::set<Mtype> kinds;
  int sent = 0;
  while (sent < kFuzzMessages) {
    for (int k = 0; k < 50 && sent < kFuzzMessages; ++k, ++sent) {
      RmrMessage msg;
      msg.mtype = coin(rng) == 0 ? known[std::uniform_int_distribution<std::size_t>(0, known.size() - 1)(rng)]
                                 : any_mtype(rng);
      msg.source = sources[std::uniform_int_distribution<std::size_t>(0, sources.size() - 1)(rng)];
      if (coin(rng) == 0) {
        const int n = len(rng);
        for (int i = 0; i < n; ++i) msg.payload += static_cast<char>(byte(rng));
      } else {
        msg.payload = payloads[std::uniform_int_distribution<std::size_t>(0, payloads.size() - 1)(rng)];
      }
      if (coin(rng) == 0) msg.correlation_id = "sub-" + std::to_string(coin(rng));
      msg.sim_time_ms = fuzzed.sim_time_ms();
      try {
        fuzzed.router().route(msg);
      } catch (const Error&) {
      }
      kinds.insert(msg.mtype);
    }
    fuzzed.step();
    twin.step();
    if (fuzzed.radio_state_digest() != twin.radio_state_digest())
      return {"radio state diverged at " + std::to_string(fuzzed.sim_time_ms()) + " ms after " +
                  std::to_string(sent) + " messages",
              {}};
  }
  return {{}, std::to_string(kFuzzMessages) + " messages over " + std::to_string(kinds.size()) +
                  " mtypes, radio/mobility digest unchanged through " + std::to_string(fuzzed.sim_time_ms()) +
                  " ms"};
}

// ---- 8: persistence under faults ----------------------------------------------

struct Crash {};

fs::path file_for_step(const fs::path& dir, const std::string& step) {
  if (step.rfind("record:", 0) == 0) return dir / "records" / (step.substr(7) + ".json");
  if (step.rfind("report:", 0) == 0) return dir / "reports" / (step.substr(7) + ".json");
  if (step == "audit") return dir / "audit.log";
  return dir / "store.json";
}

void mutate(Registry& reg, std::vector<std::string>& ids, std::mt19937_64& rng) {
  const int op = std::uniform_int_distribution<int>(0, 4)(rng);
  try {
    if (ids.empty() || op == 0) {
      auto m = t::random_valid_manifest(rng);
      m.name = "p" + std::to_string(ids.size());
      ids.push_back(reg.submit(t::make_package(m)).id);
      return;
    }
    const auto& id = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
    switch (op) {
      case 1: reg.validate(id); break;
      case 2: reg.attach_report(id, t::simple_report(std::uniform_int_distribution<int>(0, 2)(rng) ? Verdict::kPass : Verdict::kFail)); break;
      default: reg.transition(id, kAllEvents[std::uniform_int_distribution<int>(0, 7)(rng)]); break;
    }
  } catch (const Error&) {
  }
}

Outcome persistence() {
  std::size_t crashes = 0;
  std::size_t corruptions = 0;
  for (int run = 0; run < kPersistRuns; ++run) {
    std::mt19937_64 rng(800 + run);
    t::TempDir dir;
    t::TempDir scratch;
    Registry reg;
    std::vector<std::string> ids;
    std::optional<t::StoreFingerprint> committed;
    std::optional<t::StoreFingerprint> previous;
    for (int round = 0; round < kPersistRounds; ++round) {
      for (int k = std::uniform_int_distribution<int>(1, 4)(rng); k > 0; --k) mutate(reg, ids, rng);

      const bool inject = std::uniform_int_distribution<int>(0, 2)(rng) == 0;
      const int crash_at = std::uniform_int_distribution<int>(0, 5)(rng);
      std::vector<std::string> steps;
      bool crashed = false;
      try {
        reg.persist(dir.path(), [&](std::string_view s) {
          steps.emplace_back(s);
          if (inject && static_cast<int>(steps.size()) - 1 == crash_at) throw Crash{};
        });
      } catch (const Crash&) {
        crashed = true;
        ++crashes;
      }
      const bool commit_landed = !crashed || steps.back() == "commit";
      if (commit_landed) {
        previous = committed;
        committed = t::fingerprint(reg);
      }

      std::unique_ptr<Registry> loaded;
      try {
        loaded = Registry::load(dir.path());
      } catch (const Error& e) {
        return {"run " + std::to_string(run) + " round " + std::to_string(round) + ": committed store failed to load: " +
                    e.what(),
                {}};
      }
      const t::StoreFingerprint empty;
      if (t::fingerprint(*loaded) != committed.value_or(empty))
        return {"run " + std::to_string(run) + " round " + std::to_string(round) +
                    ": reload differs from the last commit" + (crashed ? " after a crash at " + steps.back() : ""),
                {}};

      // Damage one file this commit wrote, in a copy, and demand detection.
      if (crashed || !previous || steps.empty()) continue;
      fs::remove_all(scratch.path());
      fs::copy(dir.path(), scratch.path(), fs::copy_options::recursive);
      const auto& step = steps[std::uniform_int_distribution<std::size_t>(0, steps.size() - 1)(rng)];
      const auto victim = file_for_step(scratch.path(), step);
      const auto size = fs::file_size(victim);
      if (size == 0) continue;
      fs::resize_file(victim, std::uniform_int_distribution<std::uintmax_t>(0, size - 1)(rng));
      ++corruptions;
      try {
        Registry::load(scratch.path());
        return {"truncated " + victim.filename().string() + " loaded without complaint", {}};
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kCorruptStore)
          return {"truncated " + victim.filename().string() + " gave " + e.what(), {}};
      }
      if (t::fingerprint(*Registry::load(scratch.path(), LoadMode::kPreviousCommit)) != *previous)
        return {"previous commit unreadable after truncating " + victim.filename().string(), {}};
    }
  }
  return {{}, std::to_string(kPersistRuns * kPersistRounds) + " persists, " + std::to_string(crashes) +
                  " injected crashes, " + std::to_string(corruptions) +
                  " truncated tails all CorruptStore with the previous commit intact"};
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, kLimitSeconds, manifests},   {2, kRouterLimitSeconds, router},
      {3, kLimitSeconds, lifecycle},   {4, kLimitSeconds, kpm_monitor},
      {5, kLimitSeconds, misbehaving}, {6, kLimitSeconds, crossing},
      {7, kLimitSeconds, fuzz},        {8, kLimitSeconds, persistence},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.failure = std::string("uncaught exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (out.failure.empty() && secs > c.limit_seconds) out.failure = "too slow";
    const bool pass = out.failure.empty();
    failed += pass ? 0 : 1;
    std::printf("%s criterion %d: %s (%.2f s, limit %.0f s)\n", pass ? "PASS" : "FAIL", c.number,
                pass ? out.summary.c_str() : out.failure.c_str(), secs, c.limit_seconds);
    std::fflush(stdout);
  }
  std::printf("%d of 8 criteria passed\n", 8 - failed);
  return failed == 0 ? 0 : 1;
}
