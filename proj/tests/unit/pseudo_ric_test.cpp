#include <gtest/gtest.h>

#include "registry_support.hpp"
#include "test_support.hpp"
#include "xstore/conformance.hpp"
#include "xstore/error.hpp"
#include "xstore/pseudo_ric.hpp"

namespace xstore {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::kIoFailure;
}

ScenarioConfig three_gnbs() {
  return parse_scenario(testing::slurp(testing::source_dir() / "scenarios" / "three-ue-loop.json"));
}

/// Submits and validates, leaving the record in TESTING.
std::string testing_record(Registry& reg, const PackageArchive& pkg) {
  const auto id = reg.submit(pkg).id;
  EXPECT_TRUE(reg.validate(id).valid);
  return id;
}

PackageArchive scripted(const std::string& name, std::vector<std::int64_t> rx,
                        std::vector<std::int64_t> tx, const std::string& behavior,
                        HealthSpec health = {}) {
  XAppManifest m;
  m.name = name;
  m.version = "1.0.0";
  m.author = "t";
  m.license = "MIT";
  m.ric_compat = VersionRangeSpec{"1.0.0", "2.0.0"};
  m.rx_mtypes = std::move(rx);
  m.tx_mtypes = std::move(tx);
  m.health = health;
  return testing::make_package(m, parse_behavior(behavior));
}

std::size_t count_mtype(const std::vector<DeliveryRecord>& log, Mtype t, const std::string& source = "") {
  std::size_t n = 0;
  for (const auto& r : log)
    if (r.message.mtype == t && (source.empty() || r.message.source == source)) ++n;
  return n;
}

TEST(PseudoRic, DeployRegistersExactManifestSets) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  PseudoRic ric(default_acceptance_scenario());
  const auto ep = ric.deploy(reg.get(id));
  EXPECT_EQ(ep, "kpm-monitor@1.0.0");
  const auto decl = ric.router().registration(ep);
  ASSERT_TRUE(decl);
  EXPECT_EQ(decl->rx, (std::set<Mtype>{12011, 12050}));
  EXPECT_EQ(decl->tx, (std::set<Mtype>{12010}));
  EXPECT_TRUE(ric.is_running(id));
}

TEST(PseudoRic, OneSubscriptionRequestPerMatchingGnb) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  PseudoRic ric(default_acceptance_scenario());
  const auto ep = ric.deploy(reg.get(id));
  EXPECT_EQ(count_mtype(ric.router_log(), mtypes::kSubscriptionReq, ep), 2u);
  EXPECT_EQ(count_mtype(ric.router_log(), mtypes::kSubscriptionResp, kE2TermEndpoint), 2u);
  EXPECT_EQ(ric.xapp(id)->subscriptions.size(), 2u);
}

TEST(PseudoRic, WildcardCoversEveryGnb) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  const auto world = three_gnbs();
  PseudoRic ric(world);
  const auto ep = ric.deploy(reg.get(id));
  std::set<std::int64_t> want;
  for (const auto& g : world.gnbs) want.insert(g.id);
  std::set<std::int64_t> got;
  for (const auto& s : ric.subscriptions())
    if (s.endpoint == ep && s.active) got.insert(s.gnb_id);
  EXPECT_EQ(got, want);
  EXPECT_EQ(ric.subscriptions().size(), 3u);
}

TEST(PseudoRic, RecordDeployRespectsLifecycle) {
  Registry reg;
  PseudoRic ric(default_acceptance_scenario());
  const auto id = reg.submit(testing::shipped_package("kpm-monitor")).id;
  EXPECT_EQ(code_of([&] { deploy_record(reg, ric, id); }), ErrorCode::kWrongState);
  reg.validate(id);
  deploy_record(reg, ric, id);  // acceptance deploy: state unchanged
  EXPECT_EQ(reg.get(id).state, LifecycleState::kTesting);
  undeploy_record(reg, ric, id);
  EXPECT_EQ(reg.get(id).state, LifecycleState::kTesting);

  reg.attach_report(id, testing::simple_report(Verdict::kPass));
  reg.transition(id, LifecycleEvent::kTestPassed);
  deploy_record(reg, ric, id);
  EXPECT_EQ(reg.get(id).state, LifecycleState::kDeployed);
  EXPECT_EQ(code_of([&] { deploy_record(reg, ric, id); }), ErrorCode::kWrongState);
  undeploy_record(reg, ric, id);
  EXPECT_EQ(reg.get(id).state, LifecycleState::kAvailable);
  EXPECT_EQ(code_of([&] { undeploy_record(reg, ric, id); }), ErrorCode::kNotRunning);
}

TEST(PseudoRic, UndeployStopsEverything) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  PseudoRic ric(default_acceptance_scenario());
  const auto ep = ric.deploy(reg.get(id));
  ric.run_for(4000);
  ric.undeploy(id);
  EXPECT_FALSE(ric.router().is_registered(ep));
  for (const auto& s : ric.subscriptions()) EXPECT_FALSE(s.active);
  EXPECT_EQ(code_of([&] { ric.undeploy(id); }), ErrorCode::kNotRunning);

  const auto mark = ric.router().last_seq();
  ric.run_for(10000);
  for (const auto& r : ric.router().log_since(mark)) EXPECT_NE(r.message.mtype, mtypes::kRicIndication);
}

TEST(PseudoRic, LoggingRuleCountsIndications) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  PseudoRic ric(default_acceptance_scenario());
  ric.deploy(reg.get(id));
  ric.run_for(20000);
  const auto st = *ric.xapp(id);
  EXPECT_EQ(st.received.at(mtypes::kRicIndication), 20u);
  EXPECT_EQ(st.indications_by_gnb.at(1), 10u);
  EXPECT_EQ(st.indications_by_gnb.at(2), 10u);
  EXPECT_EQ(st.sent.at(mtypes::kSubscriptionReq), 2u);
  EXPECT_EQ(st.sent.count(mtypes::kRicIndication), 0u);
}

TEST(PseudoRic, ReplyCopiesCorrelationId) {
  Registry reg;
  const auto pkg = scripted("echo", {12011, 12050}, {12010, 201}, R"({
    "on_start": [{"node_selector": 1, "report_period_ms": 1000}],
    "rules": [{"match_mtype": 12050, "action": {"type": "REPLY", "mtype": 201, "payload_template": "${correlation_id}"}}]})");
  const auto id = testing_record(reg, pkg);
  PseudoRic ric(default_acceptance_scenario());
  const auto ep = ric.deploy(reg.get(id));
  ric.step();
  ric.step();
  std::vector<DeliveryRecord> replies;
  for (const auto& r : ric.router_log())
    if (r.message.mtype == 201) replies.push_back(r);
  ASSERT_EQ(replies.size(), 2u);
  const std::string corr = "sub-" + std::to_string(ric.subscriptions().front().id);
  for (const auto& r : replies) {
    EXPECT_EQ(r.message.source, ep);
    EXPECT_EQ(r.message.correlation_id, corr);
    EXPECT_EQ(r.message.payload, corr);
  }
}

TEST(PseudoRic, UndeclaredSendIsStillRouted) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("bad-undeclared-tx"));
  PseudoRic ric(default_acceptance_scenario());
  const auto ep = ric.deploy(reg.get(id));
  ric.run_for(2000);
  EXPECT_EQ(count_mtype(ric.router_log(), 999, ep), 2u) << "one per gNB indication";
  EXPECT_EQ(ric.xapp(id)->sent.at(999), 2u);
}

TEST(PseudoRic, IgnoredAndUnmatchedMessagesAreCounted) {
  Registry reg;
  const auto pkg = scripted("quiet", {12011, 12050}, {12010}, R"({
    "on_start": [{"node_selector": 2, "report_period_ms": 1000}],
    "rules": [{"match_mtype": 12050, "action": "IGNORE"}]})");
  const auto id = testing_record(reg, pkg);
  PseudoRic ric(default_acceptance_scenario());
  ric.deploy(reg.get(id));
  ric.run_for(3000);
  const auto st = *ric.xapp(id);
  EXPECT_EQ(st.ignored, 4u) << "one unmatched response plus three ignored indications";
  EXPECT_EQ(st.received.at(mtypes::kRicIndication), 3u);
}

TEST(PseudoRic, AlwaysOkStaysAlive) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  PseudoRic ric(default_acceptance_scenario());
  ric.deploy(reg.get(id));
  ric.run_for(10000);
  const auto st = *ric.xapp(id);
  EXPECT_EQ(st.probes, 10);
  EXPECT_TRUE(st.alive);
  EXPECT_EQ(st.consecutive_failures, 0);
}

TEST(PseudoRic, FailAfterTwoWithThresholdThreeDiesAtFifthProbe) {
  Registry reg;
  const auto pkg = scripted("flaky", {12011}, {12010}, R"({"health_behavior": {"type": "FAIL_AFTER", "n": 2}})",
                            HealthSpec{1000, 3});
  const auto id = testing_record(reg, pkg);
  PseudoRic ric(default_acceptance_scenario());
  const auto ep = ric.deploy(reg.get(id));
  // Hand trace: probes 1,2 ok; 3,4,5 fail; the third consecutive failure kills.
  const std::vector<std::pair<std::int64_t, bool>> trace = {
      {0, true}, {0, true}, {1, true}, {2, true}, {3, false}};
  for (std::size_t p = 0; p < trace.size(); ++p) {
    ric.step();
    const auto st = *ric.xapp(id);
    EXPECT_EQ(st.probes, static_cast<std::int64_t>(p + 1));
    EXPECT_EQ(st.consecutive_failures, trace[p].first) << "probe " << p + 1;
    EXPECT_EQ(st.alive, trace[p].second) << "probe " << p + 1;
  }
  const auto st = *ric.xapp(id);
  EXPECT_FALSE(st.alive);
  EXPECT_EQ(st.died_at, 5000);
  EXPECT_FALSE(ric.router().is_registered(ep));
  std::size_t died = 0;
  for (const auto& e : ric.runtime_log()) died += e.kind == "XAPP_DIED";
  EXPECT_EQ(died, 1u);
  ric.run_for(5000);
  EXPECT_EQ(ric.xapp(id)->probes, 5) << "dead xApps are not probed";
}

TEST(PseudoRic, XappsCannotMoveTheWorld) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  PseudoRic with(default_acceptance_scenario());
  PseudoRic without(default_acceptance_scenario());
  with.deploy(reg.get(id));
  for (int i = 0; i < 50; ++i) {
    with.step();
    without.step();
    RmrMessage junk;
    junk.mtype = i * 997;
    junk.source = "intruder";
    junk.payload = R"({"gnb_id":1,"report_period_ms":1000,"x_m":0})";
    with.router().route(junk);
    ASSERT_EQ(with.radio_state_digest(), without.radio_state_digest()) << i;
  }
}

TEST(PseudoRic, BinaryGarbageToE2TermIsLoggedNotThrown) {
  PseudoRic ric(default_acceptance_scenario());
  RmrMessage junk;
  junk.mtype = mtypes::kSubscriptionReq;
  junk.source = "intruder\xff";
  junk.payload = std::string("\xb1\x00\xfe{", 4);
  ric.router().route(junk);
  ASSERT_NO_THROW(ric.step());
  std::size_t failed = 0;
  for (const auto& e : ric.runtime_log()) {
    failed += e.kind == "SUBSCRIPTION_FAILED";
    EXPECT_NO_THROW(to_json_line(e));
  }
  EXPECT_EQ(failed, 1u);
  for (const auto& r : ric.router_log()) EXPECT_NO_THROW(to_json_line(r));
}

TEST(PseudoRic, LoadScenarioResubscribes) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  PseudoRic ric(default_acceptance_scenario());
  ric.deploy(reg.get(id));
  ric.load_scenario(three_gnbs());
  std::size_t active = 0;
  for (const auto& s : ric.subscriptions()) active += s.active;
  EXPECT_EQ(active, 3u);
  EXPECT_EQ(ric.sim_time_ms(), 0);
  bool logged = false;
  for (const auto& e : ric.runtime_log()) logged = logged || e.kind == "SCENARIO_LOADED";
  EXPECT_TRUE(logged);
}

TEST(PseudoRic, ListenerSeesScenarioAndRuntimeEvents) {
  Registry reg;
  const auto id = testing_record(reg, testing::shipped_package("kpm-monitor"));
  PseudoRic ric(default_acceptance_scenario());
  std::map<std::string, int> seen;
  ric.set_listener([&](const StreamEvent& e) { ++seen[e.type]; });
  ric.deploy(reg.get(id));
  ric.run_for(3000);
  EXPECT_GT(seen["runtime"], 0);
  EXPECT_GT(seen["scenario"], 0);
}

}  // namespace
}  // namespace xstore
