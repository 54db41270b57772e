#include "xstore/pseudo_ric.hpp"

#include <nlohmann/json.hpp>

#include "xstore/error.hpp"
#include "xstore/registry.hpp"

namespace xstore {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_json_line(const RuntimeEvent& ev) {
  ordered_json j;
  j["seq"] = ev.seq;
  j["sim_time_ms"] = ev.sim_time_ms;
  j["kind"] = ev.kind;
  j["endpoint"] = ev.endpoint;
  j["record_id"] = ev.record_id;
  j["detail"] = ev.detail;
  return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

namespace {

json counts_json(const std::map<Mtype, std::uint64_t>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[std::to_string(k)] = v;
  return out;
}

}  // namespace

std::string to_json(const XAppStatus& s) {
  json j = {{"record_id", s.record_id},
            {"endpoint", s.endpoint},
            {"declared_rx", s.declared_rx},
            {"declared_tx", s.declared_tx},
            {"alive", s.alive},
            {"deployed_at", s.deployed_at},
            {"died_at", s.died_at ? json(*s.died_at) : json(nullptr)},
            {"probes", s.probes},
            {"consecutive_failures", s.consecutive_failures},
            {"subscriptions", s.subscriptions},
            {"received", counts_json(s.received)},
            {"sent", counts_json(s.sent)},
            {"ignored", s.ignored}};
  json by_gnb = json::object();
  for (const auto& [g, n] : s.indications_by_gnb) by_gnb[std::to_string(g)] = n;
  j["indications_by_gnb"] = std::move(by_gnb);
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

PseudoRic::PseudoRic(ScenarioConfig scenario, std::size_t router_log_retention)
    : router_(router_log_retention), scenario_(std::make_unique<Scenario>(std::move(scenario))) {
  router_.register_endpoint(kE2TermEndpoint, {mtypes::kSubscriptionReq}, {mtypes::kSubscriptionResp});
}

void PseudoRic::set_listener(std::function<void(const StreamEvent&)> listener) {
  std::lock_guard lk(listener_mu_);
  listener_ = std::move(listener);
}

void PseudoRic::emit(const Pending& events) {
  if (events.empty()) return;
  std::lock_guard lk(listener_mu_);
  if (!listener_) return;
  for (const auto& e : events) listener_(e);
}

void PseudoRic::log_locked(Pending& out, std::string kind, const Instance* inst,
                           std::string detail) {
  RuntimeEvent ev;
  ev.seq = runtime_log_.size() + 1;
  ev.sim_time_ms = scenario_->sim_time_ms();
  ev.kind = std::move(kind);
  if (inst) {
    ev.endpoint = inst->status.endpoint;
    ev.record_id = inst->status.record_id;
  }
  ev.detail = std::move(detail);
  out.push_back({"runtime", to_json_line(ev)});
  runtime_log_.push_back(std::move(ev));
}

PseudoRic::Instance* PseudoRic::find_locked(const std::string& record_id) {
  for (auto& [_, inst] : instances_)
    if (inst.status.record_id == record_id && inst.status.alive) return &inst;
  return nullptr;
}

const PseudoRic::Instance* PseudoRic::find_locked(const std::string& record_id) const {
  for (const auto& [_, inst] : instances_)
    if (inst.status.record_id == record_id && inst.status.alive) return &inst;
  return nullptr;
}

std::string PseudoRic::deploy(const XAppRecord& record) {
  Pending pending;
  std::string endpoint = record.manifest.name + "@" + record.manifest.version;
  {
    std::lock_guard lk(mu_);
    if (auto it = instances_.find(endpoint); it != instances_.end()) {
      if (it->second.status.alive)
        throw Error(ErrorCode::kAlreadyRegistered, endpoint + " is already running");
      instances_.erase(it);  // a dead instance is replaced
    }
    const auto& rx = record.manifest.rx();
    const auto& tx = record.manifest.tx();
    Instance inst;
    inst.status.record_id = record.id;
    inst.status.endpoint = endpoint;
    inst.status.declared_rx = {rx.begin(), rx.end()};
    inst.status.declared_tx = {tx.begin(), tx.end()};
    inst.status.alive = true;
    inst.status.deployed_at = scenario_->sim_time_ms();
    inst.behavior = record.package.behavior;
    inst.health = record.manifest.health;
    if (inst.health.liveness_period_ms <= 0) inst.health.liveness_period_ms = kDefaultLivenessPeriodMs;
    if (inst.health.failure_threshold <= 0) inst.health.failure_threshold = kDefaultFailureThreshold;
    inst.next_probe_at = inst.status.deployed_at + inst.health.liveness_period_ms;
    try {
      router_.register_endpoint(endpoint, inst.status.declared_rx, inst.status.declared_tx);
    } catch (const Error& e) {
      log_locked(pending, "DEPLOY_FAILED", &inst, e.what());
      throw Error(ErrorCode::kRouterRegistrationFailed, endpoint + ": " + e.what());
    }
    auto& live = instances_.emplace(endpoint, std::move(inst)).first->second;
    log_locked(pending, "DEPLOYED", &live, record.id);
    subscribe_on_start_locked(pending, live);
    pump_e2term_locked(pending);
  }
  emit(pending);
  return endpoint;
}

void PseudoRic::undeploy(const std::string& record_id) {
  Pending pending;
  {
    std::lock_guard lk(mu_);
    Instance* inst = find_locked(record_id);
    if (!inst) throw Error(ErrorCode::kNotRunning, record_id);
    const std::string endpoint = inst->status.endpoint;
    router_.deregister_endpoint(endpoint);
    scenario_->cancel_all(endpoint);
    log_locked(pending, "UNDEPLOYED", inst, "");
    instances_.erase(endpoint);
  }
  emit(pending);
}

bool PseudoRic::is_running(const std::string& record_id) const {
  std::lock_guard lk(mu_);
  return find_locked(record_id) != nullptr;
}

void PseudoRic::subscribe_on_start_locked(Pending& /*out*/, Instance& inst) {
  for (const auto& intent : inst.behavior.on_start) {
    for (const auto& g : scenario_->config().gnbs) {
      if (!intent.node_selector.matches(g.id)) continue;
      RmrMessage req;
      req.mtype = mtypes::kSubscriptionReq;
      req.source = inst.status.endpoint;
      req.payload = json{{"gnb_id", g.id}, {"report_period_ms", intent.report_period_ms}}.dump();
      req.correlation_id = inst.status.endpoint + "#" + std::to_string(inst.next_correlation++);
      req.sim_time_ms = scenario_->sim_time_ms();
      router_.route(req);
      ++inst.status.sent[req.mtype];
    }
  }
}

// The E2 termination turns subscription requests into scenario
// subscriptions and answers the requester directly.
void PseudoRic::pump_e2term_locked(Pending& out) {
  for (const auto& req : router_.drain(kE2TermEndpoint)) {
    if (req.mtype != mtypes::kSubscriptionReq) continue;
    json reply;
    auto it = instances_.find(req.source);
    Instance* inst = it != instances_.end() && it->second.status.alive ? &it->second : nullptr;
    try {
      json body = json::parse(req.payload);
      const auto gnb = body.at("gnb_id").get<std::int64_t>();
      const auto period = body.at("report_period_ms").get<std::int64_t>();
      if (!inst) throw Error(ErrorCode::kUnknownEndpoint, req.source + " is not a running xApp");
      const auto sub = scenario_->subscribe(req.source, gnb, period);
      inst->status.subscriptions.push_back(sub);
      reply = {{"ok", true}, {"subscription_id", sub}, {"gnb_id", gnb}, {"report_period_ms", period}};
      log_locked(out, "SUBSCRIBED", inst,
                 "sub-" + std::to_string(sub) + " gnb " + std::to_string(gnb) + " every " +
                     std::to_string(period) + " ms");
    } catch (const std::exception& e) {
      reply = {{"ok", false}, {"error", e.what()}};
      log_locked(out, "SUBSCRIPTION_FAILED", inst, e.what());
    }
    RmrMessage resp;
    resp.mtype = mtypes::kSubscriptionResp;
    resp.source = kE2TermEndpoint;
    resp.payload = reply.dump(-1, ' ', false, json::error_handler_t::replace);
    resp.correlation_id = req.correlation_id;
    resp.sim_time_ms = scenario_->sim_time_ms();
    router_.send_to(req.source, resp);
  }
}

void PseudoRic::step_xapp_locked(Pending& out, Instance& inst) {
  auto& st = inst.status;
  for (const auto& msg : router_.drain(st.endpoint)) {
    ++st.received[msg.mtype];
    if (msg.mtype == mtypes::kRicIndication) {
      try {
        ++st.indications_by_gnb[parse_kpm_indication(msg.payload).gnb_id];
      } catch (const Error&) {
        // Malformed indications count as received but not per gNB.
      }
    }
    const Rule* rule = inst.behavior.match(msg.mtype);
    if (!rule) {
      ++st.ignored;
      continue;
    }
    TemplateContext ctx{msg.source, msg.mtype, scenario_->sim_time_ms(),
                        msg.correlation_id.value_or(""), msg.payload};
    RmrMessage send;
    send.source = st.endpoint;
    send.sim_time_ms = scenario_->sim_time_ms();
    if (const auto* reply = std::get_if<ReplyAction>(&rule->action)) {
      send.mtype = reply->mtype;
      send.payload = expand_template(reply->payload_template, ctx);
      send.correlation_id = msg.correlation_id;
    } else if (const auto* fwd = std::get_if<SendAction>(&rule->action)) {
      send.mtype = fwd->mtype;
      send.payload = expand_template(fwd->payload_template, ctx);
    } else {
      if (std::holds_alternative<IgnoreAction>(rule->action)) ++st.ignored;
      continue;
    }
    try {
      router_.route(send);
      ++st.sent[send.mtype];
    } catch (const Error& e) {
      log_locked(out, "SEND_REJECTED", &inst, e.what());
    }
  }
}

void PseudoRic::probe_locked(Pending& out, Instance& inst) {
  auto& st = inst.status;
  while (st.alive && inst.next_probe_at <= scenario_->sim_time_ms()) {
    inst.next_probe_at += inst.health.liveness_period_ms;
    ++st.probes;
    bool ok = true;
    if (const auto* fail = std::get_if<FailAfter>(&inst.behavior.health_behavior))
      ok = st.probes <= fail->n;
    if (ok) {
      st.consecutive_failures = 0;
      continue;
    }
    ++st.consecutive_failures;
    log_locked(out, "PROBE_FAILED", &inst,
               "probe " + std::to_string(st.probes) + ", " +
                   std::to_string(st.consecutive_failures) + " consecutive");
    if (st.consecutive_failures >= inst.health.failure_threshold)
      kill_locked(out, inst,
                  std::to_string(st.consecutive_failures) + " consecutive liveness failures");
  }
}

void PseudoRic::kill_locked(Pending& out, Instance& inst, const std::string& reason) {
  auto& st = inst.status;
  router_.deregister_endpoint(st.endpoint);
  scenario_->cancel_all(st.endpoint);
  st.alive = false;
  st.died_at = scenario_->sim_time_ms();
  log_locked(out, "XAPP_DIED", &inst, reason);
}

TickResult PseudoRic::step() {
  Pending pending;
  TickResult result;
  {
    std::lock_guard lk(mu_);
    result = scenario_->tick();
    for (const auto& ev : result.events) pending.push_back({"scenario", to_json_line(ev)});
    for (const auto& due : result.indications) {
      RmrMessage ind;
      ind.mtype = mtypes::kRicIndication;
      ind.source = kE2TermEndpoint;
      ind.payload = to_json(due.indication);
      ind.correlation_id = "sub-" + std::to_string(due.subscription_id);
      ind.sim_time_ms = scenario_->sim_time_ms();
      router_.send_to(due.endpoint, ind);
    }
    pump_e2term_locked(pending);
    for (auto& [_, inst] : instances_)
      if (inst.status.alive) step_xapp_locked(pending, inst);
    // Requests routed by xApps during this tick are answered right away.
    pump_e2term_locked(pending);
    for (auto& [_, inst] : instances_)
      if (inst.status.alive) probe_locked(pending, inst);
  }
  emit(pending);
  return result;
}

void PseudoRic::run_for(std::int64_t duration_ms) {
  const std::int64_t end = sim_time_ms() + duration_ms;
  while (sim_time_ms() < end) step();
}

void PseudoRic::load_scenario(ScenarioConfig scenario) {
  Pending pending;
  {
    std::lock_guard lk(mu_);
    scenario_ = std::make_unique<Scenario>(std::move(scenario));
    log_locked(pending, "SCENARIO_LOADED", nullptr,
               std::to_string(scenario_->config().gnbs.size()) + " gNBs, " +
                   std::to_string(scenario_->config().ues.size()) + " UEs");
    for (auto& [_, inst] : instances_) {
      if (!inst.status.alive) continue;
      inst.status.subscriptions.clear();
      inst.next_probe_at = inst.health.liveness_period_ms;
      subscribe_on_start_locked(pending, inst);
    }
    pump_e2term_locked(pending);
  }
  emit(pending);
}

std::vector<XAppStatus> PseudoRic::xapps() const {
  std::lock_guard lk(mu_);
  std::vector<XAppStatus> out;
  for (const auto& [_, inst] : instances_) out.push_back(inst.status);
  return out;
}

std::optional<XAppStatus> PseudoRic::xapp(const std::string& record_id) const {
  std::lock_guard lk(mu_);
  std::optional<XAppStatus> found;
  for (const auto& [_, inst] : instances_) {
    if (inst.status.record_id != record_id) continue;
    found = inst.status;
    if (inst.status.alive) break;
  }
  return found;
}

std::vector<RuntimeEvent> PseudoRic::runtime_log() const {
  std::lock_guard lk(mu_);
  return runtime_log_;
}

std::vector<ScenarioEvent> PseudoRic::scenario_log() const {
  std::lock_guard lk(mu_);
  return scenario_->event_log();
}

WorldView PseudoRic::snapshot(std::size_t recent) const {
  std::lock_guard lk(mu_);
  return scenario_->snapshot(recent);
}

ScenarioConfig PseudoRic::scenario_config() const {
  std::lock_guard lk(mu_);
  return scenario_->config();
}

std::int64_t PseudoRic::sim_time_ms() const {
  std::lock_guard lk(mu_);
  return scenario_->sim_time_ms();
}

std::string PseudoRic::radio_state_digest() const {
  std::lock_guard lk(mu_);
  return scenario_->radio_state_digest();
}

std::vector<Subscription> PseudoRic::subscriptions() const {
  std::lock_guard lk(mu_);
  return scenario_->subscriptions();
}

std::string deploy_record(Registry& registry, PseudoRic& ric, const std::string& record_id) {
  const auto rec = registry.get(record_id);
  if (rec.state == LifecycleState::kTesting) return ric.deploy(rec);
  if (rec.state != LifecycleState::kAvailable)
    throw Error(ErrorCode::kWrongState,
                record_id + " is " + std::string(to_string(rec.state)) +
                    "; only TESTING or AVAILABLE records can be deployed");
  auto endpoint = ric.deploy(rec);
  try {
    registry.transition(record_id, LifecycleEvent::kDeployRequested);
  } catch (...) {
    ric.undeploy(record_id);
    throw;
  }
  return endpoint;
}

void undeploy_record(Registry& registry, PseudoRic& ric, const std::string& record_id) {
  const auto rec = registry.get(record_id);
  ric.undeploy(record_id);
  if (rec.state == LifecycleState::kDeployed)
    registry.transition(record_id, LifecycleEvent::kUndeployRequested);
}

}  // namespace xstore
