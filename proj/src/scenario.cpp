#include "xstore/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "xstore/digest.hpp"
#include "xstore/error.hpp"

namespace xstore {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& detail) {
  throw Error(ErrorCode::kInvalidScenario, detail);
}

double round3(double v) {
  double r = std::round(v * 1000.0) / 1000.0;
  return r == 0.0 ? 0.0 : r;  // no "-0.0" in logs
}

void only_keys(const json& obj, const std::string& path,
               std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) invalid(path + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      invalid(path + "." + key + ": unknown field");
    }
  }
}

double read_real(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || !obj.at(key).is_number()) invalid(path + "." + key + ": expected a number");
  return obj.at(key).get<double>();
}

void read_real_opt(const json& obj, const char* key, const std::string& path, double& out) {
  if (obj.contains(key)) out = read_real(obj, key, path);
}

std::int64_t read_int(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || !obj.at(key).is_number_integer()) {
    invalid(path + "." + key + ": expected an integer");
  }
  return obj.at(key).get<std::int64_t>();
}

Position read_position(const json& v, const std::string& path) {
  only_keys(v, path, {"x_m", "y_m"});
  return {read_real(v, "x_m", path), read_real(v, "y_m", path)};
}

json position_json(Position p) { return {{"x_m", p.x_m}, {"y_m", p.y_m}}; }

double distance(Position a, Position b) { return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m); }

ordered_json kpm_json(const KpmIndication& ind) {
  ordered_json j;
  j["gnb_id"] = ind.gnb_id;
  j["period_ms"] = ind.period_ms;
  j["connected_ue_count"] = ind.connected_ue_count;
  j["per_ue"] = ordered_json::array();
  for (const auto& e : ind.per_ue) {
    ordered_json u;
    u["ue_id"] = e.ue_id;
    u["rsrp_dbm"] = round3(e.rsrp_dbm);
    u["throughput_bps_per_hz"] = round3(e.throughput_bps_per_hz);
    j["per_ue"].push_back(u);
  }
  return j;
}

ordered_json event_json(const ScenarioEvent& ev) {
  ordered_json j;
  j["seq"] = ev.seq;
  j["sim_time_ms"] = ev.sim_time_ms;
  j["kind"] = ev.kind();
  std::visit(
      [&j](const auto& body) {
        using B = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<B, MoveEvent>) {
          j["ue"] = body.ue;
          j["x_m"] = round3(body.position.x_m);
          j["y_m"] = round3(body.position.y_m);
        } else if constexpr (std::is_same_v<B, HandoverEvent>) {
          j["ue"] = body.handover.ue;
          j["from"] = body.handover.from;
          j["to"] = body.handover.to;
          j["rsrp_from_dbm"] = round3(body.handover.rsrp_from_dbm);
          j["rsrp_to_dbm"] = round3(body.handover.rsrp_to_dbm);
        } else {
          j["gnb"] = body.indication.gnb_id;
          j["subscription"] = body.subscription_id;
          j["payload"] = kpm_json(body.indication);
        }
      },
      ev.body);
  return j;
}

}  // namespace

// ---- config ---------------------------------------------------------------

ScenarioConfig parse_scenario(std::string_view raw) {
  json doc = json::parse(raw.begin(), raw.end(), nullptr, false);
  if (doc.is_discarded()) invalid("not a JSON document");
  only_keys(doc, "scenario", {"seed", "tick_ms", "arena", "gnbs", "ues", "radio"});

  ScenarioConfig c;
  if (!doc.contains("seed") || !doc.at("seed").is_number_integer()) invalid("seed: expected an integer");
  c.seed = doc.at("seed").is_number_unsigned() ? doc.at("seed").get<std::uint64_t>()
                                                : static_cast<std::uint64_t>(doc.at("seed").get<std::int64_t>());
  c.tick_ms = read_int(doc, "tick_ms", "scenario");

  if (!doc.contains("arena")) invalid("arena: missing");
  only_keys(doc.at("arena"), "arena", {"width_m", "height_m"});
  c.width_m = read_real(doc.at("arena"), "width_m", "arena");
  c.height_m = read_real(doc.at("arena"), "height_m", "arena");

  if (!doc.contains("gnbs") || !doc.at("gnbs").is_array()) invalid("gnbs: expected an array");
  for (std::size_t i = 0; i < doc.at("gnbs").size(); ++i) {
    const auto& g = doc.at("gnbs")[i];
    const std::string path = "gnbs[" + std::to_string(i) + "]";
    only_keys(g, path, {"id", "position", "tx_power_dbm"});
    GnbConfig gnb;
    gnb.id = read_int(g, "id", path);
    if (!g.contains("position")) invalid(path + ".position: missing");
    gnb.position = read_position(g.at("position"), path + ".position");
    read_real_opt(g, "tx_power_dbm", path, gnb.tx_power_dbm);
    c.gnbs.push_back(gnb);
  }

  if (!doc.contains("ues") || !doc.at("ues").is_array()) invalid("ues: expected an array");
  for (std::size_t i = 0; i < doc.at("ues").size(); ++i) {
    const auto& u = doc.at("ues")[i];
    const std::string path = "ues[" + std::to_string(i) + "]";
    only_keys(u, path, {"id", "start", "waypoints", "speed_mps"});
    UeConfig ue;
    ue.id = read_int(u, "id", path);
    if (!u.contains("start")) invalid(path + ".start: missing");
    ue.start = read_position(u.at("start"), path + ".start");
    if (u.contains("waypoints")) {
      if (!u.at("waypoints").is_array()) invalid(path + ".waypoints: expected an array");
      for (std::size_t k = 0; k < u.at("waypoints").size(); ++k) {
        ue.waypoints.push_back(
            read_position(u.at("waypoints")[k], path + ".waypoints[" + std::to_string(k) + "]"));
      }
    }
    ue.speed_mps = read_real(u, "speed_mps", path);
    c.ues.push_back(ue);
  }

  if (doc.contains("radio")) {
    const auto& r = doc.at("radio");
    only_keys(r, "radio",
              {"pl0_db", "ref_dist_m", "path_loss_exponent", "noise_floor_dbm",
               "handover_hysteresis_db", "bandwidth_hz"});
    read_real_opt(r, "pl0_db", "radio", c.radio.pl0_db);
    read_real_opt(r, "ref_dist_m", "radio", c.radio.ref_dist_m);
    read_real_opt(r, "path_loss_exponent", "radio", c.radio.path_loss_exponent);
    read_real_opt(r, "noise_floor_dbm", "radio", c.radio.noise_floor_dbm);
    read_real_opt(r, "handover_hysteresis_db", "radio", c.radio.handover_hysteresis_db);
    read_real_opt(r, "bandwidth_hz", "radio", c.radio.bandwidth_hz);
  }
  check_scenario(c);
  return c;
}

void check_scenario(const ScenarioConfig& c) {
  if (c.tick_ms <= 0) invalid("tick_ms must be positive");
  if (!(c.width_m > 0) || !(c.height_m > 0)) invalid("arena dimensions must be positive");
  auto inside = [&c](Position p) {
    return p.x_m >= 0 && p.x_m <= c.width_m && p.y_m >= 0 && p.y_m <= c.height_m;
  };
  std::set<std::int64_t> ids;
  for (const auto& g : c.gnbs) {
    if (!ids.insert(g.id).second) invalid("duplicate gNB id " + std::to_string(g.id));
    if (!inside(g.position)) invalid("gNB " + std::to_string(g.id) + " outside the arena");
  }
  ids.clear();
  for (const auto& u : c.ues) {
    if (!ids.insert(u.id).second) invalid("duplicate UE id " + std::to_string(u.id));
    if (!inside(u.start)) invalid("UE " + std::to_string(u.id) + " starts outside the arena");
    for (const auto& w : u.waypoints) {
      if (!inside(w)) invalid("UE " + std::to_string(u.id) + " has a waypoint outside the arena");
    }
    if (!(u.speed_mps > 0)) invalid("UE " + std::to_string(u.id) + " needs a positive speed");
  }
  if (!c.ues.empty() && c.gnbs.empty()) invalid("UEs need at least one gNB to attach to");
  if (!(c.radio.ref_dist_m > 0)) invalid("radio.ref_dist_m must be positive");
  if (!(c.radio.handover_hysteresis_db >= 0)) invalid("radio.handover_hysteresis_db must be >= 0");
  if (!(c.radio.bandwidth_hz > 0)) invalid("radio.bandwidth_hz must be positive");
}

std::string to_json(const ScenarioConfig& c) {
  json doc;
  doc["seed"] = c.seed;
  doc["tick_ms"] = c.tick_ms;
  doc["arena"] = {{"width_m", c.width_m}, {"height_m", c.height_m}};
  doc["gnbs"] = json::array();
  for (const auto& g : c.gnbs) {
    doc["gnbs"].push_back(
        {{"id", g.id}, {"position", position_json(g.position)}, {"tx_power_dbm", g.tx_power_dbm}});
  }
  doc["ues"] = json::array();
  for (const auto& u : c.ues) {
    json wps = json::array();
    for (const auto& w : u.waypoints) wps.push_back(position_json(w));
    doc["ues"].push_back({{"id", u.id},
                          {"start", position_json(u.start)},
                          {"waypoints", wps},
                          {"speed_mps", u.speed_mps}});
  }
  doc["radio"] = {{"pl0_db", c.radio.pl0_db},
                  {"ref_dist_m", c.radio.ref_dist_m},
                  {"path_loss_exponent", c.radio.path_loss_exponent},
                  {"noise_floor_dbm", c.radio.noise_floor_dbm},
                  {"handover_hysteresis_db", c.radio.handover_hysteresis_db},
                  {"bandwidth_hz", c.radio.bandwidth_hz}};
  return doc.dump();
}

// ---- radio model ------------------------------------------------------------

double path_loss_db(const RadioConfig& radio, double distance_m) {
  const double d = std::max(distance_m, radio.ref_dist_m);
  return radio.pl0_db + 10.0 * radio.path_loss_exponent * std::log10(d / radio.ref_dist_m);
}

double rsrp_dbm(const GnbConfig& gnb, const RadioConfig& radio, Position ue) {
  return gnb.tx_power_dbm - path_loss_db(radio, distance(gnb.position, ue));
}

double throughput_bps_per_hz(double rsrp, double noise_floor_dbm) {
  return std::log2(1.0 + std::pow(10.0, (rsrp - noise_floor_dbm) / 10.0));
}

std::optional<Handover> handover_decision(std::int64_t ue, Position ue_pos, std::int64_t serving,
                                          const std::vector<GnbConfig>& gnbs,
                                          const RadioConfig& radio) {
  const GnbConfig* best = nullptr;
  double best_rsrp = 0;
  double serving_rsrp = 0;
  bool have_serving = false;
  for (const auto& g : gnbs) {
    const double r = rsrp_dbm(g, radio, ue_pos);
    if (best == nullptr || r > best_rsrp) {
      best = &g;
      best_rsrp = r;
    }
    if (g.id == serving) {
      serving_rsrp = r;
      have_serving = true;
    }
  }
  if (best == nullptr || !have_serving || best->id == serving) return std::nullopt;
  if (!(best_rsrp > serving_rsrp + radio.handover_hysteresis_db)) return std::nullopt;
  return Handover{ue, serving, best->id, serving_rsrp, best_rsrp};
}

// ---- events -------------------------------------------------------------------

std::string to_json(const KpmIndication& ind) { return kpm_json(ind).dump(); }

KpmIndication parse_kpm_indication(std::string_view raw) {
  json doc = json::parse(raw.begin(), raw.end(), nullptr, false);
  try {
    if (doc.is_discarded()) throw std::runtime_error("not JSON");
    KpmIndication ind;
    ind.gnb_id = doc.at("gnb_id").get<std::int64_t>();
    ind.period_ms = doc.at("period_ms").get<std::int64_t>();
    ind.connected_ue_count = doc.at("connected_ue_count").get<std::int64_t>();
    for (const auto& u : doc.at("per_ue")) {
      ind.per_ue.push_back({u.at("ue_id").get<std::int64_t>(), u.at("rsrp_dbm").get<double>(),
                            u.at("throughput_bps_per_hz").get<double>()});
    }
    return ind;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInvalidMessage, std::string("bad KPM indication: ") + e.what());
  }
}

std::string_view ScenarioEvent::kind() const {
  switch (body.index()) {
    case 0: return "MOVE";
    case 1: return "HANDOVER";
    default: return "KPM_REPORT";
  }
}

std::string to_json_line(const ScenarioEvent& ev) { return event_json(ev).dump(); }

std::string to_json(const WorldView& view) {
  ordered_json j;
  j["sim_time_ms"] = view.sim_time_ms;
  j["seed"] = view.seed;
  j["tick_ms"] = view.tick_ms;
  j["arena"] = {{"width_m", view.width_m}, {"height_m", view.height_m}};
  j["gnbs"] = ordered_json::array();
  for (const auto& g : view.gnbs) {
    ordered_json gj;
    gj["id"] = g.id;
    gj["x_m"] = round3(g.position.x_m);
    gj["y_m"] = round3(g.position.y_m);
    gj["tx_power_dbm"] = round3(g.tx_power_dbm);
    j["gnbs"].push_back(gj);
  }
  j["ues"] = ordered_json::array();
  for (const auto& u : view.ues) {
    ordered_json uj;
    uj["id"] = u.id;
    uj["x_m"] = round3(u.position.x_m);
    uj["y_m"] = round3(u.position.y_m);
    uj["serving"] = u.serving;
    uj["serving_rsrp_dbm"] = round3(u.serving_rsrp_dbm);
    j["ues"].push_back(uj);
  }
  j["event_count"] = view.event_count;
  j["active_subscriptions"] = view.active_subscriptions;
  j["recent_events"] = ordered_json::array();
  for (const auto& ev : view.recent_events) j["recent_events"].push_back(event_json(ev));
  return j.dump();
}

// ---- world ----------------------------------------------------------------------

Scenario::Scenario(ScenarioConfig config) : config_(std::move(config)) {
  check_scenario(config_);
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(config_.gnbs.begin(), config_.gnbs.end(), by_id);
  std::sort(config_.ues.begin(), config_.ues.end(), by_id);

  for (const auto& u : config_.ues) {
    UeState st;
    st.position = u.start;
    st.path.push_back(u.start);
    st.path.insert(st.path.end(), u.waypoints.begin(), u.waypoints.end());
    double loop = 0;
    for (std::size_t i = 0; i < st.path.size(); ++i) {
      loop += distance(st.path[i], st.path[(i + 1) % st.path.size()]);
    }
    st.mobile = loop > 0;
    st.next = st.path.size() > 1 ? 1 : 0;
    serving_[u.id] = strongest_gnb(u.start);
    ues_.emplace(u.id, std::move(st));
  }
}

const GnbConfig& Scenario::gnb(std::int64_t id) const {
  auto it = std::lower_bound(config_.gnbs.begin(), config_.gnbs.end(), id,
                             [](const GnbConfig& g, std::int64_t v) { return g.id < v; });
  if (it == config_.gnbs.end() || it->id != id) {
    throw Error(ErrorCode::kInvalidArgument, "unknown gNB " + std::to_string(id));
  }
  return *it;
}

std::int64_t Scenario::strongest_gnb(Position pos) const {
  std::int64_t best = config_.gnbs.front().id;
  double best_rsrp = rsrp_dbm(config_.gnbs.front(), config_.radio, pos);
  for (const auto& g : config_.gnbs) {
    const double r = rsrp_dbm(g, config_.radio, pos);
    if (r > best_rsrp) {
      best = g.id;
      best_rsrp = r;
    }
  }
  return best;
}

void Scenario::move(UeState& ue, double remaining) {
  if (!ue.mobile) return;
  while (remaining > 0) {
    const Position target = ue.path[ue.next];
    const double d = distance(ue.position, target);
    if (d <= remaining) {
      ue.position = target;
      remaining -= d;
      ue.next = (ue.next + 1) % ue.path.size();
    } else {
      const double f = remaining / d;
      ue.position.x_m += (target.x_m - ue.position.x_m) * f;
      ue.position.y_m += (target.y_m - ue.position.y_m) * f;
      remaining = 0;
    }
  }
}

ScenarioEvent& Scenario::append(std::int64_t t, decltype(ScenarioEvent::body) body) {
  ScenarioEvent ev;
  ev.seq = log_.size() + 1;
  ev.sim_time_ms = t;
  ev.body = std::move(body);
  log_.push_back(std::move(ev));
  return log_.back();
}

KpmIndication Scenario::build_indication(std::int64_t gnb_id, std::int64_t period_ms) const {
  KpmIndication ind;
  ind.gnb_id = gnb_id;
  ind.period_ms = period_ms;
  const auto& g = gnb(gnb_id);
  for (const auto& [ue_id, serving] : serving_) {
    if (serving != gnb_id) continue;
    const double r = rsrp_dbm(g, config_.radio, ues_.at(ue_id).position);
    ind.per_ue.push_back({ue_id, r, throughput_bps_per_hz(r, config_.radio.noise_floor_dbm)});
  }
  ind.connected_ue_count = static_cast<std::int64_t>(ind.per_ue.size());
  return ind;
}

TickResult Scenario::tick() {
  const std::size_t first_new = log_.size();
  sim_time_ms_ += config_.tick_ms;

  for (const auto& cfg : config_.ues) {
    auto& ue = ues_.at(cfg.id);
    const Position before = ue.position;
    move(ue, cfg.speed_mps * static_cast<double>(config_.tick_ms) / 1000.0);
    if (!(ue.position == before)) append(sim_time_ms_, MoveEvent{cfg.id, ue.position});
  }

  for (const auto& cfg : config_.ues) {
    auto& serving = serving_.at(cfg.id);
    if (auto ho = handover_decision(cfg.id, ues_.at(cfg.id).position, serving, config_.gnbs,
                                    config_.radio)) {
      serving = ho->to;
      append(sim_time_ms_, HandoverEvent{*ho});
    }
  }

  TickResult result;
  for (auto& [id, sub] : subscriptions_) {
    if (!sub.active) continue;
    const std::int64_t due = (sim_time_ms_ - sub.created_at) / sub.report_period_ms;
    if (due <= sub.fired) continue;
    sub.fired = due;
    auto ind = build_indication(sub.gnb_id, sub.report_period_ms);
    const auto& ev = append(sim_time_ms_, KpmReportEvent{id, ind});
    result.indications.push_back({id, sub.endpoint, ev.seq, std::move(ind)});
  }

  result.events.assign(log_.begin() + static_cast<std::ptrdiff_t>(first_new), log_.end());
  return result;
}

std::uint64_t Scenario::subscribe(const std::string& endpoint, std::int64_t gnb_id,
                                  std::int64_t report_period_ms) {
  gnb(gnb_id);
  if (report_period_ms < config_.tick_ms) {
    throw Error(ErrorCode::kInvalidArgument,
                "report period " + std::to_string(report_period_ms) + " ms is below the tick of " +
                    std::to_string(config_.tick_ms) + " ms");
  }
  const auto id = next_subscription_++;
  subscriptions_[id] = Subscription{id, endpoint, gnb_id, report_period_ms, sim_time_ms_, true, 0};
  return id;
}

bool Scenario::cancel(std::uint64_t subscription_id) {
  auto it = subscriptions_.find(subscription_id);
  if (it == subscriptions_.end() || !it->second.active) return false;
  it->second.active = false;
  return true;
}

std::size_t Scenario::cancel_all(const std::string& endpoint) {
  std::size_t n = 0;
  for (auto& [id, sub] : subscriptions_) {
    if (sub.endpoint == endpoint && sub.active) {
      sub.active = false;
      ++n;
    }
  }
  return n;
}

std::vector<Subscription> Scenario::subscriptions() const {
  std::vector<Subscription> out;
  for (const auto& [id, sub] : subscriptions_) out.push_back(sub);
  return out;
}

Position Scenario::ue_position(std::int64_t ue) const {
  auto it = ues_.find(ue);
  if (it == ues_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown UE " + std::to_string(ue));
  return it->second.position;
}

std::int64_t Scenario::serving_gnb(std::int64_t ue) const {
  auto it = serving_.find(ue);
  if (it == serving_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown UE " + std::to_string(ue));
  return it->second;
}

double Scenario::rsrp(std::int64_t gnb_id, std::int64_t ue) const {
  return rsrp_dbm(gnb(gnb_id), config_.radio, ue_position(ue));
}

WorldView Scenario::snapshot(std::size_t recent) const {
  WorldView v;
  v.sim_time_ms = sim_time_ms_;
  v.seed = config_.seed;
  v.tick_ms = config_.tick_ms;
  v.width_m = config_.width_m;
  v.height_m = config_.height_m;
  v.gnbs = config_.gnbs;
  for (const auto& [id, st] : ues_) {
    const auto serving = serving_.at(id);
    v.ues.push_back({id, st.position, serving, rsrp_dbm(gnb(serving), config_.radio, st.position)});
  }
  const std::size_t start = log_.size() > recent ? log_.size() - recent : 0;
  v.recent_events.assign(log_.begin() + static_cast<std::ptrdiff_t>(start), log_.end());
  v.event_count = log_.size();
  v.active_subscriptions = static_cast<std::size_t>(
      std::count_if(subscriptions_.begin(), subscriptions_.end(),
                    [](const auto& kv) { return kv.second.active; }));
  return v;
}

std::string Scenario::radio_state_digest() const {
  json doc;
  doc["config"] = json::parse(to_json(config_));
  doc["sim_time_ms"] = sim_time_ms_;
  doc["ues"] = json::array();
  for (const auto& [id, st] : ues_) {
    doc["ues"].push_back({{"id", id},
                          {"x", st.position.x_m},
                          {"y", st.position.y_m},
                          {"next", st.next},
                          {"serving", serving_.at(id)}});
  }
  return sha256_hex(doc.dump());
}

}  // namespace xstore
