#include "xstore/behavior.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "xstore/error.hpp"
#include "xstore/manifest.hpp"

namespace xstore {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& detail) {
  throw Error(ErrorCode::kMalformedArchive, "behavior.json " + path + ": " + detail);
}

std::int64_t read_mtype(const json& v, const std::string& path) {
  if (!v.is_number_integer()) bad(path, "expected an integer message type");
  auto t = v.get<std::int64_t>();
  if (t < 0 || t >= kMtypeLimit) bad(path, "message type outside [0, 2^31)");
  return t;
}

std::string read_template(const json& obj, const std::string& path) {
  if (!obj.contains("payload_template")) return {};
  const auto& v = obj.at("payload_template");
  if (!v.is_string()) bad(path + ".payload_template", "expected a string");
  return v.get<std::string>();
}

void only_keys(const json& obj, const std::string& path,
               std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      bad(path + "." + key, "unknown field");
    }
  }
}

RuleAction read_action(const json& v, const std::string& path) {
  std::string type;
  if (v.is_string()) {
    type = v.get<std::string>();
  } else if (v.is_object() && v.contains("type") && v.at("type").is_string()) {
    type = v.at("type").get<std::string>();
  } else {
    bad(path, "expected LOG, IGNORE or an object with a 'type'");
  }

  if (type == "LOG" || type == "IGNORE") {
    if (v.is_object()) only_keys(v, path, {"type"});
    if (type == "LOG") return LogAction{};
    return IgnoreAction{};
  }
  if (type != "REPLY" && type != "SEND") bad(path, "unknown action '" + type + "'");
  if (!v.is_object() || !v.contains("mtype")) bad(path, type + " needs an mtype");
  only_keys(v, path, {"type", "mtype", "payload_template"});
  auto mtype = read_mtype(v.at("mtype"), path + ".mtype");
  auto tmpl = read_template(v, path);
  if (type == "REPLY") return ReplyAction{mtype, std::move(tmpl)};
  return SendAction{mtype, std::move(tmpl)};
}

HealthBehavior read_health(const json& v) {
  const std::string path = "health_behavior";
  if (v.is_string()) {
    if (v.get<std::string>() == "ALWAYS_OK") return AlwaysOk{};
    bad(path, "unknown health behavior");
  }
  if (!v.is_object() || !v.contains("type") || !v.at("type").is_string()) {
    bad(path, "expected \"ALWAYS_OK\" or {\"type\": ...}");
  }
  const auto type = v.at("type").get<std::string>();
  if (type == "ALWAYS_OK") {
    only_keys(v, path, {"type"});
    return AlwaysOk{};
  }
  if (type != "FAIL_AFTER") bad(path, "unknown health behavior '" + type + "'");
  only_keys(v, path, {"type", "n"});
  if (!v.contains("n") || !v.at("n").is_number_integer() || v.at("n").get<std::int64_t>() < 0) {
    bad(path + ".n", "expected a non-negative integer");
  }
  return FailAfter{v.at("n").get<std::int64_t>()};
}

}  // namespace

const Rule* BehaviorScript::match(std::int64_t mtype) const {
  auto it = std::find_if(rules.begin(), rules.end(),
                         [mtype](const Rule& r) { return r.match_mtype == mtype; });
  return it == rules.end() ? nullptr : &*it;
}

BehaviorScript parse_behavior(std::string_view raw) {
  json doc = json::parse(raw.begin(), raw.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) bad("", "not a JSON object");
  only_keys(doc, "", {"on_start", "rules", "health_behavior"});

  BehaviorScript script;
  if (doc.contains("on_start")) {
    const auto& list = doc.at("on_start");
    if (!list.is_array()) bad("on_start", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "on_start[" + std::to_string(i) + "]";
      const auto& item = list[i];
      if (!item.is_object()) bad(path, "expected an object");
      only_keys(item, path, {"node_selector", "report_period_ms"});
      SubscriptionIntent intent;
      if (!item.contains("node_selector")) bad(path, "missing node_selector");
      const auto& sel = item.at("node_selector");
      if (sel.is_string() && sel.get<std::string>() == "*") {
        intent.node_selector = NodeSelector{};
      } else if (sel.is_number_integer()) {
        intent.node_selector = NodeSelector{sel.get<std::int64_t>()};
      } else {
        bad(path + ".node_selector", "expected a gNB id or \"*\"");
      }
      if (!item.contains("report_period_ms") || !item.at("report_period_ms").is_number_integer() ||
          item.at("report_period_ms").get<std::int64_t>() <= 0) {
        bad(path + ".report_period_ms", "expected a positive integer");
      }
      intent.report_period_ms = item.at("report_period_ms").get<std::int64_t>();
      script.on_start.push_back(intent);
    }
  }
  if (doc.contains("rules")) {
    const auto& list = doc.at("rules");
    if (!list.is_array()) bad("rules", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "rules[" + std::to_string(i) + "]";
      const auto& item = list[i];
      if (!item.is_object()) bad(path, "expected an object");
      only_keys(item, path, {"match_mtype", "action"});
      if (!item.contains("match_mtype") || !item.contains("action")) {
        bad(path, "rules need match_mtype and action");
      }
      script.rules.push_back({read_mtype(item.at("match_mtype"), path + ".match_mtype"),
                              read_action(item.at("action"), path + ".action")});
    }
  }
  if (doc.contains("health_behavior")) script.health_behavior = read_health(doc.at("health_behavior"));
  return script;
}

std::string canonicalize(const BehaviorScript& script) {
  json on_start = json::array();
  for (const auto& intent : script.on_start) {
    json sel = intent.node_selector.gnb_id ? json(*intent.node_selector.gnb_id) : json("*");
    on_start.push_back({{"node_selector", sel}, {"report_period_ms", intent.report_period_ms}});
  }
  json rules = json::array();
  for (const auto& rule : script.rules) {
    json action = std::visit(
        [](const auto& a) -> json {
          using A = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<A, LogAction>) {
            return {{"type", "LOG"}};
          } else if constexpr (std::is_same_v<A, IgnoreAction>) {
            return {{"type", "IGNORE"}};
          } else if constexpr (std::is_same_v<A, ReplyAction>) {
            return {{"type", "REPLY"}, {"mtype", a.mtype}, {"payload_template", a.payload_template}};
          } else {
            return {{"type", "SEND"}, {"mtype", a.mtype}, {"payload_template", a.payload_template}};
          }
        },
        rule.action);
    rules.push_back({{"match_mtype", rule.match_mtype}, {"action", action}});
  }
  json health = std::holds_alternative<AlwaysOk>(script.health_behavior)
                    ? json{{"type", "ALWAYS_OK"}}
                    : json{{"type", "FAIL_AFTER"}, {"n", std::get<FailAfter>(script.health_behavior).n}};
  json doc = {{"on_start", on_start}, {"rules", rules}, {"health_behavior", health}};
  return doc.dump();
}

std::string expand_template(std::string_view tmpl, const TemplateContext& ctx) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find("${", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    auto close = tmpl.find('}', open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    auto key = tmpl.substr(open + 2, close - open - 2);
    if (key == "source") {
      out += ctx.source;
    } else if (key == "mtype") {
      out += std::to_string(ctx.mtype);
    } else if (key == "sim_time_ms") {
      out += std::to_string(ctx.sim_time_ms);
    } else if (key == "correlation_id") {
      out += ctx.correlation_id;
    } else if (key == "payload") {
      out += ctx.payload;
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  return out;
}

}  // namespace xstore
