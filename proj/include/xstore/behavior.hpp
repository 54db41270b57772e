#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace xstore {

/// "*" selects every gNB in the scenario.
struct NodeSelector {
  std::optional<std::int64_t> gnb_id;  // disengaged means "*"

  bool matches(std::int64_t id) const { return !gnb_id || *gnb_id == id; }
  bool operator==(const NodeSelector&) const = default;
};

struct SubscriptionIntent {
  NodeSelector node_selector;
  std::int64_t report_period_ms = 0;

  bool operator==(const SubscriptionIntent&) const = default;
};

struct LogAction {
  bool operator==(const LogAction&) const = default;
};
struct IgnoreAction {
  bool operator==(const IgnoreAction&) const = default;
};
/// Routes `mtype` with the incoming message's correlation id.
struct ReplyAction {
  std::int64_t mtype = 0;
  std::string payload_template;
  bool operator==(const ReplyAction&) const = default;
};
/// Routes `mtype` with no correlation id.
struct SendAction {
  std::int64_t mtype = 0;
  std::string payload_template;
  bool operator==(const SendAction&) const = default;
};

using RuleAction = std::variant<LogAction, ReplyAction, SendAction, IgnoreAction>;

struct Rule {
  std::int64_t match_mtype = 0;
  RuleAction action;

  bool operator==(const Rule&) const = default;
};

struct AlwaysOk {
  bool operator==(const AlwaysOk&) const = default;
};
/// Probes 1..n succeed, probe n+1 onward fail.
struct FailAfter {
  std::int64_t n = 0;
  bool operator==(const FailAfter&) const = default;
};
using HealthBehavior = std::variant<AlwaysOk, FailAfter>;

/// Declarative stand-in for an xApp container entrypoint.
struct BehaviorScript {
  std::vector<SubscriptionIntent> on_start;
  std::vector<Rule> rules;  // first match wins
  HealthBehavior health_behavior = AlwaysOk{};

  bool operator==(const BehaviorScript&) const = default;

  const Rule* match(std::int64_t mtype) const;
};

/// Parses `behavior.json`. Throws Error{kMalformedArchive} on any problem.
BehaviorScript parse_behavior(std::string_view raw);

/// Sorted-key, whitespace-free JSON rendering.
std::string canonicalize(const BehaviorScript& script);

/// Expands ${source}, ${mtype}, ${sim_time_ms}, ${correlation_id} and
/// ${payload}. Unknown placeholders are left as written.
struct TemplateContext {
  std::string source;
  std::int64_t mtype = 0;
  std::int64_t sim_time_ms = 0;
  std::string correlation_id;
  std::string payload;
};
std::string expand_template(std::string_view tmpl, const TemplateContext& ctx);

}  // namespace xstore
