#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xstore/manifest.hpp"

namespace xstore {

enum class Verdict { kPass, kFail };

std::string_view to_string(Verdict v);

/// Which log an evidence reference points into.
enum class EvidenceLog { kRouter, kScenario, kRuntime, kManifest };

std::string_view to_string(EvidenceLog log);

struct Evidence {
  EvidenceLog log = EvidenceLog::kRouter;
  std::optional<std::uint64_t> seq;       // router/scenario/runtime entries
  std::optional<std::string> path;        // manifest field path
  std::optional<std::int64_t> sim_time_ms;

  bool operator==(const Evidence&) const = default;
};

struct Check {
  std::string code;
  Severity severity = Severity::kInfo;
  std::string detail;
  std::optional<std::int64_t> mtype;
  std::vector<Evidence> evidence;

  bool operator==(const Check&) const = default;
};

struct ConformanceReport {
  std::string report_id;
  std::string record_id;
  std::int64_t started_at = 0;
  std::int64_t finished_at = 0;
  Verdict verdict = Verdict::kPass;
  std::vector<Check> checks;

  bool operator==(const ConformanceReport&) const = default;

  bool has_error() const;
  const Check* find(std::string_view code) const;
};

/// FAIL exactly when some check has error severity.
Verdict verdict_for(const std::vector<Check>& checks);

/// Canonical JSON: sorted keys, no whitespace. Keys: report_id, record_id,
/// verdict, checks[], started_at, finished_at.
std::string render_report(const ConformanceReport& r);
/// Throws Error{kParseError}.
ConformanceReport parse_report(std::string_view raw);

}  // namespace xstore
