#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xstore/error.hpp"
#include "xstore/semver.hpp"

namespace xstore {

/// Message-type IDs live in [0, 2^31).
inline constexpr std::int64_t kMtypeLimit = std::int64_t{1} << 31;

inline constexpr std::int64_t kDefaultLivenessPeriodMs = 1000;
inline constexpr std::int64_t kDefaultFailureThreshold = 3;

/// Version strings are kept verbatim so that a manifest built in code can
/// hold a malformed value and still be reported on by validate_manifest.
struct VersionRangeSpec {
  std::string min;
  std::string max;

  bool operator==(const VersionRangeSpec&) const = default;
};

struct Resources {
  std::int64_t cpu_millicores = 0;
  std::int64_t memory_mib = 0;

  bool operator==(const Resources&) const = default;
};

struct HealthSpec {
  std::int64_t liveness_period_ms = kDefaultLivenessPeriodMs;
  std::int64_t failure_threshold = kDefaultFailureThreshold;

  bool operator==(const HealthSpec&) const = default;
};

struct Dependency {
  std::string name;
  VersionRangeSpec version;

  bool operator==(const Dependency&) const = default;
};

struct SecuritySettings {
  bool allow_external_endpoints = false;

  bool operator==(const SecuritySettings&) const = default;
};

/// Descriptor bundled with every xApp package. Required keys that were absent
/// from the source document are empty strings / disengaged optionals.
struct XAppManifest {
  std::string name;
  std::string version;
  std::string author;
  std::string license;
  std::optional<std::string> contact;
  std::optional<VersionRangeSpec> ric_compat;
  std::optional<Resources> resources;
  std::optional<std::vector<std::int64_t>> rx_mtypes;
  std::optional<std::vector<std::int64_t>> tx_mtypes;
  std::vector<std::string> service_models;
  HealthSpec health;
  std::vector<Dependency> dependencies;
  SecuritySettings security;

  bool operator==(const XAppManifest&) const = default;

  const std::vector<std::int64_t>& rx() const;
  const std::vector<std::int64_t>& tx() const;
};

enum class ParseErrorKind { kMalformedDocument, kUnknownTopLevelField };

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::string path, const std::string& detail)
      : Error(ErrorCode::kParseError,
              std::string(kind == ParseErrorKind::kMalformedDocument
                              ? "malformed_document"
                              : "unknown_top_level_field") +
                  " at '" + path + "': " + detail),
        kind_(kind),
        path_(std::move(path)) {}

  ParseErrorKind kind() const noexcept { return kind_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ParseErrorKind kind_;
  std::string path_;
};

/// Strict parse of a manifest document. Unknown top-level keys, wrong JSON
/// types and non-semver version strings are rejected; missing fields are left
/// for validate_manifest to report. Defaults are applied to health, security,
/// service_models and dependencies.
XAppManifest parse_manifest(std::string_view raw);

enum class Severity { kError, kWarning, kInfo };

std::string_view to_string(Severity s);
std::optional<Severity> severity_from_string(std::string_view s);

enum class ViolationCode {
  kMissingField,
  kNameFormat,
  kVersionFormat,
  kLicenseFormat,
  kContactFormat,
  kCompatRange,
  kCompatRicVersion,
  kResourceRange,
  kMtypeDomain,
  kMtypeDuplicate,
  kServiceModelUnknown,
  kServiceModelUnsupported,
  kHealthRange,
  kDependencyFormat,
};

std::string_view to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  Severity severity;
  std::string path;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

struct ValidationResult {
  bool valid = true;
  std::vector<Violation> violations;

  bool operator==(const ValidationResult&) const = default;
};

struct RicProfile {
  SemVer ric_version{1, 4, 0};
};

/// Reports every failed invariant; never throws.
ValidationResult validate_manifest(const XAppManifest& m,
                                   const RicProfile& profile);

/// Deterministic serialization: sorted keys, mtype and service-model sets in
/// ascending order, no insignificant whitespace. Absent optional sections are
/// omitted; defaulted sections are always written.
std::string canonicalize(const XAppManifest& m);

/// SHA-256 (hex) of canonicalize(m).
std::string manifest_digest(const XAppManifest& m);

/// Top-level keys accepted by parse_manifest, and the subset that is required.
const std::vector<std::string>& manifest_top_level_keys();
const std::vector<std::string>& manifest_required_keys();

bool is_dns_label(std::string_view s);
bool is_spdx_expression(std::string_view s);
bool is_email_shaped(std::string_view s);

}  // namespace xstore
