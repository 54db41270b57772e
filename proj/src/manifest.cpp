#include "xstore/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "xstore/digest.hpp"

namespace xstore {

using nlohmann::json;

namespace {

const std::vector<std::int64_t> kNoMtypes;

[[noreturn]] void malformed(const std::string& path, const std::string& detail) {
  throw ParseError(ParseErrorKind::kMalformedDocument, path, detail);
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      malformed(path + "." + key, "unknown field");
    }
  }
}

const json& require_object(const json& v, const std::string& path) {
  if (!v.is_object()) malformed(path, "expected an object");
  return v;
}

std::string read_string(const json& v, const std::string& path) {
  if (!v.is_string()) malformed(path, "expected a string");
  return v.get<std::string>();
}

std::string read_semver_string(const json& v, const std::string& path) {
  std::string s = read_string(v, path);
  if (!SemVer::parse(s)) malformed(path, "not a semantic version (X.Y.Z): '" + s + "'");
  return s;
}

std::int64_t read_integer(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) malformed(path, "integer out of range");
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) malformed(path, "expected an integer");
  return v.get<std::int64_t>();
}

std::vector<std::int64_t> read_mtypes(const json& v, const std::string& path) {
  if (!v.is_array()) malformed(path, "expected an array of integers");
  std::vector<std::int64_t> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(read_integer(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

VersionRangeSpec read_range(const json& v, const std::string& path) {
  require_object(v, path);
  reject_unknown_keys(v, path, {"min", "max"});
  VersionRangeSpec r;
  if (!v.contains("min")) malformed(path + ".min", "missing bound");
  if (!v.contains("max")) malformed(path + ".max", "missing bound");
  r.min = read_semver_string(v.at("min"), path + ".min");
  r.max = read_semver_string(v.at("max"), path + ".max");
  return r;
}

json range_to_json(const VersionRangeSpec& r) {
  return json{{"min", r.min}, {"max", r.max}};
}

std::string trimmed(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

class ViolationSink {
 public:
  void error(ViolationCode code, std::string path, std::string detail) {
    out_.push_back({code, Severity::kError, std::move(path), std::move(detail)});
  }
  void warning(ViolationCode code, std::string path, std::string detail) {
    out_.push_back({code, Severity::kWarning, std::move(path), std::move(detail)});
  }
  ValidationResult finish() && {
    ValidationResult r;
    r.valid = std::none_of(out_.begin(), out_.end(), [](const Violation& v) {
      return v.severity == Severity::kError;
    });
    r.violations = std::move(out_);
    return r;
  }

 private:
  std::vector<Violation> out_;
};

void check_mtypes(ViolationSink& sink, const std::optional<std::vector<std::int64_t>>& set,
                  const std::string& field) {
  if (!set) {
    sink.error(ViolationCode::kMissingField, field, "required field '" + field + "' is missing");
    return;
  }
  std::set<std::int64_t> seen;
  for (std::size_t i = 0; i < set->size(); ++i) {
    const auto t = (*set)[i];
    const std::string path = field + "[" + std::to_string(i) + "]";
    if (t < 0 || t >= kMtypeLimit) {
      sink.error(ViolationCode::kMtypeDomain, path,
                 "message type " + std::to_string(t) + " outside [0, 2^31)");
    }
    if (!seen.insert(t).second) {
      sink.error(ViolationCode::kMtypeDuplicate, path,
                 "message type " + std::to_string(t) + " listed twice");
    }
  }
}

}  // namespace

const std::vector<std::int64_t>& XAppManifest::rx() const {
  return rx_mtypes ? *rx_mtypes : kNoMtypes;
}

const std::vector<std::int64_t>& XAppManifest::tx() const {
  return tx_mtypes ? *tx_mtypes : kNoMtypes;
}

const std::vector<std::string>& manifest_top_level_keys() {
  static const std::vector<std::string> keys = {
      "name",      "version",   "author",         "license",
      "contact",   "ric_compat", "resources",     "rx_mtypes",
      "tx_mtypes", "service_models", "health",    "dependencies",
      "security"};
  return keys;
}

const std::vector<std::string>& manifest_required_keys() {
  static const std::vector<std::string> keys = {
      "name", "version", "author", "license", "ric_compat", "rx_mtypes", "tx_mtypes"};
  return keys;
}

XAppManifest parse_manifest(std::string_view raw) {
  json doc = json::parse(raw.begin(), raw.end(), nullptr, false);
  if (doc.is_discarded()) malformed("", "not a JSON document");
  if (!doc.is_object()) malformed("", "top level must be an object");

  const auto& known = manifest_top_level_keys();
  for (const auto& [key, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ParseError(ParseErrorKind::kUnknownTopLevelField, key,
                       "field is not part of the manifest schema");
    }
  }

  XAppManifest m;
  if (doc.contains("name")) m.name = read_string(doc["name"], "name");
  if (doc.contains("version")) m.version = read_semver_string(doc["version"], "version");
  if (doc.contains("author")) m.author = read_string(doc["author"], "author");
  if (doc.contains("license")) m.license = read_string(doc["license"], "license");
  if (doc.contains("contact")) m.contact = read_string(doc["contact"], "contact");
  if (doc.contains("ric_compat")) m.ric_compat = read_range(doc["ric_compat"], "ric_compat");

  if (doc.contains("resources")) {
    const auto& r = require_object(doc["resources"], "resources");
    reject_unknown_keys(r, "resources", {"cpu_millicores", "memory_mib"});
    Resources res;
    if (!r.contains("cpu_millicores")) malformed("resources.cpu_millicores", "missing");
    if (!r.contains("memory_mib")) malformed("resources.memory_mib", "missing");
    res.cpu_millicores = read_integer(r["cpu_millicores"], "resources.cpu_millicores");
    res.memory_mib = read_integer(r["memory_mib"], "resources.memory_mib");
    m.resources = res;
  }

  if (doc.contains("rx_mtypes")) m.rx_mtypes = read_mtypes(doc["rx_mtypes"], "rx_mtypes");
  if (doc.contains("tx_mtypes")) m.tx_mtypes = read_mtypes(doc["tx_mtypes"], "tx_mtypes");

  if (doc.contains("service_models")) {
    const auto& sm = doc["service_models"];
    if (!sm.is_array()) malformed("service_models", "expected an array of strings");
    for (std::size_t i = 0; i < sm.size(); ++i) {
      m.service_models.push_back(
          read_string(sm[i], "service_models[" + std::to_string(i) + "]"));
    }
  }

  if (doc.contains("health")) {
    const auto& h = require_object(doc["health"], "health");
    reject_unknown_keys(h, "health", {"liveness_period_ms", "failure_threshold"});
    if (h.contains("liveness_period_ms")) {
      m.health.liveness_period_ms =
          read_integer(h["liveness_period_ms"], "health.liveness_period_ms");
    }
    if (h.contains("failure_threshold")) {
      m.health.failure_threshold =
          read_integer(h["failure_threshold"], "health.failure_threshold");
    }
  }

  if (doc.contains("dependencies")) {
    const auto& deps = doc["dependencies"];
    if (!deps.is_array()) malformed("dependencies", "expected an array");
    for (std::size_t i = 0; i < deps.size(); ++i) {
      const std::string path = "dependencies[" + std::to_string(i) + "]";
      const auto& d = require_object(deps[i], path);
      reject_unknown_keys(d, path, {"name", "version"});
      if (!d.contains("name")) malformed(path + ".name", "missing");
      if (!d.contains("version")) malformed(path + ".version", "missing");
      m.dependencies.push_back(
          {read_string(d["name"], path + ".name"), read_range(d["version"], path + ".version")});
    }
  }

  if (doc.contains("security")) {
    const auto& s = require_object(doc["security"], "security");
    reject_unknown_keys(s, "security", {"allow_external_endpoints"});
    if (s.contains("allow_external_endpoints")) {
      const auto& flag = s["allow_external_endpoints"];
      if (!flag.is_boolean()) malformed("security.allow_external_endpoints", "expected a boolean");
      m.security.allow_external_endpoints = flag.get<bool>();
    }
  }
  return m;
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::kError: return "error";
    case Severity::kWarning: return "warning";
    case Severity::kInfo: return "info";
  }
  return "error";
}

std::optional<Severity> severity_from_string(std::string_view s) {
  if (s == "error") return Severity::kError;
  if (s == "warning") return Severity::kWarning;
  if (s == "info") return Severity::kInfo;
  return std::nullopt;
}

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::kMissingField: return "MISSING_FIELD";
    case ViolationCode::kNameFormat: return "NAME_FORMAT";
    case ViolationCode::kVersionFormat: return "VERSION_FORMAT";
    case ViolationCode::kLicenseFormat: return "LICENSE_FORMAT";
    case ViolationCode::kContactFormat: return "CONTACT_FORMAT";
    case ViolationCode::kCompatRange: return "COMPAT_RANGE";
    case ViolationCode::kCompatRicVersion: return "COMPAT_RIC_VERSION";
    case ViolationCode::kResourceRange: return "RESOURCE_RANGE";
    case ViolationCode::kMtypeDomain: return "MTYPE_DOMAIN";
    case ViolationCode::kMtypeDuplicate: return "MTYPE_DUPLICATE";
    case ViolationCode::kServiceModelUnknown: return "SERVICE_MODEL_UNKNOWN";
    case ViolationCode::kServiceModelUnsupported: return "SERVICE_MODEL_UNSUPPORTED";
    case ViolationCode::kHealthRange: return "HEALTH_RANGE";
    case ViolationCode::kDependencyFormat: return "DEPENDENCY_FORMAT";
  }
  return "UNKNOWN";
}

bool is_dns_label(std::string_view s) {
  if (s.empty() || s.size() > 63) return false;
  if (s.front() == '-' || s.back() == '-') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

bool is_spdx_expression(std::string_view s) {
  // idstring (("AND" | "OR" | "WITH") idstring)*, single spaces.
  auto is_id = [](std::string_view tok) {
    if (tok.empty()) return false;
    const unsigned char c0 = static_cast<unsigned char>(tok.front());
    if (!std::isalnum(c0)) return false;
    return std::all_of(tok.begin(), tok.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ||
             c == '+';
    });
  };
  bool expect_id = true;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(' ', pos);
    auto tok = s.substr(pos, next == std::string_view::npos ? s.npos : next - pos);
    if (expect_id) {
      if (!is_id(tok)) return false;
    } else if (tok != "AND" && tok != "OR" && tok != "WITH") {
      return false;
    }
    expect_id = !expect_id;
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return !expect_id;
}

bool is_email_shaped(std::string_view s) {
  auto at = s.find('@');
  if (at == std::string_view::npos || at == 0 || s.find('@', at + 1) != s.npos) return false;
  auto domain = s.substr(at + 1);
  auto dot = domain.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == domain.size()) return false;
  return std::none_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  });
}

ValidationResult validate_manifest(const XAppManifest& m, const RicProfile& profile) {
  ViolationSink sink;
  auto require_text = [&](const std::string& value, const std::string& field) {
    if (trimmed(value).empty()) {
      sink.error(ViolationCode::kMissingField, field, "required field '" + field + "' is missing");
      return false;
    }
    return true;
  };

  if (require_text(m.name, "name") && !is_dns_label(m.name)) {
    sink.error(ViolationCode::kNameFormat, "name",
               "name must be a DNS label (lowercase alphanumerics and '-', at most 63 chars)");
  }
  if (require_text(m.version, "version") && !SemVer::parse(m.version)) {
    sink.error(ViolationCode::kVersionFormat, "version", "'" + m.version + "' is not X.Y.Z");
  }
  require_text(m.author, "author");
  if (require_text(m.license, "license") && !is_spdx_expression(m.license)) {
    sink.error(ViolationCode::kLicenseFormat, "license",
               "'" + m.license + "' is not an SPDX-style identifier");
  }
  if (m.contact && !is_email_shaped(*m.contact)) {
    sink.error(ViolationCode::kContactFormat, "contact", "contact is not email-shaped");
  }

  if (!m.ric_compat) {
    sink.error(ViolationCode::kMissingField, "ric_compat", "required field 'ric_compat' is missing");
  } else {
    auto lo = SemVer::parse(m.ric_compat->min);
    auto hi = SemVer::parse(m.ric_compat->max);
    if (!lo) {
      sink.error(ViolationCode::kVersionFormat, "ric_compat.min",
                 "'" + m.ric_compat->min + "' is not X.Y.Z");
    }
    if (!hi) {
      sink.error(ViolationCode::kVersionFormat, "ric_compat.max",
                 "'" + m.ric_compat->max + "' is not X.Y.Z");
    }
    if (lo && hi) {
      if (!(*lo < *hi)) {
        sink.error(ViolationCode::kCompatRange, "ric_compat",
                   "min " + lo->str() + " must be below max " + hi->str());
      }
      if (!SemVerRange{*lo, *hi}.contains(profile.ric_version)) {
        sink.error(ViolationCode::kCompatRicVersion, "ric_compat",
                   "RIC version " + profile.ric_version.str() + " outside [" + lo->str() +
                       ", " + hi->str() + ")");
      }
    }
  }

  if (m.resources) {
    if (m.resources->cpu_millicores <= 0) {
      sink.error(ViolationCode::kResourceRange, "resources.cpu_millicores",
                 "cpu_millicores must be positive");
    }
    if (m.resources->memory_mib <= 0) {
      sink.error(ViolationCode::kResourceRange, "resources.memory_mib",
                 "memory_mib must be positive");
    }
  }

  check_mtypes(sink, m.rx_mtypes, "rx_mtypes");
  check_mtypes(sink, m.tx_mtypes, "tx_mtypes");

  for (std::size_t i = 0; i < m.service_models.size(); ++i) {
    const std::string path = "service_models[" + std::to_string(i) + "]";
    const auto& sm = m.service_models[i];
    if (sm == "RC") {
      sink.warning(ViolationCode::kServiceModelUnsupported, path,
                   "RC is accepted but control is not supported by the runtime");
    } else if (sm != "KPM") {
      sink.error(ViolationCode::kServiceModelUnknown, path, "unknown service model '" + sm + "'");
    }
  }

  if (m.health.liveness_period_ms <= 0) {
    sink.error(ViolationCode::kHealthRange, "health.liveness_period_ms",
               "liveness_period_ms must be positive");
  }
  if (m.health.failure_threshold < 1) {
    sink.error(ViolationCode::kHealthRange, "health.failure_threshold",
               "failure_threshold must be at least 1");
  }

  for (std::size_t i = 0; i < m.dependencies.size(); ++i) {
    const auto& d = m.dependencies[i];
    const std::string path = "dependencies[" + std::to_string(i) + "]";
    if (!is_dns_label(d.name)) {
      sink.error(ViolationCode::kDependencyFormat, path + ".name",
                 "dependency name must be a DNS label");
    }
    auto lo = SemVer::parse(d.version.min);
    auto hi = SemVer::parse(d.version.max);
    if (!lo) sink.error(ViolationCode::kDependencyFormat, path + ".version.min", "not X.Y.Z");
    if (!hi) sink.error(ViolationCode::kDependencyFormat, path + ".version.max", "not X.Y.Z");
    if (lo && hi && !(*lo < *hi)) {
      sink.error(ViolationCode::kDependencyFormat, path + ".version", "min must be below max");
    }
  }
  return std::move(sink).finish();
}

std::string canonicalize(const XAppManifest& m) {
  auto sorted = [](std::vector<std::int64_t> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  json doc = json::object();
  doc["name"] = m.name;
  doc["version"] = m.version;
  doc["author"] = m.author;
  doc["license"] = m.license;
  if (m.contact) doc["contact"] = *m.contact;
  if (m.ric_compat) doc["ric_compat"] = range_to_json(*m.ric_compat);
  if (m.resources) {
    doc["resources"] = {{"cpu_millicores", m.resources->cpu_millicores},
                        {"memory_mib", m.resources->memory_mib}};
  }
  if (m.rx_mtypes) doc["rx_mtypes"] = sorted(*m.rx_mtypes);
  if (m.tx_mtypes) doc["tx_mtypes"] = sorted(*m.tx_mtypes);
  auto models = m.service_models;
  std::sort(models.begin(), models.end());
  doc["service_models"] = models;
  doc["health"] = {{"liveness_period_ms", m.health.liveness_period_ms},
                   {"failure_threshold", m.health.failure_threshold}};
  json deps = json::array();
  for (const auto& d : m.dependencies) {
    deps.push_back({{"name", d.name}, {"version", range_to_json(d.version)}});
  }
  doc["dependencies"] = std::move(deps);
  doc["security"] = {{"allow_external_endpoints", m.security.allow_external_endpoints}};
  // nlohmann::json objects are std::map backed, so dump() emits sorted keys.
  return doc.dump();
}

std::string manifest_digest(const XAppManifest& m) { return sha256_hex(canonicalize(m)); }

}  // namespace xstore
