#include "xstore/registry.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xstore/digest.hpp"
#include "xstore/error.hpp"

namespace xstore {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kIdHexChars = 16;

}  // namespace

std::string_view to_string(LifecycleState s) {
  switch (s) {
    case LifecycleState::kSubmitted: return "SUBMITTED";
    case LifecycleState::kValidating: return "VALIDATING";
    case LifecycleState::kValidationFailed: return "VALIDATION_FAILED";
    case LifecycleState::kTesting: return "TESTING";
    case LifecycleState::kTestFailed: return "TEST_FAILED";
    case LifecycleState::kAvailable: return "AVAILABLE";
    case LifecycleState::kDeployed: return "DEPLOYED";
    case LifecycleState::kRetired: return "RETIRED";
  }
  return "SUBMITTED";
}

std::string_view to_string(LifecycleEvent e) {
  switch (e) {
    case LifecycleEvent::kValidationStarted: return "ValidationStarted";
    case LifecycleEvent::kValidationPassed: return "ValidationPassed";
    case LifecycleEvent::kValidationFailed: return "ValidationFailed";
    case LifecycleEvent::kTestPassed: return "TestPassed";
    case LifecycleEvent::kTestFailed: return "TestFailed";
    case LifecycleEvent::kDeployRequested: return "DeployRequested";
    case LifecycleEvent::kUndeployRequested: return "UndeployRequested";
    case LifecycleEvent::kRetireRequested: return "RetireRequested";
  }
  return "ValidationStarted";
}

std::optional<LifecycleState> state_from_string(std::string_view s) {
  for (auto st : kAllStates)
    if (to_string(st) == s) return st;
  return std::nullopt;
}

std::optional<LifecycleEvent> event_from_string(std::string_view s) {
  for (auto ev : kAllEvents)
    if (to_string(ev) == s) return ev;
  return std::nullopt;
}

std::optional<LifecycleState> next_state(LifecycleState from, LifecycleEvent event) {
  using S = LifecycleState;
  using E = LifecycleEvent;
  switch (from) {
    case S::kSubmitted:
      if (event == E::kValidationStarted) return S::kValidating;
      break;
    case S::kValidating:
      if (event == E::kValidationPassed) return S::kTesting;
      if (event == E::kValidationFailed) return S::kValidationFailed;
      break;
    case S::kTesting:
      if (event == E::kTestPassed) return S::kAvailable;
      if (event == E::kTestFailed) return S::kTestFailed;
      break;
    case S::kAvailable:
      if (event == E::kDeployRequested) return S::kDeployed;
      if (event == E::kRetireRequested) return S::kRetired;
      break;
    case S::kDeployed:
      if (event == E::kUndeployRequested) return S::kAvailable;
      if (event == E::kRetireRequested) return S::kRetired;
      break;
    case S::kValidationFailed:
    case S::kTestFailed:
      if (event == E::kRetireRequested) return S::kRetired;
      break;
    case S::kRetired:
      break;
  }
  return std::nullopt;
}

std::string to_json_line(const AuditEntry& e) {
  ordered_json j;
  j["ts"] = e.ts;
  j["id"] = e.id;
  j["from"] = e.from ? ordered_json(std::string(to_string(*e.from))) : ordered_json(nullptr);
  j["event"] = e.event;
  j["to"] = to_string(e.to);
  return j.dump();
}

namespace {

AuditEntry parse_audit_line(const std::string& line) {
  json j = json::parse(line);
  AuditEntry e;
  e.ts = j.at("ts").get<std::uint64_t>();
  e.id = j.at("id").get<std::string>();
  if (!j.at("from").is_null()) {
    e.from = state_from_string(j.at("from").get<std::string>());
    if (!e.from) throw std::runtime_error("bad state");
  }
  e.event = j.at("event").get<std::string>();
  auto to = state_from_string(j.at("to").get<std::string>());
  if (!to) throw std::runtime_error("bad state");
  e.to = *to;
  return e;
}

json record_to_json(const XAppRecord& r) {
  json assets = json::object();
  for (const auto& [name, bytes] : r.package.assets) assets[name] = base64_encode(bytes);
  return json{
      {"id", r.id},
      {"state", to_string(r.state)},
      {"manifest", json::parse(canonicalize(r.manifest))},
      {"package",
       {{"manifest_b64", base64_encode(r.package.manifest_bytes)},
        {"behavior", json::parse(canonicalize(r.package.behavior))},
        {"assets", std::move(assets)}}},
      {"report_ids", r.report_ids},
      {"submitted_at", r.submitted_at},
      {"updated_at", r.updated_at},
      {"version_lineage", r.version_lineage},
  };
}

XAppRecord record_from_json(const json& j) {
  XAppRecord r;
  r.id = j.at("id").get<std::string>();
  auto st = state_from_string(j.at("state").get<std::string>());
  if (!st) throw std::runtime_error("unknown state");
  r.state = *st;
  const auto& pkg = j.at("package");
  r.package.manifest_bytes = base64_decode(pkg.at("manifest_b64").get<std::string>());
  r.package.behavior = parse_behavior(pkg.at("behavior").dump());
  for (const auto& [name, b64] : pkg.at("assets").items())
    r.package.assets[name] = base64_decode(b64.get<std::string>());
  r.manifest = parse_manifest(r.package.manifest_bytes);
  r.report_ids = j.at("report_ids").get<std::vector<std::string>>();
  r.submitted_at = j.at("submitted_at").get<std::uint64_t>();
  r.updated_at = j.at("updated_at").get<std::uint64_t>();
  r.version_lineage = j.at("version_lineage").get<std::vector<std::string>>();
  if (r.id != package_digest(r.package).substr(0, kIdHexChars))
    throw std::runtime_error("record id does not match package digest");
  return r;
}

std::optional<std::string> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "cannot read " + p.string());
  return ss.str();
}

// Old contents move to <file>.prev so that the previous commit stays
// resolvable until the next commit marker lands. When `committed_sha` is
// given and the file on disk does not match it, the file is an uncommitted
// leftover and is overwritten instead, keeping the committed .prev.
void write_generation(const fs::path& p, const std::string& bytes,
                      const std::optional<std::string>& committed_sha = std::nullopt) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  bool rotate = fs::exists(p, ec);
  if (rotate && committed_sha) {
    auto current = read_file(p);
    rotate = current && sha256_hex(*current) == *committed_sha;
  }
  if (rotate) {
    fs::rename(p, p.string() + ".prev", ec);
    if (ec) throw Error(ErrorCode::kIoFailure, "cannot rotate " + p.string() + ": " + ec.message());
  }
  fs::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

// The committed content of `p` is whichever generation matches `sha`.
std::string read_committed(const fs::path& p, const std::string& sha) {
  for (const auto& candidate : {p, fs::path(p.string() + ".prev")}) {
    auto bytes = read_file(candidate);
    if (bytes && sha256_hex(*bytes) == sha) return *bytes;
  }
  throw Error(ErrorCode::kCorruptStore, "checksum mismatch for " + p.filename().string());
}

}  // namespace

Registry::Registry(RicProfile profile) : profile_(profile) {}

XAppRecord& Registry::at_locked(const std::string& id) {
  auto it = records_.find(id);
  if (it == records_.end()) throw Error(ErrorCode::kUnknownId, id);
  return it->second;
}

AuditEntry Registry::transition_locked(XAppRecord& rec, LifecycleEvent event) {
  auto to = next_state(rec.state, event);
  if (!to)
    throw Error(ErrorCode::kInvalidTransition,
                std::string(to_string(rec.state)) + " --" + std::string(to_string(event)) + "-->");
  if (event == LifecycleEvent::kTestPassed) {
    const bool passed = !rec.report_ids.empty() &&
                        reports_.at(rec.report_ids.back()).verdict == Verdict::kPass;
    if (!passed)
      throw Error(ErrorCode::kInvalidTransition,
                  "TESTING --TestPassed--> requires a linked PASS report");
  }
  AuditEntry entry{++clock_, rec.id, rec.state, std::string(to_string(event)), *to};
  rec.state = *to;
  rec.updated_at = entry.ts;
  audit_.push_back(entry);
  return entry;
}

std::string Registry::attach_locked(XAppRecord& rec, ConformanceReport report) {
  report.record_id = rec.id;
  report.report_id = rec.id + "-r" + std::to_string(rec.report_ids.size() + 1);
  rec.report_ids.push_back(report.report_id);
  rec.updated_at = ++clock_;
  const auto rid = report.report_id;
  reports_.emplace(rid, std::move(report));
  return rid;
}

void Registry::notify(const std::vector<AuditEntry>& entries) {
  std::function<void(const AuditEntry&)> cb;
  {
    std::shared_lock lk(mu_);
    cb = listener_;
  }
  if (!cb) return;
  for (const auto& e : entries) cb(e);
}

void Registry::set_listener(std::function<void(const AuditEntry&)> listener) {
  std::unique_lock lk(mu_);
  listener_ = std::move(listener);
}

XAppRecord Registry::submit(PackageArchive pkg) {
  XAppManifest manifest;
  std::string digest;
  try {
    manifest = parse_manifest(pkg.manifest_bytes);
    digest = package_digest(pkg);
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedArchive, std::string("manifest: ") + e.what());
  }
  const std::string id = digest.substr(0, kIdHexChars);

  std::vector<AuditEntry> emitted;
  XAppRecord out;
  {
    std::unique_lock lk(mu_);
    if (auto it = records_.find(id); it != records_.end()) return it->second;

    std::vector<std::string> lineage;
    XAppRecord* superseded = nullptr;
    for (auto& [rid, rec] : records_) {
      if (!manifest.name.empty() && rec.manifest.name == manifest.name) lineage.push_back(rid);
      if (rec.state == LifecycleState::kRetired || manifest.name.empty() ||
          manifest.version.empty())
        continue;
      if (rec.manifest.name != manifest.name || rec.manifest.version != manifest.version)
        continue;
      if (rec.state == LifecycleState::kValidationFailed ||
          rec.state == LifecycleState::kTestFailed) {
        superseded = &rec;
      } else {
        throw Error(ErrorCode::kDuplicateVersion,
                    manifest.name + "@" + manifest.version + " is held by " + rid);
      }
    }
    std::sort(lineage.begin(), lineage.end(), [this](const std::string& a, const std::string& b) {
      return records_.at(a).submitted_at < records_.at(b).submitted_at;
    });
    if (superseded) emitted.push_back(transition_locked(*superseded, LifecycleEvent::kRetireRequested));

    XAppRecord rec;
    rec.id = id;
    rec.manifest = std::move(manifest);
    rec.package = std::move(pkg);
    rec.submitted_at = rec.updated_at = ++clock_;
    rec.version_lineage = std::move(lineage);
    AuditEntry entry{rec.submitted_at, id, std::nullopt, "Submit", LifecycleState::kSubmitted};
    audit_.push_back(entry);
    emitted.push_back(entry);
    out = records_.emplace(id, std::move(rec)).first->second;
  }
  notify(emitted);
  return out;
}

LifecycleState Registry::transition(const std::string& id, LifecycleEvent event) {
  AuditEntry entry;
  {
    std::unique_lock lk(mu_);
    entry = transition_locked(at_locked(id), event);
  }
  notify({entry});
  return entry.to;
}

ValidationResult Registry::validate(const std::string& id) {
  std::vector<AuditEntry> emitted;
  ValidationResult result;
  {
    std::unique_lock lk(mu_);
    auto& rec = at_locked(id);
    emitted.push_back(transition_locked(rec, LifecycleEvent::kValidationStarted));
    const auto started = static_cast<std::int64_t>(clock_);
    result = validate_manifest(rec.manifest, profile_);
    if (result.valid) {
      emitted.push_back(transition_locked(rec, LifecycleEvent::kValidationPassed));
    } else {
      ConformanceReport report;
      report.started_at = started;
      for (const auto& v : result.violations) {
        Check c;
        c.code = std::string(to_string(v.code));
        c.severity = v.severity;
        c.detail = v.detail;
        c.evidence.push_back(Evidence{EvidenceLog::kManifest, std::nullopt, v.path, std::nullopt});
        report.checks.push_back(std::move(c));
      }
      report.verdict = Verdict::kFail;
      report.finished_at = static_cast<std::int64_t>(clock_ + 1);
      attach_locked(rec, std::move(report));
      emitted.push_back(transition_locked(rec, LifecycleEvent::kValidationFailed));
    }
  }
  notify(emitted);
  return result;
}

std::string Registry::attach_report(const std::string& id, ConformanceReport report) {
  std::unique_lock lk(mu_);
  return attach_locked(at_locked(id), std::move(report));
}

XAppRecord Registry::get(const std::string& id) const {
  std::shared_lock lk(mu_);
  auto it = records_.find(id);
  if (it == records_.end()) throw Error(ErrorCode::kUnknownId, id);
  return it->second;
}

std::optional<XAppRecord> Registry::find(const std::string& id) const {
  std::shared_lock lk(mu_);
  auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<XAppRecord> Registry::records() const {
  std::shared_lock lk(mu_);
  std::vector<XAppRecord> out;
  out.reserve(records_.size());
  for (const auto& [_, r] : records_) out.push_back(r);
  return out;
}

std::vector<RecordSummary> Registry::search(const SearchQuery& q) const {
  std::vector<RecordSummary> out;
  {
    std::shared_lock lk(mu_);
    for (const auto& [id, r] : records_) {
      if (q.state ? r.state != *q.state : r.state == LifecycleState::kRetired) continue;
      if (q.name_substring && r.manifest.name.find(*q.name_substring) == std::string::npos)
        continue;
      if (q.mtype) {
        const auto& rx = r.manifest.rx();
        const auto& tx = r.manifest.tx();
        if (std::find(rx.begin(), rx.end(), *q.mtype) == rx.end() &&
            std::find(tx.begin(), tx.end(), *q.mtype) == tx.end())
          continue;
      }
      RecordSummary s;
      s.id = id;
      s.name = r.manifest.name;
      s.version = r.manifest.version;
      s.state = r.state;
      s.rx_mtypes = r.manifest.rx();
      s.tx_mtypes = r.manifest.tx();
      std::sort(s.rx_mtypes.begin(), s.rx_mtypes.end());
      std::sort(s.tx_mtypes.begin(), s.tx_mtypes.end());
      s.submitted_at = r.submitted_at;
      s.updated_at = r.updated_at;
      if (!r.report_ids.empty()) s.latest_report_id = r.report_ids.back();
      out.push_back(std::move(s));
    }
  }
  // Unparseable versions sort after every real one, then by text.
  std::sort(out.begin(), out.end(), [](const RecordSummary& a, const RecordSummary& b) {
    if (a.name != b.name) return a.name < b.name;
    auto va = SemVer::parse(a.version);
    auto vb = SemVer::parse(b.version);
    if (va && vb && *va != *vb) return *va > *vb;
    if (va.has_value() != vb.has_value()) return va.has_value();
    if (a.version != b.version) return a.version > b.version;
    return a.id < b.id;
  });
  return out;
}

ConformanceReport Registry::report(const std::string& report_id) const {
  std::shared_lock lk(mu_);
  auto it = reports_.find(report_id);
  if (it == reports_.end()) throw Error(ErrorCode::kUnknownId, report_id);
  return it->second;
}

std::optional<ConformanceReport> Registry::latest_report(const std::string& id) const {
  std::shared_lock lk(mu_);
  auto it = records_.find(id);
  if (it == records_.end()) throw Error(ErrorCode::kUnknownId, id);
  if (it->second.report_ids.empty()) return std::nullopt;
  return reports_.at(it->second.report_ids.back());
}

std::vector<ConformanceReport> Registry::reports(const std::string& id) const {
  std::shared_lock lk(mu_);
  auto it = records_.find(id);
  if (it == records_.end()) throw Error(ErrorCode::kUnknownId, id);
  std::vector<ConformanceReport> out;
  for (const auto& rid : it->second.report_ids) out.push_back(reports_.at(rid));
  return out;
}

std::vector<AuditEntry> Registry::audit_log() const {
  std::shared_lock lk(mu_);
  return audit_;
}

// ---- persistence ----------------------------------------------------------
//
// store.json is the commit marker: it lists the SHA-256 of every record and
// report file plus the audit line count and the hash of that prefix. Files
// are written first, the marker last; a crash before the marker lands leaves
// the previous commit intact (its files survive as <file>.prev).

void Registry::persist(const fs::path& dir, const PersistFaultHook& fault) {
  auto step = [&](std::string_view name) {
    if (fault) fault(name);
  };
  std::unique_lock lk(mu_);
  std::error_code ec;
  fs::create_directories(dir / "records", ec);
  fs::create_directories(dir / "reports", ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());

  Committed next;
  for (const auto& [id, rec] : records_) {
    const std::string bytes = record_to_json(rec).dump();
    const std::string sha = sha256_hex(bytes);
    next.records[id] = sha;
    auto it = committed_.records.find(id);
    if (it != committed_.records.end() && it->second == sha) continue;
    write_generation(dir / "records" / (id + ".json"), bytes,
                     it == committed_.records.end() ? std::string() : it->second);
    step("record:" + id);
  }
  for (const auto& [rid, rep] : reports_) {
    const std::string bytes = render_report(rep);
    const std::string sha = sha256_hex(bytes);
    next.reports[rid] = sha;
    if (committed_.reports.count(rid)) continue;  // reports are immutable
    write_generation(dir / "reports" / (rid + ".json"), bytes, std::string());
    step("report:" + rid);
  }

  std::string audit;
  for (const auto& e : audit_) audit += to_json_line(e) + "\n";
  // Like records, an unchanged log is not rewritten; its .prev then stays
  // one real generation behind.
  const std::string audit_sha = sha256_hex(audit);
  const auto on_disk = read_file(dir / "audit.log");
  if (audit_sha != committed_.audit || !on_disk || sha256_hex(*on_disk) != audit_sha) {
    write_generation(dir / "audit.log", audit, committed_.audit);
    step("audit");
  }

  json records = json::object();
  for (const auto& [id, sha] : next.records) records[id] = sha;
  json reports = json::object();
  for (const auto& [rid, sha] : next.reports) reports[rid] = sha;
  json marker = {{"format", 1},
                 {"generation", generation_ + 1},
                 {"clock", clock_},
                 {"records", std::move(records)},
                 {"reports", std::move(reports)},
                 {"audit", {{"lines", audit_.size()}, {"sha256", audit_sha}}}};
  marker["checksum"] = sha256_hex(marker.dump(1));
  write_generation(dir / "store.json", marker.dump(1) + "\n");

  // The rename above is the commit; account for it before anything else can
  // fail, or the next persist would rotate against stale checksums.
  ++generation_;
  next.audit = audit_sha;
  committed_ = std::move(next);
  step("commit");
}

std::unique_ptr<Registry> Registry::load_commit(const fs::path& dir, const fs::path& marker_path,
                                                RicProfile profile) {
  auto raw = read_file(marker_path);
  if (!raw) throw Error(ErrorCode::kCorruptStore, "missing commit marker " + marker_path.string());
  auto reg = std::make_unique<Registry>(profile);
  try {
    json marker = json::parse(*raw);
    // The marker must re-render to exactly its own bytes and carry a matching
    // checksum, so a lost tail or a flipped digit cannot pass as a commit.
    if (marker.dump(1) + "\n" != *raw) throw std::runtime_error("commit marker is not canonical");
    const auto checksum = marker.at("checksum").get<std::string>();
    marker.erase("checksum");
    if (sha256_hex(marker.dump(1)) != checksum) throw std::runtime_error("commit marker checksum mismatch");
    reg->generation_ = marker.at("generation").get<std::uint64_t>();
    reg->clock_ = marker.at("clock").get<std::uint64_t>();

    for (const auto& [id, sha] : marker.at("records").items()) {
      const auto bytes = read_committed(dir / "records" / (id + ".json"), sha.get<std::string>());
      auto rec = record_from_json(json::parse(bytes));
      if (rec.id != id) throw std::runtime_error("record " + id + " holds id " + rec.id);
      reg->committed_.records[id] = sha.get<std::string>();
      reg->records_.emplace(id, std::move(rec));
    }
    for (const auto& [rid, sha] : marker.at("reports").items()) {
      const auto bytes = read_committed(dir / "reports" / (rid + ".json"), sha.get<std::string>());
      auto rep = parse_report(bytes);
      if (rep.report_id != rid) throw std::runtime_error("report " + rid + " mislabelled");
      reg->committed_.reports[rid] = sha.get<std::string>();
      reg->reports_.emplace(rid, std::move(rep));
    }
    for (const auto& [id, rec] : reg->records_)
      for (const auto& rid : rec.report_ids)
        if (!reg->reports_.count(rid)) throw std::runtime_error("dangling report " + rid);

    // audit.log is append-only, so an older commit is a line prefix of a
    // newer file. Lines past the committed count are an uncommitted tail.
    const auto lines = marker.at("audit").at("lines").get<std::size_t>();
    const auto audit_sha = marker.at("audit").at("sha256").get<std::string>();
    bool found = false;
    for (const auto& candidate : {dir / "audit.log", dir / "audit.log.prev"}) {
      auto bytes = read_file(candidate);
      if (!bytes) continue;
      std::size_t pos = 0;
      std::size_t n = 0;
      while (n < lines) {
        auto nl = bytes->find('\n', pos);
        if (nl == std::string::npos) break;
        pos = nl + 1;
        ++n;
      }
      if (n != lines || sha256_hex(std::string_view(*bytes).substr(0, pos)) != audit_sha) continue;
      std::istringstream in(bytes->substr(0, pos));
      std::string line;
      while (std::getline(in, line)) reg->audit_.push_back(parse_audit_line(line));
      reg->committed_.audit = audit_sha;
      found = true;
      break;
    }
    if (!found) throw Error(ErrorCode::kCorruptStore, "audit.log does not match commit");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIoFailure) throw;
    throw Error(ErrorCode::kCorruptStore, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kCorruptStore, e.what());
  }
  return reg;
}

std::unique_ptr<Registry> Registry::load(const fs::path& dir, LoadMode mode, RicProfile profile) {
  const fs::path current = dir / "store.json";
  const fs::path previous = dir / "store.json.prev";
  std::error_code ec;
  const bool has_current = fs::exists(current, ec);
  const bool has_previous = fs::exists(previous, ec);
  if (!has_current && !has_previous) {
    // A directory with data files but no commit marker never committed.
    return std::make_unique<Registry>(profile);
  }
  switch (mode) {
    case LoadMode::kStrict:
      // A crash between rotating and renaming the marker leaves only .prev,
      // which is then the newest commit.
      return load_commit(dir, has_current ? current : previous, profile);
    case LoadMode::kPreviousCommit:
      if (!has_previous) throw Error(ErrorCode::kCorruptStore, "no previous commit");
      return load_commit(dir, previous, profile);
    case LoadMode::kRecover:
      try {
        return load_commit(dir, has_current ? current : previous, profile);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kCorruptStore || !has_current || !has_previous) throw;
        return load_commit(dir, previous, profile);
      }
  }
  return load_commit(dir, current, profile);
}

}  // namespace xstore
