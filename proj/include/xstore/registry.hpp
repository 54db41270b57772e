#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "xstore/manifest.hpp"
#include "xstore/package.hpp"
#include "xstore/report.hpp"

namespace xstore {

enum class LifecycleState {
  kSubmitted,
  kValidating,
  kValidationFailed,
  kTesting,
  kTestFailed,
  kAvailable,
  kDeployed,
  kRetired,
};

enum class LifecycleEvent {
  kValidationStarted,
  kValidationPassed,
  kValidationFailed,
  kTestPassed,
  kTestFailed,
  kDeployRequested,
  kUndeployRequested,
  kRetireRequested,
};

inline constexpr LifecycleState kAllStates[] = {
    LifecycleState::kSubmitted,  LifecycleState::kValidating, LifecycleState::kValidationFailed,
    LifecycleState::kTesting,    LifecycleState::kTestFailed, LifecycleState::kAvailable,
    LifecycleState::kDeployed,   LifecycleState::kRetired};

inline constexpr LifecycleEvent kAllEvents[] = {
    LifecycleEvent::kValidationStarted, LifecycleEvent::kValidationPassed,
    LifecycleEvent::kValidationFailed,  LifecycleEvent::kTestPassed,
    LifecycleEvent::kTestFailed,        LifecycleEvent::kDeployRequested,
    LifecycleEvent::kUndeployRequested, LifecycleEvent::kRetireRequested};

std::string_view to_string(LifecycleState s);
std::string_view to_string(LifecycleEvent e);
std::optional<LifecycleState> state_from_string(std::string_view s);
std::optional<LifecycleEvent> event_from_string(std::string_view s);

/// The onboarding state machine. A failed record is superseded (retired) when
/// a fixed package for the same name and version is submitted; the fix starts
/// over as a new record.
std::optional<LifecycleState> next_state(LifecycleState from, LifecycleEvent event);

struct XAppRecord {
  std::string id;
  XAppManifest manifest;
  PackageArchive package;
  LifecycleState state = LifecycleState::kSubmitted;
  std::vector<std::string> report_ids;  // append-only
  std::uint64_t submitted_at = 0;
  std::uint64_t updated_at = 0;
  std::vector<std::string> version_lineage;  // earlier record ids with the same name
};

struct RecordSummary {
  std::string id;
  std::string name;
  std::string version;
  LifecycleState state = LifecycleState::kSubmitted;
  std::vector<std::int64_t> rx_mtypes;
  std::vector<std::int64_t> tx_mtypes;
  std::uint64_t submitted_at = 0;
  std::uint64_t updated_at = 0;
  std::optional<std::string> latest_report_id;
};

struct SearchQuery {
  std::optional<std::string> name_substring;
  std::optional<LifecycleState> state;  // default excludes RETIRED
  std::optional<std::int64_t> mtype;    // rx or tx contains it
};

struct AuditEntry {
  std::uint64_t ts = 0;
  std::string id;
  std::optional<LifecycleState> from;  // empty for the submission itself
  std::string event;
  LifecycleState to = LifecycleState::kSubmitted;

  bool operator==(const AuditEntry&) const = default;
};

std::string to_json_line(const AuditEntry& e);

enum class LoadMode {
  kStrict,          // newest commit or CorruptStore
  kPreviousCommit,  // the commit before the newest one
  kRecover,         // newest, falling back to the previous one
};

/// Called at named points inside persist(); throwing from it simulates a
/// crash at that point.
using PersistFaultHook = std::function<void(std::string_view step)>;

/// Single-tenant xApp store. Mutations are serialized; readers share a lock
/// and receive copies.
class Registry {
 public:
  explicit Registry(RicProfile profile = {});

  /// New record in SUBMITTED. Resubmitting identical bytes returns the
  /// existing record. Throws kMalformedArchive, kDuplicateVersion.
  XAppRecord submit(PackageArchive pkg);

  /// Throws kUnknownId, kInvalidTransition. kTestPassed is also refused
  /// unless the newest linked report is a PASS.
  LifecycleState transition(const std::string& id, LifecycleEvent event);

  /// SUBMITTED -> VALIDATING -> TESTING, or -> VALIDATION_FAILED with a
  /// linked FAIL report listing every error violation.
  ValidationResult validate(const std::string& id);

  /// Links a finished report and returns the id it was stored under.
  std::string attach_report(const std::string& id, ConformanceReport report);

  XAppRecord get(const std::string& id) const;
  std::optional<XAppRecord> find(const std::string& id) const;
  std::vector<XAppRecord> records() const;
  /// Sorted by name, then version descending.
  std::vector<RecordSummary> search(const SearchQuery& q) const;

  ConformanceReport report(const std::string& report_id) const;
  std::optional<ConformanceReport> latest_report(const std::string& id) const;
  std::vector<ConformanceReport> reports(const std::string& id) const;

  std::vector<AuditEntry> audit_log() const;
  const RicProfile& profile() const { return profile_; }

  void set_listener(std::function<void(const AuditEntry&)> listener);

  /// Writes records/, reports/, audit.log, then the store.json commit
  /// marker. Throws kIoFailure.
  void persist(const std::filesystem::path& data_dir, const PersistFaultHook& fault = {});

  /// Throws kCorruptStore on checksum mismatch or truncation, kIoFailure on
  /// unreadable files. An empty or missing directory yields an empty store.
  static std::unique_ptr<Registry> load(const std::filesystem::path& data_dir,
                                        LoadMode mode = LoadMode::kStrict,
                                        RicProfile profile = {});

 private:
  struct Committed {
    std::map<std::string, std::string> records;  // id -> sha
    std::map<std::string, std::string> reports;
    std::string audit;  // sha of the whole committed audit.log
  };

  XAppRecord& at_locked(const std::string& id);
  AuditEntry transition_locked(XAppRecord& rec, LifecycleEvent event);
  std::string attach_locked(XAppRecord& rec, ConformanceReport report);
  void notify(const std::vector<AuditEntry>& entries);
  static std::unique_ptr<Registry> load_commit(const std::filesystem::path& dir,
                                               const std::filesystem::path& marker,
                                               RicProfile profile);

  RicProfile profile_;
  mutable std::shared_mutex mu_;
  std::map<std::string, XAppRecord> records_;
  std::map<std::string, ConformanceReport> reports_;
  std::vector<AuditEntry> audit_;
  std::uint64_t clock_ = 0;
  std::uint64_t generation_ = 0;
  Committed committed_;
  std::function<void(const AuditEntry&)> listener_;
};

}  // namespace xstore
