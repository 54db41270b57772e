#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace xstore {

struct Position {
  double x_m = 0;
  double y_m = 0;

  bool operator==(const Position&) const = default;
};

struct GnbConfig {
  std::int64_t id = 0;
  Position position;
  double tx_power_dbm = 30.0;

  bool operator==(const GnbConfig&) const = default;
};

struct UeConfig {
  std::int64_t id = 0;
  Position start;
  std::vector<Position> waypoints;
  double speed_mps = 1.0;

  bool operator==(const UeConfig&) const = default;
};

struct RadioConfig {
  double pl0_db = 40.0;
  double ref_dist_m = 1.0;
  double path_loss_exponent = 3.0;
  double noise_floor_dbm = -100.0;
  double handover_hysteresis_db = 3.0;
  double bandwidth_hz = 20e6;

  bool operator==(const RadioConfig&) const = default;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  std::int64_t tick_ms = 1000;
  double width_m = 1000;
  double height_m = 1000;
  std::vector<GnbConfig> gnbs;
  std::vector<UeConfig> ues;
  RadioConfig radio;

  bool operator==(const ScenarioConfig&) const = default;
};

/// Throws Error{kInvalidScenario} for malformed JSON, unknown keys or broken
/// invariants (positions outside the arena, duplicate IDs, non-positive
/// speeds or tick).
ScenarioConfig parse_scenario(std::string_view raw);
void check_scenario(const ScenarioConfig& config);
std::string to_json(const ScenarioConfig& config);

// ---- radio model --------------------------------------------------------

/// Log-distance path loss; distances below ref_dist_m are clamped to it.
double path_loss_db(const RadioConfig& radio, double distance_m);
double rsrp_dbm(const GnbConfig& gnb, const RadioConfig& radio, Position ue);
/// log2(1 + SNR) with SNR = 10^((rsrp - noise)/10).
double throughput_bps_per_hz(double rsrp_dbm, double noise_floor_dbm);

struct Handover {
  std::int64_t ue = 0;
  std::int64_t from = 0;
  std::int64_t to = 0;
  double rsrp_from_dbm = 0;
  double rsrp_to_dbm = 0;
};

/// Hands over to the strongest gNB (lowest ID on ties) only when it beats the
/// serving gNB by more than the hysteresis. `gnbs` must be sorted by ID.
std::optional<Handover> handover_decision(std::int64_t ue, Position ue_pos,
                                          std::int64_t serving,
                                          const std::vector<GnbConfig>& gnbs,
                                          const RadioConfig& radio);

// ---- events --------------------------------------------------------------

struct KpmUeEntry {
  std::int64_t ue_id = 0;
  double rsrp_dbm = 0;
  double throughput_bps_per_hz = 0;
};

struct KpmIndication {
  std::int64_t gnb_id = 0;
  std::int64_t period_ms = 0;
  std::int64_t connected_ue_count = 0;
  std::vector<KpmUeEntry> per_ue;  // ascending UE id
};

std::string to_json(const KpmIndication& ind);
/// Inverse of to_json; throws Error{kInvalidMessage}.
KpmIndication parse_kpm_indication(std::string_view raw);

struct MoveEvent {
  std::int64_t ue = 0;
  Position position;
};
struct HandoverEvent {
  Handover handover;
};
struct KpmReportEvent {
  std::uint64_t subscription_id = 0;
  KpmIndication indication;
};

struct ScenarioEvent {
  std::uint64_t seq = 0;
  std::int64_t sim_time_ms = 0;
  std::variant<MoveEvent, HandoverEvent, KpmReportEvent> body;

  std::string_view kind() const;
};

/// JSON-lines export {seq, sim_time_ms, kind, ...}; reals rounded to three
/// decimals so logs compare byte-for-byte.
std::string to_json_line(const ScenarioEvent& ev);

struct Subscription {
  std::uint64_t id = 0;
  std::string endpoint;
  std::int64_t gnb_id = 0;
  std::int64_t report_period_ms = 0;
  std::int64_t created_at = 0;
  bool active = true;
  std::int64_t fired = 0;
};

struct DueIndication {
  std::uint64_t subscription_id = 0;
  std::string endpoint;
  std::uint64_t event_seq = 0;
  KpmIndication indication;
};

struct TickResult {
  std::vector<ScenarioEvent> events;
  std::vector<DueIndication> indications;
};

struct UeView {
  std::int64_t id = 0;
  Position position;
  std::int64_t serving = 0;
  double serving_rsrp_dbm = 0;
};

/// Immutable read model for the gateway and dashboard.
struct WorldView {
  std::int64_t sim_time_ms = 0;
  std::uint64_t seed = 0;
  std::int64_t tick_ms = 0;
  double width_m = 0;
  double height_m = 0;
  std::vector<GnbConfig> gnbs;
  std::vector<UeView> ues;
  std::vector<ScenarioEvent> recent_events;
  std::size_t event_count = 0;
  std::size_t active_subscriptions = 0;
};

std::string to_json(const WorldView& view);

/// Deterministic RAN world driven by a logical clock. Not internally
/// synchronized; the owner serializes access. No operation accepts control
/// input: subscriptions only select which reports are produced.
class Scenario {
 public:
  explicit Scenario(ScenarioConfig config);

  const ScenarioConfig& config() const { return config_; }
  std::int64_t sim_time_ms() const { return sim_time_ms_; }

  /// Advances one tick: mobility, handovers, then due KPM indications.
  TickResult tick();

  /// Throws kInvalidArgument for an unknown gNB or a period below tick_ms.
  std::uint64_t subscribe(const std::string& endpoint, std::int64_t gnb_id,
                          std::int64_t report_period_ms);
  /// Returns false when the subscription was unknown or already inactive.
  bool cancel(std::uint64_t subscription_id);
  std::size_t cancel_all(const std::string& endpoint);
  std::vector<Subscription> subscriptions() const;

  Position ue_position(std::int64_t ue) const;
  std::int64_t serving_gnb(std::int64_t ue) const;
  const std::map<std::int64_t, std::int64_t>& serving_map() const { return serving_; }
  double rsrp(std::int64_t gnb, std::int64_t ue) const;

  const std::vector<ScenarioEvent>& event_log() const { return log_; }
  WorldView snapshot(std::size_t recent = 50) const;

  /// SHA-256 over everything that defines radio and mobility state.
  std::string radio_state_digest() const;

 private:
  struct UeState {
    Position position;
    std::vector<Position> path;  // start, waypoints...; closed loop
    std::size_t next = 1;
    bool mobile = false;
  };

  const GnbConfig& gnb(std::int64_t id) const;
  void move(UeState& ue, double distance);
  std::int64_t strongest_gnb(Position pos) const;
  KpmIndication build_indication(std::int64_t gnb_id, std::int64_t period_ms) const;
  ScenarioEvent& append(std::int64_t t, decltype(ScenarioEvent::body) body);

  ScenarioConfig config_;
  std::int64_t sim_time_ms_ = 0;
  std::map<std::int64_t, UeState> ues_;
  std::map<std::int64_t, std::int64_t> serving_;
  std::vector<ScenarioEvent> log_;
  std::map<std::uint64_t, Subscription> subscriptions_;
  std::uint64_t next_subscription_ = 1;
};

}  // namespace xstore
