#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace xstore {

using EndpointId = std::string;
using Mtype = std::int64_t;

/// Well-known message types used by the Pseudo-RIC. The numbering follows
/// common reference-implementation values; nothing depends on the numbers.
namespace mtypes {
inline constexpr Mtype kSubscriptionReq = 12010;
inline constexpr Mtype kSubscriptionResp = 12011;
inline constexpr Mtype kRicIndication = 12050;
inline constexpr Mtype kHealthProbe = 100;
inline constexpr Mtype kHealthReply = 101;
}  // namespace mtypes

inline constexpr std::size_t kMaxPayloadBytes = 65536;

struct RmrMessage {
  Mtype mtype = 0;
  EndpointId source;
  std::string payload;
  std::optional<std::string> correlation_id;
  std::int64_t sim_time_ms = 0;

  bool operator==(const RmrMessage&) const = default;
};

struct DeliveryRecord {
  std::uint64_t seq = 0;
  RmrMessage message;
  std::vector<EndpointId> delivered_to;  // ascending endpoint order
  bool dropped = false;
  std::int64_t observed_at = 0;
};

/// Counter identities that hold after every operation:
///   routed == delivered_messages + dropped
///   copies_enqueued == drained + discarded_on_deregister + pending
struct RouterStats {
  std::uint64_t routed = 0;
  std::uint64_t delivered_messages = 0;
  std::uint64_t dropped = 0;
  std::uint64_t copies_enqueued = 0;
  std::uint64_t drained = 0;
  std::uint64_t discarded_on_deregister = 0;
  std::uint64_t pending = 0;
};

struct EndpointRegistration {
  std::set<Mtype> rx;
  std::set<Mtype> tx;
};

/// Type-indexed fan-out router with pull-based mailboxes. All operations are
/// serialized by an internal mutex.
class Router {
 public:
  /// `log_retention` bounds the observation log; 0 keeps everything.
  explicit Router(std::size_t log_retention = 0) : log_retention_(log_retention) {}

  /// Throws kAlreadyRegistered, or kInvalidMessage for an out-of-domain mtype.
  void register_endpoint(const EndpointId& id, const std::set<Mtype>& rx,
                         const std::set<Mtype>& tx);
  /// Discards undelivered mail. Throws kUnknownEndpoint.
  void deregister_endpoint(const EndpointId& id);

  /// Enqueues a copy for every endpoint whose rx set holds msg.mtype. Throws
  /// kInvalidMessage when the mtype or payload size is out of bounds.
  DeliveryRecord route(const RmrMessage& msg);

  /// Point-to-point delivery that ignores rx registrations, the way an
  /// E2 termination answers the endpoint that subscribed. Dropped when the
  /// target is not registered.
  DeliveryRecord send_to(const EndpointId& target, const RmrMessage& msg);

  /// Up to `max` messages, oldest first. Throws kUnknownEndpoint.
  std::vector<RmrMessage> drain(const EndpointId& id, std::size_t max = SIZE_MAX);

  bool is_registered(const EndpointId& id) const;
  std::optional<EndpointRegistration> registration(const EndpointId& id) const;
  std::vector<EndpointId> endpoints() const;
  std::vector<EndpointId> receivers(Mtype mtype) const;
  std::size_t mailbox_size(const EndpointId& id) const;

  RouterStats stats() const;

  /// Entries with seq > since_seq, at most `limit`.
  std::vector<DeliveryRecord> log_since(std::uint64_t since_seq,
                                        std::size_t limit = SIZE_MAX) const;
  std::optional<DeliveryRecord> log_entry(std::uint64_t seq) const;
  std::uint64_t last_seq() const;

 private:
  struct Endpoint {
    EndpointRegistration decl;
    std::deque<RmrMessage> mailbox;
  };

  static void check_message(const RmrMessage& msg);
  DeliveryRecord record_locked(const RmrMessage& msg, std::vector<EndpointId> to);

  mutable std::mutex mu_;
  std::map<EndpointId, Endpoint> endpoints_;
  std::map<Mtype, std::set<EndpointId>> rx_index_;
  std::deque<DeliveryRecord> log_;
  std::uint64_t next_seq_ = 1;
  std::size_t log_retention_;
  RouterStats stats_;
};

/// JSON-lines export: {seq, sim_time_ms, mtype, source, delivered_to[], dropped}.
std::string to_json_line(const DeliveryRecord& rec);

}  // namespace xstore
