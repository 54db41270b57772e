#include "xstore/router.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "xstore/error.hpp"
#include "xstore/manifest.hpp"

namespace xstore {

namespace {

void check_mtype(Mtype t) {
  if (t < 0 || t >= kMtypeLimit) {
    throw Error(ErrorCode::kInvalidMessage, "message type " + std::to_string(t) +
                                                " outside [0, 2^31)");
  }
}

}  // namespace

void Router::check_message(const RmrMessage& msg) {
  check_mtype(msg.mtype);
  if (msg.payload.size() > kMaxPayloadBytes) {
    throw Error(ErrorCode::kInvalidMessage,
                "payload of " + std::to_string(msg.payload.size()) + " bytes exceeds " +
                    std::to_string(kMaxPayloadBytes));
  }
}

void Router::register_endpoint(const EndpointId& id, const std::set<Mtype>& rx,
                               const std::set<Mtype>& tx) {
  for (auto t : rx) check_mtype(t);
  for (auto t : tx) check_mtype(t);
  std::lock_guard lock(mu_);
  if (endpoints_.count(id) != 0) {
    throw Error(ErrorCode::kAlreadyRegistered, "endpoint '" + id + "' already registered");
  }
  endpoints_.emplace(id, Endpoint{{rx, tx}, {}});
  for (auto t : rx) rx_index_[t].insert(id);
}

void Router::deregister_endpoint(const EndpointId& id) {
  std::lock_guard lock(mu_);
  auto it = endpoints_.find(id);
  if (it == endpoints_.end()) {
    throw Error(ErrorCode::kUnknownEndpoint, "endpoint '" + id + "' is not registered");
  }
  for (auto t : it->second.decl.rx) {
    auto idx = rx_index_.find(t);
    idx->second.erase(id);
    if (idx->second.empty()) rx_index_.erase(idx);
  }
  const auto discarded = it->second.mailbox.size();
  stats_.discarded_on_deregister += discarded;
  stats_.pending -= discarded;
  endpoints_.erase(it);
}

DeliveryRecord Router::record_locked(const RmrMessage& msg, std::vector<EndpointId> to) {
  for (const auto& e : to) endpoints_.at(e).mailbox.push_back(msg);
  DeliveryRecord rec;
  rec.seq = next_seq_++;
  rec.message = msg;
  rec.dropped = to.empty();
  rec.delivered_to = std::move(to);
  rec.observed_at = msg.sim_time_ms;

  ++stats_.routed;
  if (rec.dropped) {
    ++stats_.dropped;
  } else {
    ++stats_.delivered_messages;
  }
  stats_.copies_enqueued += rec.delivered_to.size();
  stats_.pending += rec.delivered_to.size();

  log_.push_back(rec);
  if (log_retention_ != 0 && log_.size() > log_retention_) log_.pop_front();
  return rec;
}

DeliveryRecord Router::route(const RmrMessage& msg) {
  check_message(msg);
  std::lock_guard lock(mu_);
  std::vector<EndpointId> to;
  if (auto it = rx_index_.find(msg.mtype); it != rx_index_.end()) {
    to.assign(it->second.begin(), it->second.end());
  }
  return record_locked(msg, std::move(to));
}

DeliveryRecord Router::send_to(const EndpointId& target, const RmrMessage& msg) {
  check_message(msg);
  std::lock_guard lock(mu_);
  std::vector<EndpointId> to;
  if (endpoints_.count(target) != 0) to.push_back(target);
  return record_locked(msg, std::move(to));
}

std::vector<RmrMessage> Router::drain(const EndpointId& id, std::size_t max) {
  std::lock_guard lock(mu_);
  auto it = endpoints_.find(id);
  if (it == endpoints_.end()) {
    throw Error(ErrorCode::kUnknownEndpoint, "endpoint '" + id + "' is not registered");
  }
  auto& box = it->second.mailbox;
  const auto n = std::min(max, box.size());
  std::vector<RmrMessage> out(std::make_move_iterator(box.begin()),
                              std::make_move_iterator(box.begin() + static_cast<std::ptrdiff_t>(n)));
  box.erase(box.begin(), box.begin() + static_cast<std::ptrdiff_t>(n));
  stats_.drained += n;
  stats_.pending -= n;
  return out;
}

bool Router::is_registered(const EndpointId& id) const {
  std::lock_guard lock(mu_);
  return endpoints_.count(id) != 0;
}

std::optional<EndpointRegistration> Router::registration(const EndpointId& id) const {
  std::lock_guard lock(mu_);
  auto it = endpoints_.find(id);
  if (it == endpoints_.end()) return std::nullopt;
  return it->second.decl;
}

std::vector<EndpointId> Router::endpoints() const {
  std::lock_guard lock(mu_);
  std::vector<EndpointId> out;
  for (const auto& [id, _] : endpoints_) out.push_back(id);
  return out;
}

std::vector<EndpointId> Router::receivers(Mtype mtype) const {
  std::lock_guard lock(mu_);
  auto it = rx_index_.find(mtype);
  if (it == rx_index_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::size_t Router::mailbox_size(const EndpointId& id) const {
  std::lock_guard lock(mu_);
  auto it = endpoints_.find(id);
  if (it == endpoints_.end()) {
    throw Error(ErrorCode::kUnknownEndpoint, "endpoint '" + id + "' is not registered");
  }
  return it->second.mailbox.size();
}

RouterStats Router::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::vector<DeliveryRecord> Router::log_since(std::uint64_t since_seq, std::size_t limit) const {
  std::lock_guard lock(mu_);
  auto it = std::upper_bound(log_.begin(), log_.end(), since_seq,
                             [](std::uint64_t s, const DeliveryRecord& r) { return s < r.seq; });
  std::vector<DeliveryRecord> out;
  for (; it != log_.end() && out.size() < limit; ++it) out.push_back(*it);
  return out;
}

std::optional<DeliveryRecord> Router::log_entry(std::uint64_t seq) const {
  std::lock_guard lock(mu_);
  auto it = std::lower_bound(log_.begin(), log_.end(), seq,
                             [](const DeliveryRecord& r, std::uint64_t s) { return r.seq < s; });
  if (it == log_.end() || it->seq != seq) return std::nullopt;
  return *it;
}

std::uint64_t Router::last_seq() const {
  std::lock_guard lock(mu_);
  return next_seq_ - 1;
}

std::string to_json_line(const DeliveryRecord& rec) {
  nlohmann::ordered_json j;
  j["seq"] = rec.seq;
  j["sim_time_ms"] = rec.observed_at;
  j["mtype"] = rec.message.mtype;
  j["source"] = rec.message.source;
  j["delivered_to"] = rec.delivered_to;
  j["dropped"] = rec.dropped;
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

}  // namespace xstore
