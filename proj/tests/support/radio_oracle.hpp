#pragma once

// Straight re-derivation of the mobility and handover rules from their
// definitions, for per-tick brute-force comparison against xstore::Scenario.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "xstore/scenario.hpp"

namespace xstore::testing {

inline double oracle_rsrp(const GnbConfig& g, const RadioConfig& r, double x, double y) {
  const double d = std::hypot(x - g.position.x_m, y - g.position.y_m);
  const double eff = d < r.ref_dist_m ? r.ref_dist_m : d;
  return g.tx_power_dbm - (r.pl0_db + 10.0 * r.path_loss_exponent * std::log10(eff / r.ref_dist_m));
}

/// Walks a closed polyline start -> waypoints... -> start at constant speed.
class OracleWalker {
 public:
  explicit OracleWalker(const UeConfig& ue) : x_(ue.start.x_m), y_(ue.start.y_m) {
    pts_.push_back(ue.start);
    for (const auto& w : ue.waypoints) pts_.push_back(w);
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      const auto& a = pts_[i];
      const auto& b = pts_[(i + 1) % pts_.size()];
      loop_ += std::hypot(b.x_m - a.x_m, b.y_m - a.y_m);
    }
  }

  void advance(double dist) {
    if (loop_ == 0) return;
    while (dist > 0) {
      const auto& t = pts_[target_];
      const double left = std::hypot(t.x_m - x_, t.y_m - y_);
      if (left <= dist) {
        x_ = t.x_m;
        y_ = t.y_m;
        dist -= left;
        target_ = (target_ + 1) % pts_.size();
      } else {
        x_ += (t.x_m - x_) / left * dist;
        y_ += (t.y_m - y_) / left * dist;
        dist = 0;
      }
    }
  }

  double x() const { return x_; }
  double y() const { return y_; }

 private:
  std::vector<Position> pts_;
  std::size_t target_ = 1;
  double x_, y_;
  double loop_ = 0;
};

struct OracleHandover {
  std::int64_t tick = 0;  // 1-based
  std::int64_t ue = 0;
  std::int64_t from = 0;
  std::int64_t to = 0;
};

/// Runs `ticks` ticks of mobility plus the hysteresis rule by brute force.
inline std::vector<OracleHandover> oracle_handovers(const ScenarioConfig& cfg, std::int64_t ticks) {
  std::map<std::int64_t, OracleWalker> walkers;
  std::map<std::int64_t, std::int64_t> serving;
  auto argmax = [&](double x, double y) {
    std::int64_t best = 0;
    double best_rsrp = -INFINITY;
    for (const auto& g : cfg.gnbs) {
      const double r = oracle_rsrp(g, cfg.radio, x, y);
      if (r > best_rsrp || (r == best_rsrp && g.id < best)) {
        best = g.id;
        best_rsrp = r;
      }
    }
    return std::pair{best, best_rsrp};
  };
  for (const auto& u : cfg.ues) {
    walkers.emplace(u.id, OracleWalker(u));
    serving[u.id] = argmax(u.start.x_m, u.start.y_m).first;
  }
  std::vector<OracleHandover> out;
  for (std::int64_t k = 1; k <= ticks; ++k) {
    for (const auto& u : cfg.ues) walkers.at(u.id).advance(u.speed_mps * cfg.tick_ms / 1000.0);
    for (const auto& u : cfg.ues) {
      const auto& w = walkers.at(u.id);
      const auto [best, best_rsrp] = argmax(w.x(), w.y());
      const GnbConfig* cur = nullptr;
      for (const auto& g : cfg.gnbs)
        if (g.id == serving[u.id]) cur = &g;
      const double cur_rsrp = oracle_rsrp(*cur, cfg.radio, w.x(), w.y());
      if (best != serving[u.id] && best_rsrp - cur_rsrp > cfg.radio.handover_hysteresis_db) {
        out.push_back({k, u.id, serving[u.id], best});
        serving[u.id] = best;
      }
    }
  }
  return out;
}

}  // namespace xstore::testing
