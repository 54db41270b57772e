#include "xstore/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "xstore/package.hpp"

namespace xstore {

using nlohmann::json;

ApiError to_api_error(ErrorCode code, std::string detail) {
  auto make = [&](int status, const char* name) { return ApiError{status, name, std::move(detail)}; };
  switch (code) {
    case ErrorCode::kDuplicateVersion: return make(409, "DUPLICATE_VERSION");
    case ErrorCode::kMalformedArchive: return make(400, "MALFORMED_ARCHIVE");
    case ErrorCode::kUnknownId: return make(404, "UNKNOWN_ID");
    case ErrorCode::kInvalidTransition: return make(409, "INVALID_TRANSITION");
    case ErrorCode::kWrongState: return make(409, "WRONG_STATE");
    case ErrorCode::kNotRunning: return make(404, "NOT_RUNNING");
    case ErrorCode::kAlreadyRegistered: return make(409, "ALREADY_REGISTERED");
    case ErrorCode::kUnknownEndpoint: return make(404, "UNKNOWN_ENDPOINT");
    case ErrorCode::kInvalidMessage: return make(400, "INVALID_MESSAGE");
    case ErrorCode::kParseError: return make(400, "PARSE_ERROR");
    case ErrorCode::kInvalidScenario: return make(400, "INVALID_SCENARIO");
    case ErrorCode::kInvalidArgument: return make(400, "INVALID_ARGUMENT");
    case ErrorCode::kRouterRegistrationFailed: return make(500, "ROUTER_REGISTRATION_FAILED");
    case ErrorCode::kIoFailure: return make(500, "IO_FAILURE");
    case ErrorCode::kCorruptStore: return make(500, "CORRUPT_STORE");
  }
  return make(500, "INTERNAL");
}

std::string to_json(const ApiError& e) {
  return json{{"status", e.status}, {"code", e.code}, {"detail", e.detail}}.dump(-1, ' ', false, json::error_handler_t::replace);
}

// ---- server-sent events ------------------------------------------------------

class EventHub {
 public:
  struct Subscriber {
    std::deque<std::string> queue;
  };

  static constexpr std::size_t kMaxQueued = 1024;

  std::shared_ptr<Subscriber> subscribe() {
    std::lock_guard lk(mu_);
    auto sub = std::make_shared<Subscriber>();
    subs_.push_back(sub);
    return sub;
  }

  void unsubscribe(const std::shared_ptr<Subscriber>& sub) {
    std::lock_guard lk(mu_);
    subs_.erase(std::remove(subs_.begin(), subs_.end(), sub), subs_.end());
  }

  // Slow readers lose their oldest events rather than stall the publisher.
  void publish(std::string data) {
    {
      std::lock_guard lk(mu_);
      for (auto& s : subs_) {
        if (s->queue.size() == kMaxQueued) s->queue.pop_front();
        s->queue.push_back(data);
      }
    }
    cv_.notify_all();
  }

  /// Empty on timeout or after close().
  std::optional<std::string> next(Subscriber& sub, std::chrono::milliseconds timeout) {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, timeout, [&] { return closed_ || !sub.queue.empty(); });
    if (closed_ || sub.queue.empty()) return std::nullopt;
    auto out = std::move(sub.queue.front());
    sub.queue.pop_front();
    return out;
  }

  void close() {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lk(mu_);
    return closed_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::shared_ptr<Subscriber>> subs_;
  bool closed_ = false;
};

// ---- JSON views ----------------------------------------------------------------

namespace {

json summary_json(const RecordSummary& s) {
  return {{"id", s.id},
          {"name", s.name},
          {"version", s.version},
          {"state", to_string(s.state)},
          {"rx_mtypes", s.rx_mtypes},
          {"tx_mtypes", s.tx_mtypes},
          {"submitted_at", s.submitted_at},
          {"updated_at", s.updated_at},
          {"latest_report_id", s.latest_report_id ? json(*s.latest_report_id) : json(nullptr)}};
}

RecordSummary summarize(const XAppRecord& r) {
  RecordSummary s;
  s.id = r.id;
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
  return s;
}

json record_json(const XAppRecord& r, const std::optional<XAppStatus>& runtime) {
  json j = summary_json(summarize(r));
  j["manifest"] = json::parse(canonicalize(r.manifest));
  j["behavior"] = json::parse(canonicalize(r.package.behavior));
  json assets = json::array();
  for (const auto& [name, bytes] : r.package.assets)
    assets.push_back({{"name", name}, {"bytes", bytes.size()}});
  j["assets"] = std::move(assets);
  j["report_ids"] = r.report_ids;
  j["version_lineage"] = r.version_lineage;
  j["running"] = runtime && runtime->alive;
  j["runtime"] = runtime ? json::parse(to_json(*runtime)) : json(nullptr);
  return j;
}

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.status, to_json(e)); }

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, to_api_error(e.code(), e.detail()));
    } catch (const json::exception& e) {
      send_error(res, to_api_error(ErrorCode::kParseError, e.what()));
    } catch (const std::exception& e) {
      send_error(res, ApiError{500, "INTERNAL", e.what()});
    }
  };
}

std::optional<std::string> param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  return req.get_param_value(key);
}

std::int64_t int_param(const httplib::Request& req, const char* key, std::int64_t fallback) {
  auto v = param(req, key);
  if (!v || v->empty()) return fallback;
  try {
    std::size_t used = 0;
    const auto n = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return n;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string(key) + " must be an integer");
  }
}

constexpr const char* kPlaceholderIndex = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>xApp Store</title></head>
<body>
<h1>xApp Store</h1>
<p>The dashboard is not installed. Start the server with <code>--static-dir</code>
pointing at a built dashboard, or use the JSON API:</p>
<ul>
<li><a href="/xapps">/xapps</a></li>
<li><a href="/ric/status">/ric/status</a></li>
<li><a href="/scenario/state">/scenario/state</a></li>
<li><a href="/events/stream">/events/stream</a></li>
</ul>
</body></html>
)";

}  // namespace

// ---- gateway --------------------------------------------------------------------

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)), hub_(std::make_shared<EventHub>()),
      server_(std::make_unique<httplib::Server>()) {
  registry_ = Registry::load(config_.data_dir, LoadMode::kRecover);
  // Fail at startup, not on the first mutation, when the store is unwritable.
  {
    std::error_code ec;
    std::filesystem::create_directories(config_.data_dir, ec);
    const auto probe = config_.data_dir / ".write-probe";
    std::ofstream(probe) << "ok";
    if (ec || !std::filesystem::exists(probe))
      throw Error(ErrorCode::kIoFailure, "data dir " + config_.data_dir.string() + " is not writable");
    std::filesystem::remove(probe, ec);
  }
  ScenarioConfig live = config_.scenario.value_or(default_acceptance_scenario());
  if (config_.seed) live.seed = *config_.seed;
  acceptance_scenario_ = config_.acceptance_scenario.value_or(default_acceptance_scenario());
  ric_ = std::make_unique<PseudoRic>(std::move(live), 100000);

  auto hub = hub_;
  registry_->set_listener([hub](const AuditEntry& e) {
    hub->publish(json{{"type", "lifecycle"}, {"event", json::parse(to_json_line(e))}}.dump(-1, ' ', false, json::error_handler_t::replace));
  });
  ric_->set_listener([hub](const StreamEvent& e) {
    hub->publish(json{{"type", e.type}, {"event", json::parse(e.data)}}.dump(-1, ' ', false, json::error_handler_t::replace));
  });

  // Deployed xApps come back up; interrupted onboarding starts over.
  for (const auto& rec : registry_->records()) {
    if (rec.state == LifecycleState::kDeployed) {
      try {
        ric_->deploy(rec);
      } catch (const Error& e) {
        std::cerr << "restore of " << rec.id << " failed: " << e.what() << "\n";
      }
    } else if (rec.state == LifecycleState::kSubmitted || rec.state == LifecycleState::kTesting) {
      queue_.push_back(rec.id);
    }
  }

  running_scenario_ = config_.start_scenario;
  routes();
  pipeline_ = std::thread([this] { pipeline_loop(); });
  ticker_ = std::thread([this] { ticker_loop(); });
}

Gateway::~Gateway() { stop(); }

int Gateway::bind() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
  } else {
    port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ < 0)
    throw Error(ErrorCode::kIoFailure,
                "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  return port_;
}

void Gateway::listen() { server_->listen_after_bind(); }

void Gateway::stop() {
  if (stopped_) return;
  stopped_ = true;
  stopping_ = true;
  hub_->close();
  server_->stop();
  queue_cv_.notify_all();
  tick_cv_.notify_all();
  if (pipeline_.joinable()) pipeline_.join();
  if (ticker_.joinable()) ticker_.join();
  try {
    persist();
  } catch (const Error& e) {
    std::cerr << "persist on shutdown failed: " << e.what() << "\n";
  }
}

void Gateway::persist() {
  std::lock_guard lk(persist_mu_);
  registry_->persist(config_.data_dir);
}

void Gateway::enqueue(const std::string& record_id) {
  {
    std::lock_guard lk(queue_mu_);
    queue_.push_back(record_id);
  }
  queue_cv_.notify_all();
}

void Gateway::wait_idle() {
  std::unique_lock lk(queue_mu_);
  queue_cv_.wait(lk, [this] { return (queue_.empty() && !busy_) || stopping_; });
}

void Gateway::pipeline_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lk(queue_mu_);
      queue_cv_.wait(lk, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      busy_ = true;
    }
    try {
      const auto state = registry_->get(id).state;
      if (state == LifecycleState::kSubmitted) {
        onboard(*registry_, id, acceptance_scenario_);
      } else if (state == LifecycleState::kTesting) {
        AcceptancePlan plan;
        plan.scenario = acceptance_scenario_;
        run_acceptance(*registry_, id, std::move(plan));
      }
      persist();
    } catch (const std::exception& e) {
      std::cerr << "onboarding of " << id << " failed: " << e.what() << "\n";
    }
    {
      std::lock_guard lk(queue_mu_);
      busy_ = false;
    }
    queue_cv_.notify_all();
  }
}

void Gateway::ticker_loop() {
  std::unique_lock lk(tick_mu_);
  while (!stopping_) {
    const auto interval =
        std::chrono::milliseconds(config_.tick_ms > 0 ? config_.tick_ms : ric_->scenario_config().tick_ms);
    tick_cv_.wait_for(lk, interval);
    if (stopping_) break;
    if (!running_scenario_) continue;
    lk.unlock();
    ric_->step();
    lk.lock();
  }
}

void Gateway::routes() {
  auto& s = *server_;
  s.new_task_queue = [] { return new httplib::ThreadPool(16); };

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 404) {
      send_error(res, ApiError{404, "NOT_FOUND", "no such route"});
    } else {
      send_error(res, ApiError{res.status, "HTTP_" + std::to_string(res.status), ""});
    }
    return httplib::Server::HandlerResponse::Handled;
  });

  if (config_.static_dir) {
    if (!s.set_mount_point("/", config_.static_dir->string()))
      throw Error(ErrorCode::kIoFailure, "static dir " + config_.static_dir->string() + " not found");
  } else {
    s.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderIndex, "text/html");
    });
  }

  s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, R"({"ok":true})");
  });

  // ---- store --------------------------------------------------------------

  s.Post("/xapps", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto pkg = decode_package(req.body);
    std::optional<XAppRecord> before;
    try {
      before = registry_->find(package_digest(pkg).substr(0, 16));
    } catch (const Error&) {
      // submit() reports the unparseable manifest.
    }
    auto rec = registry_->submit(std::move(pkg));
    const bool created = !before;
    if (created) {
      persist();
      enqueue(rec.id);
    }
    json body = summary_json(summarize(rec));
    body["created"] = created;
    send_json(res, created ? 201 : 200, body.dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  s.Get("/xapps", guarded([this](const httplib::Request& req, httplib::Response& res) {
    SearchQuery q;
    q.name_substring = param(req, "q");
    if (q.name_substring && q.name_substring->empty()) q.name_substring.reset();
    if (auto st = param(req, "state"); st && !st->empty()) {
      q.state = state_from_string(*st);
      if (!q.state) throw Error(ErrorCode::kInvalidArgument, "unknown state '" + *st + "'");
    }
    if (req.has_param("mtype") && !req.get_param_value("mtype").empty())
      q.mtype = int_param(req, "mtype", 0);
    json out = json::array();
    for (const auto& sum : registry_->search(q)) out.push_back(summary_json(sum));
    send_json(res, 200, out.dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  s.Get(R"(/xapps/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto rec = registry_->get(id);
    send_json(res, 200, record_json(rec, ric_->xapp(id)).dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  s.Get(R"(/xapps/([^/]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto rep = registry_->latest_report(id);
    if (!rep) {
      send_error(res, ApiError{404, "NOT_FOUND", id + " has no report yet"});
      return;
    }
    send_json(res, 200, render_report(*rep));
  }));

  s.Get(R"(/xapps/([^/]+)/reports)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json out = json::array();
    for (const auto& r : registry_->reports(req.matches[1])) out.push_back(json::parse(render_report(r)));
    send_json(res, 200, out.dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  s.Get(R"(/reports/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, render_report(registry_->report(req.matches[1])));
  }));

  s.Get("/audit", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto since = int_param(req, "since_ts", 0);
    json out = json::array();
    for (const auto& e : registry_->audit_log())
      if (static_cast<std::int64_t>(e.ts) > since) out.push_back(json::parse(to_json_line(e)));
    send_json(res, 200, out.dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  s.Post(R"(/xapps/([^/]+)/deploy)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto rec = registry_->get(id);
    if (!next_state(rec.state, LifecycleEvent::kDeployRequested))
      throw Error(ErrorCode::kInvalidTransition,
                  std::string(to_string(rec.state)) + " --DeployRequested-->");
    deploy_record(*registry_, *ric_, id);
    persist();
    send_json(res, 200, record_json(registry_->get(id), ric_->xapp(id)).dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  s.Delete(R"(/xapps/([^/]+)/deploy)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    undeploy_record(*registry_, *ric_, id);
    persist();
    send_json(res, 200, record_json(registry_->get(id), ric_->xapp(id)).dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  // ---- runtime ------------------------------------------------------------

  s.Get("/ric/status", guarded([this](const httplib::Request&, httplib::Response& res) {
    const auto st = ric_->router().stats();
    json xapps = json::array();
    for (const auto& x : ric_->xapps()) xapps.push_back(json::parse(to_json(x)));
    bool running;
    {
      std::lock_guard lk(tick_mu_);
      running = running_scenario_;
    }
    json body = {{"router",
                  {{"routed", st.routed},
                   {"delivered_messages", st.delivered_messages},
                   {"dropped", st.dropped},
                   {"copies_enqueued", st.copies_enqueued},
                   {"drained", st.drained},
                   {"discarded_on_deregister", st.discarded_on_deregister},
                   {"pending", st.pending},
                   {"last_seq", ric_->router().last_seq()}}},
                 {"endpoints", ric_->router().endpoints()},
                 {"xapps", std::move(xapps)},
                 {"sim_time_ms", ric_->sim_time_ms()},
                 {"scenario_running", running}};
    send_json(res, 200, body.dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  s.Get("/ric/logs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto since = int_param(req, "since_seq", 0);
    const auto limit = int_param(req, "limit", 500);
    if (since < 0 || limit <= 0) throw Error(ErrorCode::kInvalidArgument, "since_seq >= 0, limit > 0");
    json entries = json::array();
    for (const auto& r : ric_->router().log_since(static_cast<std::uint64_t>(since),
                                                  static_cast<std::size_t>(limit)))
      entries.push_back(json::parse(to_json_line(r)));
    send_json(res, 200, json{{"entries", std::move(entries)}, {"last_seq", ric_->router().last_seq()}}.dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  s.Get("/ric/runtime", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto since = int_param(req, "since_seq", 0);
    json entries = json::array();
    for (const auto& e : ric_->runtime_log())
      if (static_cast<std::int64_t>(e.seq) > since) entries.push_back(json::parse(to_json_line(e)));
    send_json(res, 200, json{{"entries", std::move(entries)}}.dump(-1, ' ', false, json::error_handler_t::replace));
  }));

  // ---- scenario -----------------------------------------------------------

  s.Post("/scenario", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto cfg = parse_scenario(req.body);
    ric_->load_scenario(std::move(cfg));
    send_json(res, 200, to_json(ric_->snapshot()));
  }));

  auto set_running = [this](bool on) {
    {
      std::lock_guard lk(tick_mu_);
      running_scenario_ = on;
    }
    tick_cv_.notify_all();
  };
  s.Post("/scenario/start", guarded([set_running](const httplib::Request&, httplib::Response& res) {
    set_running(true);
    send_json(res, 200, R"({"running":true})");
  }));
  s.Post("/scenario/stop", guarded([set_running](const httplib::Request&, httplib::Response& res) {
    set_running(false);
    send_json(res, 200, R"({"running":false})");
  }));

  s.Post("/scenario/step", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto n = int_param(req, "n", 1);
    if (n < 1 || n > 100000) throw Error(ErrorCode::kInvalidArgument, "n must be in [1, 100000]");
    for (std::int64_t i = 0; i < n; ++i) ric_->step();
    send_json(res, 200, to_json(ric_->snapshot()));
  }));

  s.Get("/scenario/state", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto recent = int_param(req, "recent", 50);
    send_json(res, 200, to_json(ric_->snapshot(static_cast<std::size_t>(std::max<std::int64_t>(0, recent)))));
  }));

  s.Get("/scenario/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto since = int_param(req, "since_seq", 0);
    const auto kind = param(req, "kind");
    std::string body = "[";
    bool first = true;
    for (const auto& ev : ric_->scenario_log()) {
      if (static_cast<std::int64_t>(ev.seq) <= since) continue;
      if (kind && !kind->empty() && ev.kind() != *kind) continue;
      if (!first) body += ",";
      body += to_json_line(ev);
      first = false;
    }
    body += "]";
    send_json(res, 200, body);
  }));

  // ---- live stream --------------------------------------------------------

  s.Get("/events/stream", [this](const httplib::Request&, httplib::Response& res) {
    auto hub = hub_;
    auto sub = hub->subscribe();
    auto greeted = std::make_shared<bool>(false);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [hub, sub, greeted](std::size_t, httplib::DataSink& sink) {
          if (!*greeted) {
            *greeted = true;
            const std::string hello = "retry: 2000\n: connected\n\n";
            return sink.write(hello.data(), hello.size());
          }
          auto ev = hub->next(*sub, std::chrono::milliseconds(1000));
          if (hub->closed()) {
            sink.done();
            return false;
          }
          const std::string chunk = ev ? "data: " + *ev + "\n\n" : std::string(": keepalive\n\n");
          return sink.write(chunk.data(), chunk.size());
        },
        [hub, sub](bool) { hub->unsubscribe(sub); });
  });
}

}  // namespace xstore
