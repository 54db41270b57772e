// xapp-store: run the gateway, or talk to a running one.
//
// Exit codes: 0 success, 1 API or runtime error, 2 usage error.

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <pthread.h>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "xstore/conformance.hpp"
#include "xstore/gateway.hpp"
#include "xstore/package.hpp"
#include "xstore/scenario.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitApi = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw xstore::Error(xstore::ErrorCode::kIoFailure, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Prints "<status> <CODE>: detail" for API errors.
int report_failure(const httplib::Result& res, const std::string& server) {
  if (!res) {
    std::cerr << "cannot reach " << server << ": " << httplib::to_string(res.error()) << "\n";
    return kExitApi;
  }
  const json body = json::parse(res->body, nullptr, false);
  if (body.is_object() && body.contains("code")) {
    std::cerr << res->status << " " << body.value("code", "") << ": " << body.value("detail", "")
              << "\n";
  } else {
    std::cerr << res->status << " " << res->body << "\n";
  }
  return kExitApi;
}

int cmd_serve(const xstore::GatewayConfig& cfg) {
  // Signals are taken synchronously by this thread; worker threads inherit
  // the blocked mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<xstore::Gateway> gw;
  try {
    gw = std::make_unique<xstore::Gateway>(cfg);
    const int port = gw->bind();
    std::cout << port << std::endl;
  } catch (const std::exception& e) {
    std::cerr << "startup failed: " << e.what() << "\n";
    return kExitApi;
  }
  std::thread server([&gw] { gw->listen(); });
  std::cerr << "serving on http://" << cfg.host << ":" << gw->port() << " (data "
            << cfg.data_dir.string() << ")\n";
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "signal " << sig << ", shutting down\n";
  gw->stop();
  server.join();
  return kExitOk;
}

int cmd_submit(const std::string& archive, const std::string& server, bool wait) {
  std::string bytes;
  try {
    bytes = read_file(archive);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitApi;
  }
  httplib::Client cli(server);
  cli.set_read_timeout(30);
  auto res = cli.Post("/xapps", bytes, "application/octet-stream");
  if (!res || (res->status != 200 && res->status != 201)) return report_failure(res, server);
  const auto body = json::parse(res->body);
  const auto id = body.at("id").get<std::string>();
  std::cout << id << std::endl;
  if (!wait) return kExitOk;

  // Poll until onboarding settles.
  for (int i = 0; i < 600; ++i) {
    auto got = cli.Get("/xapps/" + id);
    if (!got || got->status != 200) return report_failure(got, server);
    const auto state = json::parse(got->body).at("state").get<std::string>();
    if (state != "SUBMITTED" && state != "VALIDATING" && state != "TESTING") {
      std::cout << state << std::endl;
      return state == "AVAILABLE" || state == "DEPLOYED" ? kExitOk : kExitApi;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  std::cerr << "timed out waiting for onboarding of " << id << "\n";
  return kExitApi;
}

int cmd_report(const std::string& id, const std::string& server) {
  httplib::Client cli(server);
  auto res = cli.Get("/xapps/" + id + "/report");
  if (!res || res->status != 200) return report_failure(res, server);
  std::cout << json::parse(res->body).dump(2) << std::endl;
  return kExitOk;
}

int cmd_get(const std::string& path, const std::string& server) {
  httplib::Client cli(server);
  auto res = cli.Get(path);
  if (!res || res->status != 200) return report_failure(res, server);
  std::cout << json::parse(res->body).dump(2) << std::endl;
  return kExitOk;
}

int cmd_pack(const std::string& dir, const std::string& out) {
  try {
    const auto bytes = xstore::pack_directory(dir);
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw xstore::Error(xstore::ErrorCode::kIoFailure, "cannot write " + out);
    std::cout << out << " " << xstore::package_digest(xstore::decode_package(bytes)) << std::endl;
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitApi;
  }
}

int cmd_validate(const std::string& path) {
  try {
    xstore::PackageArchive pkg = std::filesystem::is_directory(path)
                                     ? xstore::decode_package(xstore::pack_directory(path))
                                     : xstore::decode_package(read_file(path));
    const auto manifest = xstore::parse_manifest(pkg.manifest_bytes);
    const auto result = xstore::validate_manifest(manifest, xstore::RicProfile{});
    for (const auto& v : result.violations) {
      std::cout << xstore::to_string(v.severity) << " " << xstore::to_string(v.code) << " "
                << v.path << ": " << v.detail << "\n";
    }
    std::cout << (result.valid ? "valid" : "invalid") << std::endl;
    return result.valid ? kExitOk : kExitApi;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitApi;
  }
}

int cmd_simulate(const std::string& scenario_path, std::int64_t ticks) {
  try {
    xstore::Scenario world(xstore::parse_scenario(read_file(scenario_path)));
    for (std::int64_t i = 0; i < ticks; ++i) world.tick();
    for (const auto& ev : world.event_log()) std::cout << xstore::to_json_line(ev) << "\n";
    std::cout.flush();
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitApi;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xApp store: onboarding, acceptance testing and deployment"};
  app.require_subcommand(1);

  xstore::GatewayConfig serve_cfg;
  std::string scenario_file;
  std::string static_dir;
  std::string data_dir = "data";
  std::uint64_t seed = 0;
  std::uint32_t tick_ms = 0;
  std::uint16_t port = 8080;
  auto* serve = app.add_subcommand("serve", "run the HTTP gateway");
  serve->add_option("--port", port, "TCP port; 0 picks a free one")->capture_default_str();
  serve->add_option("--host", serve_cfg.host, "bind address")->capture_default_str();
  serve->add_option("--data-dir", data_dir, "store directory")->capture_default_str();
  serve->add_option("--tick-ms", tick_ms, "wall-clock ms between live scenario ticks (0: scenario tick)");
  auto* seed_opt = serve->add_option("--seed", seed, "override the live scenario seed");
  serve->add_option("--scenario", scenario_file, "live scenario JSON")->check(CLI::ExistingFile);
  serve->add_option("--static-dir", static_dir, "dashboard assets served at /")->check(CLI::ExistingDirectory);
  serve->add_flag("--start", serve_cfg.start_scenario, "start ticking the live scenario at once");

  std::string server = "http://127.0.0.1:8080";
  std::string archive;
  bool wait = false;
  auto* submit = app.add_subcommand("submit", "upload a package archive");
  submit->add_option("archive", archive, "path to a .xapp archive")->required();
  submit->add_option("--server", server, "gateway URL")->capture_default_str();
  submit->add_flag("--wait", wait, "wait for onboarding and print the final state");

  std::string id;
  auto* report = app.add_subcommand("report", "print the latest conformance report");
  report->add_option("id", id, "record id")->required();
  report->add_option("--server", server, "gateway URL")->capture_default_str();

  auto* list = app.add_subcommand("list", "list records");
  list->add_option("--server", server, "gateway URL")->capture_default_str();

  auto* status = app.add_subcommand("status", "print runtime status");
  status->add_option("--server", server, "gateway URL")->capture_default_str();

  std::string pack_dir;
  std::string pack_out;
  auto* pack = app.add_subcommand("fetch-and-pack", "build a .xapp archive from a directory");
  pack->alias("pack");
  pack->add_option("dir", pack_dir, "directory with manifest.json and behavior.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  pack->add_option("-o,--output", pack_out, "archive to write")->required();

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "validate a package offline");
  validate->add_option("package", validate_path, "archive or package directory")
      ->required()
      ->check(CLI::ExistingPath);

  std::string sim_path;
  std::int64_t ticks = 100;
  auto* simulate = app.add_subcommand("simulate", "run a scenario and print its event log");
  simulate->add_option("scenario", sim_path, "scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--ticks", ticks, "number of ticks")->capture_default_str()->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*serve) {
    serve_cfg.port = port;
    serve_cfg.data_dir = data_dir;
    serve_cfg.tick_ms = tick_ms;
    if (*seed_opt) serve_cfg.seed = seed;
    if (!static_dir.empty()) serve_cfg.static_dir = static_dir;
    if (!scenario_file.empty()) {
      try {
        serve_cfg.scenario = xstore::parse_scenario(read_file(scenario_file));
      } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
      }
    }
    return cmd_serve(serve_cfg);
  }
  if (*submit) return cmd_submit(archive, server, wait);
  if (*report) return cmd_report(id, server);
  if (*list) return cmd_get("/xapps", server);
  if (*status) return cmd_get("/ric/status", server);
  if (*pack) return cmd_pack(pack_dir, pack_out);
  if (*validate) return cmd_validate(validate_path);
  if (*simulate) return cmd_simulate(sim_path, ticks);
  return kExitUsage;
}
