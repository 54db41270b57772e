#include "xstore/report.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "xstore/error.hpp"

namespace xstore {

using nlohmann::json;

std::string_view to_string(Verdict v) { return v == Verdict::kPass ? "PASS" : "FAIL"; }

std::string_view to_string(EvidenceLog log) {
  switch (log) {
    case EvidenceLog::kRouter: return "router";
    case EvidenceLog::kScenario: return "scenario";
    case EvidenceLog::kRuntime: return "runtime";
    case EvidenceLog::kManifest: return "manifest";
  }
  return "router";
}

bool ConformanceReport::has_error() const {
  return std::any_of(checks.begin(), checks.end(),
                     [](const Check& c) { return c.severity == Severity::kError; });
}

const Check* ConformanceReport::find(std::string_view code) const {
  auto it = std::find_if(checks.begin(), checks.end(), [code](const Check& c) { return c.code == code; });
  return it == checks.end() ? nullptr : &*it;
}

Verdict verdict_for(const std::vector<Check>& checks) {
  return std::any_of(checks.begin(), checks.end(),
                     [](const Check& c) { return c.severity == Severity::kError; })
             ? Verdict::kFail
             : Verdict::kPass;
}

std::string render_report(const ConformanceReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    json evidence = json::array();
    for (const auto& e : c.evidence) {
      json ej = {{"log", to_string(e.log)}};
      if (e.seq) ej["seq"] = *e.seq;
      if (e.path) ej["path"] = *e.path;
      if (e.sim_time_ms) ej["sim_time_ms"] = *e.sim_time_ms;
      evidence.push_back(std::move(ej));
    }
    json cj = {{"code", c.code},
               {"severity", to_string(c.severity)},
               {"detail", c.detail},
               {"evidence", std::move(evidence)}};
    if (c.mtype) cj["mtype"] = *c.mtype;
    checks.push_back(std::move(cj));
  }
  json doc = {{"report_id", r.report_id},   {"record_id", r.record_id},
              {"verdict", to_string(r.verdict)}, {"checks", std::move(checks)},
              {"started_at", r.started_at}, {"finished_at", r.finished_at}};
  return doc.dump();
}

ConformanceReport parse_report(std::string_view raw) {
  json doc = json::parse(raw.begin(), raw.end(), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::kParseError, "report is not JSON");
  try {
    ConformanceReport r;
    r.report_id = doc.at("report_id").get<std::string>();
    r.record_id = doc.at("record_id").get<std::string>();
    r.started_at = doc.at("started_at").get<std::int64_t>();
    r.finished_at = doc.at("finished_at").get<std::int64_t>();
    const auto verdict = doc.at("verdict").get<std::string>();
    if (verdict != "PASS" && verdict != "FAIL") throw std::runtime_error("bad verdict");
    r.verdict = verdict == "PASS" ? Verdict::kPass : Verdict::kFail;
    for (const auto& cj : doc.at("checks")) {
      Check c;
      c.code = cj.at("code").get<std::string>();
      auto sev = severity_from_string(cj.at("severity").get<std::string>());
      if (!sev) throw std::runtime_error("bad severity");
      c.severity = *sev;
      c.detail = cj.at("detail").get<std::string>();
      if (cj.contains("mtype")) c.mtype = cj.at("mtype").get<std::int64_t>();
      for (const auto& ej : cj.at("evidence")) {
        Evidence e;
        const auto log = ej.at("log").get<std::string>();
        if (log == "router") {
          e.log = EvidenceLog::kRouter;
        } else if (log == "scenario") {
          e.log = EvidenceLog::kScenario;
        } else if (log == "runtime") {
          e.log = EvidenceLog::kRuntime;
        } else if (log == "manifest") {
          e.log = EvidenceLog::kManifest;
        } else {
          throw std::runtime_error("bad evidence log '" + log + "'");
        }
        if (ej.contains("seq")) e.seq = ej.at("seq").get<std::uint64_t>();
        if (ej.contains("path")) e.path = ej.at("path").get<std::string>();
        if (ej.contains("sim_time_ms")) e.sim_time_ms = ej.at("sim_time_ms").get<std::int64_t>();
        c.evidence.push_back(std::move(e));
      }
      r.checks.push_back(std::move(c));
    }
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed report: ") + e.what());
  }
}

}  // namespace xstore
