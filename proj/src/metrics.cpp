#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ciedsim/engine.hpp"
#include "ciedsim/errors.hpp"
#include "json_util.hpp"

namespace ciedsim {

using detail::json;
using ordered = nlohmann::ordered_json;

std::string_view to_string(RunOutcome o) noexcept {
  constexpr std::string_view names[] = {"running", "complete", "max_ticks", "aborted"};
  return names[static_cast<std::size_t>(o)];
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void EventLog::append(std::string line) {
  hash_ = fnv1a(line, hash_);
  hash_ = fnv1a("\n", hash_);
  lines_.push_back(std::move(line));
}

std::string EventLog::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
  return buf;
}

std::string EventLog::text() const {
  std::string out;
  for (const auto& l : lines_) {
    out += l;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

MetricsReport compute_metrics(const MetricsInputs& in) {
  MetricsReport r;
  r.seed = in.seed;
  r.mode = std::string(to_string(in.mode));
  r.outcome = std::string(to_string(in.outcome));
  r.ticks = in.ticks;
  r.final_phase = std::string(to_string(in.final_phase));
  r.final_phase_index = static_cast<int>(in.final_phase);
  for (std::size_t i = 0; i < 3; ++i) {
    if (in.phase_ticks[i]) r.phase_ticks[i] = *in.phase_ticks[i];
  }
  auto frac = [&](std::uint32_t covered) {
    return in.reachable_cells == 0 ? 1.0 : static_cast<double>(covered) / in.reachable_cells;
  };
  r.covered_cells = in.covered_cells;
  r.reachable_cells = in.reachable_cells;
  r.coverage = frac(in.covered_cells);
  for (const auto& [t, c] : in.coverage_timeline) r.coverage_timeline.emplace_back(t, frac(c));

  const int w = std::max(1, in.width);
  auto cheb = [w](CellIndex a, CellIndex b) {
    const int ax = static_cast<int>(a) % w, ay = static_cast<int>(a) / w;
    const int bx = static_cast<int>(b) % w, by = static_cast<int>(b) / w;
    return std::max(std::abs(ax - bx), std::abs(ay - by));
  };

  std::vector<const CandidateOutcome*> reported;
  for (const CandidateOutcome& c : in.candidates) {
    if (c.status == CandidateStatus::dismissed) {
      ++r.dismissed;
    } else {
      reported.push_back(&c);
    }
  }
  r.threats = static_cast<std::uint32_t>(in.threats.size());
  r.candidates = static_cast<std::uint32_t>(reported.size());
  std::uint32_t found = 0, surface_found = 0;
  for (const ThreatSummary& t : in.threats) {
    if (t.surface) ++r.surface_threats;
    const bool hit = std::any_of(reported.begin(), reported.end(),
                                 [&](const CandidateOutcome* c) { return cheb(c->cell, t.cell) <= 1; });
    if (hit) {
      ++found;
      if (t.surface) ++surface_found;
    }
  }
  std::uint32_t judged = 0, correct = 0;
  for (const CandidateOutcome* c : reported) {
    const ThreatSummary* nearest = nullptr;
    int best = 2;
    for (const ThreatSummary& t : in.threats) {
      const int d = cheb(c->cell, t.cell);
      if (d < best) {
        best = d;
        nearest = &t;
      }
    }
    if (nearest) {
      ++r.true_candidates;
    } else {
      ++r.false_candidates;
    }
    if (c->status == CandidateStatus::classified) {
      ++r.classified;
      if (nearest) {
        ++judged;
        if (nearest->cls == c->cls) ++correct;
      }
    }
  }
  if (r.threats > 0) r.recall = static_cast<double>(found) / r.threats;
  if (r.surface_threats > 0) r.surface_recall = static_cast<double>(surface_found) / r.surface_threats;
  if (r.candidates > 0) r.precision = static_cast<double>(r.true_candidates) / r.candidates;
  if (judged > 0) r.classification_accuracy = static_cast<double>(correct) / judged;

  r.messages_sent = in.sent;
  r.messages_delivered = in.delivered;
  r.dropped_loss = in.dropped[0];
  r.dropped_ttl = in.dropped[1];
  r.dropped_node_down = in.dropped[2];
  if (in.sent > 0) {
    r.loss_rate = static_cast<double>(in.dropped[0] + in.dropped[1] + in.dropped[2]) / static_cast<double>(in.sent);
  }
  r.robots_failed = in.robots_failed;
  return r;
}

namespace {

constexpr const char* kPhaseTickNames[] = {"SpecialisedDetection", "Confirmation", "Complete"};

template <typename T>
ordered opt(const std::optional<T>& v) {
  return v ? ordered(*v) : ordered(nullptr);
}

}  // namespace

std::string report_to_json(const MetricsReport& r) {
  ordered j;
  j["schema_version"] = r.schema_version;
  j["seed"] = r.seed;
  j["mode"] = r.mode;
  j["outcome"] = r.outcome;
  j["ticks"] = r.ticks;
  j["final_phase"] = r.final_phase;
  j["final_phase_index"] = r.final_phase_index;
  ordered pt = ordered::object();
  for (std::size_t i = 0; i < 3; ++i) pt[kPhaseTickNames[i]] = opt(r.phase_ticks[i]);
  j["phase_ticks"] = pt;
  ordered cov;
  cov["final"] = r.coverage;
  cov["covered_cells"] = r.covered_cells;
  cov["reachable_cells"] = r.reachable_cells;
  ordered tl = ordered::array();
  for (const auto& [t, f] : r.coverage_timeline) tl.push_back({t, f});
  cov["timeline"] = tl;
  j["coverage"] = cov;
  ordered det;
  det["threats"] = r.threats;
  det["surface_threats"] = r.surface_threats;
  det["candidates"] = r.candidates;
  det["true_candidates"] = r.true_candidates;
  det["false_candidates"] = r.false_candidates;
  det["dismissed"] = r.dismissed;
  det["recall"] = opt(r.recall);
  det["surface_recall"] = opt(r.surface_recall);
  det["precision"] = opt(r.precision);
  det["classified"] = r.classified;
  det["classification_accuracy"] = opt(r.classification_accuracy);
  j["detection"] = det;
  ordered msg;
  msg["sent"] = r.messages_sent;
  msg["delivered"] = r.messages_delivered;
  msg["dropped_loss"] = r.dropped_loss;
  msg["dropped_ttl"] = r.dropped_ttl;
  msg["dropped_node_down"] = r.dropped_node_down;
  msg["loss_rate"] = opt(r.loss_rate);
  j["messages"] = msg;
  j["robots_failed"] = r.robots_failed;
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::incompatible_reports, std::string("report is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
    throw Error(ErrorCode::incompatible_reports, "report has no schema_version");
  }
  const int version = j["schema_version"].get<int>();
  if (version != kReportSchemaVersion) {
    throw Error(ErrorCode::incompatible_reports, "report schema_version " + std::to_string(version) +
                                                     " is not supported (expected " +
                                                     std::to_string(kReportSchemaVersion) + ")");
  }
  MetricsReport r;
  try {
    auto o = [](const json& v) -> std::optional<double> {
      if (v.is_null()) return std::nullopt;
      return v.get<double>();
    };
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = j.at("mode").get<std::string>();
    r.outcome = j.at("outcome").get<std::string>();
    r.ticks = j.at("ticks").get<std::uint64_t>();
    r.final_phase = j.at("final_phase").get<std::string>();
    r.final_phase_index = j.at("final_phase_index").get<int>();
    for (std::size_t i = 0; i < 3; ++i) {
      const json& v = j.at("phase_ticks").at(kPhaseTickNames[i]);
      if (!v.is_null()) r.phase_ticks[i] = v.get<std::uint64_t>();
    }
    const json& cov = j.at("coverage");
    r.coverage = cov.at("final").get<double>();
    r.covered_cells = cov.at("covered_cells").get<std::uint32_t>();
    r.reachable_cells = cov.at("reachable_cells").get<std::uint32_t>();
    for (const json& p : cov.at("timeline")) r.coverage_timeline.emplace_back(p.at(0).get<std::uint64_t>(), p.at(1).get<double>());
    const json& det = j.at("detection");
    r.threats = det.at("threats").get<std::uint32_t>();
    r.surface_threats = det.at("surface_threats").get<std::uint32_t>();
    r.candidates = det.at("candidates").get<std::uint32_t>();
    r.true_candidates = det.at("true_candidates").get<std::uint32_t>();
    r.false_candidates = det.at("false_candidates").get<std::uint32_t>();
    r.dismissed = det.at("dismissed").get<std::uint32_t>();
    r.recall = o(det.at("recall"));
    r.surface_recall = o(det.at("surface_recall"));
    r.precision = o(det.at("precision"));
    r.classified = det.at("classified").get<std::uint32_t>();
    r.classification_accuracy = o(det.at("classification_accuracy"));
    const json& msg = j.at("messages");
    r.messages_sent = msg.at("sent").get<std::uint64_t>();
    r.messages_delivered = msg.at("delivered").get<std::uint64_t>();
    r.dropped_loss = msg.at("dropped_loss").get<std::uint64_t>();
    r.dropped_ttl = msg.at("dropped_ttl").get<std::uint64_t>();
    r.dropped_node_down = msg.at("dropped_node_down").get<std::uint64_t>();
    r.loss_rate = o(msg.at("loss_rate"));
    r.robots_failed = j.at("robots_failed").get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::incompatible_reports, std::string("report is missing fields: ") + e.what());
  }
  return r;
}

std::string report_summary(const MetricsReport& r) {
  std::ostringstream os;
  auto o = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return std::string(buf);
  };
  auto t = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
  char cov[32];
  std::snprintf(cov, sizeof cov, "%.3f", r.coverage);
  os << "seed " << r.seed << "  mode " << r.mode << "  outcome " << r.outcome << "  ticks " << r.ticks << "\n"
     << "phase " << r.final_phase << "  (SpecialisedDetection@" << t(r.phase_ticks[0]) << ", Confirmation@"
     << t(r.phase_ticks[1]) << ", Complete@" << t(r.phase_ticks[2]) << ")\n"
     << "coverage " << cov << " (" << r.covered_cells << "/" << r.reachable_cells << ")\n"
     << "threats " << r.threats << "  candidates " << r.candidates << "  false " << r.false_candidates
     << "  recall " << o(r.recall) << "  precision " << o(r.precision) << "  class.acc "
     << o(r.classification_accuracy) << "\n"
     << "messages sent " << r.messages_sent << "  delivered " << r.messages_delivered << "  dropped "
     << (r.dropped_loss + r.dropped_ttl + r.dropped_node_down) << "  robots failed " << r.robots_failed << "\n";
  return os.str();
}

std::vector<MetricDelta> compare_reports(const MetricsReport& a, const MetricsReport& b) {
  if (a.schema_version != b.schema_version) {
    throw Error(ErrorCode::incompatible_reports, "reports use different schema versions");
  }
  std::vector<MetricDelta> rows;
  auto add = [&](std::string name, std::optional<double> x, std::optional<double> y) {
    MetricDelta d{std::move(name), x, y, std::nullopt};
    if (x && y) d.delta = *y - *x;
    rows.push_back(std::move(d));
  };
  auto u = [](auto v) { return std::optional<double>(static_cast<double>(v)); };
  auto ot = [](const std::optional<std::uint64_t>& v) {
    return v ? std::optional<double>(static_cast<double>(*v)) : std::nullopt;
  };
  add("completed", u(a.outcome == "complete"), u(b.outcome == "complete"));
  add("final_phase_index", u(a.final_phase_index), u(b.final_phase_index));
  add("ticks", u(a.ticks), u(b.ticks));
  for (std::size_t i = 0; i < 3; ++i) {
    add(std::string("tick_") + kPhaseTickNames[i], ot(a.phase_ticks[i]), ot(b.phase_ticks[i]));
  }
  add("coverage", a.coverage, b.coverage);
  add("recall", a.recall, b.recall);
  add("surface_recall", a.surface_recall, b.surface_recall);
  add("precision", a.precision, b.precision);
  add("candidates", u(a.candidates), u(b.candidates));
  add("false_candidates", u(a.false_candidates), u(b.false_candidates));
  add("classification_accuracy", a.classification_accuracy, b.classification_accuracy);
  add("messages_sent", u(a.messages_sent), u(b.messages_sent));
  add("messages_delivered", u(a.messages_delivered), u(b.messages_delivered));
  add("loss_rate", a.loss_rate, b.loss_rate);
  add("robots_failed", u(a.robots_failed), u(b.robots_failed));
  return rows;
}

std::string format_comparison(const std::vector<MetricDelta>& rows) {
  std::ostringstream os;
  auto cell = [](const std::optional<double>& v) {
    if (!v) return std::string("null");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return std::string(buf);
  };
  char line[160];
  std::snprintf(line, sizeof line, "%-34s %14s %14s %14s  %s\n", "metric", "a", "b", "delta", "sign");
  os << line;
  int up = 0, down = 0, same = 0;
  for (const MetricDelta& r : rows) {
    std::string sign = "n/a";
    if (r.delta) {
      sign = *r.delta > 0 ? "+" : (*r.delta < 0 ? "-" : "=");
      (*r.delta > 0 ? up : (*r.delta < 0 ? down : same))++;
    }
    std::snprintf(line, sizeof line, "%-34s %14s %14s %14s  %s\n", r.name.c_str(), cell(r.a).c_str(),
                  cell(r.b).c_str(), cell(r.delta).c_str(), sign.c_str());
    os << line;
  }
  os << "summary: " << up << " up, " << down << " down, " << same << " unchanged\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Replay

MetricsInputs replay_inputs(std::string_view text) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::incompatible_log, msg); };
  MetricsInputs in;
  bool header = false;
  bool ended = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) bad("log is truncated (last line has no newline)");
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (ended) bad("records after the end record");
    json j;
    try {
      j = json::parse(line.begin(), line.end());
    } catch (const json::exception&) {
      bad("line " + std::to_string(line_no) + " is not valid JSON");
    }
    try {
      const std::string e = j.at("e").get<std::string>();
      if (!header) {
        if (e != "header" || j.value("format", "") != "ciedsim-eventlog") bad("log has no header");
        if (j.at("version").get<int>() != kEventLogVersion) {
          bad("log version " + std::to_string(j.at("version").get<int>()) + " is not supported");
        }
        in.seed = j.at("seed").get<std::uint64_t>();
        const auto mode = controller_mode_from_string(j.at("mode").get<std::string>());
        if (!mode) bad("unknown controller mode");
        in.mode = *mode;
        in.width = j.at("width").get<int>();
        in.reachable_cells = j.at("reachable_cells").get<std::uint32_t>();
        for (const json& t : j.at("threats")) {
          const auto cls = threat_class_from_string(t.at(2).get<std::string>());
          if (!cls) bad("unknown threat class");
          in.threats.push_back({t.at(0).get<std::uint32_t>(), t.at(1).get<CellIndex>(), *cls, t.at(3).get<int>() != 0});
        }
        header = true;
        continue;
      }
      if (e == "net") {
        in.sent += j.at("sent").get<std::uint64_t>();
        in.delivered += j.at("delivered").get<std::uint64_t>();
        in.dropped[0] += j.at("loss").get<std::uint64_t>();
        in.dropped[1] += j.at("ttl").get<std::uint64_t>();
        in.dropped[2] += j.at("node_down").get<std::uint64_t>();
      } else if (e == "fault") {
        if (j.at("fault").get<std::string>() == "robot_failure") ++in.robots_failed;
      } else if (e == "milestone") {
        const auto p = mission_phase_from_string(j.at("phase").get<std::string>());
        if (!p || *p == MissionPhase::explore) bad("bad milestone phase");
        in.phase_ticks[static_cast<std::size_t>(*p) - 1] = j.at("t").get<Tick>();
      } else if (e == "coverage") {
        in.coverage_timeline.emplace_back(j.at("t").get<Tick>(), j.at("covered").get<std::uint32_t>());
      } else if (e == "end") {
        const std::string outcome = j.at("outcome").get<std::string>();
        if (outcome == "complete") {
          in.outcome = RunOutcome::complete;
        } else if (outcome == "max_ticks") {
          in.outcome = RunOutcome::max_ticks;
        } else if (outcome == "aborted") {
          in.outcome = RunOutcome::aborted;
        } else {
          bad("unknown outcome");
        }
        in.ticks = j.at("ticks").get<Tick>();
        const auto p = mission_phase_from_string(j.at("phase").get<std::string>());
        if (!p) bad("unknown phase");
        in.final_phase = *p;
        in.covered_cells = j.at("covered").get<std::uint32_t>();
        for (const json& c : j.at("candidates")) {
          CandidateOutcome o;
          o.cell = c.at(0).get<CellIndex>();
          const auto st = candidate_status_from_string(c.at(1).get<std::string>());
          const auto cls = threat_class_from_string(c.at(2).get<std::string>());
          if (!st || !cls) bad("bad candidate record");
          o.status = *st;
          o.cls = *cls;
          o.low_confidence = c.at(3).get<int>() != 0;
          in.candidates.push_back(o);
        }
        ended = true;
      }
    } catch (const json::exception& ex) {
      bad("line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (!header) bad("log is empty");
  if (!ended) bad("log is truncated (no end record)");
  return in;
}

MetricsReport replay(std::string_view log_text) { return compute_metrics(replay_inputs(log_text)); }

}  // namespace ciedsim
