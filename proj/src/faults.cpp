#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ciedsim/engine.hpp"
#include "ciedsim/errors.hpp"
#include "json_util.hpp"

namespace ciedsim {

using detail::json;

std::string_view to_string(FaultKind k) noexcept {
  constexpr std::string_view names[] = {"robot_failure", "comms_blackout", "jamming_spike"};
  return names[static_cast<std::size_t>(k)];
}

void validate(const FaultSchedule& schedule, const Scenario& scenario) {
  std::size_t robots = 0;
  for (RobotKind k : kAllRobotKinds) robots += static_cast<std::size_t>(scenario.fleet.kind(k).count);
  const std::size_t nodes = robots + 1;
  auto bad = [](std::size_t i, const std::string& msg) {
    throw Error(ErrorCode::invalid_schedule, "fault " + std::to_string(i) + ": " + msg);
  };
  std::set<NodeId> failed;
  std::vector<const FaultEntry*> spikes;
  for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
    const FaultEntry& e = schedule.entries[i];
    switch (e.kind) {
      case FaultKind::robot_failure:
        if (e.robot == 0 || e.robot > robots) bad(i, "unknown robot " + std::to_string(e.robot));
        if (!failed.insert(e.robot).second) bad(i, "robot " + std::to_string(e.robot) + " fails twice");
        break;
      case FaultKind::comms_blackout:
        if (e.end && *e.end <= e.start) bad(i, "end must be after start");
        if (!e.region && e.nodes.empty() && e.links.empty()) bad(i, "blackout needs a region, nodes or links");
        if (e.region) {
          const auto& r = *e.region;
          if (r[0] > r[2] || r[1] > r[3] || !scenario.grid.in_bounds(r[0], r[1]) ||
              !scenario.grid.in_bounds(r[2], r[3])) {
            bad(i, "region outside the grid or inverted");
          }
        }
        for (NodeId n : e.nodes) {
          if (n >= nodes) bad(i, "unknown node " + std::to_string(n));
        }
        for (const auto& [a, b] : e.links) {
          if (a >= nodes || b >= nodes || a == b) bad(i, "bad link");
        }
        break;
      case FaultKind::jamming_spike:
        if (e.end && *e.end <= e.start) bad(i, "end must be after start");
        if (!(e.p_loss >= 0.0 && e.p_loss <= 1.0)) bad(i, "p_loss must lie in [0,1]");
        for (const FaultEntry* o : spikes) {
          const bool overlap = (!o->end || e.start < *o->end) && (!e.end || o->start < *e.end);
          if (overlap) bad(i, "overlaps another jamming spike");
        }
        spikes.push_back(&e);
        break;
    }
  }
}

namespace {

NodeId parse_robot(const json& v, const Scenario& s, std::size_t i) {
  auto bad = [&](const std::string& msg) {
    throw Error(ErrorCode::invalid_schedule, "fault " + std::to_string(i) + ": " + msg);
  };
  if (v.is_number_unsigned()) return v.get<NodeId>();
  if (!v.is_string()) bad("robot must be an id or a name like SUGV-1");
  const std::string name = v.get<std::string>();
  const auto dash = name.find('-');
  if (dash == std::string::npos) bad("bad robot name '" + name + "'");
  const auto kind = robot_kind_from_string(name.substr(0, dash));
  int index = 0;
  try {
    index = std::stoi(name.substr(dash + 1));
  } catch (const std::exception&) {
    bad("bad robot name '" + name + "'");
  }
  if (!kind || index < 1 || index > s.fleet.kind(*kind).count) bad("unknown robot '" + name + "'");
  NodeId id = 1;
  for (RobotKind k : kAllRobotKinds) {
    if (k == *kind) break;
    id += static_cast<NodeId>(s.fleet.kind(k).count);
  }
  return id + static_cast<NodeId>(index - 1);
}

}  // namespace

FaultSchedule parse_fault_schedule(std::string_view text, const Scenario& scenario) {
  const json doc = detail::parse_json_text(text, "fault schedule");
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("faults")) throw Error(ErrorCode::parse, "fault schedule: missing 'faults'");
    list = &doc.at("faults");
  }
  if (!list->is_array()) throw Error(ErrorCode::parse, "fault schedule: 'faults' must be an array");
  FaultSchedule out;
  try {
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json& j = (*list)[i];
    if (!j.is_object()) throw Error(ErrorCode::parse, "fault " + std::to_string(i) + ": expected object");
    const detail::Reader r(j, "faults[" + std::to_string(i) + "]");
    FaultEntry e;
    const std::string type = r.get<std::string>("type");
    if (type == "robot_failure") {
      e.kind = FaultKind::robot_failure;
      if (!j.contains("robot")) r.fail("robot", "missing");
      e.robot = parse_robot(j.at("robot"), scenario, i);
      e.tick = r.get<Tick>("tick");
    } else if (type == "comms_blackout" || type == "jamming_spike") {
      e.kind = type == "comms_blackout" ? FaultKind::comms_blackout : FaultKind::jamming_spike;
      e.start = r.get<Tick>("start");
      if (j.contains("end") && !j.at("end").is_null()) e.end = r.get<Tick>("end");
      if (e.kind == FaultKind::jamming_spike) {
        e.p_loss = r.get<double>("p_loss");
      } else {
        if (j.contains("region")) {
          const json& reg = j.at("region");
          if (!reg.is_array() || reg.size() != 4) r.fail("region", "expected [x0, y0, x1, y1]");
          e.region = std::array<int, 4>{reg[0].get<int>(), reg[1].get<int>(), reg[2].get<int>(), reg[3].get<int>()};
        }
        if (j.contains("nodes")) e.nodes = j.at("nodes").get<std::vector<NodeId>>();
        if (j.contains("links")) {
          for (const json& l : j.at("links")) {
            if (!l.is_array() || l.size() != 2) r.fail("links", "expected [a, b] pairs");
            e.links.emplace_back(l[0].get<NodeId>(), l[1].get<NodeId>());
          }
        }
      }
    } else {
      throw Error(ErrorCode::invalid_schedule, "fault " + std::to_string(i) + ": unknown type '" + type + "'");
    }
    out.entries.push_back(std::move(e));
  }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("fault schedule: ") + e.what());
  }
  validate(out, scenario);
  return out;
}

FaultSchedule load_fault_schedule(const std::filesystem::path& path, const Scenario& scenario) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_fault_schedule(ss.str(), scenario);
}

}  // namespace ciedsim
