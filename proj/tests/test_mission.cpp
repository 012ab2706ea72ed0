#include <doctest.h>

#include <json.hpp>

#include "ciedsim/engine.hpp"
#include "ciedsim/errors.hpp"

using namespace ciedsim;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

Scenario small_scenario(std::uint64_t seed, ControllerMode mode = ControllerMode::centralized) {
  ScenarioParams p;
  p.width = 24;
  p.height = 24;
  p.threat_count = 4;
  p.controller_mode = mode;
  return generate_scenario(p, seed);
}

std::vector<json> records(const EventLog& log, const std::string& kind) {
  std::vector<json> out;
  for (const std::string& l : log.lines()) {
    json j = json::parse(l);
    if (j.value("e", "") == kind) out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

TEST_CASE("task ids pack kind, round and key") {
  const std::uint64_t id = make_task_id(TaskKind::emi_scan, 7, 1234);
  CHECK(task_id_kind(id) == TaskKind::emi_scan);
  CHECK(task_id_round(id) == 7);
  CHECK(task_id_key(id) == 1234);
}

TEST_CASE("task eligibility follows platform roles") {
  CHECK(task_eligible(TaskKind::explore_region, RobotKind::suav));
  CHECK_FALSE(task_eligible(TaskKind::explore_region, RobotKind::sugv));
  CHECK(task_eligible(TaskKind::gpr_sweep, RobotKind::luav));
  CHECK(task_eligible(TaskKind::emi_scan, RobotKind::sugv));
  CHECK(task_eligible(TaskKind::confirm_candidate, RobotKind::lugv));
  CHECK_FALSE(task_eligible(TaskKind::confirm_candidate, RobotKind::sugv));
}

TEST_CASE("greedy allocation takes priority then distance") {
  WorldGrid grid(10, 10);
  DistanceOracle dist(&grid);
  std::vector<Task> tasks(2);
  tasks[0].id = 1;
  tasks[0].kind = TaskKind::emi_scan;
  tasks[0].targets = {grid.index(9, 9)};
  tasks[0].priority = 1.0;
  tasks[1].id = 2;
  tasks[1].kind = TaskKind::emi_scan;
  tasks[1].targets = {grid.index(0, 0)};
  tasks[1].priority = 5.0;
  const std::vector<IdleRobot> idle{{4, RobotKind::sugv, grid.index(8, 8)},
                                    {5, RobotKind::sugv, grid.index(1, 1)},
                                    {1, RobotKind::suav, grid.index(0, 0)}};
  const auto a = allocate_tasks(MissionPhase::explore, tasks, idle, dist);
  REQUIRE(a.size() == 2);
  CHECK(a[0] == Assignment{2, 5});
  CHECK(a[1] == Assignment{1, 4});
  CHECK(allocate_tasks(MissionPhase::complete, tasks, idle, dist).empty());
}

TEST_CASE("phase gates advance one step at a time") {
  MissionConfig cfg;
  GateStatus g;
  g.coverage = 0.5;
  CHECK(advance_phase(MissionPhase::explore, g, cfg, false).phase == MissionPhase::explore);
  g.coverage = 0.95;
  CHECK(advance_phase(MissionPhase::explore, g, cfg, false).phase == MissionPhase::specialised_detection);
  const PhaseDecision sup = advance_phase(MissionPhase::explore, g, cfg, true);
  CHECK(sup.phase == MissionPhase::explore);
  CHECK(sup.proposal == MissionPhase::specialised_detection);
  g.sweep_done = true;
  CHECK(advance_phase(MissionPhase::specialised_detection, g, cfg, false).phase ==
        MissionPhase::specialised_detection);
  g.candidates_scanned = true;
  CHECK(advance_phase(MissionPhase::specialised_detection, g, cfg, false).phase == MissionPhase::confirmation);
  g.candidates_resolved = true;
  CHECK(advance_phase(MissionPhase::confirmation, g, cfg, false).phase == MissionPhase::complete);
  CHECK(advance_phase(MissionPhase::complete, g, cfg, false).phase == MissionPhase::complete);
}

TEST_CASE("an autonomous run completes and its log replays to the same report") {
  Engine e(small_scenario(1));
  CHECK(e.run() == RunOutcome::complete);
  CHECK(e.phase() == MissionPhase::complete);
  const MetricsReport r = e.report();
  CHECK(r.coverage >= 0.9);
  CHECK(r.schema_version == kReportSchemaVersion);
  CHECK(replay(e.log().text()) == r);
  CHECK(replay_inputs(e.log().text()) == e.metrics_inputs());
  CHECK(report_from_json(report_to_json(r)) == r);

  const json header = json::parse(e.log().lines().front());
  CHECK(header["e"] == "header");
  CHECK(header["format"] == "ciedsim-eventlog");
  CHECK(json::parse(e.log().lines().back())["e"] == "end");

  // Phase milestones appear in order.
  std::vector<std::string> phases;
  for (const json& m : records(e.log(), "milestone")) phases.push_back(m["phase"]);
  CHECK(phases == std::vector<std::string>{"SpecialisedDetection", "Confirmation", "Complete"});
}

TEST_CASE("identical inputs give identical logs") {
  Engine a(small_scenario(5, ControllerMode::mns)), b(small_scenario(5, ControllerMode::mns));
  a.run();
  b.run();
  CHECK(a.log().hash() == b.log().hash());
  CHECK(a.log().lines() == b.log().lines());
  Engine c(small_scenario(6, ControllerMode::mns));
  c.run();
  CHECK(c.log().hash() != a.log().hash());
}

TEST_CASE("truncated or foreign logs are incompatible") {
  Engine e(small_scenario(2));
  e.run();
  const std::string text = e.log().text();
  const std::string truncated = text.substr(0, text.rfind("{\"t\""));
  CHECK(code_of([&] { replay(truncated); }) == ErrorCode::incompatible_log);
  CHECK(code_of([] { replay("{\"e\":\"coverage\"}\n"); }) == ErrorCode::incompatible_log);
  CHECK(code_of([] { replay(""); }) == ErrorCode::incompatible_log);
  CHECK(code_of([] { report_from_json("{\"schema_version\": 2}"); }) == ErrorCode::incompatible_reports);
}

TEST_CASE("fault schedules are validated") {
  const Scenario s = small_scenario(3);
  CHECK(code_of([&] { parse_fault_schedule(R"([{"type":"robot_failure","robot":42,"tick":5}])", s); }) ==
        ErrorCode::invalid_schedule);
  CHECK(code_of([&] {
          parse_fault_schedule(
              R"([{"type":"robot_failure","robot":2,"tick":5},{"type":"robot_failure","robot":2,"tick":9}])", s);
        }) == ErrorCode::invalid_schedule);
  CHECK(code_of([&] {
          parse_fault_schedule(R"([{"type":"jamming_spike","start":10,"end":20,"p_loss":0.5},
                                   {"type":"jamming_spike","start":15,"end":30,"p_loss":0.5}])",
                               s);
        }) == ErrorCode::invalid_schedule);
  CHECK(code_of([&] { parse_fault_schedule("[{", s); }) == ErrorCode::parse);
  const FaultSchedule ok = parse_fault_schedule(R"([{"type":"comms_blackout","start":5,"end":50,"nodes":[0]}])", s);
  REQUIRE(ok.entries.size() == 1);
  CHECK(ok.entries[0].active(5));
  CHECK_FALSE(ok.entries[0].active(50));
}

TEST_CASE("a failed robot is noticed and its work redistributed") {
  const Scenario s = small_scenario(4);
  RunOptions o;
  o.faults = parse_fault_schedule(R"([{"type":"robot_failure","robot":4,"tick":40}])", s);
  Engine e(s, o);
  CHECK(e.run() == RunOutcome::complete);
  CHECK(e.report().robots_failed == 1);
  CHECK(records(e.log(), "robot_lost").size() >= 1);
  for (const json& a : records(e.log(), "assign")) {
    if (a["t"].get<Tick>() > 40 + s.mission.status_timeout + 1) CHECK(a["robot"] != 4);
  }
}

TEST_CASE("MNS keeps working when the centre is cut off") {
  const Scenario s = small_scenario(7, ControllerMode::mns);
  RunOptions o;
  o.faults = parse_fault_schedule(R"([{"type":"comms_blackout","start":30,"nodes":[0]}])", s);
  Engine e(s, o);
  CHECK(e.run() == RunOutcome::complete);
  CHECK(records(e.log(), "topology").size() >= 1);
  CHECK(e.authority().self() != kCommandCentre);
}

TEST_CASE("supervised runs wait for phase approval") {
  RunOptions o;
  o.supervised = true;
  o.max_ticks = 3000;
  Engine e(small_scenario(8), o);
  CHECK(code_of([&] { e.submit({CommandKind::approve_phase}); }) == ErrorCode::invalid_command);
  while (!e.authority().proposal() && !e.finished()) e.step();
  REQUIRE(e.authority().proposal() == MissionPhase::specialised_detection);
  const Tick held = e.tick();
  for (int i = 0; i < 20; ++i) e.step();
  CHECK(e.phase() == MissionPhase::explore);
  e.submit({CommandKind::approve_phase});
  e.step();
  CHECK(e.phase() == MissionPhase::specialised_detection);
  CHECK(e.tick() == held + 21);

  e.submit({CommandKind::pause});
  e.step();
  CHECK(e.paused());
  const Tick paused_at = e.tick();
  e.step();
  CHECK(e.tick() == paused_at);
  e.submit({CommandKind::resume});
  e.step();
  CHECK_FALSE(e.paused());
  CHECK(e.tick() == paused_at + 1);

  CHECK(code_of([&] { e.submit({CommandKind::retask, 99, 1}); }) == ErrorCode::invalid_command);
  CHECK(code_of([&] { e.submit({CommandKind::confirm_candidate, 0, 0, 9999}); }) == ErrorCode::invalid_command);
  e.submit({CommandKind::abort});
  CHECK(e.run() == RunOutcome::aborted);
  CHECK(code_of([&] { e.submit({CommandKind::pause}); }) == ErrorCode::invalid_command);
}

TEST_CASE("report comparison reports b minus a") {
  MetricsReport a, b;
  a.ticks = 100;
  b.ticks = 80;
  a.coverage = 0.5;
  b.coverage = 0.9;
  const auto rows = compare_reports(a, b);
  auto find = [&](const std::string& n) {
    for (const auto& r : rows)
      if (r.name == n) return r;
    FAIL("missing row " << n);
    return MetricDelta{};
  };
  CHECK(*find("ticks").delta == doctest::Approx(-20));
  CHECK(*find("coverage").delta == doctest::Approx(0.4));
  CHECK_FALSE(find("recall").delta.has_value());
  CHECK(format_comparison(rows).find("summary:") != std::string::npos);
}

TEST_CASE("heatmap csv has one row per cell") {
  WorldGrid grid(3, 2);
  ThreatHeatmap hm(grid);
  const std::string csv = heatmap_csv(hm, grid);
  CHECK(csv.rfind("x,y,prior,posterior\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
