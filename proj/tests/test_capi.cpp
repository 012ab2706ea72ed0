#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ciedsim/ciedsim.h"

using nlohmann::json;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  ciedsim_string_free(s);
  return out;
}

ciedsim_scenario* small(uint64_t seed) {
  ciedsim_gen_params p;
  ciedsim_gen_params_default(&p);
  p.width = 20;
  p.height = 20;
  p.threats = 3;
  ciedsim_scenario* s = nullptr;
  REQUIRE(ciedsim_scenario_generate(&p, seed, &s) == CIEDSIM_OK);
  return s;
}

}  // namespace

TEST_CASE("c api: scenario handles") {
  ciedsim_scenario* s = small(9);
  ciedsim_scenario_info info;
  REQUIRE(ciedsim_scenario_info_get(s, &info) == CIEDSIM_OK);
  CHECK(info.width == 20);
  CHECK(info.threats == 3);
  CHECK(info.robots == 6);
  CHECK(info.seed == 9);

  char* text = nullptr;
  REQUIRE(ciedsim_scenario_to_json(s, &text) == CIEDSIM_OK);
  const std::string js = take(text);
  ciedsim_scenario* back = nullptr;
  REQUIRE(ciedsim_scenario_parse(js.data(), js.size(), &back) == CIEDSIM_OK);
  char* text2 = nullptr;
  REQUIRE(ciedsim_scenario_to_json(back, &text2) == CIEDSIM_OK);
  CHECK(take(text2) == js);

  const auto path = std::filesystem::temp_directory_path() / "ciedsim_capi_scenario.json";
  REQUIRE(ciedsim_scenario_save(s, path.c_str()) == CIEDSIM_OK);
  ciedsim_scenario* loaded = nullptr;
  REQUIRE(ciedsim_scenario_load(path.c_str(), &loaded) == CIEDSIM_OK);
  std::filesystem::remove(path);

  CHECK(ciedsim_scenario_set_mode(s, 7) == CIEDSIM_E_CONFIG);
  CHECK(ciedsim_scenario_parse("{", 1, &back) == CIEDSIM_E_PARSE);
  CHECK(std::string(ciedsim_last_error()).size() > 0);
  CHECK(ciedsim_scenario_load("/nonexistent/x.json", &back) == CIEDSIM_E_IO);
  CHECK(ciedsim_scenario_info_get(nullptr, &info) == CIEDSIM_E_ARGUMENT);
  CHECK(std::string(ciedsim_status_name(CIEDSIM_E_INVALID_COMMAND)) == "InvalidCommand");

  ciedsim_scenario_free(loaded);
  ciedsim_scenario_free(back);
  ciedsim_scenario_free(s);
  ciedsim_scenario_free(nullptr);
}

TEST_CASE("c api: engine lifecycle, state and replay") {
  ciedsim_scenario* s = small(10);
  ciedsim_run_options o;
  ciedsim_run_options_default(&o);
  o.max_ticks = 4000;
  ciedsim_engine* e = nullptr;
  REQUIRE(ciedsim_engine_create(s, &o, &e) == CIEDSIM_OK);
  REQUIRE(ciedsim_engine_step(e) == CIEDSIM_OK);
  CHECK(ciedsim_engine_tick(e) == 1);

  char* st = nullptr;
  REQUIRE(ciedsim_engine_state_json(e, &st) == CIEDSIM_OK);
  const json state = json::parse(take(st));
  CHECK(state["tick"] == 1);
  CHECK(state["robots"].size() == 6);
  CHECK(state["phase"] == "Explore");

  std::vector<double> heat(400);
  CHECK(ciedsim_engine_heatmap(e, heat.data(), heat.size()) == CIEDSIM_OK);
  CHECK(ciedsim_engine_heatmap(e, heat.data(), 3) == CIEDSIM_E_ARGUMENT);

  CHECK(ciedsim_engine_submit(e, "{\"type\":\"approve_phase\"}") == CIEDSIM_E_INVALID_COMMAND);
  CHECK(ciedsim_engine_submit(e, "{\"type\":\"warp\"}") == CIEDSIM_E_INVALID_COMMAND);
  CHECK(ciedsim_engine_submit(e, "not json") == CIEDSIM_E_INVALID_COMMAND);

  int outcome = -1;
  REQUIRE(ciedsim_engine_run(e, &outcome) == CIEDSIM_OK);
  CHECK(outcome == CIEDSIM_COMPLETE);

  char* rep = nullptr;
  REQUIRE(ciedsim_engine_report_json(e, &rep) == CIEDSIM_OK);
  const std::string report = take(rep);
  char* lines = nullptr;
  REQUIRE(ciedsim_engine_log_lines(e, 0, &lines) == CIEDSIM_OK);
  const std::string log = take(lines);
  CHECK(static_cast<size_t>(std::count(log.begin(), log.end(), '\n')) == ciedsim_engine_log_size(e));

  char* replayed = nullptr;
  REQUIRE(ciedsim_replay(log.data(), log.size(), &replayed) == CIEDSIM_OK);
  CHECK(json::parse(take(replayed)) == json::parse(report));
  CHECK(ciedsim_replay(log.data(), log.size() / 2, &replayed) == CIEDSIM_E_INCOMPATIBLE_LOG);

  char* table = nullptr;
  REQUIRE(ciedsim_compare(report.c_str(), report.c_str(), &table) == CIEDSIM_OK);
  CHECK(take(table).find("summary:") != std::string::npos);
  CHECK(ciedsim_compare(report.c_str(), "{}", &table) == CIEDSIM_E_INCOMPATIBLE_REPORTS);
  char* summary = nullptr;
  REQUIRE(ciedsim_report_summary(report.c_str(), &summary) == CIEDSIM_OK);
  CHECK_FALSE(take(summary).empty());

  // Same scenario, same hash.
  ciedsim_engine* e2 = nullptr;
  REQUIRE(ciedsim_engine_create(s, &o, &e2) == CIEDSIM_OK);
  REQUIRE(ciedsim_engine_run(e2, &outcome) == CIEDSIM_OK);
  CHECK(ciedsim_engine_log_hash(e2) == ciedsim_engine_log_hash(e));

  ciedsim_engine_free(e2);
  ciedsim_engine_free(e);
  ciedsim_scenario_free(s);
}

TEST_CASE("c api: fault schedules pass through") {
  ciedsim_scenario* s = small(11);
  ciedsim_run_options o;
  ciedsim_run_options_default(&o);
  o.faults_json = "[{\"type\":\"robot_failure\",\"robot\":77,\"tick\":3}]";
  ciedsim_engine* e = nullptr;
  CHECK(ciedsim_engine_create(s, &o, &e) == CIEDSIM_E_INVALID_SCHEDULE);
  CHECK(e == nullptr);
  o.faults_json = "[{\"type\":\"robot_failure\",\"robot\":4,\"tick\":3}]";
  REQUIRE(ciedsim_engine_create(s, &o, &e) == CIEDSIM_OK);
  int outcome = 0;
  REQUIRE(ciedsim_engine_run(e, &outcome) == CIEDSIM_OK);
  char* rep = nullptr;
  REQUIRE(ciedsim_engine_report_json(e, &rep) == CIEDSIM_OK);
  CHECK(json::parse(take(rep))["robots_failed"] == 1);
  ciedsim_engine_free(e);
  ciedsim_scenario_free(s);
}
