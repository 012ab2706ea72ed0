#include <cstdlib>
#include <cstring>
#include <string>

#include "ciedsim/ciedsim.h"
#include "ciedsim/engine.hpp"
#include "ciedsim/errors.hpp"
#include "json_util.hpp"

using namespace ciedsim;
using detail::json;

struct ciedsim_scenario {
  Scenario s;
};

struct ciedsim_engine {
  std::unique_ptr<Engine> e;
};

namespace {

thread_local std::string g_last_error;

ciedsim_status fail(ciedsim_status st, std::string msg) {
  g_last_error = std::move(msg);
  return st;
}

// Runs `f`, translating exceptions into status codes.
template <typename F>
ciedsim_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return CIEDSIM_OK;
  } catch (const Error& e) {
    return fail(static_cast<ciedsim_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(CIEDSIM_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CIEDSIM_E_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

ControllerMode to_mode(int m) {
  if (m == CIEDSIM_CENTRALIZED) return ControllerMode::centralized;
  if (m == CIEDSIM_MNS) return ControllerMode::mns;
  throw Error(ErrorCode::config, "unknown controller mode " + std::to_string(m));
}

#define REQUIRE_ARG(cond, what) \
  if (!(cond)) return fail(CIEDSIM_E_ARGUMENT, what)

OperatorCommand parse_command(const char* text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_command, std::string("command is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw Error(ErrorCode::invalid_command, "command needs a string 'type'");
  }
  const std::string type = j["type"].get<std::string>();
  const auto kind = command_kind_from_string(type);
  if (!kind) throw Error(ErrorCode::invalid_command, "unknown command '" + type + "'");
  OperatorCommand c;
  c.kind = *kind;
  auto field = [&](const char* name) -> std::uint64_t {
    if (!j.contains(name) || !j[name].is_number_unsigned()) {
      throw Error(ErrorCode::invalid_command, type + " needs an unsigned '" + name + "'");
    }
    return j[name].get<std::uint64_t>();
  };
  switch (c.kind) {
    case CommandKind::retask:
      c.robot = static_cast<NodeId>(field("robot"));
      c.task = field("task");
      break;
    case CommandKind::confirm_candidate:
    case CommandKind::dismiss_candidate:
      c.candidate = static_cast<std::uint32_t>(field("candidate"));
      break;
    default:
      break;
  }
  return c;
}

std::string state_json(const Engine& e) {
  nlohmann::ordered_json j;
  const Controller& a = e.authority();
  const WorldGrid& g = e.scenario().grid;
  j["tick"] = e.tick();
  j["phase"] = to_string(a.phase());
  j["phase_index"] = static_cast<int>(a.phase());
  j["proposal"] = a.proposal() ? nlohmann::ordered_json(to_string(*a.proposal())) : nlohmann::ordered_json(nullptr);
  j["paused"] = e.paused();
  j["outcome"] = to_string(e.outcome());
  j["authority"] = a.self();
  j["epoch"] = e.mns().epoch;
  j["width"] = g.width();
  j["height"] = g.height();
  j["covered"] = a.knowledge().covered_count();
  auto robots = nlohmann::ordered_json::array();
  for (const RobotAgent& r : e.robots()) {
    const RobotState& s = r.state();
    nlohmann::ordered_json o;
    o["id"] = s.id;
    o["kind"] = to_string(s.kind);
    o["x"] = s.pose.x;
    o["y"] = s.pose.y;
    o["battery"] = s.battery;
    o["health"] = s.health == Health::ok ? "ok" : "failed";
    o["task"] = r.task() ? nlohmann::ordered_json(r.task()->id) : nlohmann::ordered_json(nullptr);
    o["task_kind"] = r.task() ? nlohmann::ordered_json(to_string(r.task()->kind)) : nlohmann::ordered_json(nullptr);
    robots.push_back(std::move(o));
  }
  j["robots"] = std::move(robots);
  auto cands = nlohmann::ordered_json::array();
  for (const Candidate& c : a.candidates()) {
    nlohmann::ordered_json o;
    o["id"] = c.id;
    o["cell"] = c.cell;
    o["x"] = g.x_of(c.cell);
    o["y"] = g.y_of(c.cell);
    o["status"] = to_string(c.status);
    o["class"] = to_string(c.best_class());
    o["posterior"] = c.posterior;
    o["low_confidence"] = c.low_confidence;
    cands.push_back(std::move(o));
  }
  j["candidates"] = std::move(cands);
  auto tasks = nlohmann::ordered_json::array();
  for (const auto& [id, t] : a.tasks()) {
    nlohmann::ordered_json o;
    o["id"] = id;
    o["kind"] = to_string(t.kind);
    o["state"] = to_string(t.state);
    o["robot"] = t.assigned_robot ? nlohmann::ordered_json(*t.assigned_robot) : nlohmann::ordered_json(nullptr);
    o["priority"] = t.priority;
    tasks.push_back(std::move(o));
  }
  j["tasks"] = std::move(tasks);
  return j.dump();
}

}  // namespace

extern "C" {

const char* ciedsim_version(void) { return "1.0.0"; }

const char* ciedsim_last_error(void) { return g_last_error.c_str(); }

const char* ciedsim_status_name(ciedsim_status status) {
  if (status == CIEDSIM_E_ARGUMENT) return "invalid_argument";
  if (status == CIEDSIM_E_INTERNAL) return "internal";
  if (status < 0 || status > CIEDSIM_E_IO) return "unknown";
  return error_code_name(static_cast<ErrorCode>(status));
}

void ciedsim_string_free(char* s) { std::free(s); }

void ciedsim_gen_params_default(ciedsim_gen_params* p) {
  if (!p) return;
  const ScenarioParams d;
  p->width = d.width;
  p->height = d.height;
  p->threats = d.threat_count;
  p->indoor_fraction = d.indoor_fraction;
  p->obstacle_density = d.obstacle_density;
  p->mode = CIEDSIM_CENTRALIZED;
}

void ciedsim_run_options_default(ciedsim_run_options* o) {
  if (!o) return;
  o->max_ticks = RunOptions{}.max_ticks;
  o->supervised = 0;
  o->faults_json = nullptr;
}

ciedsim_status ciedsim_scenario_generate(const ciedsim_gen_params* params, uint64_t seed, ciedsim_scenario** out) {
  REQUIRE_ARG(params && out, "null argument");
  *out = nullptr;
  return guard([&] {
    ScenarioParams p;
    p.width = params->width;
    p.height = params->height;
    p.threat_count = params->threats;
    p.indoor_fraction = params->indoor_fraction;
    p.obstacle_density = params->obstacle_density;
    p.controller_mode = to_mode(params->mode);
    *out = new ciedsim_scenario{generate_scenario(p, seed)};
  });
}

ciedsim_status ciedsim_scenario_parse(const char* text, size_t len, ciedsim_scenario** out) {
  REQUIRE_ARG(text && out, "null argument");
  *out = nullptr;
  return guard([&] { *out = new ciedsim_scenario{parse_scenario(std::string_view(text, len))}; });
}

ciedsim_status ciedsim_scenario_load(const char* path, ciedsim_scenario** out) {
  REQUIRE_ARG(path && out, "null argument");
  *out = nullptr;
  return guard([&] { *out = new ciedsim_scenario{load_scenario(path)}; });
}

ciedsim_status ciedsim_scenario_save(const ciedsim_scenario* s, const char* path) {
  REQUIRE_ARG(s && path, "null argument");
  return guard([&] { save_scenario(s->s, path); });
}

ciedsim_status ciedsim_scenario_to_json(const ciedsim_scenario* s, char** out) {
  REQUIRE_ARG(s && out, "null argument");
  return guard([&] { *out = dup(serialize_scenario(s->s)); });
}

ciedsim_status ciedsim_scenario_info_get(const ciedsim_scenario* s, ciedsim_scenario_info* out) {
  REQUIRE_ARG(s && out, "null argument");
  return guard([&] {
    out->seed = s->s.seed;
    out->width = s->s.grid.width();
    out->height = s->s.grid.height();
    out->mode = s->s.controller_mode == ControllerMode::mns ? CIEDSIM_MNS : CIEDSIM_CENTRALIZED;
    out->threats = static_cast<uint32_t>(s->s.threats.size());
    out->robots = 0;
    for (RobotKind k : kAllRobotKinds) out->robots += static_cast<uint32_t>(s->s.fleet.kind(k).count);
    out->reachable_cells = make_mission_context(s->s, false)->coverage_total;
  });
}

ciedsim_status ciedsim_scenario_set_seed(ciedsim_scenario* s, uint64_t seed) {
  REQUIRE_ARG(s, "null argument");
  s->s.seed = seed;
  return CIEDSIM_OK;
}

ciedsim_status ciedsim_scenario_set_mode(ciedsim_scenario* s, int mode) {
  REQUIRE_ARG(s, "null argument");
  return guard([&] { s->s.controller_mode = to_mode(mode); });
}

void ciedsim_scenario_free(ciedsim_scenario* s) { delete s; }

ciedsim_status ciedsim_engine_create(const ciedsim_scenario* s, const ciedsim_run_options* options,
                                     ciedsim_engine** out) {
  REQUIRE_ARG(s && out, "null argument");
  *out = nullptr;
  return guard([&] {
    RunOptions o;
    if (options) {
      o.max_ticks = options->max_ticks;
      o.supervised = options->supervised != 0;
      if (options->faults_json) o.faults = parse_fault_schedule(options->faults_json, s->s);
    }
    *out = new ciedsim_engine{std::make_unique<Engine>(s->s, std::move(o))};
  });
}

void ciedsim_engine_free(ciedsim_engine* e) { delete e; }

ciedsim_status ciedsim_engine_step(ciedsim_engine* e) {
  REQUIRE_ARG(e, "null argument");
  return guard([&] { e->e->step(); });
}

ciedsim_status ciedsim_engine_run(ciedsim_engine* e, int* outcome) {
  REQUIRE_ARG(e, "null argument");
  return guard([&] {
    const RunOutcome r = e->e->run();
    if (outcome) *outcome = static_cast<int>(r);
  });
}

uint64_t ciedsim_engine_tick(const ciedsim_engine* e) { return e ? e->e->tick() : 0; }
int ciedsim_engine_outcome(const ciedsim_engine* e) { return e ? static_cast<int>(e->e->outcome()) : 0; }
int ciedsim_engine_paused(const ciedsim_engine* e) { return e && e->e->paused() ? 1 : 0; }
int ciedsim_engine_phase(const ciedsim_engine* e) { return e ? static_cast<int>(e->e->phase()) : 0; }

ciedsim_status ciedsim_engine_submit(ciedsim_engine* e, const char* command_json) {
  REQUIRE_ARG(e && command_json, "null argument");
  return guard([&] { e->e->submit(parse_command(command_json)); });
}

ciedsim_status ciedsim_engine_state_json(const ciedsim_engine* e, char** out) {
  REQUIRE_ARG(e && out, "null argument");
  return guard([&] { *out = dup(state_json(*e->e)); });
}

ciedsim_status ciedsim_engine_heatmap(const ciedsim_engine* e, double* log_odds, size_t len) {
  REQUIRE_ARG(e && log_odds, "null argument");
  const ThreatHeatmap& hm = e->e->authority().knowledge().heatmap();
  REQUIRE_ARG(len == hm.size(), "heatmap buffer must hold width*height values");
  for (CellIndex c = 0; c < hm.size(); ++c) log_odds[c] = hm.log_odds(c).value();
  return CIEDSIM_OK;
}

ciedsim_status ciedsim_engine_heatmap_csv(const ciedsim_engine* e, char** out) {
  REQUIRE_ARG(e && out, "null argument");
  return guard([&] { *out = dup(heatmap_csv(e->e->authority().knowledge().heatmap(), e->e->scenario().grid)); });
}

size_t ciedsim_engine_log_size(const ciedsim_engine* e) { return e ? e->e->log().lines().size() : 0; }

ciedsim_status ciedsim_engine_log_lines(const ciedsim_engine* e, size_t from, char** out) {
  REQUIRE_ARG(e && out, "null argument");
  return guard([&] {
    const auto& lines = e->e->log().lines();
    std::string s;
    for (size_t i = from; i < lines.size(); ++i) {
      s += lines[i];
      s += '\n';
    }
    *out = dup(s);
  });
}

uint64_t ciedsim_engine_log_hash(const ciedsim_engine* e) { return e ? e->e->log().hash() : 0; }

ciedsim_status ciedsim_engine_report_json(const ciedsim_engine* e, char** out) {
  REQUIRE_ARG(e && out, "null argument");
  return guard([&] { *out = dup(report_to_json(e->e->report())); });
}

ciedsim_status ciedsim_replay(const char* log_text, size_t len, char** report_json) {
  REQUIRE_ARG(log_text && report_json, "null argument");
  return guard([&] { *report_json = dup(report_to_json(replay(std::string_view(log_text, len)))); });
}

ciedsim_status ciedsim_report_summary(const char* report, char** out) {
  REQUIRE_ARG(report && out, "null argument");
  return guard([&] { *out = dup(report_summary(report_from_json(report))); });
}

ciedsim_status ciedsim_compare(const char* report_a, const char* report_b, char** table) {
  REQUIRE_ARG(report_a && report_b && table, "null argument");
  return guard([&] {
    *table = dup(format_comparison(compare_reports(report_from_json(report_a), report_from_json(report_b))));
  });
}

}  // extern "C"
