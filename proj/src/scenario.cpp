#include "ciedsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ciedsim/errors.hpp"
#include "ciedsim/rng.hpp"
#include "json_util.hpp"

namespace ciedsim {

using detail::json;
using detail::Reader;

void validate(const MissionConfig& c) {
  auto unit_open = [](double v) { return v > 0.0 && v < 1.0; };
  if (!(c.coverage_gate > 0.0 && c.coverage_gate <= 1.0)) throw Error(ErrorCode::config, "coverage_gate must lie in (0,1]");
  if (!unit_open(c.candidate_threshold)) throw Error(ErrorCode::config, "candidate_threshold must lie in (0,1)");
  if (!unit_open(c.classification_gate)) throw Error(ErrorCode::config, "classification_gate must lie in (0,1)");
  if (!unit_open(c.emi_hot_threshold)) throw Error(ErrorCode::config, "emi_hot_threshold must lie in (0,1)");
  if (c.tile_size < 1) throw Error(ErrorCode::config, "tile_size must be >= 1");
  if (!(c.dt > 0.0)) throw Error(ErrorCode::config, "dt must be > 0");
  if (c.status_timeout < 1 || c.retransmit_interval < 1 || c.coverage_log_interval < 1) {
    throw Error(ErrorCode::config, "mission intervals must be >= 1");
  }
  if (c.max_confirm_attempts < 1) throw Error(ErrorCode::config, "max_confirm_attempts must be >= 1");
}

void validate(const Scenario& s) {
  validate(s.fleet);
  validate(s.net);
  validate(s.mission);
  if (!s.grid.in_bounds(s.deployment_cell)) throw Error(ErrorCode::config, "deployment_cell out of bounds");
  std::set<std::uint32_t> ids;
  std::set<CellIndex> cells;
  for (const Threat& t : s.threats) {
    const std::string who = "threat " + std::to_string(t.id) + ": ";
    if (!ids.insert(t.id).second) throw Error(ErrorCode::config, who + "duplicate id");
    if (!s.grid.in_bounds(t.cell)) throw Error(ErrorCode::config, who + "cell " + std::to_string(t.cell) + " out of bounds");
    if (s.grid.at(t.cell).obstacle) throw Error(ErrorCode::config, who + "placed on an obstacle cell");
    if (!cells.insert(t.cell).second) throw Error(ErrorCode::config, who + "shares a cell with another threat");
    if (!(t.depth >= 0.0)) throw Error(ErrorCode::config, who + "depth must be >= 0");
    if (!(t.metal_fraction >= 0.0 && t.metal_fraction <= 1.0)) {
      throw Error(ErrorCode::config, who + "metal_fraction outside [0,1]");
    }
    if (!(t.container_density >= 0.0 && t.container_density <= 1.0)) {
      throw Error(ErrorCode::config, who + "container_density outside [0,1]");
    }
  }
}

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double sample_channel(const ChannelProfile& p, RngStream& rng) {
  const double mean = rng.bernoulli(p.weight_a) ? p.mean_a : p.mean_b;
  return clamp01(mean + p.sd * rng.normal());
}

Threat sample_threat(std::uint32_t id, CellIndex cell, const ThreatModel& tm, RngStream& rng) {
  double total = 0.0;
  for (const ClassProfile& c : tm.classes) total += c.weight;
  double u = rng.uniform() * total;
  std::size_t cls = kThreatClassCount - 1;
  for (std::size_t i = 0; i < kThreatClassCount; ++i) {
    if (u < tm.classes[i].weight) {
      cls = i;
      break;
    }
    u -= tm.classes[i].weight;
  }
  const ClassProfile& p = tm.classes[cls];
  Threat t;
  t.id = id;
  t.cell = cell;
  t.cls = static_cast<ThreatClass>(cls);
  t.charge = rng.bernoulli(p.p_high_explosive) ? Charge::high_explosive : Charge::low_explosive;
  t.initiator = static_cast<Initiator>(rng.below(3));
  t.metal_fraction = sample_channel(p.metal, rng);
  t.container_density = sample_channel(p.density, rng);
  if (rng.bernoulli(p.p_surface)) {
    t.depth = 0.0;
  } else {
    t.depth = tm.buried_depth_min + rng.uniform() * (tm.buried_depth_max - tm.buried_depth_min);
  }
  return t;
}

bool near_deployment(const WorldGrid& g, CellIndex deploy, int x, int y, int margin) {
  return std::abs(x - g.x_of(deploy)) <= margin && std::abs(y - g.y_of(deploy)) <= margin;
}

void place_buildings(WorldGrid& grid, const ScenarioParams& params, CellIndex deploy, RngStream& rng) {
  const std::size_t target = static_cast<std::size_t>(std::llround(params.indoor_fraction * grid.size()));
  std::size_t indoor = 0;
  constexpr int kMinSide = 5;
  if (grid.width() < kMinSide || grid.height() < kMinSide) return;
  for (int attempt = 0; attempt < 400 && indoor < target; ++attempt) {
    const int w = std::min(grid.width(), kMinSide + static_cast<int>(rng.below(8)));
    const int h = std::min(grid.height(), kMinSide + static_cast<int>(rng.below(8)));
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.width() - w + 1)));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height() - h + 1)));
    const int side = static_cast<int>(rng.below(4));
    bool clash = false;
    for (int y = y0 - 1; y <= y0 + h && !clash; ++y) {
      for (int x = x0 - 1; x <= x0 + w && !clash; ++x) {
        if (!grid.in_bounds(x, y)) continue;
        clash = grid.at(grid.index(x, y)).indoor || near_deployment(grid, deploy, x, y, 2);
      }
    }
    if (clash) continue;
    // Door in the middle of one wall.
    int door_x = x0 + w / 2;
    int door_y = y0 + h / 2;
    switch (side) {
      case 0: door_y = y0; break;
      case 1: door_y = y0 + h - 1; break;
      case 2: door_x = x0; break;
      default: door_x = x0 + w - 1; break;
    }
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) {
        Cell& c = grid.at(grid.index(x, y));
        c.indoor = true;
        c.terrain = Terrain::concrete;
        const bool wall = x == x0 || y == y0 || x == x0 + w - 1 || y == y0 + h - 1;
        c.obstacle = wall && !(x == door_x && y == door_y);
        ++indoor;
      }
    }
  }
}

}  // namespace

Scenario generate_scenario(const ScenarioParams& params, std::uint64_t seed) {
  if (params.width < 1 || params.height < 1 || params.width > 4096 || params.height > 4096) {
    throw Error(ErrorCode::config, "grid size must lie in 1..4096");
  }
  if (params.threat_count < 0) throw Error(ErrorCode::config, "threat_count must be >= 0");
  if (!(params.indoor_fraction >= 0.0 && params.indoor_fraction <= 0.9)) {
    throw Error(ErrorCode::config, "indoor_fraction must lie in [0, 0.9]");
  }
  if (!(params.obstacle_density >= 0.0 && params.obstacle_density <= 1.0)) {
    throw Error(ErrorCode::config, "obstacle_density must lie in [0, 1]");
  }

  RngStream rng = rng_stream(seed, 0, StreamPurpose::placement);
  WorldGrid grid(params.width, params.height, 1.0);
  const CellIndex deploy = 0;

  constexpr int kBlock = 8;
  for (int by = 0; by < params.height; by += kBlock) {
    for (int bx = 0; bx < params.width; bx += kBlock) {
      const auto terrain = static_cast<Terrain>(rng.below(kTerrainCount));
      for (int y = by; y < std::min(by + kBlock, params.height); ++y) {
        for (int x = bx; x < std::min(bx + kBlock, params.width); ++x) grid.at(grid.index(x, y)).terrain = terrain;
      }
    }
  }

  place_buildings(grid, params, deploy, rng);

  for (CellIndex c = 0; c < grid.size(); ++c) {
    Cell& cell = grid.at(c);
    if (cell.indoor) continue;
    const bool hit = rng.bernoulli(params.obstacle_density);
    const bool keep_clear =
        params.clear_deployment_zone && near_deployment(grid, deploy, grid.x_of(c), grid.y_of(c), 1);
    cell.obstacle = hit && !keep_clear;
  }
  grid.apply_priors(params.terrain_priors);

  std::vector<CellIndex> legal;
  const auto reach = reachable_mask(grid, deploy, RobotKind::sugv);
  for (CellIndex c = 0; c < grid.size(); ++c) {
    if (reach[c] && !near_deployment(grid, deploy, grid.x_of(c), grid.y_of(c), 1)) legal.push_back(c);
  }
  if (static_cast<std::size_t>(params.threat_count) > legal.size()) {
    throw Error(ErrorCode::infeasible_placement, "cannot place " + std::to_string(params.threat_count) +
                                                     " threats on " + std::to_string(legal.size()) +
                                                     " reachable free cells");
  }

  Scenario s;
  for (int i = 0; i < params.threat_count; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng.below(legal.size() - static_cast<std::size_t>(i));
    std::swap(legal[static_cast<std::size_t>(i)], legal[j]);
    s.threats.push_back(sample_threat(static_cast<std::uint32_t>(i + 1), legal[static_cast<std::size_t>(i)],
                                      params.threat_model, rng));
  }
  s.grid = std::move(grid);
  s.fleet = params.fleet;
  s.net = params.net;
  s.net.command_centre_pos = s.grid.center(deploy);
  s.mission = params.mission;
  s.threat_model = params.threat_model;
  s.terrain_priors = params.terrain_priors;
  s.seed = seed;
  s.controller_mode = params.controller_mode;
  s.deployment_cell = deploy;
  validate(s);
  return s;
}

std::optional<Threat> ground_truth_at(const Scenario& scenario, CellIndex cell) {
  if (!scenario.grid.in_bounds(cell)) throw Error(ErrorCode::out_of_bounds, "cell out of bounds");
  for (const Threat& t : scenario.threats) {
    if (t.cell == cell) return t;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kTerrainCodes[] = {'S', 'G', 'C', 'A', 'K'};

std::string encode_terrain(const WorldGrid& g) {
  std::string out;
  const auto cells = g.cells();
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    while (j < cells.size() && cells[j].terrain == cells[i].terrain) ++j;
    out += std::to_string(j - i);
    out += kTerrainCodes[static_cast<std::size_t>(cells[i].terrain)];
    i = j;
  }
  return out;
}

// Alternating run lengths starting with a run of `false`.
template <typename Pred>
json encode_flags(const WorldGrid& g, Pred pred) {
  json runs = json::array();
  bool cur = false;
  std::size_t run = 0;
  for (const Cell& c : g.cells()) {
    if (pred(c) != cur) {
      runs.push_back(run);
      cur = !cur;
      run = 0;
    }
    ++run;
  }
  runs.push_back(run);
  return runs;
}

json profile_json(const ChannelProfile& p) {
  return {{"weight_a", p.weight_a}, {"mean_a", p.mean_a}, {"mean_b", p.mean_b}, {"sd", p.sd}};
}

ChannelProfile read_profile(const Reader& r) {
  return {r.get<double>("weight_a"), r.get<double>("mean_a"), r.get<double>("mean_b"), r.get<double>("sd")};
}

json threat_model_json(const ThreatModel& tm) {
  json classes = json::object();
  for (std::size_t i = 0; i < kThreatClassCount; ++i) {
    const ClassProfile& p = tm.classes[i];
    classes[std::string(to_string(static_cast<ThreatClass>(i)))] = {
        {"weight", p.weight},       {"p_high_explosive", p.p_high_explosive}, {"p_surface", p.p_surface},
        {"metal", profile_json(p.metal)}, {"density", profile_json(p.density)}};
  }
  return {{"classes", classes},
          {"buried_depth_min", tm.buried_depth_min},
          {"buried_depth_max", tm.buried_depth_max},
          {"chem_high", tm.chem_high},
          {"chem_low", tm.chem_low},
          {"chem_sd", tm.chem_sd},
          {"visual_surface", tm.visual_surface},
          {"visual_buried", tm.visual_buried},
          {"visual_sd", tm.visual_sd},
          {"clutter_means", tm.clutter_means}};
}

ThreatModel read_threat_model(const Reader& r) {
  ThreatModel tm = ThreatModel::defaults();
  if (r.has("classes")) {
    const Reader classes = r.child("classes");
    for (std::size_t i = 0; i < kThreatClassCount; ++i) {
      const std::string name(to_string(static_cast<ThreatClass>(i)));
      if (!classes.has(name.c_str())) continue;
      const Reader c = classes.child(name.c_str());
      ClassProfile& p = tm.classes[i];
      p.weight = c.get_or("weight", p.weight);
      p.p_high_explosive = c.get_or("p_high_explosive", p.p_high_explosive);
      p.p_surface = c.get_or("p_surface", p.p_surface);
      if (c.has("metal")) p.metal = read_profile(c.child("metal"));
      if (c.has("density")) p.density = read_profile(c.child("density"));
    }
  }
  tm.buried_depth_min = r.get_or("buried_depth_min", tm.buried_depth_min);
  tm.buried_depth_max = r.get_or("buried_depth_max", tm.buried_depth_max);
  tm.chem_high = r.get_or("chem_high", tm.chem_high);
  tm.chem_low = r.get_or("chem_low", tm.chem_low);
  tm.chem_sd = r.get_or("chem_sd", tm.chem_sd);
  tm.visual_surface = r.get_or("visual_surface", tm.visual_surface);
  tm.visual_buried = r.get_or("visual_buried", tm.visual_buried);
  tm.visual_sd = r.get_or("visual_sd", tm.visual_sd);
  if (r.has("clutter_means")) {
    const json& cm = r.raw().at("clutter_means");
    if (!cm.is_array() || cm.size() != kChannelCount) r.fail("clutter_means", "expected 4 numbers");
    for (std::size_t i = 0; i < kChannelCount; ++i) {
      if (!cm[i].is_number()) r.fail("clutter_means", "expected 4 numbers");
      tm.clutter_means[i] = cm[i].get<double>();
    }
  }
  return tm;
}

json fleet_json(const FleetConfig& f) {
  json kinds = json::object();
  for (RobotKind k : kAllRobotKinds) {
    const KindConfig& c = f.kind(k);
    kinds[std::string(to_string(k))] = {{"count", c.count}, {"speed", c.speed}, {"battery", c.battery_capacity}};
  }
  json sensors = json::object();
  for (const auto& m : f.sensors.models) {
    if (!m) continue;
    sensors[std::string(to_string(m->kind))] = {
        {"footprint_radius", m->footprint_radius}, {"max_depth", m->max_depth},
        {"p_det_base", m->p_det_base},             {"depth_decay", m->depth_decay},
        {"p_fp", m->p_fp},                         {"feature_noise", m->feature_noise},
        {"surface_cue", m->surface_cue}};
  }
  return {{"kinds", kinds},
          {"sensors", sensors},
          {"arm_dwell", f.arm_dwell},
          {"pose_noise", f.pose_noise},
          {"pose_sigma_outdoor", f.pose_sigma_outdoor},
          {"pose_sigma_indoor", f.pose_sigma_indoor},
          {"clamp_degenerate", f.clamp_degenerate},
          {"clamp_eps", f.clamp_eps},
          {"generative_match", f.generative_match},
          {"return_reserve", f.return_reserve}};
}

FleetConfig read_fleet(const Reader& r) {
  FleetConfig f;
  if (r.has("kinds")) {
    const Reader kinds = r.child("kinds");
    for (RobotKind k : kAllRobotKinds) {
      const std::string name(to_string(k));
      if (!kinds.has(name.c_str())) continue;
      const Reader c = kinds.child(name.c_str());
      KindConfig& kc = f.kind(k);
      kc.count = c.get_or("count", kc.count);
      kc.speed = c.get_or("speed", kc.speed);
      kc.battery_capacity = c.get_or("battery", kc.battery_capacity);
    }
  }
  if (r.has("sensors")) {
    const Reader sensors = r.child("sensors");
    for (const auto& [name, _] : sensors.raw().items()) {
      const auto kind = sensor_kind_from_string(name);
      if (!kind || *kind == SensorKind::lidar_nav) sensors.fail(name.c_str(), "unknown detector kind");
      const Reader c = sensors.child(name.c_str());
      SensorModel m = f.sensors.find(*kind) ? *f.sensors.find(*kind) : SensorModel{};
      m.kind = *kind;
      m.footprint_radius = c.get_or("footprint_radius", m.footprint_radius);
      m.max_depth = c.get_or("max_depth", m.max_depth);
      m.p_det_base = c.get_or("p_det_base", m.p_det_base);
      m.depth_decay = c.get_or("depth_decay", m.depth_decay);
      m.p_fp = c.get_or("p_fp", m.p_fp);
      m.feature_noise = c.get_or("feature_noise", m.feature_noise);
      m.surface_cue = c.get_or("surface_cue", m.surface_cue);
      f.sensors.models[static_cast<std::size_t>(*kind)] = m;
    }
  }
  f.arm_dwell = r.get_or("arm_dwell", f.arm_dwell);
  f.pose_noise = r.get_or("pose_noise", f.pose_noise);
  f.pose_sigma_outdoor = r.get_or("pose_sigma_outdoor", f.pose_sigma_outdoor);
  f.pose_sigma_indoor = r.get_or("pose_sigma_indoor", f.pose_sigma_indoor);
  f.clamp_degenerate = r.get_or("clamp_degenerate", f.clamp_degenerate);
  f.clamp_eps = r.get_or("clamp_eps", f.clamp_eps);
  f.generative_match = r.get_or("generative_match", f.generative_match);
  f.return_reserve = r.get_or("return_reserve", f.return_reserve);
  return f;
}

json net_json(const NetConfig& n) {
  return {{"radio_range", n.radio_range},
          {"p_link_loss", n.p_link_loss},
          {"base_latency", n.base_latency},
          {"command_centre_pos", {n.command_centre_pos.x, n.command_centre_pos.y}},
          {"default_ttl", n.default_ttl}};
}

NetConfig read_net(const Reader& r) {
  NetConfig n;
  n.radio_range = r.get_or("radio_range", n.radio_range);
  n.p_link_loss = r.get_or("p_link_loss", n.p_link_loss);
  n.base_latency = r.get_or("base_latency", n.base_latency);
  n.default_ttl = r.get_or("default_ttl", n.default_ttl);
  if (r.has("command_centre_pos")) {
    const json& p = r.raw().at("command_centre_pos");
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      r.fail("command_centre_pos", "expected [x, y]");
    }
    n.command_centre_pos = {p[0].get<double>(), p[1].get<double>()};
  }
  return n;
}

json mission_json(const MissionConfig& m) {
  return {{"coverage_gate", m.coverage_gate},
          {"candidate_threshold", m.candidate_threshold},
          {"classification_gate", m.classification_gate},
          {"emi_hot_threshold", m.emi_hot_threshold},
          {"tile_size", m.tile_size},
          {"priority_weights", {{"vision", m.weights.vision}, {"terrain", m.weights.terrain}, {"posterior", m.weights.posterior}}},
          {"strict_phases", m.strict_phases},
          {"status_timeout", m.status_timeout},
          {"max_confirm_attempts", m.max_confirm_attempts},
          {"retransmit_interval", m.retransmit_interval},
          {"coverage_log_interval", m.coverage_log_interval},
          {"dt", m.dt}};
}

MissionConfig read_mission(const Reader& r) {
  MissionConfig m;
  m.coverage_gate = r.get_or("coverage_gate", m.coverage_gate);
  m.candidate_threshold = r.get_or("candidate_threshold", m.candidate_threshold);
  m.classification_gate = r.get_or("classification_gate", m.classification_gate);
  m.emi_hot_threshold = r.get_or("emi_hot_threshold", m.emi_hot_threshold);
  m.tile_size = r.get_or("tile_size", m.tile_size);
  if (r.has("priority_weights")) {
    const Reader w = r.child("priority_weights");
    m.weights.vision = w.get_or("vision", m.weights.vision);
    m.weights.terrain = w.get_or("terrain", m.weights.terrain);
    m.weights.posterior = w.get_or("posterior", m.weights.posterior);
  }
  m.strict_phases = r.get_or("strict_phases", m.strict_phases);
  m.status_timeout = r.get_or("status_timeout", m.status_timeout);
  m.max_confirm_attempts = r.get_or("max_confirm_attempts", m.max_confirm_attempts);
  m.retransmit_interval = r.get_or("retransmit_interval", m.retransmit_interval);
  m.coverage_log_interval = r.get_or("coverage_log_interval", m.coverage_log_interval);
  m.dt = r.get_or("dt", m.dt);
  return m;
}

template <typename E, typename F>
E read_enum(const Reader& r, const char* key, F from_string) {
  const std::string s = r.get<std::string>(key);
  const auto v = from_string(s);
  if (!v) r.fail(key, "unknown value '" + s + "'");
  return *v;
}

std::vector<std::size_t> read_runs(const Reader& grid, const char* key, std::size_t total) {
  const json& a = grid.raw().contains(key) ? grid.raw().at(key) : json();
  if (!a.is_array()) grid.fail(key, "expected array of run lengths");
  std::vector<std::size_t> runs;
  std::size_t sum = 0;
  for (const json& v : a) {
    if (!v.is_number_unsigned()) grid.fail(key, "run lengths must be non-negative integers");
    runs.push_back(v.get<std::size_t>());
    sum += runs.back();
  }
  if (sum != total) grid.fail(key, "runs cover " + std::to_string(sum) + " cells, expected " + std::to_string(total));
  return runs;
}

}  // namespace

std::string serialize_scenario(const Scenario& s) {
  json threats = json::array();
  for (const Threat& t : s.threats) {
    threats.push_back({{"id", t.id},
                       {"class", to_string(t.cls)},
                       {"charge", to_string(t.charge)},
                       {"initiator", to_string(t.initiator)},
                       {"metal_fraction", t.metal_fraction},
                       {"container_density", t.container_density},
                       {"depth", t.depth},
                       {"cell", t.cell}});
  }
  json priors = json::object();
  for (std::size_t i = 0; i < kTerrainCount; ++i) {
    priors[std::string(to_string(static_cast<Terrain>(i)))] = s.terrain_priors.by_terrain[i];
  }
  json doc = {
      {"format_version", kScenarioFormatVersion},
      {"seed", s.seed},
      {"controller_mode", to_string(s.controller_mode)},
      {"grid",
       {{"width", s.grid.width()},
        {"height", s.grid.height()},
        {"cell_size", s.grid.cell_size()},
        {"deployment_cell", s.deployment_cell},
        {"terrain_rle", encode_terrain(s.grid)},
        {"indoor_runs", encode_flags(s.grid, [](const Cell& c) { return c.indoor; })},
        {"obstacle_runs", encode_flags(s.grid, [](const Cell& c) { return c.obstacle; })},
        {"terrain_priors", priors}}},
      {"threats", threats},
      {"threat_model", threat_model_json(s.threat_model)},
      {"fleet_config", fleet_json(s.fleet)},
      {"net_config", net_json(s.net)},
      {"mission_config", mission_json(s.mission)},
  };
  return doc.dump(1) + "\n";
}

Scenario parse_scenario(std::string_view text) {
  const json doc = detail::parse_json_text(text, "scenario");
  if (!doc.is_object()) throw Error(ErrorCode::parse, "scenario: top level must be an object");
  const Reader root(doc, "");
  const int version = root.get<int>("format_version");
  if (version != kScenarioFormatVersion) {
    throw Error(ErrorCode::version_mismatch, "scenario format_version " + std::to_string(version) +
                                                 " is not supported (expected " +
                                                 std::to_string(kScenarioFormatVersion) + ")");
  }

  Scenario s;
  s.seed = root.get<std::uint64_t>("seed");
  s.controller_mode = root.has("controller_mode")
                          ? read_enum<ControllerMode>(root, "controller_mode", controller_mode_from_string)
                          : ControllerMode::centralized;

  const Reader g = root.child("grid");
  const int width = g.get<int>("width");
  const int height = g.get<int>("height");
  if (width < 1 || height < 1) g.fail("width", "grid dimensions must be >= 1");
  const double cell_size = g.get_or("cell_size", 1.0);
  const std::size_t total = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);

  if (g.has("terrain_priors")) {
    const Reader p = g.child("terrain_priors");
    for (std::size_t i = 0; i < kTerrainCount; ++i) {
      const std::string name(to_string(static_cast<Terrain>(i)));
      s.terrain_priors.by_terrain[i] = p.get_or(name.c_str(), s.terrain_priors.by_terrain[i]);
    }
  }

  std::vector<Cell> cells;
  cells.reserve(total);
  const std::string rle = g.get<std::string>("terrain_rle");
  std::size_t count = 0;
  bool have_digits = false;
  for (char ch : rle) {
    if (ch >= '0' && ch <= '9') {
      count = count * 10 + static_cast<std::size_t>(ch - '0');
      have_digits = true;
      if (count > total) g.fail("terrain_rle", "run longer than the grid");
      continue;
    }
    const char* hit = std::find(std::begin(kTerrainCodes), std::end(kTerrainCodes), ch);
    if (hit == std::end(kTerrainCodes) || !have_digits) {
      g.fail("terrain_rle", std::string("bad terrain code '") + ch + "'");
    }
    Cell c;
    c.terrain = static_cast<Terrain>(hit - std::begin(kTerrainCodes));
    if (cells.size() + count > total) g.fail("terrain_rle", "runs exceed width*height");
    cells.insert(cells.end(), count, c);
    count = 0;
    have_digits = false;
  }
  if (have_digits || cells.size() != total) {
    g.fail("terrain_rle", "runs cover " + std::to_string(cells.size()) + " cells, expected " + std::to_string(total));
  }
  auto apply_runs = [&](const char* key, auto setter) {
    const auto runs = read_runs(g, key, total);
    std::size_t i = 0;
    bool flag = false;
    for (std::size_t run : runs) {
      for (std::size_t k = 0; k < run; ++k) setter(cells[i++], flag);
      flag = !flag;
    }
  };
  apply_runs("indoor_runs", [](Cell& c, bool f) { c.indoor = f; });
  apply_runs("obstacle_runs", [](Cell& c, bool f) { c.obstacle = f; });
  for (Cell& c : cells) c.terrain_prior = s.terrain_priors[c.terrain];
  for (const Cell& c : cells) {
    if (!(c.terrain_prior >= 0.0 && c.terrain_prior <= 1.0)) g.fail("terrain_priors", "prior outside [0,1]");
  }
  s.grid = WorldGrid(width, height, cell_size, std::move(cells));
  s.deployment_cell = g.get_or<CellIndex>("deployment_cell", 0);
  if (!s.grid.in_bounds(s.deployment_cell)) g.fail("deployment_cell", "out of bounds");

  const json& threats = doc.contains("threats") ? doc.at("threats") : json();
  if (!threats.is_array()) root.fail("threats", "expected array");
  std::set<std::uint32_t> ids;
  std::set<CellIndex> used;
  for (std::size_t i = 0; i < threats.size(); ++i) {
    if (!threats[i].is_object()) root.fail("threats", "entry " + std::to_string(i) + " is not an object");
    const Reader t(threats[i], "threats[" + std::to_string(i) + "]");
    Threat th;
    th.id = t.get<std::uint32_t>("id");
    const std::string who = "threat " + std::to_string(th.id);
    th.cls = read_enum<ThreatClass>(t, "class", threat_class_from_string);
    th.charge = read_enum<Charge>(t, "charge", charge_from_string);
    th.initiator = read_enum<Initiator>(t, "initiator", initiator_from_string);
    th.metal_fraction = t.get<double>("metal_fraction");
    th.container_density = t.get_or("container_density", 0.5);
    th.depth = t.get<double>("depth");
    th.cell = t.get<CellIndex>("cell");
    if (!ids.insert(th.id).second) throw Error(ErrorCode::parse, who + ": duplicate id");
    if (!s.grid.in_bounds(th.cell)) {
      throw Error(ErrorCode::parse, who + ": cell " + std::to_string(th.cell) + " out of bounds");
    }
    if (s.grid.at(th.cell).obstacle) throw Error(ErrorCode::parse, who + ": placed on an obstacle cell");
    if (!used.insert(th.cell).second) throw Error(ErrorCode::parse, who + ": shares a cell with another threat");
    if (!(th.depth >= 0.0)) throw Error(ErrorCode::parse, who + ": depth must be >= 0");
    if (!(th.metal_fraction >= 0.0 && th.metal_fraction <= 1.0)) {
      throw Error(ErrorCode::parse, who + ": metal_fraction outside [0,1]");
    }
    if (!(th.container_density >= 0.0 && th.container_density <= 1.0)) {
      throw Error(ErrorCode::parse, who + ": container_density outside [0,1]");
    }
    s.threats.push_back(th);
  }

  if (root.has("threat_model")) s.threat_model = read_threat_model(root.child("threat_model"));
  if (root.has("fleet_config")) s.fleet = read_fleet(root.child("fleet_config"));
  if (root.has("net_config")) s.net = read_net(root.child("net_config"));
  if (root.has("mission_config")) s.mission = read_mission(root.child("mission_config"));

  try {
    validate(s);
  } catch (const Error& e) {
    throw Error(ErrorCode::parse, std::string("scenario: ") + e.what());
  }
  return s;
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << serialize_scenario(scenario);
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace ciedsim
