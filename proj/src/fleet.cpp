#include "ciedsim/fleet.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "ciedsim/errors.hpp"

namespace ciedsim {

void validate(const FleetConfig& config) {
  for (RobotKind k : kAllRobotKinds) {
    const KindConfig& c = config.kind(k);
    if (c.count < 0) throw Error(ErrorCode::config, std::string(to_string(k)) + ": count must be >= 0");
    if (!(c.speed > 0.0)) throw Error(ErrorCode::config, std::string(to_string(k)) + ": speed must be > 0");
    if (!(c.battery_capacity > 0.0)) {
      throw Error(ErrorCode::config, std::string(to_string(k)) + ": battery must be > 0");
    }
  }
  for (const auto& m : config.sensors.models) {
    if (m) validate(*m);
  }
  if (!(config.arm_dwell >= 0.0)) throw Error(ErrorCode::config, "arm_dwell must be >= 0");
  if (!(config.pose_sigma_outdoor >= 0.0 && config.pose_sigma_indoor >= 0.0)) {
    throw Error(ErrorCode::config, "pose sigmas must be >= 0");
  }
  if (!(config.clamp_eps > 0.0 && config.clamp_eps < 0.5)) {
    throw Error(ErrorCode::config, "clamp_eps must lie in (0, 0.5)");
  }
}

const std::vector<SensorKind>& loadout(RobotKind kind) {
  static const std::array<std::vector<SensorKind>, 4> table{{
      {SensorKind::rgb, SensorKind::lidar_nav},
      {SensorKind::gpr, SensorKind::hyperspectral, SensorKind::ir, SensorKind::rgb, SensorKind::lidar_nav},
      {SensorKind::emi, SensorKind::lidar_nav},
      {SensorKind::xrb, SensorKind::raman, SensorKind::emi, SensorKind::lidar_nav},
  }};
  return table[static_cast<std::size_t>(kind)];
}

bool RobotState::has_sensor(SensorKind k) const noexcept {
  return std::find(sensors.begin(), sensors.end(), k) != sensors.end();
}

namespace {

// (row, column) ordering of the 8 neighbours: row-major offsets.
constexpr std::array<std::array<int, 2>, 8> kNeighbours{
    {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

}  // namespace

std::vector<std::int32_t> distance_field(const WorldGrid& grid, CellIndex from, RobotKind kind) {
  std::vector<std::int32_t> dist(grid.size(), -1);
  if (!traversable(grid, from, kind)) return dist;
  std::vector<CellIndex> queue;
  queue.reserve(grid.size());
  queue.push_back(from);
  dist[from] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const CellIndex c = queue[head];
    const int cx = grid.x_of(c);
    const int cy = grid.y_of(c);
    for (const auto& [dx, dy] : kNeighbours) {
      const int nx = cx + dx;
      const int ny = cy + dy;
      if (!grid.in_bounds(nx, ny)) continue;
      const CellIndex n = grid.index(nx, ny);
      if (dist[n] >= 0 || !traversable(grid, n, kind)) continue;
      dist[n] = dist[c] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

std::vector<CellIndex> plan_path(const WorldGrid& grid, CellIndex from, CellIndex to, RobotKind kind) {
  if (!traversable(grid, from, kind) || !traversable(grid, to, kind)) {
    throw Error(ErrorCode::unreachable, "path endpoint not traversable for " + std::string(to_string(kind)));
  }
  if (from == to) return {from};
  constexpr CellIndex kNone = ~CellIndex{0};
  std::vector<CellIndex> parent(grid.size(), kNone);
  std::vector<CellIndex> queue;
  queue.push_back(from);
  parent[from] = from;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const CellIndex c = queue[head];
    if (c == to) break;
    const int cx = grid.x_of(c);
    const int cy = grid.y_of(c);
    for (const auto& [dx, dy] : kNeighbours) {
      const int nx = cx + dx;
      const int ny = cy + dy;
      if (!grid.in_bounds(nx, ny)) continue;
      const CellIndex n = grid.index(nx, ny);
      if (parent[n] != kNone || !traversable(grid, n, kind)) continue;
      parent[n] = c;
      queue.push_back(n);
    }
  }
  if (parent[to] == kNone) {
    throw Error(ErrorCode::unreachable, "no path from " + std::to_string(from) + " to " + std::to_string(to));
  }
  std::vector<CellIndex> path;
  for (CellIndex c = to; c != from; c = parent[c]) path.push_back(c);
  path.push_back(from);
  std::reverse(path.begin(), path.end());
  return path;
}

MotionResult step_motion(const RobotState& robot, std::span<const Vec2> path, double dt) {
  MotionResult out{robot, 0, 0.0};
  if (!robot.can_move()) return out;
  const double active = std::min(dt, robot.battery);
  out.robot.battery = std::max(0.0, robot.battery - dt);
  double budget = robot.speed * active;
  Vec2 pos = robot.pose;
  for (const Vec2& target : path) {
    const double d = distance(pos, target);
    if (d <= budget) {
      budget -= d;
      out.distance += d;
      pos = target;
      ++out.points_reached;
      continue;
    }
    const double f = budget / d;
    pos = Vec2{pos.x + (target.x - pos.x) * f, pos.y + (target.y - pos.y) * f};
    out.distance += budget;
    break;
  }
  out.robot.pose = pos;
  return out;
}

const TaskSensors& task_sensors(TaskKind kind) {
  static const std::array<TaskSensors, 4> table{{
      {{SensorKind::rgb}, {}},
      {{SensorKind::gpr}, {SensorKind::hyperspectral, SensorKind::ir, SensorKind::rgb}},
      {{SensorKind::emi}, {}},
      {{SensorKind::xrb, SensorKind::raman}, {SensorKind::emi}},
  }};
  return table[static_cast<std::size_t>(kind)];
}

std::vector<SensorReading> execute_scan_action(RobotState& robot, TaskKind task, const ScanContext& ctx,
                                               RngStream& rng, Tick tick, double dt) {
  const TaskSensors& ts = task_sensors(task);
  for (SensorKind k : ts.required) {
    if (!robot.has_sensor(k)) {
      throw Error(ErrorCode::sensor_unavailable, std::string(to_string(robot.kind)) + " has no " +
                                                     std::string(to_string(k)) + " for " +
                                                     std::string(to_string(task)));
    }
  }
  if (robot.health != Health::ok) return {};

  const bool contact = std::any_of(ts.required.begin(), ts.required.end(), is_contact_sensor);
  if (contact && !robot.arm_deployed) {
    robot.arm_dwell_elapsed += dt;
    if (robot.arm_dwell_elapsed + 1e-9 < ctx.fleet->arm_dwell) return {};
    robot.arm_deployed = true;
  }

  const WorldGrid& grid = *ctx.grid;
  double sigma = 0.0;
  if (ctx.fleet->pose_noise) {
    const auto here = grid.cell_at(robot.pose);
    const bool indoor = here && grid.at(*here).indoor;
    sigma = indoor ? ctx.fleet->pose_sigma_indoor : ctx.fleet->pose_sigma_outdoor;
  }

  std::vector<SensorReading> out;
  auto emit = [&](SensorKind k) {
    const SensorModel* model = ctx.fleet->sensors.find(k);
    if (!model || !robot.has_sensor(k)) return;
    ScanOptions opts;
    opts.pose_sigma = sigma;
    opts.generative_match = ctx.fleet->generative_match;
    opts.p_det_eff = ctx.p_det_eff[static_cast<std::size_t>(k)];
    SensorReading r = scan(*model, robot.pose, grid, *ctx.truth, *ctx.threat_model, rng, tick, opts);
    r.robot_id = robot.id;
    out.push_back(std::move(r));
  };
  for (SensorKind k : ts.required) emit(k);
  for (SensorKind k : ts.optional) emit(k);
  return out;
}

bool fail_robot(std::span<RobotState> robots, NodeId id) {
  for (RobotState& r : robots) {
    if (r.id != id) continue;
    if (r.health == Health::failed) return false;
    r.health = Health::failed;
    r.current_task.reset();
    return true;
  }
  throw Error(ErrorCode::unknown_robot, "unknown robot id " + std::to_string(id));
}

std::vector<RobotState> default_fleet(const FleetConfig& config, Vec2 deployment) {
  std::vector<RobotState> out;
  NodeId next = 1;
  for (RobotKind k : kAllRobotKinds) {
    const KindConfig& kc = config.kind(k);
    for (int i = 0; i < kc.count; ++i) {
      RobotState r;
      r.id = next++;
      r.kind = k;
      r.pose = deployment;
      r.speed = kc.speed;
      r.battery = kc.battery_capacity;
      r.battery_capacity = kc.battery_capacity;
      r.sensors = loadout(k);
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace ciedsim
