#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ciedsim/rng.hpp"
#include "ciedsim/sensors.hpp"
#include "ciedsim/types.hpp"
#include "ciedsim/world.hpp"

namespace ciedsim {

struct KindConfig {
  int count = 0;
  double speed = 1.0;             // m/s
  double battery_capacity = 1.0;  // seconds

  friend bool operator==(const KindConfig&, const KindConfig&) = default;
};

struct FleetConfig {
  // Indexed by RobotKind: SUAV, LUAV, SUGV, LUGV.
  std::array<KindConfig, 4> kinds{{{2, 10.0, 1500.0}, {1, 5.0, 2400.0}, {2, 1.5, 18000.0}, {1, 0.8, 43200.0}}};
  SensorTable sensors = SensorTable::defaults();
  double arm_dwell = 60.0;  // seconds before contact sensors report
  bool pose_noise = true;
  double pose_sigma_outdoor = 0.1;  // RTK-GPS regime
  double pose_sigma_indoor = 0.5;   // SLAM regime
  // Opt-in clamping of degenerate (0 or 1) probabilities for fusion.
  bool clamp_degenerate = false;
  double clamp_eps = 1e-6;
  // Threat cells detect at the marginal p_det fusion assumes.
  bool generative_match = false;
  double return_reserve = 30.0;  // battery seconds kept beyond the trip home

  const KindConfig& kind(RobotKind k) const noexcept { return kinds[static_cast<std::size_t>(k)]; }
  KindConfig& kind(RobotKind k) noexcept { return kinds[static_cast<std::size_t>(k)]; }

  friend bool operator==(const FleetConfig&, const FleetConfig&) = default;
};

void validate(const FleetConfig& config);

// Mounted sensors per kind, fixed by platform.
const std::vector<SensorKind>& loadout(RobotKind kind);

enum class Health : std::uint8_t { ok, failed };

struct TaskRef {
  std::uint64_t id = 0;
  TaskKind kind = TaskKind::explore_region;

  friend bool operator==(const TaskRef&, const TaskRef&) = default;
};

struct RobotState {
  NodeId id = 0;
  RobotKind kind = RobotKind::suav;
  Vec2 pose;
  double speed = 0.0;
  double battery = 0.0;
  double battery_capacity = 0.0;
  Health health = Health::ok;
  std::vector<SensorKind> sensors;
  std::optional<TaskRef> current_task;
  bool arm_deployed = false;  // LUGV only
  double arm_dwell_elapsed = 0.0;

  bool can_move() const noexcept { return health == Health::ok && battery > 0.0; }
  bool has_sensor(SensorKind k) const noexcept;
  bool has_arm() const noexcept { return kind == RobotKind::lugv; }

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

// Shortest 8-connected path (both endpoints included). Neighbours are expanded
// in (row, column) order, which fixes the tie-break among equal-length paths.
std::vector<CellIndex> plan_path(const WorldGrid& grid, CellIndex from, CellIndex to, RobotKind kind);

// BFS hop distances from `from` under traversable(kind); -1 where unreachable.
std::vector<std::int32_t> distance_field(const WorldGrid& grid, CellIndex from, RobotKind kind);

struct MotionResult {
  RobotState robot;
  std::size_t points_reached = 0;
  double distance = 0.0;
};

// Moves along `path` (metric points, visited in order) for dt seconds.
MotionResult step_motion(const RobotState& robot, std::span<const Vec2> path, double dt);

struct ScanContext {
  const WorldGrid* grid = nullptr;
  const ThreatIndex* truth = nullptr;
  const ThreatModel* threat_model = nullptr;
  const FleetConfig* fleet = nullptr;
  // Marginal p_det per sensor kind, used only in generative-match mode.
  std::array<double, kSensorKindCount> p_det_eff{};
};

// Sensors a task kind exercises; the first entries are the ones the robot
// must carry.
struct TaskSensors {
  std::vector<SensorKind> required;
  std::vector<SensorKind> optional;
};
const TaskSensors& task_sensors(TaskKind kind);

// One reading per mounted sensor the task uses. Contact sensors report only
// after the arm dwell has elapsed; until then the result is empty.
std::vector<SensorReading> execute_scan_action(RobotState& robot, TaskKind task, const ScanContext& ctx,
                                               RngStream& rng, Tick tick, double dt);

// Marks a robot failed. Returns false when it already was (idempotent).
bool fail_robot(std::span<RobotState> robots, NodeId id);

std::vector<RobotState> default_fleet(const FleetConfig& config, Vec2 deployment);

}  // namespace ciedsim
