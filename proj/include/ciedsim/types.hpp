#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>

namespace ciedsim {

using CellIndex = std::uint32_t;
using NodeId = std::uint32_t;
using Tick = std::uint64_t;

inline constexpr NodeId kCommandCentre = 0;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double distance(Vec2 a, Vec2 b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

enum class RobotKind : std::uint8_t { suav, luav, sugv, lugv };
inline constexpr std::array<RobotKind, 4> kAllRobotKinds{RobotKind::suav, RobotKind::luav,
                                                        RobotKind::sugv, RobotKind::lugv};

inline constexpr bool is_aerial(RobotKind k) noexcept {
  return k == RobotKind::suav || k == RobotKind::luav;
}

enum class SensorKind : std::uint8_t { rgb, ir, hyperspectral, lidar_nav, gpr, emi, xrb, raman };
inline constexpr std::size_t kSensorKindCount = 8;
inline constexpr std::array<SensorKind, kSensorKindCount> kAllSensorKinds{
    SensorKind::rgb, SensorKind::ir,  SensorKind::hyperspectral, SensorKind::lidar_nav,
    SensorKind::gpr, SensorKind::emi, SensorKind::xrb,           SensorKind::raman};

inline constexpr bool is_contact_sensor(SensorKind k) noexcept {
  return k == SensorKind::xrb || k == SensorKind::raman;
}
inline constexpr bool is_vision_sensor(SensorKind k) noexcept {
  return k == SensorKind::rgb || k == SensorKind::ir || k == SensorKind::hyperspectral;
}

enum class ThreatClass : std::uint8_t { ied, eo, landmine };
inline constexpr std::size_t kThreatClassCount = 3;
enum class Charge : std::uint8_t { high_explosive, low_explosive };
enum class Initiator : std::uint8_t { electrical, mechanical, chemical };
enum class Terrain : std::uint8_t { sand, gravel, clay, asphalt, concrete };
inline constexpr std::size_t kTerrainCount = 5;

enum class ControllerMode : std::uint8_t { centralized, mns };

enum class TaskKind : std::uint8_t { explore_region, gpr_sweep, emi_scan, confirm_candidate };

std::string_view to_string(RobotKind k) noexcept;
std::string_view to_string(SensorKind k) noexcept;
std::string_view to_string(ThreatClass c) noexcept;
std::string_view to_string(Charge c) noexcept;
std::string_view to_string(Initiator i) noexcept;
std::string_view to_string(Terrain t) noexcept;
std::string_view to_string(ControllerMode m) noexcept;
std::string_view to_string(TaskKind k) noexcept;

std::optional<RobotKind> robot_kind_from_string(std::string_view s) noexcept;
std::optional<SensorKind> sensor_kind_from_string(std::string_view s) noexcept;
std::optional<ThreatClass> threat_class_from_string(std::string_view s) noexcept;
std::optional<Charge> charge_from_string(std::string_view s) noexcept;
std::optional<Initiator> initiator_from_string(std::string_view s) noexcept;
std::optional<Terrain> terrain_from_string(std::string_view s) noexcept;
std::optional<ControllerMode> controller_mode_from_string(std::string_view s) noexcept;
std::optional<TaskKind> task_kind_from_string(std::string_view s) noexcept;

}  // namespace ciedsim
