#include "ciedsim/types.hpp"

#include "ciedsim/errors.hpp"

namespace ciedsim {
namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

constexpr std::array<std::string_view, 4> kRobotNames{"SUAV", "LUAV", "SUGV", "LUGV"};
constexpr std::array<std::string_view, 8> kSensorNames{"RGB", "IR",  "HYPERSPECTRAL", "LIDAR_NAV",
                                                       "GPR", "EMI", "XRB",           "RAMAN"};
constexpr std::array<std::string_view, 3> kClassNames{"IED", "EO", "landmine"};
constexpr std::array<std::string_view, 2> kChargeNames{"high_explosive", "low_explosive"};
constexpr std::array<std::string_view, 3> kInitiatorNames{"electrical", "mechanical", "chemical"};
constexpr std::array<std::string_view, 5> kTerrainNames{"sand", "gravel", "clay", "asphalt",
                                                        "concrete"};
constexpr std::array<std::string_view, 2> kModeNames{"centralized", "mns"};
constexpr std::array<std::string_view, 4> kTaskNames{"explore_region", "gpr_sweep", "emi_scan",
                                                     "confirm_candidate"};

}  // namespace

std::string_view to_string(RobotKind k) noexcept { return kRobotNames[static_cast<std::size_t>(k)]; }
std::string_view to_string(SensorKind k) noexcept { return kSensorNames[static_cast<std::size_t>(k)]; }
std::string_view to_string(ThreatClass c) noexcept { return kClassNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(Charge c) noexcept { return kChargeNames[static_cast<std::size_t>(c)]; }
std::string_view to_string(Initiator i) noexcept {
  return kInitiatorNames[static_cast<std::size_t>(i)];
}
std::string_view to_string(Terrain t) noexcept { return kTerrainNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(ControllerMode m) noexcept {
  return kModeNames[static_cast<std::size_t>(m)];
}
std::string_view to_string(TaskKind k) noexcept { return kTaskNames[static_cast<std::size_t>(k)]; }

std::optional<RobotKind> robot_kind_from_string(std::string_view s) noexcept {
  return lookup<RobotKind>(kRobotNames, s);
}
std::optional<SensorKind> sensor_kind_from_string(std::string_view s) noexcept {
  return lookup<SensorKind>(kSensorNames, s);
}
std::optional<ThreatClass> threat_class_from_string(std::string_view s) noexcept {
  return lookup<ThreatClass>(kClassNames, s);
}
std::optional<Charge> charge_from_string(std::string_view s) noexcept {
  return lookup<Charge>(kChargeNames, s);
}
std::optional<Initiator> initiator_from_string(std::string_view s) noexcept {
  return lookup<Initiator>(kInitiatorNames, s);
}
std::optional<Terrain> terrain_from_string(std::string_view s) noexcept {
  return lookup<Terrain>(kTerrainNames, s);
}
std::optional<ControllerMode> controller_mode_from_string(std::string_view s) noexcept {
  return lookup<ControllerMode>(kModeNames, s);
}
std::optional<TaskKind> task_kind_from_string(std::string_view s) noexcept {
  return lookup<TaskKind>(kTaskNames, s);
}

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::config: return "ConfigError";
    case ErrorCode::parse: return "ParseError";
    case ErrorCode::version_mismatch: return "VersionMismatch";
    case ErrorCode::infeasible_placement: return "InfeasiblePlacement";
    case ErrorCode::out_of_bounds: return "OutOfBounds";
    case ErrorCode::unreachable: return "Unreachable";
    case ErrorCode::degenerate_model: return "DegenerateModel";
    case ErrorCode::unknown_feature_shape: return "UnknownFeatureShape";
    case ErrorCode::sensor_unavailable: return "SensorUnavailable";
    case ErrorCode::unknown_robot: return "UnknownRobot";
    case ErrorCode::invalid_transition: return "InvalidTransition";
    case ErrorCode::invalid_command: return "InvalidCommand";
    case ErrorCode::invalid_schedule: return "InvalidSchedule";
    case ErrorCode::incompatible_log: return "IncompatibleLog";
    case ErrorCode::incompatible_reports: return "IncompatibleReports";
    case ErrorCode::io: return "IOError";
  }
  return "unknown";
}

}  // namespace ciedsim
