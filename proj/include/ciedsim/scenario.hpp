#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ciedsim/fleet.hpp"
#include "ciedsim/mission_config.hpp"
#include "ciedsim/netsim.hpp"
#include "ciedsim/world.hpp"

namespace ciedsim {

inline constexpr int kScenarioFormatVersion = 1;

struct Scenario {
  WorldGrid grid;
  std::vector<Threat> threats;
  FleetConfig fleet;
  NetConfig net;
  MissionConfig mission;
  ThreatModel threat_model = ThreatModel::defaults();
  TerrainPriors terrain_priors;
  std::uint64_t seed = 0;
  ControllerMode controller_mode = ControllerMode::centralized;
  CellIndex deployment_cell = 0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Throws Error(config) naming the offending field or threat id.
void validate(const Scenario& scenario);

struct ScenarioParams {
  int width = 50;
  int height = 50;
  int threat_count = 10;
  double indoor_fraction = 0.1;
  double obstacle_density = 0.05;
  bool clear_deployment_zone = true;
  ControllerMode controller_mode = ControllerMode::centralized;
  FleetConfig fleet;
  NetConfig net;
  MissionConfig mission;
  ThreatModel threat_model = ThreatModel::defaults();
  TerrainPriors terrain_priors;
};

// Pure function of (params, seed). Threats land on distinct non-obstacle
// cells that ground robots can reach from the deployment cell.
Scenario generate_scenario(const ScenarioParams& params, std::uint64_t seed);

std::optional<Threat> ground_truth_at(const Scenario& scenario, CellIndex cell);

std::string serialize_scenario(const Scenario& scenario);
Scenario parse_scenario(std::string_view text);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace ciedsim
