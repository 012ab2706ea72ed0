#pragma once

#include <cstdint>

#include "ciedsim/fusion.hpp"

namespace ciedsim {

struct MissionConfig {
  double coverage_gate = 0.9;         // Explore -> SpecialisedDetection
  double candidate_threshold = 0.5;   // posterior for candidacy
  double classification_gate = 0.9;   // class posterior lock-in
  double emi_hot_threshold = 0.25;    // posterior that earns an EMI visit
  int tile_size = 10;                 // cells per side of an explore/sweep region
  PriorityWeights weights;
  // When false, GPR/EMI work starts per tile once that tile is covered;
  // when true it waits for the SpecialisedDetection phase.
  bool strict_phases = false;
  std::uint32_t status_timeout = 10;  // ticks without status before a robot counts as lost
  std::uint32_t max_confirm_attempts = 3;
  std::uint32_t retransmit_interval = 5;
  std::uint32_t coverage_log_interval = 50;
  double dt = 1.0;  // seconds per tick

  friend bool operator==(const MissionConfig&, const MissionConfig&) = default;
};

void validate(const MissionConfig& config);

}  // namespace ciedsim
