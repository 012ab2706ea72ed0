#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ciedsim/types.hpp"

namespace ciedsim {

struct Cell {
  Terrain terrain = Terrain::sand;
  bool indoor = false;
  bool obstacle = false;
  double terrain_prior = 0.02;

  friend bool operator==(const Cell&, const Cell&) = default;
};

// Per-terrain prior probability that a cell holds a threat.
struct TerrainPriors {
  std::array<double, kTerrainCount> by_terrain{0.02, 0.015, 0.02, 0.005, 0.005};

  double operator[](Terrain t) const noexcept { return by_terrain[static_cast<std::size_t>(t)]; }
  friend bool operator==(const TerrainPriors&, const TerrainPriors&) = default;
};

class WorldGrid {
 public:
  WorldGrid() = default;
  WorldGrid(int width, int height, double cell_size = 1.0);
  WorldGrid(int width, int height, double cell_size, std::vector<Cell> cells);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double cell_size() const noexcept { return cell_size_; }
  std::size_t size() const noexcept { return cells_.size(); }

  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool in_bounds(CellIndex c) const noexcept { return c < cells_.size(); }
  CellIndex index(int x, int y) const noexcept {
    return static_cast<CellIndex>(y) * static_cast<CellIndex>(width_) + static_cast<CellIndex>(x);
  }
  int x_of(CellIndex c) const noexcept { return static_cast<int>(c % static_cast<CellIndex>(width_)); }
  int y_of(CellIndex c) const noexcept { return static_cast<int>(c / static_cast<CellIndex>(width_)); }

  const Cell& at(CellIndex c) const;
  Cell& at(CellIndex c);
  std::span<const Cell> cells() const noexcept { return cells_; }

  // Metric centre of a cell.
  Vec2 center(CellIndex c) const noexcept;
  // Cell containing a metric position, if inside the grid.
  std::optional<CellIndex> cell_at(Vec2 p) const noexcept;

  void apply_priors(const TerrainPriors& priors);

  friend bool operator==(const WorldGrid&, const WorldGrid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double cell_size_ = 1.0;
  std::vector<Cell> cells_;
};

// Ground kinds are blocked by obstacles. Aerial kinds fly over outdoor
// obstacles; an indoor obstacle is a wall/ceiling and blocks them too.
bool traversable(const WorldGrid& grid, CellIndex cell, RobotKind kind);

// Cells reachable from `from` under traversable(kind), as a 0/1 mask.
std::vector<std::uint8_t> reachable_mask(const WorldGrid& grid, CellIndex from, RobotKind kind);

// Two-point Gaussian mixture with a shared spread; a plain Gaussian uses
// weight_a == 1.
struct ChannelProfile {
  double weight_a = 1.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double sd = 0.1;

  friend bool operator==(const ChannelProfile&, const ChannelProfile&) = default;
};

struct ClassProfile {
  double weight = 1.0 / 3.0;
  double p_high_explosive = 0.5;
  double p_surface = 0.5;
  ChannelProfile metal;
  ChannelProfile density;

  friend bool operator==(const ClassProfile&, const ClassProfile&) = default;
};

// Population model for threats: used to generate ground truth, to marginalize
// detection probabilities, and as the class-conditional evidence model.
struct ThreatModel {
  std::array<ClassProfile, kThreatClassCount> classes;
  double buried_depth_min = 0.05;
  double buried_depth_max = 0.4;
  // Channel ground-truth codes.
  double chem_high = 1.0;
  double chem_low = 0.5;
  double chem_sd = 0.05;
  double visual_surface = 1.0;
  double visual_buried = 0.5;
  double visual_sd = 0.05;
  // Mean feature values emitted by false-positive detections.
  std::array<double, 4> clutter_means{0.1, 0.0, 0.2, 0.5};

  static ThreatModel defaults();
  const ClassProfile& profile(ThreatClass c) const noexcept {
    return classes[static_cast<std::size_t>(c)];
  }

  friend bool operator==(const ThreatModel&, const ThreatModel&) = default;
};

struct Threat {
  std::uint32_t id = 0;
  ThreatClass cls = ThreatClass::ied;
  Charge charge = Charge::high_explosive;
  Initiator initiator = Initiator::electrical;
  double metal_fraction = 0.0;
  double container_density = 0.0;
  double depth = 0.0;
  CellIndex cell = 0;

  bool surface() const noexcept { return depth == 0.0; }
  friend bool operator==(const Threat&, const Threat&) = default;
};

// Dense cell -> threat lookup; ground truth for sensors and metrics only.
class ThreatIndex {
 public:
  ThreatIndex() = default;
  ThreatIndex(std::size_t cell_count, std::span<const Threat> threats);

  const Threat* at(CellIndex c) const noexcept {
    const std::int32_t i = slot_[c];
    return i < 0 ? nullptr : &threats_[static_cast<std::size_t>(i)];
  }

 private:
  std::vector<std::int32_t> slot_;
  std::vector<Threat> threats_;
};

}  // namespace ciedsim
