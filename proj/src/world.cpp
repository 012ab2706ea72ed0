#include "ciedsim/world.hpp"

#include <deque>
#include <string>

#include "ciedsim/errors.hpp"

namespace ciedsim {

WorldGrid::WorldGrid(int width, int height, double cell_size)
    : WorldGrid(width, height, cell_size,
                std::vector<Cell>(width > 0 && height > 0
                                      ? static_cast<std::size_t>(width) * static_cast<std::size_t>(height)
                                      : 0)) {}

WorldGrid::WorldGrid(int width, int height, double cell_size, std::vector<Cell> cells)
    : width_(width), height_(height), cell_size_(cell_size), cells_(std::move(cells)) {
  if (width < 1 || height < 1) throw Error(ErrorCode::config, "grid dimensions must be >= 1");
  if (!(cell_size > 0.0)) throw Error(ErrorCode::config, "cell_size must be > 0");
  if (cells_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::config, "cell count does not match width*height");
  }
  for (const Cell& c : cells_) {
    if (!(c.terrain_prior >= 0.0 && c.terrain_prior <= 1.0)) {
      throw Error(ErrorCode::config, "terrain_prior outside [0,1]");
    }
  }
}

const Cell& WorldGrid::at(CellIndex c) const {
  if (!in_bounds(c)) throw Error(ErrorCode::out_of_bounds, "cell " + std::to_string(c) + " out of bounds");
  return cells_[c];
}

Cell& WorldGrid::at(CellIndex c) {
  if (!in_bounds(c)) throw Error(ErrorCode::out_of_bounds, "cell " + std::to_string(c) + " out of bounds");
  return cells_[c];
}

Vec2 WorldGrid::center(CellIndex c) const noexcept {
  return Vec2{(x_of(c) + 0.5) * cell_size_, (y_of(c) + 0.5) * cell_size_};
}

std::optional<CellIndex> WorldGrid::cell_at(Vec2 p) const noexcept {
  const double fx = std::floor(p.x / cell_size_);
  const double fy = std::floor(p.y / cell_size_);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < width_ && fy < height_)) return std::nullopt;
  return index(static_cast<int>(fx), static_cast<int>(fy));
}

void WorldGrid::apply_priors(const TerrainPriors& priors) {
  for (Cell& c : cells_) c.terrain_prior = priors[c.terrain];
}

bool traversable(const WorldGrid& grid, CellIndex cell, RobotKind kind) {
  const Cell& c = grid.at(cell);
  if (is_aerial(kind)) return !(c.indoor && c.obstacle);
  return !c.obstacle;
}

std::vector<std::uint8_t> reachable_mask(const WorldGrid& grid, CellIndex from, RobotKind kind) {
  std::vector<std::uint8_t> mask(grid.size(), 0);
  if (!traversable(grid, from, kind)) return mask;
  std::deque<CellIndex> frontier{from};
  mask[from] = 1;
  while (!frontier.empty()) {
    const CellIndex c = frontier.front();
    frontier.pop_front();
    const int cx = grid.x_of(c);
    const int cy = grid.y_of(c);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = cx + dx;
        const int ny = cy + dy;
        if (!grid.in_bounds(nx, ny)) continue;
        const CellIndex n = grid.index(nx, ny);
        if (mask[n] || !traversable(grid, n, kind)) continue;
        mask[n] = 1;
        frontier.push_back(n);
      }
    }
  }
  return mask;
}

ThreatModel ThreatModel::defaults() {
  ThreatModel m;
  m.classes[static_cast<std::size_t>(ThreatClass::ied)] =
      ClassProfile{1.0 / 3.0, 0.5, 0.5, {1.0, 0.35, 0.0, 0.2}, {1.0, 0.5, 0.0, 0.15}};
  m.classes[static_cast<std::size_t>(ThreatClass::eo)] =
      ClassProfile{1.0 / 3.0, 0.5, 0.6, {1.0, 0.9, 0.0, 0.07}, {1.0, 0.9, 0.0, 0.07}};
  m.classes[static_cast<std::size_t>(ThreatClass::landmine)] =
      ClassProfile{1.0 / 3.0, 0.2, 0.2, {1.0, 0.75, 0.0, 0.1}, {1.0, 0.35, 0.0, 0.1}};
  return m;
}

ThreatIndex::ThreatIndex(std::size_t cell_count, std::span<const Threat> threats)
    : slot_(cell_count, -1), threats_(threats.begin(), threats.end()) {
  for (std::size_t i = 0; i < threats_.size(); ++i) {
    const CellIndex c = threats_[i].cell;
    if (c >= cell_count) throw Error(ErrorCode::out_of_bounds, "threat cell out of bounds");
    slot_[c] = static_cast<std::int32_t>(i);
  }
}

}  // namespace ciedsim
