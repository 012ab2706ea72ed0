#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ciedsim/rng.hpp"
#include "ciedsim/types.hpp"
#include "ciedsim/world.hpp"

namespace ciedsim {

// Five-parameter detection curve per sensor kind.
struct SensorModel {
  SensorKind kind = SensorKind::rgb;
  int footprint_radius = 0;  // cells
  double max_depth = 0.0;    // meters; deeper threats are invisible
  double p_det_base = 0.0;
  double depth_decay = 1.0;  // multiplier per meter of burial
  double p_fp = 0.0;         // false-positive rate per cell-scan
  double feature_noise = 0.1;
  double surface_cue = 0.15;  // vision gain for shallow (<= 0.1 m) burial

  friend bool operator==(const SensorModel&, const SensorModel&) = default;
};

void validate(const SensorModel& m);

// Detector table. LIDAR_NAV is navigation-only and has no entry.
struct SensorTable {
  std::array<std::optional<SensorModel>, kSensorKindCount> models;

  static SensorTable defaults();
  const SensorModel* find(SensorKind k) const noexcept {
    const auto& m = models[static_cast<std::size_t>(k)];
    return m ? &*m : nullptr;
  }
  const SensorModel& get(SensorKind k) const;

  friend bool operator==(const SensorTable&, const SensorTable&) = default;
};

enum Channel : std::size_t { kMetal = 0, kChem = 1, kDensity = 2, kVisual = 3 };
inline constexpr std::size_t kChannelCount = 4;
using FeatureVector = std::array<double, kChannelCount>;

// Channels a detection by `kind` carries evidence on; other slots are zero.
std::array<bool, kChannelCount> observed_channels(SensorKind kind) noexcept;

struct FeatureHit {
  CellIndex cell = 0;
  FeatureVector features{};

  friend bool operator==(const FeatureHit&, const FeatureHit&) = default;
};

struct SensorReading {
  std::uint64_t id = 0;
  NodeId robot_id = 0;
  SensorKind kind = SensorKind::rgb;
  Tick tick = 0;
  std::vector<CellIndex> cells;
  std::vector<std::uint8_t> detections;  // parallel to cells
  std::vector<FeatureHit> features;      // detected cells only
  double true_pose_error = 0.0;          // diagnostic

  std::size_t detection_count() const noexcept;
  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

double channel_gain(const SensorModel& model, const Threat& threat) noexcept;

// p_det_base * depth_decay^depth * channel_gain, zero past max_depth.
double p_det(const SensorModel& model, const Threat& threat) noexcept;

// p_det marginalized over the threat population (what fusion may assume
// without looking at ground truth).
double p_det_effective(const SensorModel& model, const ThreatModel& threats);

// Noise-free channel values a threat presents.
FeatureVector channel_truth(const Threat& threat, const ThreatModel& model) noexcept;

// Cells within footprint_radius of `centre` (euclidean, in cells), ascending.
std::vector<CellIndex> footprint(const WorldGrid& grid, CellIndex centre, int radius);

struct ScanOptions {
  double pose_sigma = 0.0;
  // Threat cells detect with `p_det_eff` instead of the per-threat curve, so
  // the generative process matches what fusion assumes.
  bool generative_match = false;
  double p_det_eff = 0.0;
};

SensorReading scan(const SensorModel& model, Vec2 pose, const WorldGrid& grid,
                   const ThreatIndex& truth, const ThreatModel& threat_model, RngStream& rng,
                   Tick tick, const ScanOptions& options = {});

struct DetectionOdds {
  double p_det_eff = 0.0;
  double p_fp = 0.0;
};

// Log likelihood ratio contributed by one cell observation.
double likelihood_ratio(const DetectionOdds& odds, bool detected);

// Clamps both probabilities into [eps, 1 - eps].
DetectionOdds clamp_odds(DetectionOdds odds, double eps) noexcept;

// log p(features | class) for IED, EO, landmine.
std::array<double, kThreatClassCount> classify_evidence(std::span<const double> features,
                                                        const SensorModel& model,
                                                        const ThreatModel& threat_model);

}  // namespace ciedsim
