#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ciedsim/fixed.hpp"
#include "ciedsim/sensors.hpp"
#include "ciedsim/world.hpp"

namespace ciedsim {

// Per-sensor evidence terms as fusion sees them: marginal p_det and p_fp,
// optionally eps-clamped, and the two log-likelihood ratios in fixed point.
class FusionModel {
 public:
  FusionModel() = default;

  // Throws DegenerateModel when a detector has p_fp or p_det_eff at 0 or 1
  // and clamping is not enabled.
  static FusionModel build(const SensorTable& sensors, const ThreatModel& threats, bool clamp_degenerate,
                           double eps);
  static FusionModel from_odds(const std::array<std::optional<DetectionOdds>, kSensorKindCount>& odds,
                               bool clamp_degenerate, double eps);

  bool has(SensorKind k) const noexcept { return odds_[static_cast<std::size_t>(k)].has_value(); }
  const DetectionOdds& odds(SensorKind k) const;
  LogOdds lr(SensorKind k, bool detected) const noexcept {
    const auto i = static_cast<std::size_t>(k);
    return detected ? hit_[i] : miss_[i];
  }

 private:
  std::array<std::optional<DetectionOdds>, kSensorKindCount> odds_{};
  std::array<LogOdds, kSensorKindCount> hit_{};
  std::array<LogOdds, kSensorKindCount> miss_{};
};

class ThreatHeatmap {
 public:
  static constexpr double kPriorEps = 1e-6;

  ThreatHeatmap() = default;
  explicit ThreatHeatmap(const WorldGrid& grid);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return log_odds_.size(); }

  LogOdds log_odds(CellIndex c) const noexcept { return log_odds_[c]; }
  LogOdds prior_log_odds(CellIndex c) const noexcept { return prior_[c]; }
  double prior(CellIndex c) const noexcept { return sigmoid(prior_[c].value()); }
  double posterior(CellIndex c) const noexcept { return sigmoid(log_odds_[c].value()); }
  Tick last_update(CellIndex c) const noexcept { return last_update_[c]; }

  void add(CellIndex c, LogOdds delta, Tick tick) noexcept {
    log_odds_[c] += delta;
    if (tick > last_update_[c]) last_update_[c] = tick;
  }

  std::vector<double> posteriors() const;

  friend bool operator==(const ThreatHeatmap&, const ThreatHeatmap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<LogOdds> log_odds_;
  std::vector<LogOdds> prior_;
  std::vector<Tick> last_update_;
};

struct CellDelta {
  CellIndex cell = 0;
  LogOdds delta;

  friend bool operator==(const CellDelta&, const CellDelta&) = default;
};

// Log-odds increments a reading contributes (one per covered cell, zero
// increments omitted).
std::vector<CellDelta> reading_deltas(const SensorReading& reading, const FusionModel& model);

void integrate_reading(ThreatHeatmap& heatmap, const SensorReading& reading, const FusionModel& model);

struct HeatBlob {
  CellIndex cell = 0;  // argmax of the component
  double posterior = 0.0;
  std::vector<CellIndex> cells;  // ascending
};

// 8-connected components of cells with posterior >= threshold, one entry per
// component at its argmax (lowest index on ties), ordered by posterior desc
// then cell asc.
std::vector<HeatBlob> extract_candidates(const ThreatHeatmap& heatmap, double threshold = 0.5);

struct PriorityWeights {
  double vision = 1.0;
  double terrain = 5.0;
  double posterior = 2.0;

  friend bool operator==(const PriorityWeights&, const PriorityWeights&) = default;
};

double priority_score(double posterior, const Cell& cell, std::uint32_t vision_hits,
                      const PriorityWeights& w = {});

enum class CandidateStatus : std::uint8_t { suspected, confirmed, dismissed, classified };
std::string_view to_string(CandidateStatus s) noexcept;
std::optional<CandidateStatus> candidate_status_from_string(std::string_view s) noexcept;

// Unnormalized per-class log-likelihood sums, fixed point.
struct ClassEvidence {
  std::array<LogOdds, kThreatClassCount> sum{};

  void add(const std::array<double, kThreatClassCount>& loglik) noexcept;
  ClassEvidence& operator+=(const ClassEvidence& o) noexcept;
  // Normalized log-probabilities (uniform class prior).
  std::array<double, kThreatClassCount> normalized() const noexcept;

  friend bool operator==(const ClassEvidence&, const ClassEvidence&) = default;
};

struct Candidate {
  std::uint32_t id = 0;
  CellIndex cell = 0;
  double posterior = 0.0;
  ClassEvidence evidence;
  CandidateStatus status = CandidateStatus::suspected;
  bool contact_evidence = false;
  bool low_confidence = false;
  std::uint32_t confirm_attempts = 0;

  std::array<double, kThreatClassCount> class_logp() const noexcept { return evidence.normalized(); }
  ThreatClass best_class() const noexcept;
  double max_class_posterior() const noexcept;
};

double priority_score(const Candidate& candidate, const Cell& cell, std::uint32_t vision_hits,
                      const PriorityWeights& w = {});

// Checks suspected -> {confirmed | dismissed}, confirmed -> classified.
void transition(Candidate& candidate, CandidateStatus next);

// Adds one detection's class evidence. A confirmed candidate locks in as
// classified once its best class reaches `gate` and contact evidence exists.
void update_classification(Candidate& candidate, std::span<const double> features, const SensorModel& model,
                           const ThreatModel& threats, double gate = 0.9);

// Per-cell class evidence accumulated from every feature-bearing detection.
class EvidenceGrid {
 public:
  EvidenceGrid() = default;
  explicit EvidenceGrid(std::size_t cells) : sums_(cells), contact_(cells, 0) {}

  void add(CellIndex c, const std::array<double, kThreatClassCount>& loglik, bool contact);
  // Sum over the 3x3 neighbourhood (absorbs one cell of pose error).
  ClassEvidence neighbourhood(const WorldGrid& grid, CellIndex c, bool* contact = nullptr) const;

  friend bool operator==(const EvidenceGrid&, const EvidenceGrid&) = default;

 private:
  std::vector<ClassEvidence> sums_;
  std::vector<std::uint32_t> contact_;
};

}  // namespace ciedsim
