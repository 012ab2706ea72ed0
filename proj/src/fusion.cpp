#include "ciedsim/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ciedsim/errors.hpp"

namespace ciedsim {

FusionModel FusionModel::build(const SensorTable& sensors, const ThreatModel& threats, bool clamp_degenerate,
                               double eps) {
  std::array<std::optional<DetectionOdds>, kSensorKindCount> odds{};
  for (SensorKind k : kAllSensorKinds) {
    const SensorModel* m = sensors.find(k);
    if (!m) continue;
    odds[static_cast<std::size_t>(k)] = DetectionOdds{p_det_effective(*m, threats), m->p_fp};
  }
  return from_odds(odds, clamp_degenerate, eps);
}

FusionModel FusionModel::from_odds(const std::array<std::optional<DetectionOdds>, kSensorKindCount>& odds,
                                   bool clamp_degenerate, double eps) {
  FusionModel f;
  for (std::size_t i = 0; i < kSensorKindCount; ++i) {
    if (!odds[i]) continue;
    DetectionOdds o = clamp_degenerate ? clamp_odds(*odds[i], eps) : *odds[i];
    f.odds_[i] = o;
    f.hit_[i] = LogOdds::from_double(likelihood_ratio(o, true));
    f.miss_[i] = LogOdds::from_double(likelihood_ratio(o, false));
  }
  return f;
}

const DetectionOdds& FusionModel::odds(SensorKind k) const {
  const auto& o = odds_[static_cast<std::size_t>(k)];
  if (!o) throw Error(ErrorCode::config, std::string("no fusion model for ") + std::string(to_string(k)));
  return *o;
}

ThreatHeatmap::ThreatHeatmap(const WorldGrid& grid)
    : width_(grid.width()),
      height_(grid.height()),
      log_odds_(grid.size()),
      prior_(grid.size()),
      last_update_(grid.size(), 0) {
  for (CellIndex c = 0; c < grid.size(); ++c) {
    const double p = std::clamp(grid.at(c).terrain_prior, kPriorEps, 1.0 - kPriorEps);
    prior_[c] = LogOdds::from_double(logit(p));
    log_odds_[c] = prior_[c];
  }
}

std::vector<double> ThreatHeatmap::posteriors() const {
  std::vector<double> out(log_odds_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(log_odds_[i].value());
  return out;
}

std::vector<CellDelta> reading_deltas(const SensorReading& reading, const FusionModel& model) {
  std::vector<CellDelta> out;
  if (!model.has(reading.kind)) return out;
  out.reserve(reading.cells.size());
  for (std::size_t i = 0; i < reading.cells.size(); ++i) {
    const LogOdds d = model.lr(reading.kind, reading.detections[i] != 0);
    if (d.raw != 0) out.push_back({reading.cells[i], d});
  }
  return out;
}

void integrate_reading(ThreatHeatmap& heatmap, const SensorReading& reading, const FusionModel& model) {
  if (!model.has(reading.kind)) return;
  for (std::size_t i = 0; i < reading.cells.size(); ++i) {
    const CellIndex c = reading.cells[i];
    if (c >= heatmap.size()) throw Error(ErrorCode::out_of_bounds, "reading cell out of bounds");
    heatmap.add(c, model.lr(reading.kind, reading.detections[i] != 0), reading.tick);
  }
}

std::vector<HeatBlob> extract_candidates(const ThreatHeatmap& heatmap, double threshold) {
  const std::size_t n = heatmap.size();
  const int w = heatmap.width();
  const int h = heatmap.height();
  std::vector<double> post(n);
  std::vector<std::uint8_t> hot(n, 0);
  for (CellIndex c = 0; c < n; ++c) {
    post[c] = heatmap.posterior(c);
    hot[c] = post[c] >= threshold;
  }
  std::vector<HeatBlob> blobs;
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<CellIndex> stack;
  for (CellIndex start = 0; start < n; ++start) {
    if (!hot[start] || seen[start]) continue;
    HeatBlob blob{start, post[start], {}};
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const CellIndex c = stack.back();
      stack.pop_back();
      blob.cells.push_back(c);
      if (post[c] > blob.posterior || (post[c] == blob.posterior && c < blob.cell)) {
        blob.posterior = post[c];
        blob.cell = c;
      }
      const int cx = static_cast<int>(c % static_cast<CellIndex>(w));
      const int cy = static_cast<int>(c / static_cast<CellIndex>(w));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = cx + dx;
          const int ny = cy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const CellIndex nb = static_cast<CellIndex>(ny * w + nx);
          if (!hot[nb] || seen[nb]) continue;
          seen[nb] = 1;
          stack.push_back(nb);
        }
      }
    }
    std::sort(blob.cells.begin(), blob.cells.end());
    blobs.push_back(std::move(blob));
  }
  std::sort(blobs.begin(), blobs.end(), [](const HeatBlob& a, const HeatBlob& b) {
    if (a.posterior != b.posterior) return a.posterior > b.posterior;
    return a.cell < b.cell;
  });
  return blobs;
}

double priority_score(double posterior, const Cell& cell, std::uint32_t vision_hits, const PriorityWeights& w) {
  return w.vision * std::log1p(static_cast<double>(vision_hits)) + w.terrain * cell.terrain_prior +
         w.posterior * posterior;
}

double priority_score(const Candidate& candidate, const Cell& cell, std::uint32_t vision_hits,
                      const PriorityWeights& w) {
  return priority_score(candidate.posterior, cell, vision_hits, w);
}

namespace {
constexpr std::array<std::string_view, 4> kStatusNames{"suspected", "confirmed", "dismissed", "classified"};
}

std::string_view to_string(CandidateStatus s) noexcept { return kStatusNames[static_cast<std::size_t>(s)]; }

std::optional<CandidateStatus> candidate_status_from_string(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (kStatusNames[i] == s) return static_cast<CandidateStatus>(i);
  }
  return std::nullopt;
}

void ClassEvidence::add(const std::array<double, kThreatClassCount>& loglik) noexcept {
  for (std::size_t i = 0; i < kThreatClassCount; ++i) sum[i] += LogOdds::from_double(loglik[i]);
}

ClassEvidence& ClassEvidence::operator+=(const ClassEvidence& o) noexcept {
  for (std::size_t i = 0; i < kThreatClassCount; ++i) sum[i] += o.sum[i];
  return *this;
}

std::array<double, kThreatClassCount> ClassEvidence::normalized() const noexcept {
  std::array<double, kThreatClassCount> v{};
  double hi = -INFINITY;
  for (std::size_t i = 0; i < kThreatClassCount; ++i) {
    v[i] = sum[i].value();
    hi = std::max(hi, v[i]);
  }
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  const double lse = hi + std::log(acc);
  for (double& x : v) x -= lse;
  return v;
}

ThreatClass Candidate::best_class() const noexcept {
  const auto lp = class_logp();
  return static_cast<ThreatClass>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

double Candidate::max_class_posterior() const noexcept {
  const auto lp = class_logp();
  return std::exp(*std::max_element(lp.begin(), lp.end()));
}

void transition(Candidate& candidate, CandidateStatus next) {
  const CandidateStatus cur = candidate.status;
  const bool ok = (cur == CandidateStatus::suspected &&
                   (next == CandidateStatus::confirmed || next == CandidateStatus::dismissed)) ||
                  (cur == CandidateStatus::confirmed && next == CandidateStatus::classified);
  if (!ok) {
    throw Error(ErrorCode::invalid_transition, "candidate " + std::to_string(candidate.id) + ": " +
                                                   std::string(to_string(cur)) + " -> " +
                                                   std::string(to_string(next)));
  }
  candidate.status = next;
}

void update_classification(Candidate& candidate, std::span<const double> features, const SensorModel& model,
                           const ThreatModel& threats, double gate) {
  if (candidate.status != CandidateStatus::suspected && candidate.status != CandidateStatus::confirmed) {
    throw Error(ErrorCode::invalid_transition, "candidate " + std::to_string(candidate.id) + " is " +
                                                   std::string(to_string(candidate.status)));
  }
  candidate.evidence.add(classify_evidence(features, model, threats));
  if (is_contact_sensor(model.kind)) candidate.contact_evidence = true;
  if (candidate.status == CandidateStatus::confirmed && candidate.contact_evidence &&
      candidate.max_class_posterior() >= gate) {
    transition(candidate, CandidateStatus::classified);
  }
}

void EvidenceGrid::add(CellIndex c, const std::array<double, kThreatClassCount>& loglik, bool contact) {
  sums_[c].add(loglik);
  if (contact) ++contact_[c];
}

ClassEvidence EvidenceGrid::neighbourhood(const WorldGrid& grid, CellIndex c, bool* contact) const {
  ClassEvidence out;
  bool any_contact = false;
  const int cx = grid.x_of(c);
  const int cy = grid.y_of(c);
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (!grid.in_bounds(cx + dx, cy + dy)) continue;
      const CellIndex n = grid.index(cx + dx, cy + dy);
      out += sums_[n];
      any_contact = any_contact || contact_[n] > 0;
    }
  }
  if (contact) *contact = any_contact;
  return out;
}

}  // namespace ciedsim
