#include "ciedsim/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ciedsim/errors.hpp"

namespace ciedsim {
namespace {

constexpr double kShallowDepth = 0.1;

double depth_gain(const SensorModel& m, double depth) noexcept {
  if (depth > m.max_depth) return 0.0;
  if (is_vision_sensor(m.kind)) {
    if (depth == 0.0) return 1.0;
    return depth <= kShallowDepth ? m.surface_cue : 0.0;
  }
  return 1.0;
}

// Integral of decay^d over [a, b].
double decay_integral(double decay, double a, double b) noexcept {
  if (b <= a) return 0.0;
  if (decay == 1.0) return b - a;
  if (decay <= 0.0) return 0.0;
  const double l = std::log(decay);
  return (std::pow(decay, b) - std::pow(decay, a)) / l;
}

// E[clamp(X, 0, 1)] for X ~ N(mu, sd): integral over t in [0,1] of P(X > t).
double expected_clamped_normal(double mu, double sd) noexcept {
  if (sd <= 0.0) return std::clamp(mu, 0.0, 1.0);
  constexpr int kIntervals = 1000;  // Simpson, even count
  const double h = 1.0 / kIntervals;
  auto survival = [&](double t) { return 0.5 * std::erfc((t - mu) / (sd * std::numbers::sqrt2)); };
  double acc = survival(0.0) + survival(1.0);
  for (int i = 1; i < kIntervals; ++i) acc += (i % 2 ? 4.0 : 2.0) * survival(i * h);
  return acc * h / 3.0;
}

double expected_clamped(const ChannelProfile& p) noexcept {
  return p.weight_a * expected_clamped_normal(p.mean_a, p.sd) +
         (1.0 - p.weight_a) * expected_clamped_normal(p.mean_b, p.sd);
}

double log_normal_pdf(double x, double mean, double sd) noexcept {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double log_mixture_pdf(double x, const ChannelProfile& p, double noise) noexcept {
  const double sd = std::sqrt(p.sd * p.sd + noise * noise);
  if (p.weight_a >= 1.0) return log_normal_pdf(x, p.mean_a, sd);
  if (p.weight_a <= 0.0) return log_normal_pdf(x, p.mean_b, sd);
  const double a = std::log(p.weight_a) + log_normal_pdf(x, p.mean_a, sd);
  const double b = std::log(1.0 - p.weight_a) + log_normal_pdf(x, p.mean_b, sd);
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::config, std::string(what) + " outside [0,1]");
}

}  // namespace

void validate(const SensorModel& m) {
  require_probability(m.p_det_base, "p_det_base");
  require_probability(m.depth_decay, "depth_decay");
  require_probability(m.p_fp, "p_fp");
  require_probability(m.surface_cue, "surface_cue");
  if (m.footprint_radius < 0) throw Error(ErrorCode::config, "footprint_radius must be >= 0");
  if (!(m.max_depth >= 0.0)) throw Error(ErrorCode::config, "max_depth must be >= 0");
  if (!(m.feature_noise >= 0.0)) throw Error(ErrorCode::config, "feature_noise must be >= 0");
  if (!(m.p_fp < m.p_det_base)) {
    throw Error(ErrorCode::config,
                std::string("sensor ") + std::string(to_string(m.kind)) + ": p_fp must be < p_det_base");
  }
}

SensorTable SensorTable::defaults() {
  SensorTable t;
  auto put = [&](SensorModel m) { t.models[static_cast<std::size_t>(m.kind)] = m; };
  //    kind                     radius max_depth base  decay p_fp  noise
  put({SensorKind::rgb,           3,    0.1,      0.85, 1.0,  0.01, 0.10});
  put({SensorKind::ir,            2,    0.1,      0.80, 1.0,  0.01, 0.10});
  put({SensorKind::hyperspectral, 2,    0.1,      0.80, 1.0,  0.01, 0.10});
  put({SensorKind::gpr,           2,    1.5,      0.85, 0.7,  0.03, 0.10});
  put({SensorKind::emi,           1,    0.5,      0.95, 0.6,  0.03, 0.10});
  put({SensorKind::xrb,           0,    0.5,      0.95, 0.8,  0.02, 0.05});
  put({SensorKind::raman,         0,    0.5,      0.90, 0.9,  0.01, 0.05});
  return t;
}

const SensorModel& SensorTable::get(SensorKind k) const {
  const SensorModel* m = find(k);
  if (!m) throw Error(ErrorCode::config, std::string("no detection model for ") + std::string(to_string(k)));
  return *m;
}

std::array<bool, kChannelCount> observed_channels(SensorKind kind) noexcept {
  switch (kind) {
    case SensorKind::emi: return {true, false, false, false};
    case SensorKind::raman: return {false, true, false, false};
    case SensorKind::gpr: return {false, false, true, false};
    case SensorKind::xrb: return {true, false, true, false};
    case SensorKind::rgb:
    case SensorKind::ir:
    case SensorKind::hyperspectral: return {false, false, false, true};
    case SensorKind::lidar_nav: break;
  }
  return {false, false, false, false};
}

std::size_t SensorReading::detection_count() const noexcept {
  return static_cast<std::size_t>(std::count(detections.begin(), detections.end(), std::uint8_t{1}));
}

double channel_gain(const SensorModel& model, const Threat& threat) noexcept {
  if (threat.depth > model.max_depth) return 0.0;
  switch (model.kind) {
    case SensorKind::emi: return std::clamp(threat.metal_fraction, 0.0, 1.0);
    case SensorKind::rgb:
    case SensorKind::ir:
    case SensorKind::hyperspectral: return depth_gain(model, threat.depth);
    case SensorKind::gpr:
    case SensorKind::xrb:
    case SensorKind::raman: return 1.0;
    case SensorKind::lidar_nav: return 0.0;
  }
  return 0.0;
}

double p_det(const SensorModel& model, const Threat& threat) noexcept {
  if (threat.depth > model.max_depth) return 0.0;
  const double p = model.p_det_base * std::pow(model.depth_decay, threat.depth) * channel_gain(model, threat);
  return std::clamp(p, 0.0, 1.0);
}

double p_det_effective(const SensorModel& model, const ThreatModel& threats) {
  double total_weight = 0.0;
  for (const ClassProfile& c : threats.classes) total_weight += c.weight;
  if (!(total_weight > 0.0)) throw Error(ErrorCode::config, "threat class weights sum to zero");

  const double dmin = threats.buried_depth_min;
  const double dmax = threats.buried_depth_max;
  double buried_depth_term = 0.0;  // E[decay^d * depth_gain(d)] over the buried range
  if (dmax > dmin) {
    const double cap = is_vision_sensor(model.kind) ? std::min(kShallowDepth, model.max_depth) : model.max_depth;
    const double integral = decay_integral(model.depth_decay, dmin, std::min(dmax, cap));
    buried_depth_term = integral * (is_vision_sensor(model.kind) ? model.surface_cue : 1.0) / (dmax - dmin);
  } else {
    buried_depth_term = std::pow(model.depth_decay, dmin) * depth_gain(model, dmin);
  }

  double acc = 0.0;
  for (const ClassProfile& c : threats.classes) {
    const double depth_term = c.p_surface * depth_gain(model, 0.0) + (1.0 - c.p_surface) * buried_depth_term;
    const double metal_term = model.kind == SensorKind::emi ? expected_clamped(c.metal) : 1.0;
    acc += c.weight / total_weight * depth_term * metal_term;
  }
  return std::clamp(model.p_det_base * acc, 0.0, 1.0);
}

FeatureVector channel_truth(const Threat& threat, const ThreatModel& model) noexcept {
  return FeatureVector{threat.metal_fraction,
                       threat.charge == Charge::high_explosive ? model.chem_high : model.chem_low,
                       threat.container_density,
                       threat.surface() ? model.visual_surface : model.visual_buried};
}

std::vector<CellIndex> footprint(const WorldGrid& grid, CellIndex centre, int radius) {
  std::vector<CellIndex> out;
  const int cx = grid.x_of(centre);
  const int cy = grid.y_of(centre);
  const int r2 = radius * radius;
  for (int y = std::max(0, cy - radius); y <= std::min(grid.height() - 1, cy + radius); ++y) {
    for (int x = std::max(0, cx - radius); x <= std::min(grid.width() - 1, cx + radius); ++x) {
      const int dx = x - cx;
      const int dy = y - cy;
      if (dx * dx + dy * dy <= r2) out.push_back(grid.index(x, y));
    }
  }
  return out;
}

SensorReading scan(const SensorModel& model, Vec2 pose, const WorldGrid& grid,
                   const ThreatIndex& truth, const ThreatModel& threat_model, RngStream& rng,
                   Tick tick, const ScanOptions& options) {
  SensorReading r;
  r.kind = model.kind;
  r.tick = tick;

  Vec2 actual = pose;
  if (options.pose_sigma > 0.0) {
    actual.x += options.pose_sigma * rng.normal();
    actual.y += options.pose_sigma * rng.normal();
  }
  r.true_pose_error = distance(actual, pose);
  const double cs = grid.cell_size();
  actual.x = std::clamp(actual.x, 0.0, std::nextafter(grid.width() * cs, 0.0));
  actual.y = std::clamp(actual.y, 0.0, std::nextafter(grid.height() * cs, 0.0));
  const CellIndex centre = *grid.cell_at(actual);

  r.cells = footprint(grid, centre, model.footprint_radius);
  r.detections.assign(r.cells.size(), 0);
  const auto observed = observed_channels(model.kind);
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const CellIndex c = r.cells[i];
    const Threat* threat = truth.at(c);
    double p = model.p_fp;
    if (threat) p = options.generative_match ? options.p_det_eff : p_det(model, *threat);
    if (!rng.bernoulli(p)) continue;
    r.detections[i] = 1;
    FeatureHit hit{c, {}};
    const FeatureVector mean = threat ? channel_truth(*threat, threat_model) : threat_model.clutter_means;
    for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
      if (observed[ch]) hit.features[ch] = mean[ch] + model.feature_noise * rng.normal();
    }
    r.features.push_back(hit);
  }
  return r;
}

double likelihood_ratio(const DetectionOdds& odds, bool detected) {
  if (!(odds.p_fp > 0.0 && odds.p_fp < 1.0)) {
    throw Error(ErrorCode::degenerate_model, "p_fp must lie strictly inside (0,1); clamp with eps");
  }
  if (!(odds.p_det_eff > 0.0 && odds.p_det_eff < 1.0)) {
    throw Error(ErrorCode::degenerate_model, "p_det_eff must lie strictly inside (0,1); clamp with eps");
  }
  if (detected) return std::log(odds.p_det_eff / odds.p_fp);
  return std::log((1.0 - odds.p_det_eff) / (1.0 - odds.p_fp));
}

DetectionOdds clamp_odds(DetectionOdds odds, double eps) noexcept {
  return {std::clamp(odds.p_det_eff, eps, 1.0 - eps), std::clamp(odds.p_fp, eps, 1.0 - eps)};
}

std::array<double, kThreatClassCount> classify_evidence(std::span<const double> features,
                                                        const SensorModel& model,
                                                        const ThreatModel& tm) {
  if (features.size() != kChannelCount) {
    throw Error(ErrorCode::unknown_feature_shape,
                "expected " + std::to_string(kChannelCount) + " feature channels, got " +
                    std::to_string(features.size()));
  }
  const auto observed = observed_channels(model.kind);
  if (std::none_of(observed.begin(), observed.end(), [](bool b) { return b; })) {
    throw Error(ErrorCode::unknown_feature_shape,
                std::string(to_string(model.kind)) + " produces no classification features");
  }
  std::array<double, kThreatClassCount> out{};
  for (std::size_t c = 0; c < kThreatClassCount; ++c) {
    const ClassProfile& p = tm.classes[c];
    double acc = 0.0;
    if (observed[kMetal]) acc += log_mixture_pdf(features[kMetal], p.metal, model.feature_noise);
    if (observed[kDensity]) acc += log_mixture_pdf(features[kDensity], p.density, model.feature_noise);
    if (observed[kChem]) {
      acc += log_mixture_pdf(features[kChem], {p.p_high_explosive, tm.chem_high, tm.chem_low, tm.chem_sd},
                             model.feature_noise);
    }
    if (observed[kVisual]) {
      acc += log_mixture_pdf(features[kVisual], {p.p_surface, tm.visual_surface, tm.visual_buried, tm.visual_sd},
                             model.feature_noise);
    }
    out[c] = acc;
  }
  return out;
}

}  // namespace ciedsim
