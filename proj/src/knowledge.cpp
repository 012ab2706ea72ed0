#include <algorithm>
#include <cmath>

#include "ciedsim/errors.hpp"
#include "ciedsim/mission.hpp"

namespace ciedsim {

std::string_view to_string(MissionPhase p) noexcept {
  constexpr std::string_view names[] = {"Explore", "SpecialisedDetection", "Confirmation", "Complete"};
  return names[static_cast<std::size_t>(p)];
}

std::optional<MissionPhase> mission_phase_from_string(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kMissionPhaseCount; ++i) {
    if (to_string(static_cast<MissionPhase>(i)) == s) return static_cast<MissionPhase>(i);
  }
  return std::nullopt;
}

std::string_view to_string(TaskState s) noexcept {
  constexpr std::string_view names[] = {"pending", "assigned", "done", "abandoned"};
  return names[static_cast<std::size_t>(s)];
}

std::uint64_t make_task_id(TaskKind kind, std::uint32_t round, std::uint32_t key) noexcept {
  return (static_cast<std::uint64_t>(kind) << 56) | (static_cast<std::uint64_t>(round & 0xffffffu) << 32) | key;
}
TaskKind task_id_kind(std::uint64_t id) noexcept { return static_cast<TaskKind>(id >> 56); }
std::uint32_t task_id_round(std::uint64_t id) noexcept { return static_cast<std::uint32_t>((id >> 32) & 0xffffffu); }
std::uint32_t task_id_key(std::uint64_t id) noexcept { return static_cast<std::uint32_t>(id); }

bool task_eligible(TaskKind task, RobotKind robot) noexcept {
  switch (task) {
    case TaskKind::explore_region: return robot == RobotKind::suav;
    case TaskKind::gpr_sweep: return robot == RobotKind::luav;
    case TaskKind::emi_scan: return robot == RobotKind::sugv || robot == RobotKind::lugv;
    case TaskKind::confirm_candidate: return robot == RobotKind::lugv;
  }
  return false;
}

namespace {

std::uint32_t reading_size(const SensorReading& r) noexcept {
  return 32 + 5 * static_cast<std::uint32_t>(r.cells.size()) + 36 * static_cast<std::uint32_t>(r.features.size());
}

int status_rank(CandidateStatus s) noexcept {
  switch (s) {
    case CandidateStatus::suspected: return 0;
    case CandidateStatus::confirmed: return 1;
    case CandidateStatus::dismissed: return 2;
    case CandidateStatus::classified: return 3;
  }
  return 0;
}

// Total order used to settle conflicting decisions the same way on every replica.
auto decision_key(const Decision& d) {
  return std::make_tuple(status_rank(d.status), d.by_operator, !d.low_confidence,
                         -static_cast<int>(d.cls));
}

}  // namespace

std::uint32_t RecordBatch::size_bytes() const noexcept {
  std::uint32_t n = 8;
  for (const auto& r : readings) n += reading_size(*r);
  n += 40 * static_cast<std::uint32_t>(done.size());
  n += 12 * static_cast<std::uint32_t>(decisions.size());
  return n;
}

std::uint32_t payload_size(const Payload& p) noexcept {
  struct Visitor {
    std::uint32_t operator()(const StatusBody&) const { return 48; }
    std::uint32_t operator()(const ReadingsBody& b) const {
      std::uint32_t n = 16 + 40 * static_cast<std::uint32_t>(b.done.size());
      for (const auto& r : b.readings) n += reading_size(*r);
      return n;
    }
    std::uint32_t operator()(const AckBody& b) const {
      return 16 + 8 * static_cast<std::uint32_t>(b.readings.size() + b.done.size());
    }
    std::uint32_t operator()(const TaskBody& b) const {
      return 24 + (b.task ? 4 * static_cast<std::uint32_t>(b.task->targets.size()) : 0);
    }
    std::uint32_t operator()(const DeltaBody& b) const { return b.records.size_bytes(); }
    std::uint32_t operator()(const SyncBody& b) const { return b.records.size_bytes(); }
  };
  return std::visit(Visitor{}, p.body);
}

// ---------------------------------------------------------------------------

std::vector<CellIndex> cover_waypoints(const WorldGrid& grid, std::span<const CellIndex> cells, int radius,
                                       const std::vector<std::uint8_t>& mask) {
  std::vector<CellIndex> out;
  if (cells.empty()) return out;
  const int s = std::max(1, static_cast<int>(std::floor(radius * std::sqrt(2.0))));
  const int off = (s - 1) / 2;
  int x0 = grid.width(), y0 = grid.height(), x1 = -1, y1 = -1;
  std::vector<std::uint8_t> need(grid.size(), 0);
  std::size_t remaining = 0;
  for (CellIndex c : cells) {
    if (need[c]) continue;
    need[c] = 1;
    ++remaining;
    x0 = std::min(x0, grid.x_of(c));
    x1 = std::max(x1, grid.x_of(c));
    y0 = std::min(y0, grid.y_of(c));
    y1 = std::max(y1, grid.y_of(c));
  }

  auto take = [&](CellIndex w) {
    bool useful = false;
    const auto fp = footprint(grid, w, radius);
    for (CellIndex c : fp) useful = useful || need[c];
    if (!useful) return;
    for (CellIndex c : fp) {
      if (need[c]) {
        need[c] = 0;
        --remaining;
      }
    }
    out.push_back(w);
  };

  bool reverse = false;
  for (int by = y0; by <= y1; by += s) {
    const int cy = std::min(by + off, y1);
    std::vector<int> xs;
    for (int bx = x0; bx <= x1; bx += s) xs.push_back(std::min(bx + off, x1));
    if (reverse) std::reverse(xs.begin(), xs.end());
    reverse = !reverse;
    for (int cx : xs) {
      // Nearest usable cell to the lattice point, searched ring by ring.
      std::optional<CellIndex> pick;
      for (int ring = 0; ring <= s && !pick; ++ring) {
        for (int dy = -ring; dy <= ring && !pick; ++dy) {
          for (int dx = -ring; dx <= ring && !pick; ++dx) {
            if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
            const int x = cx + dx, y = cy + dy;
            if (!grid.in_bounds(x, y)) continue;
            const CellIndex c = grid.index(x, y);
            if (mask[c]) pick = c;
          }
        }
      }
      if (pick) take(*pick);
    }
  }
  for (CellIndex c : cells) {
    if (remaining == 0) break;
    if (need[c] && mask[c]) take(c);
  }
  return out;
}

std::shared_ptr<const MissionContext> make_mission_context(const Scenario& s, bool supervised) {
  auto ctx = std::make_shared<MissionContext>();
  ctx->grid = &s.grid;
  ctx->config = s.mission;
  ctx->fleet = s.fleet;
  ctx->threat_model = s.threat_model;
  ctx->fusion = FusionModel::build(s.fleet.sensors, s.threat_model, s.fleet.clamp_degenerate, s.fleet.clamp_eps);
  ctx->deployment = s.deployment_cell;
  ctx->deployment_pos = s.grid.center(s.deployment_cell);
  ctx->mode = s.controller_mode;
  ctx->supervised = supervised;
  NodeId next = 1;
  for (RobotKind k : kAllRobotKinds) {
    for (int i = 0; i < s.fleet.kind(k).count; ++i) ctx->roster.push_back({next++, k});
  }
  for (RobotKind k : kAllRobotKinds) {
    ctx->reachable[static_cast<std::size_t>(k)] = reachable_mask(s.grid, s.deployment_cell, k);
  }
  ctx->coverage_mask = ctx->reachable[static_cast<std::size_t>(RobotKind::suav)];
  ctx->coverage_total =
      static_cast<std::uint32_t>(std::count(ctx->coverage_mask.begin(), ctx->coverage_mask.end(), 1));

  const int ts = s.mission.tile_size;
  const int tiles_x = (s.grid.width() + ts - 1) / ts;
  const int tiles_y = (s.grid.height() + ts - 1) / ts;
  ctx->tiles.assign(static_cast<std::size_t>(tiles_x * tiles_y), {});
  ctx->tile_of.assign(s.grid.size(), 0);
  for (CellIndex c = 0; c < s.grid.size(); ++c) {
    const auto t = static_cast<std::uint32_t>((s.grid.y_of(c) / ts) * tiles_x + s.grid.x_of(c) / ts);
    ctx->tile_of[c] = t;
    if (ctx->coverage_mask[c]) ctx->tiles[t].push_back(c);
  }
  const SensorModel* rgb = s.fleet.sensors.find(SensorKind::rgb);
  const SensorModel* gpr = s.fleet.sensors.find(SensorKind::gpr);
  for (const auto& cells : ctx->tiles) {
    ctx->explore_waypoints.push_back(
        cover_waypoints(s.grid, cells, rgb ? rgb->footprint_radius : 0, ctx->coverage_mask));
    ctx->sweep_waypoints.push_back(
        cover_waypoints(s.grid, cells, gpr ? gpr->footprint_radius : 0, ctx->coverage_mask));
  }
  return ctx;
}

// ---------------------------------------------------------------------------

Knowledge::Knowledge(std::shared_ptr<const MissionContext> ctx) : ctx_(std::move(ctx)) {
  const WorldGrid& g = *ctx_->grid;
  heatmap_ = ThreatHeatmap(g);
  evidence_ = EvidenceGrid(g.size());
  covered_.assign(g.size(), 0);
  tile_covered_.assign(ctx_->tiles.size(), 0);
  gpr_.assign(g.size(), 0);
  emi_.assign(g.size(), 0);
  contact_.assign(g.size(), 0);
  vision_hits_.assign(g.size(), 0);
}

bool Knowledge::add_reading(const ReadingPtr& reading) {
  if (!reading_ids_.insert(reading->id).second) return false;
  const SensorReading& r = *reading;
  const MissionContext& ctx = *ctx_;
  if (ctx.fusion.has(r.kind)) integrate_reading(heatmap_, r, ctx.fusion);
  for (CellIndex c : r.cells) {
    if (!covered_[c] && ctx.coverage_mask[c]) {
      covered_[c] = 1;
      ++covered_count_;
      ++tile_covered_[ctx.tile_of[c]];
    }
    if (r.kind == SensorKind::gpr) gpr_[c] = 1;
    if (r.kind == SensorKind::emi) emi_[c] = 1;
    if (is_contact_sensor(r.kind)) contact_[c] = 1;
  }
  if (is_vision_sensor(r.kind)) {
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
      if (r.detections[i]) ++vision_hits_[r.cells[i]];
    }
  }
  if (const SensorModel* model = ctx.fleet.sensors.find(r.kind)) {
    const bool contact = is_contact_sensor(r.kind);
    for (const FeatureHit& f : r.features) {
      evidence_.add(f.cell, classify_evidence(f.features, *model, ctx.threat_model), contact);
    }
  }
  reading_log_.push_back(reading);
  ++version_;
  return true;
}

bool Knowledge::add_done(const TaskDone& done) {
  if (done_ids_.count(done.task_id)) return false;
  done_ids_.emplace(done.task_id, done_log_.size());
  done_log_.push_back(done);
  const TaskKind kind = task_id_kind(done.task_id);
  if (kind == TaskKind::emi_scan || kind == TaskKind::confirm_candidate) {
    ++visits_[{static_cast<std::uint8_t>(kind), task_id_key(done.task_id)}];
  }
  ++version_;
  return true;
}

bool Knowledge::add_decision(const Decision& d) {
  auto it = decisions_.find(d.cell);
  if (it != decisions_.end() && !(decision_key(d) > decision_key(it->second))) return false;
  decisions_[d.cell] = d;
  decision_log_.push_back(d);
  ++version_;
  return true;
}

std::size_t Knowledge::merge(const RecordBatch& batch) {
  std::size_t added = 0;
  for (const auto& r : batch.readings) added += add_reading(r) ? 1 : 0;
  for (const auto& d : batch.done) added += add_done(d) ? 1 : 0;
  for (const auto& d : batch.decisions) added += add_decision(d) ? 1 : 0;
  note_phase(batch.phase);
  return added;
}

const TaskDone* Knowledge::done(std::uint64_t task_id) const {
  auto it = done_ids_.find(task_id);
  return it == done_ids_.end() ? nullptr : &done_log_[it->second];
}

std::uint32_t Knowledge::visits(TaskKind kind, CellIndex cell) const {
  auto it = visits_.find({static_cast<std::uint8_t>(kind), cell});
  return it == visits_.end() ? 0 : it->second;
}

double Knowledge::coverage() const noexcept {
  const auto total = ctx_->coverage_total;
  return total == 0 ? 1.0 : static_cast<double>(covered_count_) / total;
}

double Knowledge::tile_coverage(std::uint32_t tile) const noexcept {
  const auto total = ctx_->tiles[tile].size();
  return total == 0 ? 1.0 : static_cast<double>(tile_covered_[tile]) / static_cast<double>(total);
}

const Decision* Knowledge::decision(CellIndex c) const {
  auto it = decisions_.find(c);
  return it == decisions_.end() ? nullptr : &it->second;
}

RecordBatch Knowledge::all_records() const {
  RecordBatch b;
  b.readings = reading_log_;
  b.done = done_log_;
  b.decisions = decision_log_;
  b.phase = phase_;
  return b;
}

std::vector<Candidate> current_candidates(const Knowledge& k) {
  const MissionContext& ctx = k.context();
  const WorldGrid& grid = *ctx.grid;
  std::vector<Candidate> out;
  auto make = [&](CellIndex cell, CandidateStatus status) {
    Candidate c;
    c.id = cell;
    c.cell = cell;
    c.posterior = k.heatmap().posterior(cell);
    bool contact = false;
    c.evidence = k.evidence().neighbourhood(grid, cell, &contact);
    c.contact_evidence = contact;
    c.status = status;
    c.confirm_attempts = k.visits(TaskKind::confirm_candidate, cell);
    if (const Decision* d = k.decision(cell)) c.low_confidence = d->low_confidence;
    return c;
  };
  for (const auto& [cell, d] : k.decisions()) {
    if (d.status == CandidateStatus::confirmed || d.status == CandidateStatus::classified) {
      out.push_back(make(cell, d.status));
    }
  }
  for (const HeatBlob& blob : extract_candidates(k.heatmap(), ctx.config.candidate_threshold)) {
    const bool decided =
        std::any_of(blob.cells.begin(), blob.cells.end(), [&](CellIndex c) { return k.decision(c) != nullptr; });
    if (!decided) out.push_back(make(blob.cell, CandidateStatus::suspected));
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
  return out;
}

// ---------------------------------------------------------------------------

std::int32_t DistanceOracle::distance(CellIndex from, CellIndex to, RobotKind kind) {
  const std::uint64_t key = (static_cast<std::uint64_t>(to) << 8) | static_cast<std::uint64_t>(kind);
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, distance_field(*grid_, to, kind)).first;
  return it->second[from];
}

std::vector<Assignment> allocate_tasks(MissionPhase phase, std::span<const Task> pending,
                                       std::span<const IdleRobot> idle, DistanceOracle& distances) {
  std::vector<Assignment> out;
  if (phase == MissionPhase::complete || idle.empty()) return out;
  std::vector<const Task*> order;
  for (const Task& t : pending) {
    if (t.state == TaskState::pending && !t.targets.empty()) order.push_back(&t);
  }
  std::sort(order.begin(), order.end(), [](const Task* a, const Task* b) {
    if (a->priority != b->priority) return a->priority > b->priority;
    return a->id < b->id;
  });
  std::vector<std::uint8_t> used(idle.size(), 0);
  std::size_t free = idle.size();
  for (const Task* t : order) {
    if (free == 0) break;
    std::optional<std::size_t> best;
    std::int32_t best_d = 0;
    for (std::size_t i = 0; i < idle.size(); ++i) {
      if (used[i] || !task_eligible(t->kind, idle[i].kind)) continue;
      const std::int32_t d = distances.distance(idle[i].cell, t->targets.front(), idle[i].kind);
      if (d < 0) continue;
      if (!best || d < best_d || (d == best_d && idle[i].id < idle[*best].id)) {
        best = i;
        best_d = d;
      }
    }
    if (!best) continue;
    used[*best] = 1;
    --free;
    out.push_back({t->id, idle[*best].id});
  }
  return out;
}

PhaseDecision advance_phase(MissionPhase current, const GateStatus& gates, const MissionConfig& config,
                            bool supervised) {
  std::optional<MissionPhase> next;
  switch (current) {
    case MissionPhase::explore:
      if (gates.coverage >= config.coverage_gate) next = MissionPhase::specialised_detection;
      break;
    case MissionPhase::specialised_detection:
      if (gates.sweep_done && gates.candidates_scanned) next = MissionPhase::confirmation;
      break;
    case MissionPhase::confirmation:
      if (gates.candidates_resolved) next = MissionPhase::complete;
      break;
    case MissionPhase::complete:
      break;
  }
  if (!next) return {current, std::nullopt};
  if (supervised) return {current, next};
  return {*next, std::nullopt};
}

std::string_view to_string(CommandKind k) noexcept {
  constexpr std::string_view names[] = {"approve_phase", "retask", "confirm_candidate", "dismiss_candidate",
                                        "pause",         "resume", "abort"};
  return names[static_cast<std::size_t>(k)];
}

std::optional<CommandKind> command_kind_from_string(std::string_view s) noexcept {
  for (std::size_t i = 0; i <= static_cast<std::size_t>(CommandKind::abort); ++i) {
    if (to_string(static_cast<CommandKind>(i)) == s) return static_cast<CommandKind>(i);
  }
  return std::nullopt;
}

}  // namespace ciedsim
