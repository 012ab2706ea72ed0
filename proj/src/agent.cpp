#include <algorithm>

#include "ciedsim/errors.hpp"
#include "ciedsim/mission.hpp"

namespace ciedsim {

namespace {

constexpr Tick kResyncWindow = 30;  // ticks of own readings resent to a new brain

}  // namespace

RobotAgent::RobotAgent(std::shared_ptr<const MissionContext> ctx, RobotState state)
    : ctx_(std::move(ctx)), state_(std::move(state)) {}

StatusBody RobotAgent::status() const {
  StatusBody s;
  s.kind = state_.kind;
  s.pose = state_.pose;
  s.battery = state_.battery;
  s.health = state_.health;
  if (task_) s.task = task_->id;
  return s;
}

void RobotAgent::drop_task() {
  task_.reset();
  waypoint_ = 0;
  leg_.clear();
  leg_target_.reset();
  at_waypoint_ = false;
  state_.current_task.reset();
  state_.arm_deployed = false;
  state_.arm_dwell_elapsed = 0.0;
}

void RobotAgent::accept_task(const TaskBody& body) {
  if (state_.health != Health::ok) return;
  if (!body.task) {
    if (task_ && task_->id == body.cancel_id) drop_task();
    return;
  }
  const Task& t = *body.task;
  if (auto done = completed_.find(t.id); done != completed_.end()) {
    // The brain missed our completion; report it again.
    pending_done_[t.id] = PendingDone{done->second, std::nullopt};
    return;
  }
  if (task_ && task_->id == t.id) return;
  drop_task();
  task_ = t;
  state_.current_task = TaskRef{t.id, t.kind};
}

void RobotAgent::queue(const ReadingPtr& r) {
  pending_readings_[r->id] = Pending{r, std::nullopt};
  recent_.push_back(r);
}

void RobotAgent::queue_done(const TaskDone& d) { pending_done_[d.task_id] = PendingDone{d, std::nullopt}; }

void RobotAgent::communicate(Tick now, std::span<const Message> inbox, NodeId brain, bool linked, bool self_brain,
                             std::uint32_t retransmit_interval, std::vector<Outgoing>& out) {
  if (state_.health != Health::ok) return;
  const bool brain_changed = brain != brain_;
  brain_ = brain;
  for (const Message& m : inbox) {
    if (!m.payload) continue;
    if (const auto* tb = std::get_if<TaskBody>(&m.payload->body)) {
      if (m.src == brain_) accept_task(*tb);
    } else if (const auto* ack = std::get_if<AckBody>(&m.payload->body)) {
      for (std::uint64_t id : ack->readings) pending_readings_.erase(id);
      for (std::uint64_t id : ack->done) pending_done_.erase(id);
    }
  }
  if (brain_changed) {
    // The new brain may lack what the old one acknowledged recently.
    for (const ReadingPtr& r : recent_) pending_readings_.try_emplace(r->id, Pending{r, std::nullopt});
    for (auto& [id, p] : pending_readings_) p.last_sent.reset();
    for (auto& [id, p] : pending_done_) p.last_sent.reset();
  }
  while (!recent_.empty() && recent_.front()->tick + kResyncWindow < now) recent_.erase(recent_.begin());
  if (self_brain) {
    pending_readings_.clear();
    pending_done_.clear();
    return;
  }
  if (!linked) return;

  auto status_payload = std::make_shared<Payload>();
  status_payload->body = status();
  out.push_back({brain_, MessageKind::status, std::move(status_payload)});

  ReadingsBody batch;
  auto due = [&](std::optional<Tick>& last) {
    if (last && now < *last + retransmit_interval) return false;
    last = now;
    return true;
  };
  for (auto& [id, p] : pending_readings_) {
    if (due(p.last_sent)) batch.readings.push_back(p.reading);
  }
  for (auto& [id, p] : pending_done_) {
    if (due(p.last_sent)) batch.done.push_back(p.done);
  }
  if (!batch.readings.empty() || !batch.done.empty()) {
    auto p = std::make_shared<Payload>();
    p->body = std::move(batch);
    out.push_back({brain_, MessageKind::reading, std::move(p)});
  }
}

void RobotAgent::plan_leg(CellIndex target) {
  const WorldGrid& g = *ctx_->grid;
  leg_.clear();
  leg_target_ = target;
  const auto here = g.cell_at(state_.pose);
  const auto cells = plan_path(g, here ? *here : ctx_->deployment, target, state_.kind);
  for (std::size_t i = 1; i < cells.size(); ++i) leg_.push_back(g.center(cells[i]));
  if (cells.size() <= 1) leg_.push_back(g.center(target));
}

void RobotAgent::move(double dt) {
  at_waypoint_ = false;
  if (!state_.can_move()) return;
  const WorldGrid& g = *ctx_->grid;
  const auto here = g.cell_at(state_.pose);
  const bool home = here && *here == ctx_->deployment;
  if (home) {
    state_.battery = state_.battery_capacity;
    returning_ = false;
  }

  std::optional<CellIndex> target;
  if (!returning_ && task_ && waypoint_ < task_->targets.size()) {
    target = task_->targets[waypoint_];
    const double trip = 1.5 * distance(state_.pose, ctx_->deployment_pos) / state_.speed;
    if (!home && state_.battery <= trip + ctx_->fleet.return_reserve) {
      returning_ = true;
      leg_target_.reset();
    }
  }
  if (returning_) target = ctx_->deployment;
  if (!target) return;

  if (here && *here == *target && distance(state_.pose, g.center(*target)) < 1e-9) {
    if (!returning_) at_waypoint_ = true;
    return;
  }
  if (leg_target_ != target) {
    try {
      plan_leg(*target);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::unreachable || returning_) throw;
      ++waypoint_;  // unreachable waypoint: skip it
      leg_target_.reset();
      return;
    }
  }
  const MotionResult m = step_motion(state_, leg_, dt);
  state_ = m.robot;
  leg_.erase(leg_.begin(), leg_.begin() + static_cast<std::ptrdiff_t>(m.points_reached));
  if (!leg_.empty()) return;
  leg_target_.reset();
  if (returning_) {
    state_.battery = state_.battery_capacity;
    returning_ = false;
  } else {
    at_waypoint_ = true;
  }
}

std::vector<ReadingPtr> RobotAgent::scan(const ScanContext& ctx, RngStream& rng, Tick now, double dt) {
  std::vector<ReadingPtr> out;
  if (!at_waypoint_ || !task_ || state_.health != Health::ok) return out;
  auto readings = execute_scan_action(state_, task_->kind, ctx, rng, now, dt);
  const bool contact = task_->kind == TaskKind::confirm_candidate;
  if (contact && readings.empty()) return out;  // arm still dwelling
  std::vector<std::uint64_t> ids;
  for (SensorReading& r : readings) {
    r.id = (static_cast<std::uint64_t>(state_.id) << 40) | next_reading_++;
    ids.push_back(r.id);
    out.push_back(std::make_shared<const SensorReading>(std::move(r)));
  }
  if (contact) {
    state_.arm_deployed = false;
    state_.arm_dwell_elapsed = 0.0;
  }
  ++waypoint_;
  if (waypoint_ >= task_->targets.size()) {
    TaskDone d;
    d.task_id = task_->id;
    d.robot = state_.id;
    d.tick = now;
    d.target = task_->targets.back();
    d.reading_ids = std::move(ids);
    completed_.emplace(d.task_id, d);
    new_done_.push_back(std::move(d));
    drop_task();
  }
  return out;
}

}  // namespace ciedsim
