#include <algorithm>
#include <cmath>

#include "ciedsim/errors.hpp"
#include "ciedsim/mission.hpp"

namespace ciedsim {

namespace {

std::string quote(std::string_view s) { return "\"" + std::string(s) + "\""; }
std::string num(std::uint64_t v) { return std::to_string(v); }

// Argmax cells of the 8-connected components of hot, not yet EMI-scanned cells.
std::vector<CellIndex> hot_targets(const Knowledge& k, LogOdds threshold, std::uint32_t max_visits) {
  const MissionContext& ctx = k.context();
  const WorldGrid& g = *ctx.grid;
  const ThreatHeatmap& hm = k.heatmap();
  const std::size_t n = g.size();
  std::vector<std::uint8_t> hot(n, 0);
  bool any = false;
  for (CellIndex c = 0; c < n; ++c) {
    if (hm.log_odds(c).raw < threshold.raw || k.emi_scanned(c)) continue;
    if (!ctx.reachable_by(RobotKind::sugv, c) && !ctx.reachable_by(RobotKind::lugv, c)) continue;
    if (k.visits(TaskKind::emi_scan, c) >= max_visits) continue;
    hot[c] = 1;
    any = true;
  }
  std::vector<CellIndex> out;
  if (!any) return out;
  std::vector<CellIndex> stack;
  for (CellIndex s = 0; s < n; ++s) {
    if (hot[s] != 1) continue;
    CellIndex best = s;
    hot[s] = 2;
    stack.push_back(s);
    while (!stack.empty()) {
      const CellIndex c = stack.back();
      stack.pop_back();
      if (hm.log_odds(c).raw > hm.log_odds(best).raw || (hm.log_odds(c) == hm.log_odds(best) && c < best)) best = c;
      const int cx = g.x_of(c), cy = g.y_of(c);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!g.in_bounds(cx + dx, cy + dy)) continue;
          const CellIndex m = g.index(cx + dx, cy + dy);
          if (hot[m] == 1) {
            hot[m] = 2;
            stack.push_back(m);
          }
        }
      }
    }
    out.push_back(best);
  }
  return out;
}

double mean_prior(const WorldGrid& g, const std::vector<CellIndex>& cells) {
  if (cells.empty()) return 0.0;
  double s = 0.0;
  for (CellIndex c : cells) s += g.at(c).terrain_prior;
  return s / static_cast<double>(cells.size());
}

}  // namespace

Controller::Controller(std::shared_ptr<const MissionContext> ctx, NodeId self)
    : ctx_(std::move(ctx)), self_(self), knowledge_(ctx_), distances_(ctx_->grid) {
  for (const RosterEntry& e : ctx_->roster) {
    RobotView r;
    r.id = e.id;
    r.kind = e.kind;
    r.pose = ctx_->deployment_pos;
    robots_.push_back(r);
  }
  delta_phase_ = knowledge_.phase();
}

void Controller::activate(Tick now) {
  active_ = true;
  phase_ = knowledge_.phase();
  proposal_.reset();
  tasks_.clear();
  for (RobotView& r : robots_) {
    const RobotKind kind = r.kind;
    const NodeId id = r.id;
    r = RobotView{};
    r.id = id;
    r.kind = kind;
    r.pose = ctx_->deployment_pos;
    r.last_seen = now;
  }
  explore_round_ = 0;
  for (const TaskDone& d : knowledge_.done_log()) {
    if (task_id_kind(d.task_id) == TaskKind::explore_region) {
      explore_round_ = std::max(explore_round_, task_id_round(d.task_id));
    }
  }
  seen_version_ = ~0ull;
  delta_readings_ = knowledge_.reading_log().size();
  delta_done_ = knowledge_.done_log().size();
  delta_decisions_ = knowledge_.decision_log().size();
  delta_phase_ = phase_;
}

void Controller::deactivate() {
  active_ = false;
  tasks_.clear();
  proposal_.reset();
  candidates_.clear();
}

RobotView* Controller::robot(NodeId id) {
  for (RobotView& r : robots_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

const RobotView* Controller::robot(NodeId id) const {
  for (const RobotView& r : robots_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

bool Controller::any_alive(RobotKind kind) const {
  return std::any_of(robots_.begin(), robots_.end(), [&](const RobotView& r) {
    return r.kind == kind && !r.lost && r.health == Health::ok;
  });
}

void Controller::emit(std::string kind, std::vector<std::pair<std::string, std::string>> fields) {
  events_.push_back({std::move(kind), std::move(fields)});
}

void Controller::observe_status(NodeId id, const StatusBody& st, Tick now) {
  RobotView* r = robot(id);
  if (!r) return;
  r->known = true;
  r->pose = st.pose;
  r->battery = st.battery;
  r->health = st.health;
  r->reported_task = st.task;
  r->last_seen = now;
  if (r->lost && st.health == Health::ok) {
    r->lost = false;
    emit("robot_back", {{"robot", num(id)}});
  }
}

void Controller::handle(const Message& m, Tick now, std::map<NodeId, AckBody>& acks) {
  if (!m.payload) return;
  const auto& body = m.payload->body;
  if (const auto* st = std::get_if<StatusBody>(&body)) {
    observe_status(m.src, *st, now);
  } else if (const auto* rb = std::get_if<ReadingsBody>(&body)) {
    AckBody& ack = acks[m.src];
    for (const ReadingPtr& r : rb->readings) {
      knowledge_.add_reading(r);
      ack.readings.push_back(r->id);
    }
    for (const TaskDone& d : rb->done) {
      knowledge_.add_done(d);
      ack.done.push_back(d.task_id);
    }
  } else if (const auto* sb = std::get_if<SyncBody>(&body)) {
    knowledge_.merge(sb->records);
    if (sb->records.phase > phase_) {
      emit("phase", {{"from", quote(to_string(phase_))}, {"to", quote(to_string(sb->records.phase))},
                     {"via", quote("merge")}});
      phase_ = sb->records.phase;
      proposal_.reset();
    }
  } else if (const auto* db = std::get_if<DeltaBody>(&body)) {
    knowledge_.merge(db->records);
  }
}

void Controller::step(Tick now, std::span<const Message> inbox, std::span<const NodeId> members,
                      std::vector<Outgoing>& out) {
  std::map<NodeId, AckBody> acks;
  for (const Message& m : inbox) handle(m, now, acks);
  for (auto& [id, ack] : acks) {
    auto p = std::make_shared<Payload>();
    p->body = std::move(ack);
    out.push_back({id, MessageKind::ack, std::move(p)});
  }
  const std::uint32_t timeout = ctx_->config.status_timeout;
  for (RobotView& r : robots_) {
    r.member = std::find(members.begin(), members.end(), r.id) != members.end();
    if (r.lost) continue;
    const bool silent = now > r.last_seen + timeout;
    if (r.health == Health::failed || silent) {
      r.lost = true;
      emit("robot_lost", {{"robot", num(r.id)}, {"reason", quote(r.health == Health::failed ? "failed" : "timeout")}});
      if (r.assigned) {
        auto it = tasks_.find(*r.assigned);
        if (it != tasks_.end()) release(it->second, "robot_lost");
        r.assigned.reset();
      }
    }
  }
  refresh(now, out);
}

void Controller::record_decision(const Decision& d) {
  if (!knowledge_.add_decision(d)) return;
  emit("decision", {{"cell", num(d.cell)},
                    {"status", quote(to_string(d.status))},
                    {"class", quote(to_string(d.cls))},
                    {"low_confidence", d.low_confidence ? "true" : "false"},
                    {"operator", d.by_operator ? "true" : "false"}});
}

void Controller::decide_candidates(Tick now) {
  (void)now;
  const MissionConfig& cfg = ctx_->config;
  const LogOdds threshold = LogOdds::from_double(logit(cfg.candidate_threshold));
  bool changed = false;
  for (const Candidate& c : candidates_) {
    const std::uint32_t visits = knowledge_.visits(TaskKind::confirm_candidate, c.cell);
    if (c.status == CandidateStatus::suspected && phase_ >= MissionPhase::confirmation &&
        !ctx_->reachable_by(RobotKind::lugv, c.cell)) {
      record_decision({c.cell, CandidateStatus::dismissed, ThreatClass::ied, false, false});
      changed = true;
      continue;
    }
    if (visits == 0) continue;
    const TaskDone* last = knowledge_.done(make_task_id(TaskKind::confirm_candidate, visits - 1, c.cell));
    if (!last) continue;
    const bool ready = std::all_of(last->reading_ids.begin(), last->reading_ids.end(),
                                   [&](std::uint64_t id) { return knowledge_.has_reading(id); });
    if (!ready) continue;
    const bool above = knowledge_.heatmap().log_odds(c.cell).raw >= threshold.raw;
    CandidateStatus status = c.status;
    if (status == CandidateStatus::suspected) {
      if (!above) {
        record_decision({c.cell, CandidateStatus::dismissed, ThreatClass::ied, false, false});
        changed = true;
        continue;
      }
      record_decision({c.cell, CandidateStatus::confirmed, c.best_class(), false, false});
      status = CandidateStatus::confirmed;
      changed = true;
    }
    if (status != CandidateStatus::confirmed) continue;
    if (c.contact_evidence && c.max_class_posterior() >= cfg.classification_gate) {
      record_decision({c.cell, CandidateStatus::classified, c.best_class(), false, false});
      changed = true;
    } else if (visits >= cfg.max_confirm_attempts) {
      record_decision({c.cell, CandidateStatus::classified, c.best_class(), true, false});
      changed = true;
    }
  }
  // Visited cells that fell below the threshold without ever being decided.
  for (const TaskDone& d : knowledge_.done_log()) {
    if (task_id_kind(d.task_id) != TaskKind::confirm_candidate) continue;
    const CellIndex cell = task_id_key(d.task_id);
    if (knowledge_.decision(cell)) continue;
    if (task_id_round(d.task_id) + 1 != knowledge_.visits(TaskKind::confirm_candidate, cell)) continue;
    const bool ready = std::all_of(d.reading_ids.begin(), d.reading_ids.end(),
                                   [&](std::uint64_t id) { return knowledge_.has_reading(id); });
    if (ready && knowledge_.heatmap().log_odds(cell).raw < threshold.raw) {
      record_decision({cell, CandidateStatus::dismissed, ThreatClass::ied, false, false});
      changed = true;
    }
  }
  if (changed) candidates_ = current_candidates(knowledge_);
}

void Controller::put_task(Task t) {
  auto it = tasks_.find(t.id);
  if (it == tasks_.end()) {
    tasks_.emplace(t.id, std::move(t));
    return;
  }
  if (it->second.state == TaskState::pending) {
    it->second.priority = t.priority;
    it->second.targets = std::move(t.targets);
  }
}

void Controller::finish(Task& t) {
  if (t.assigned_robot) {
    if (RobotView* r = robot(*t.assigned_robot); r && r->assigned == t.id) r->assigned.reset();
  }
  t.state = TaskState::done;
}

void Controller::release(Task& t, const char* reason) {
  if (t.assigned_robot) {
    emit("release", {{"task", num(t.id)}, {"robot", num(*t.assigned_robot)}, {"reason", quote(reason)}});
    if (RobotView* r = robot(*t.assigned_robot); r && r->assigned == t.id) r->assigned.reset();
  }
  t.assigned_robot.reset();
  t.state = TaskState::pending;
}

void Controller::send_task(RobotView& r, const Task& t, Tick now, std::vector<Outgoing>& out) {
  r.last_task_send = now;
  if (r.id == self_) return;  // picked up directly by the co-located agent
  auto p = std::make_shared<Payload>();
  p->body = TaskBody{t, 0};
  out.push_back({r.id, MessageKind::task, std::move(p)});
}

void Controller::send_cancel(NodeId robot_id, std::uint64_t task, std::vector<Outgoing>& out) {
  auto p = std::make_shared<Payload>();
  p->body = TaskBody{std::nullopt, task};
  out.push_back({robot_id, MessageKind::task, std::move(p)});
}

void Controller::sync_tasks(Tick now, std::vector<Outgoing>& out) {
  const MissionContext& ctx = *ctx_;
  const MissionConfig& cfg = ctx.config;
  const WorldGrid& g = *ctx.grid;
  const PriorityWeights& w = cfg.weights;

  // Completed tasks leave the table.
  for (auto it = tasks_.begin(); it != tasks_.end();) {
    if (knowledge_.has_done(it->first)) {
      finish(it->second);
      it = tasks_.erase(it);
    } else {
      ++it;
    }
  }
  if (phase_ == MissionPhase::complete) {
    for (auto& [id, t] : tasks_) {
      if (t.state == TaskState::assigned && t.assigned_robot) send_cancel(*t.assigned_robot, id, out);
      finish(t);
    }
    tasks_.clear();
    return;
  }

  std::map<std::uint64_t, Task> want;
  auto add = [&](TaskKind kind, std::uint32_t round, std::uint32_t key, std::vector<CellIndex> targets,
                 double priority) {
    const std::uint64_t id = make_task_id(kind, round, key);
    if (knowledge_.has_done(id) || targets.empty()) return;
    Task t;
    t.id = id;
    t.kind = kind;
    t.targets = std::move(targets);
    t.priority = priority;
    want.emplace(id, std::move(t));
  };

  // Exploration: one pass over every tile, then gap-filling rounds while
  // coverage is short of the gate.
  bool base_open = false;
  for (std::uint32_t t = 0; t < ctx.tiles.size(); ++t) {
    if (knowledge_.has_done(make_task_id(TaskKind::explore_region, 0, t))) continue;
    if (explore_round_ > 0) continue;
    base_open = true;
    add(TaskKind::explore_region, 0, t, ctx.explore_waypoints[t], w.terrain * mean_prior(g, ctx.tiles[t]));
  }
  if (!base_open) {
    bool round_open = false;
    if (explore_round_ > 0) {
      for (const auto& [id, t] : tasks_) {
        if (t.kind == TaskKind::explore_region && task_id_round(id) == explore_round_) {
          round_open = true;
          want.emplace(id, t);
        }
      }
    }
    if (!round_open && knowledge_.coverage() < cfg.coverage_gate && any_alive(RobotKind::suav)) {
      ++explore_round_;
      const SensorModel* rgb = ctx.fleet.sensors.find(SensorKind::rgb);
      for (std::uint32_t t = 0; t < ctx.tiles.size(); ++t) {
        std::vector<CellIndex> gaps;
        for (CellIndex c : ctx.tiles[t]) {
          if (!knowledge_.covered(c)) gaps.push_back(c);
        }
        if (gaps.empty()) continue;
        add(TaskKind::explore_region, explore_round_, t,
            cover_waypoints(g, gaps, rgb ? rgb->footprint_radius : 0, ctx.coverage_mask),
            w.terrain * mean_prior(g, gaps));
      }
      emit("explore_round", {{"round", num(explore_round_)}});
    }
  }

  const bool specialised = phase_ >= MissionPhase::specialised_detection;
  for (std::uint32_t t = 0; t < ctx.tiles.size(); ++t) {
    if (!specialised && (cfg.strict_phases || knowledge_.tile_coverage(t) < cfg.coverage_gate)) continue;
    add(TaskKind::gpr_sweep, 0, t, ctx.sweep_waypoints[t], w.terrain * mean_prior(g, ctx.tiles[t]));
  }

  if (specialised || !cfg.strict_phases) {
    const LogOdds hot = LogOdds::from_double(logit(cfg.emi_hot_threshold));
    for (CellIndex c : hot_targets(knowledge_, hot, cfg.max_confirm_attempts)) {
      add(TaskKind::emi_scan, knowledge_.visits(TaskKind::emi_scan, c), c, {c},
          priority_score(knowledge_.heatmap().posterior(c), g.at(c), knowledge_.vision_hits(c), w));
    }
  }

  if (phase_ >= MissionPhase::confirmation) {
    for (const Candidate& c : candidates_) {
      if (c.status != CandidateStatus::suspected && c.status != CandidateStatus::confirmed) continue;
      if (!ctx.reachable_by(RobotKind::lugv, c.cell)) continue;
      const std::uint32_t visits = knowledge_.visits(TaskKind::confirm_candidate, c.cell);
      if (visits > 0) {
        const TaskDone* last = knowledge_.done(make_task_id(TaskKind::confirm_candidate, visits - 1, c.cell));
        const bool ready = last && std::all_of(last->reading_ids.begin(), last->reading_ids.end(),
                                               [&](std::uint64_t id) { return knowledge_.has_reading(id); });
        if (!ready) continue;
      }
      add(TaskKind::confirm_candidate, visits, c.cell, {c.cell},
          priority_score(c, g.at(c.cell), knowledge_.vision_hits(c.cell), w));
    }
  }

  // Reconcile: pending tasks that are no longer wanted disappear; assigned
  // confirmations of vanished candidates are cancelled, other assigned work
  // runs to completion.
  for (auto it = tasks_.begin(); it != tasks_.end();) {
    Task& t = it->second;
    if (want.count(it->first)) {
      ++it;
      continue;
    }
    if (t.state == TaskState::pending) {
      it = tasks_.erase(it);
      continue;
    }
    if (t.kind == TaskKind::confirm_candidate && t.assigned_robot) {
      send_cancel(*t.assigned_robot, t.id, out);
      emit("cancel", {{"task", num(t.id)}, {"robot", num(*t.assigned_robot)}});
      finish(t);
      t.state = TaskState::abandoned;
      it = tasks_.erase(it);
      continue;
    }
    ++it;
  }
  for (auto& [id, t] : want) put_task(std::move(t));

  // Adopt or cancel work robots report that this controller did not hand out.
  for (RobotView& r : robots_) {
    if (!r.member || !r.known || r.lost || !r.reported_task) continue;
    const std::uint64_t rep = *r.reported_task;
    if (r.assigned == rep) continue;
    auto it = tasks_.find(rep);
    if (it == tasks_.end()) continue;
    Task& t = it->second;
    if (t.state == TaskState::pending && !r.assigned) {
      t.state = TaskState::assigned;
      t.assigned_robot = r.id;
      r.assigned = rep;
      emit("assign", {{"task", num(rep)}, {"kind", quote(to_string(t.kind))}, {"robot", num(r.id)},
                      {"adopted", "true"}});
    } else if (t.assigned_robot != r.id && now >= r.last_task_send + cfg.retransmit_interval) {
      r.last_task_send = now;
      send_cancel(r.id, rep, out);
    }
  }
}

void Controller::update_phase(Tick now) {
  (void)now;
  const MissionContext& ctx = *ctx_;
  GateStatus gates;
  gates.coverage = knowledge_.coverage();
  bool sweep = true;
  for (std::uint32_t t = 0; t < ctx.tiles.size() && sweep; ++t) {
    if (!ctx.sweep_waypoints[t].empty() && !knowledge_.has_done(make_task_id(TaskKind::gpr_sweep, 0, t))) {
      sweep = false;
    }
  }
  gates.sweep_done = sweep || !any_alive(RobotKind::luav);
  gates.candidates_scanned = true;
  gates.candidates_resolved = true;
  for (const Candidate& c : candidates_) {
    if (c.status == CandidateStatus::suspected || c.status == CandidateStatus::confirmed) {
      gates.candidates_resolved = false;
    }
    if (c.status != CandidateStatus::suspected) continue;
    const bool scannable = ctx.reachable_by(RobotKind::sugv, c.cell) || ctx.reachable_by(RobotKind::lugv, c.cell);
    const bool scanned = knowledge_.gpr_scanned(c.cell) || knowledge_.emi_scanned(c.cell) ||
                         knowledge_.visits(TaskKind::emi_scan, c.cell) >= ctx.config.max_confirm_attempts;
    if (scannable && !scanned) gates.candidates_scanned = false;
  }
  const bool supervised = ctx.supervised && self_ == kCommandCentre;
  const PhaseDecision pd = advance_phase(phase_, gates, ctx.config, supervised);
  if (pd.phase != phase_) {
    emit("phase", {{"from", quote(to_string(phase_))}, {"to", quote(to_string(pd.phase))}});
    phase_ = pd.phase;
    knowledge_.note_phase(phase_);
    proposal_.reset();
  }
  if (pd.proposal && proposal_ != pd.proposal) {
    proposal_ = pd.proposal;
    emit("proposal", {{"from", quote(to_string(phase_))}, {"to", quote(to_string(*pd.proposal))}});
  }
}

void Controller::allocate(Tick now, std::vector<Outgoing>& out) {
  std::vector<IdleRobot> idle;
  for (const RobotView& r : robots_) {
    if (!r.member || !r.known || r.lost || r.health != Health::ok || r.assigned) continue;
    if (r.reported_task && !knowledge_.has_done(*r.reported_task)) continue;
    const auto cell = ctx_->grid->cell_at(r.pose);
    if (!cell) continue;
    idle.push_back({r.id, r.kind, *cell});
  }
  if (idle.empty()) return;
  std::vector<Task> pending;
  for (const auto& [id, t] : tasks_) {
    if (t.state != TaskState::pending) continue;
    const bool wanted = std::any_of(idle.begin(), idle.end(),
                                    [&](const IdleRobot& r) { return task_eligible(t.kind, r.kind); });
    if (wanted) pending.push_back(t);
  }
  if (pending.empty()) return;
  for (const Assignment& a : allocate_tasks(phase_, pending, idle, distances_)) {
    Task& t = tasks_.at(a.task);
    RobotView& r = *robot(a.robot);
    t.state = TaskState::assigned;
    t.assigned_robot = a.robot;
    r.assigned = a.task;
    emit("assign", {{"task", num(a.task)}, {"kind", quote(to_string(t.kind))}, {"robot", num(a.robot)}});
    send_task(r, t, now, out);
  }
}

void Controller::refresh(Tick now, std::vector<Outgoing>& out) {
  if (knowledge_.version() != seen_version_) {
    candidates_ = current_candidates(knowledge_);
    decide_candidates(now);
    seen_version_ = knowledge_.version();
  }
  sync_tasks(now, out);
  update_phase(now);
  if (phase_ == MissionPhase::complete) {
    sync_tasks(now, out);
    return;
  }
  allocate(now, out);
  for (RobotView& r : robots_) {
    if (!r.member || !r.known || r.lost || !r.assigned) continue;
    if (r.reported_task == r.assigned) continue;
    if (now < r.last_task_send + ctx_->config.retransmit_interval) continue;
    auto it = tasks_.find(*r.assigned);
    if (it != tasks_.end()) send_task(r, it->second, now, out);
  }
}

RecordBatch Controller::take_delta() {
  RecordBatch b;
  const auto& rl = knowledge_.reading_log();
  const auto& dl = knowledge_.done_log();
  const auto& cl = knowledge_.decision_log();
  b.readings.assign(rl.begin() + static_cast<std::ptrdiff_t>(delta_readings_), rl.end());
  b.done.assign(dl.begin() + static_cast<std::ptrdiff_t>(delta_done_), dl.end());
  b.decisions.assign(cl.begin() + static_cast<std::ptrdiff_t>(delta_decisions_), cl.end());
  delta_readings_ = rl.size();
  delta_done_ = dl.size();
  delta_decisions_ = cl.size();
  b.phase = phase_;
  if (b.empty() && phase_ == delta_phase_) return {};
  delta_phase_ = phase_;
  return b;
}

// ---------------------------------------------------------------------------
// Operator commands

void Controller::check_command(const OperatorCommand& cmd) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_command, msg); };
  switch (cmd.kind) {
    case CommandKind::approve_phase:
      if (!proposal_) fail("approve_phase: no phase proposal is pending");
      return;
    case CommandKind::retask: {
      const RobotView* r = robot(cmd.robot);
      if (!r) fail("retask: unknown robot " + std::to_string(cmd.robot));
      if (r->lost || r->health != Health::ok) fail("retask: robot " + std::to_string(cmd.robot) + " is lost");
      auto it = tasks_.find(cmd.task);
      if (it == tasks_.end()) fail("retask: unknown task " + std::to_string(cmd.task));
      if (!task_eligible(it->second.kind, r->kind)) {
        fail("retask: " + std::string(to_string(r->kind)) + " is not eligible for " +
             std::string(to_string(it->second.kind)));
      }
      return;
    }
    case CommandKind::confirm_candidate:
    case CommandKind::dismiss_candidate: {
      const auto it = std::find_if(candidates_.begin(), candidates_.end(),
                                   [&](const Candidate& c) { return c.id == cmd.candidate; });
      if (it == candidates_.end()) fail(std::string(to_string(cmd.kind)) + ": unknown candidate " +
                                        std::to_string(cmd.candidate));
      if (it->status != CandidateStatus::suspected) {
        fail(std::string(to_string(cmd.kind)) + ": candidate " + std::to_string(cmd.candidate) + " is already " +
             std::string(to_string(it->status)));
      }
      return;
    }
    case CommandKind::pause:
    case CommandKind::resume:
    case CommandKind::abort:
      return;
  }
}

void Controller::apply_command(const OperatorCommand& cmd, Tick now, std::vector<Outgoing>& out) {
  check_command(cmd);
  switch (cmd.kind) {
    case CommandKind::approve_phase:
      emit("phase", {{"from", quote(to_string(phase_))}, {"to", quote(to_string(*proposal_))},
                     {"via", quote("operator")}});
      phase_ = *proposal_;
      knowledge_.note_phase(phase_);
      proposal_.reset();
      break;
    case CommandKind::retask: {
      RobotView& r = *robot(cmd.robot);
      Task& t = tasks_.at(cmd.task);
      if (r.assigned && *r.assigned != t.id) {
        auto it = tasks_.find(*r.assigned);
        if (it != tasks_.end()) release(it->second, "retask");
      }
      if (t.assigned_robot && *t.assigned_robot != r.id) {
        send_cancel(*t.assigned_robot, t.id, out);
        release(t, "retask");
      }
      t.state = TaskState::assigned;
      t.assigned_robot = r.id;
      r.assigned = t.id;
      emit("assign", {{"task", num(t.id)}, {"kind", quote(to_string(t.kind))}, {"robot", num(r.id)},
                      {"operator", "true"}});
      send_task(r, t, now, out);
      break;
    }
    case CommandKind::confirm_candidate:
    case CommandKind::dismiss_candidate: {
      const auto it = std::find_if(candidates_.begin(), candidates_.end(),
                                   [&](const Candidate& c) { return c.id == cmd.candidate; });
      Candidate c = *it;
      const CandidateStatus next =
          cmd.kind == CommandKind::confirm_candidate ? CandidateStatus::confirmed : CandidateStatus::dismissed;
      transition(c, next);
      record_decision({c.cell, next, c.best_class(), false, true});
      candidates_ = current_candidates(knowledge_);
      seen_version_ = knowledge_.version();
      break;
    }
    case CommandKind::pause:
    case CommandKind::resume:
    case CommandKind::abort:
      break;
  }
}

}  // namespace ciedsim
