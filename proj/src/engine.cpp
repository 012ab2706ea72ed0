#include <algorithm>
#include <cstdio>
#include <deque>

#include "ciedsim/engine.hpp"
#include "ciedsim/errors.hpp"
#include "json_util.hpp"

namespace ciedsim {

namespace {

std::string quote(std::string_view s) { return "\"" + std::string(s) + "\""; }

std::string fmt(double v, const char* f = "%.3f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Streams kept apart from the per-robot ones.
constexpr std::uint32_t kFloodStream = 0xfffff0u;

}  // namespace

struct Engine::Impl {
  Scenario scenario;
  RunOptions options;
  std::shared_ptr<const MissionContext> ctx;
  ThreatIndex truth;
  ScanContext scan_ctx;
  std::size_t nodes = 0;

  std::vector<Controller> controllers;  // per node
  std::vector<RobotAgent> agents;       // node i + 1
  std::vector<RngStream> scan_rng;
  RngStream net_rng;
  RngStream flood_rng;

  Topology topology;
  MnsState mns;
  std::vector<std::int32_t> component_of;
  NodeId authority_node = kCommandCentre;

  std::vector<Message> in_flight;
  std::vector<std::vector<RecordBatch>> floods;  // delivered next tick
  std::uint64_t next_message = 1;
  NetTotals totals;
  NetTotals window;

  std::deque<OperatorCommand> commands;
  std::vector<std::uint8_t> failure_applied;
  std::vector<std::uint8_t> fault_active;

  Tick tick = 0;
  bool paused = false;
  RunOutcome outcome = RunOutcome::running;
  std::array<std::optional<Tick>, 3> phase_ticks{};
  std::vector<std::pair<Tick, std::uint32_t>> coverage_timeline;
  std::uint32_t robots_failed = 0;
  EventLog log;

  Impl(Scenario s, RunOptions o)
      : scenario(std::move(s)),
        options(std::move(o)),
        net_rng(scenario.seed, 0, StreamPurpose::net),
        flood_rng(scenario.seed, kFloodStream, StreamPurpose::net) {
    validate(scenario);
    validate(options.faults, scenario);
    if (options.max_ticks == 0) throw Error(ErrorCode::config, "max_ticks must be > 0");
    ctx = make_mission_context(scenario, options.supervised);
    truth = ThreatIndex(scenario.grid.size(), scenario.threats);
    scan_ctx.grid = &scenario.grid;
    scan_ctx.truth = &truth;
    scan_ctx.threat_model = &scenario.threat_model;
    scan_ctx.fleet = &scenario.fleet;
    if (scenario.fleet.generative_match) {
      for (SensorKind k : kAllSensorKinds) {
        if (const SensorModel* m = scenario.fleet.sensors.find(k)) {
          scan_ctx.p_det_eff[static_cast<std::size_t>(k)] = p_det_effective(*m, scenario.threat_model);
        }
      }
    }
    const auto robots = default_fleet(scenario.fleet, ctx->deployment_pos);
    nodes = robots.size() + 1;
    for (NodeId n = 0; n < nodes; ++n) controllers.emplace_back(ctx, n);
    for (const RobotState& r : robots) {
      agents.emplace_back(ctx, r);
      scan_rng.emplace_back(scenario.seed, r.id, StreamPurpose::scan);
    }
    floods.resize(nodes);
    mns.brain.assign(nodes, std::nullopt);
    mns.parent.assign(nodes, std::nullopt);
    component_of.assign(nodes, -1);
    failure_applied.assign(options.faults.entries.size(), 0);
    fault_active.assign(options.faults.entries.size(), 0);
    write_header();
    controllers[kCommandCentre].activate(0);
    update_topology(0);
  }

  bool is_mns() const noexcept { return scenario.controller_mode == ControllerMode::mns; }
  RobotAgent& agent(NodeId n) { return agents[n - 1]; }

  void line(Tick t, NodeId n, std::string_view kind, const std::string& rest = {}) {
    std::string s = "{\"t\":" + std::to_string(t) + ",\"n\":" + std::to_string(n) + ",\"e\":" + quote(kind);
    if (!rest.empty()) {
      s += ',';
      s += rest;
    }
    s += '}';
    log.append(std::move(s));
  }

  void write_header() {
    nlohmann::ordered_json h;
    h["t"] = 0;
    h["n"] = 0;
    h["e"] = "header";
    h["format"] = "ciedsim-eventlog";
    h["version"] = kEventLogVersion;
    h["seed"] = scenario.seed;
    h["mode"] = to_string(scenario.controller_mode);
    h["supervised"] = options.supervised;
    h["max_ticks"] = options.max_ticks;
    h["width"] = scenario.grid.width();
    h["height"] = scenario.grid.height();
    h["reachable_cells"] = ctx->coverage_total;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a(serialize_scenario(scenario))));
    h["scenario_hash"] = hash;
    auto robots = nlohmann::ordered_json::array();
    for (const RobotAgent& a : agents) robots.push_back({a.state().id, to_string(a.state().kind)});
    h["robots"] = robots;
    auto threats = nlohmann::ordered_json::array();
    for (const Threat& t : scenario.threats) threats.push_back({t.id, t.cell, to_string(t.cls), t.surface() ? 1 : 0});
    h["threats"] = threats;
    log.append(h.dump());
  }

  // -------------------------------------------------------------------------

  void send(NodeId src, Outgoing o, Tick now) {
    if (o.dst == src) {
      if (src != kCommandCentre && o.payload) {
        if (const auto* tb = std::get_if<TaskBody>(&o.payload->body)) agent(src).accept_task(*tb);
      }
      return;
    }
    Message m;
    m.id = next_message++;
    m.src = src;
    m.dst = o.dst;
    m.kind = o.kind;
    m.size_bytes = o.payload ? payload_size(*o.payload) : 0;
    m.payload = std::move(o.payload);
    m.sent_tick = now;
    m.ttl = scenario.net.default_ttl;
    m.at = src;
    in_flight.push_back(std::move(m));
    ++totals.sent;
    ++window.sent;
  }

  void send_all(NodeId src, std::vector<Outgoing>& out, Tick now) {
    for (Outgoing& o : out) send(src, std::move(o), now);
    out.clear();
  }

  void apply_faults(Tick now) {
    for (std::size_t i = 0; i < options.faults.entries.size(); ++i) {
      const FaultEntry& e = options.faults.entries[i];
      if (e.kind == FaultKind::robot_failure) {
        if (failure_applied[i] || e.tick > now) continue;
        failure_applied[i] = 1;
        std::vector<RobotState> one{agent(e.robot).state()};
        if (fail_robot(one, e.robot)) {
          agent(e.robot).state() = one[0];
          ++robots_failed;
          line(now, e.robot, "fault", "\"fault\":\"robot_failure\",\"robot\":" + std::to_string(e.robot));
        }
        continue;
      }
      const bool on = e.active(now);
      if (on == static_cast<bool>(fault_active[i])) continue;
      fault_active[i] = on ? 1 : 0;
      line(now, 0, "fault",
           "\"fault\":" + quote(to_string(e.kind)) + ",\"index\":" + std::to_string(i) + ",\"state\":" +
               quote(on ? "start" : "end"));
    }
  }

  double link_loss(Tick now) const {
    double p = scenario.net.p_link_loss;
    for (const FaultEntry& e : options.faults.entries) {
      if (e.kind == FaultKind::jamming_spike && e.active(now)) p = std::max(p, e.p_loss);
    }
    return p;
  }

  std::optional<Vec2> node_pos(NodeId n) {
    if (n == kCommandCentre) return scenario.net.command_centre_pos;
    const RobotState& s = agent(n).state();
    if (s.health != Health::ok) return std::nullopt;
    return s.pose;
  }

  void update_topology(Tick now) {
    std::vector<std::optional<Vec2>> poses(nodes);
    for (NodeId n = 0; n < nodes; ++n) poses[n] = node_pos(n);
    LinkBlock block;
    for (const FaultEntry& e : options.faults.entries) {
      if (e.kind != FaultKind::comms_blackout || !e.active(now)) continue;
      for (NodeId n : e.nodes) block.isolated.push_back(n);
      for (const auto& l : e.links) block.cut.push_back(l);
      if (e.region) {
        const auto& r = *e.region;
        for (NodeId n = 0; n < nodes; ++n) {
          if (!poses[n]) continue;
          const auto c = scenario.grid.cell_at(*poses[n]);
          if (!c) continue;
          const int x = scenario.grid.x_of(*c), y = scenario.grid.y_of(*c);
          if (x >= r[0] && x <= r[2] && y >= r[1] && y <= r[3]) block.isolated.push_back(n);
        }
      }
    }
    topology = rebuild_topology(poses, scenario.net, &block);
    auto comps = partitions(topology);
    std::vector<std::optional<NodeId>> brain(nodes);
    std::fill(component_of.begin(), component_of.end(), -1);
    for (std::size_t i = 0; i < comps.size(); ++i) {
      for (NodeId n : comps[i]) component_of[n] = static_cast<std::int32_t>(i);
    }
    for (const auto& comp : comps) {
      std::optional<NodeId> b;
      if (is_mns()) {
        b = comp.front();
      } else if (comp.front() == kCommandCentre) {
        b = kCommandCentre;
      }
      for (NodeId n : comp) brain[n] = b;
    }
    const bool changed = brain != mns.brain || comps != mns.components;
    const bool brains_changed = brain != mns.brain;
    for (NodeId n = 0; n < nodes; ++n) {
      mns.parent[n].reset();
      if (!brain[n] || *brain[n] == n) continue;
      if (auto path = route(topology, n, *brain[n]); path && path->size() >= 2) mns.parent[n] = (*path)[1];
    }

    if (is_mns()) {
      // Hand over before the new brains start.
      for (NodeId n = 0; n < nodes; ++n) {
        Controller& c = controllers[n];
        const bool should = brain[n] && *brain[n] == n;
        if (c.active() && !should) {
          if (brain[n]) {
            auto p = std::make_shared<Payload>();
            RecordBatch all = c.knowledge().all_records();
            all.phase = c.phase();
            p->body = SyncBody{std::move(all)};
            send(n, {*brain[n], MessageKind::mns_control, std::move(p)}, now);
          }
          c.deactivate();
          line(now, n, "brain_down");
        }
      }
      for (NodeId n = 0; n < nodes; ++n) {
        Controller& c = controllers[n];
        if (brain[n] && *brain[n] == n && !c.active()) {
          c.activate(now);
          line(now, n, "brain_up", "\"phase\":" + quote(to_string(c.phase())));
        }
      }
    }

    if (brains_changed) ++mns.epoch;
    mns.brain = std::move(brain);
    mns.components = std::move(comps);

    std::size_t best = 0;
    for (std::size_t i = 0; i < mns.components.size(); ++i) {
      if (mns.components[i].size() > mns.components[best].size()) best = i;
    }
    if (!is_mns()) {
      authority_node = kCommandCentre;
    } else if (!mns.components.empty()) {
      authority_node = mns.components[best].front();
    }

    if (changed) {
      std::string comps_json = "[";
      std::string brains_json = "[";
      for (std::size_t i = 0; i < mns.components.size(); ++i) {
        if (i) {
          comps_json += ',';
          brains_json += ',';
        }
        comps_json += '[';
        for (std::size_t j = 0; j < mns.components[i].size(); ++j) {
          if (j) comps_json += ',';
          comps_json += std::to_string(mns.components[i][j]);
        }
        comps_json += ']';
        const auto& b = mns.brain[mns.components[i].front()];
        brains_json += b ? std::to_string(*b) : "null";
      }
      comps_json += ']';
      brains_json += ']';
      line(now, 0, "topology",
           "\"epoch\":" + std::to_string(mns.epoch) + ",\"components\":" + comps_json + ",\"brains\":" + brains_json +
               ",\"authority\":" + std::to_string(authority_node));
    }
  }

  void drain_commands(Tick now) {
    while (!commands.empty()) {
      const OperatorCommand cmd = commands.front();
      commands.pop_front();
      std::string rest = "\"command\":" + quote(to_string(cmd.kind));
      switch (cmd.kind) {
        case CommandKind::pause:
          paused = true;
          break;
        case CommandKind::resume:
          paused = false;
          break;
        case CommandKind::abort:
          outcome = RunOutcome::aborted;
          break;
        default: {
          Controller& a = controllers[authority_node];
          if (cmd.kind == CommandKind::retask) {
            rest += ",\"robot\":" + std::to_string(cmd.robot) + ",\"task\":" + std::to_string(cmd.task);
          } else if (cmd.kind != CommandKind::approve_phase) {
            rest += ",\"candidate\":" + std::to_string(cmd.candidate);
          }
          try {
            std::vector<Outgoing> out;
            a.apply_command(cmd, now, out);
            send_all(authority_node, out, now);
          } catch (const Error& e) {
            // State moved on between submit and the tick boundary.
            rest += ",\"rejected\":" + nlohmann::json(e.what()).dump();
          }
        }
      }
      line(now, authority_node, "operator", rest);
      if (outcome == RunOutcome::aborted) return;
    }
  }

  void flush_events(Tick now) {
    for (NodeId n = 0; n < nodes; ++n) {
      for (MissionEvent& ev : controllers[n].drain_events()) {
        std::string rest;
        for (const auto& [k, v] : ev.fields) {
          if (!rest.empty()) rest += ',';
          rest += quote(k) + ':' + v;
        }
        line(now, n, ev.kind, rest);
      }
    }
  }

  void flush_net(Tick now) {
    if (window.sent == 0 && window.delivered == 0 && window.dropped == std::array<std::uint64_t, 3>{}) return;
    line(now, 0, "net",
         "\"sent\":" + std::to_string(window.sent) + ",\"delivered\":" + std::to_string(window.delivered) +
             ",\"loss\":" + std::to_string(window.dropped[0]) + ",\"ttl\":" + std::to_string(window.dropped[1]) +
             ",\"node_down\":" + std::to_string(window.dropped[2]));
    window = {};
  }

  void snapshot(Tick now) {
    std::string robots = "[";
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const RobotState& s = agents[i].state();
      if (i) robots += ',';
      robots += "[" + std::to_string(s.id) + "," + fmt(s.pose.x) + "," + fmt(s.pose.y) + "," + fmt(s.battery, "%.1f") +
                "," + (s.health == Health::ok ? "1" : "0") + "," +
                (agents[i].task() ? std::to_string(agents[i].task()->id) : std::string("null")) + "]";
    }
    robots += ']';
    const Controller& a = controllers[authority_node];
    line(now, authority_node, "snapshot",
         "\"phase\":" + quote(to_string(a.phase())) + ",\"robots\":" + robots +
             ",\"in_flight\":" + std::to_string(in_flight.size()));
  }

  void finish(Tick now) {
    flush_net(now);
    const Controller& a = controllers[authority_node];
    std::string cands = "[";
    bool first = true;
    for (const Candidate& c : a.candidates()) {
      if (!first) cands += ',';
      first = false;
      cands += "[" + std::to_string(c.cell) + "," + quote(to_string(c.status)) + "," +
               quote(to_string(c.status == CandidateStatus::suspected ? c.best_class() : candidate_class(a, c))) +
               "," + (c.low_confidence ? "1" : "0") + "]";
    }
    cands += ']';
    line(now, authority_node, "end",
         "\"outcome\":" + quote(to_string(outcome)) + ",\"ticks\":" + std::to_string(tick) + ",\"phase\":" +
             quote(to_string(a.phase())) + ",\"covered\":" + std::to_string(a.knowledge().covered_count()) +
             ",\"total\":" + std::to_string(ctx->coverage_total) + ",\"candidates\":" + cands);
  }

  static ThreatClass candidate_class(const Controller& a, const Candidate& c) {
    if (const Decision* d = a.knowledge().decision(c.cell)) return d->cls;
    return c.best_class();
  }

  // -------------------------------------------------------------------------

  void run_tick() {
    const Tick now = tick + 1;
    apply_faults(now);
    update_topology(now);

    // Deliveries.
    std::vector<std::vector<Message>> ctrl_inbox(nodes), agent_inbox(nodes);
    for (NodeId n = 0; n < nodes; ++n) {
      for (RecordBatch& b : floods[n]) controllers[n].knowledge().merge(b);
      floods[n].clear();
    }
    DeliveryResult dr = deliver(std::move(in_flight), topology, link_loss(now), scenario.net.base_latency, net_rng, now);
    in_flight = std::move(dr.in_flight);
    for (const DroppedMessage& d : dr.dropped) {
      ++totals.dropped[static_cast<std::size_t>(d.reason)];
      ++window.dropped[static_cast<std::size_t>(d.reason)];
    }
    totals.delivered += dr.delivered.size();
    window.delivered += dr.delivered.size();
    for (Message& m : dr.delivered) {
      if (!m.payload) continue;
      const auto& body = m.payload->body;
      const bool to_agent = std::holds_alternative<TaskBody>(body) || std::holds_alternative<AckBody>(body);
      if (to_agent) {
        if (m.dst != kCommandCentre) agent_inbox[m.dst].push_back(std::move(m));
      } else if (controllers[m.dst].active()) {
        ctrl_inbox[m.dst].push_back(std::move(m));
      } else if (const auto* sb = std::get_if<SyncBody>(&body)) {
        controllers[m.dst].knowledge().merge(sb->records);
      } else if (const auto* rb = std::get_if<ReadingsBody>(&body)) {
        for (const ReadingPtr& r : rb->readings) controllers[m.dst].knowledge().add_reading(r);
        for (const TaskDone& d : rb->done) controllers[m.dst].knowledge().add_done(d);
      }
    }

    // Controllers and agents.
    std::vector<Outgoing> out;
    const double loss = link_loss(now);
    for (NodeId n = 0; n < nodes; ++n) {
      const bool present = topology.present(n);
      Controller& c = controllers[n];
      if (!present && c.active()) c.deactivate();
      if (c.active()) {
        const std::int32_t comp = component_of[n];
        static const std::vector<NodeId> kNone;
        const std::vector<NodeId>& members = comp >= 0 ? mns.components[static_cast<std::size_t>(comp)] : kNone;
        if (n != kCommandCentre) c.observe_status(n, agent(n).status(), now);
        c.step(now, ctrl_inbox[n], members, out);
        send_all(n, out, now);
        if (n != kCommandCentre) {
          // Work this brain handed to its own body.
          for (const RobotView& r : c.robots()) {
            if (r.id != n || !r.assigned) continue;
            const auto& cur = agent(n).task();
            if (cur && cur->id == *r.assigned) continue;
            auto it = c.tasks().find(*r.assigned);
            if (it != c.tasks().end()) agent(n).accept_task(TaskBody{it->second, 0});
          }
        }
        if (is_mns()) {
          RecordBatch delta = c.take_delta();
          if (!delta.empty() || delta.phase != MissionPhase::explore) {
            const BroadcastResult b = broadcast(n, topology, loss, flood_rng);
            for (NodeId m : b.reached) {
              if (m != n) floods[m].push_back(delta);
            }
          }
        }
      }
      if (n == kCommandCentre || !present) continue;
      RobotAgent& a = agent(n);
      const auto& b = mns.brain[n];
      const NodeId brain = b ? *b : (is_mns() ? n : kCommandCentre);
      const bool self_brain = b && *b == n;
      const bool linked = b.has_value() && !self_brain;
      a.communicate(now, agent_inbox[n], brain, linked, self_brain, scenario.mission.retransmit_interval, out);
      send_all(n, out, now);
    }

    // Motion and sensing.
    const double dt = scenario.mission.dt;
    for (RobotAgent& a : agents) a.move(dt);
    for (std::size_t i = 0; i < agents.size(); ++i) {
      RobotAgent& a = agents[i];
      const NodeId n = a.state().id;
      auto readings = a.scan(scan_ctx, scan_rng[i], now, dt);
      auto done = a.take_done();
      if (readings.empty() && done.empty()) continue;
      const bool self_brain = mns.brain[n] && *mns.brain[n] == n && controllers[n].active();
      for (const ReadingPtr& r : readings) {
        if (self_brain) {
          controllers[n].knowledge().add_reading(r);
        } else {
          a.queue(r);
        }
      }
      for (const TaskDone& d : done) {
        if (self_brain) {
          controllers[n].knowledge().add_done(d);
        } else {
          a.queue_done(d);
        }
      }
    }

    tick = now;
    flush_events(now);

    // Bookkeeping.
    const Controller& auth = controllers[authority_node];
    const MissionPhase p = auth.phase();
    for (std::size_t i = 0; i < 3; ++i) {
      if (static_cast<std::size_t>(p) >= i + 1 && !phase_ticks[i]) {
        phase_ticks[i] = now;
        line(now, authority_node, "milestone", "\"phase\":" + quote(to_string(static_cast<MissionPhase>(i + 1))));
      }
    }
    const std::uint32_t interval = std::max<std::uint32_t>(1, scenario.mission.coverage_log_interval);
    if (now % interval == 0) {
      const std::uint32_t covered = auth.knowledge().covered_count();
      coverage_timeline.emplace_back(now, covered);
      line(now, authority_node, "coverage", "\"covered\":" + std::to_string(covered));
      snapshot(now);
      flush_net(now);
    }
    if (p == MissionPhase::complete) {
      outcome = RunOutcome::complete;
    } else if (now >= options.max_ticks) {
      outcome = RunOutcome::max_ticks;
    }
    if (outcome != RunOutcome::running) finish(now);
  }

  void step() {
    if (outcome != RunOutcome::running) return;
    drain_commands(tick + 1);
    if (outcome == RunOutcome::aborted) {
      finish(tick);
      return;
    }
    if (paused) return;
    run_tick();
  }

  MetricsInputs inputs() const {
    MetricsInputs in;
    in.seed = scenario.seed;
    in.mode = scenario.controller_mode;
    in.outcome = outcome;
    in.ticks = tick;
    const Controller& a = controllers[authority_node];
    in.final_phase = a.phase();
    in.phase_ticks = phase_ticks;
    in.coverage_timeline = coverage_timeline;
    in.covered_cells = a.knowledge().covered_count();
    in.reachable_cells = ctx->coverage_total;
    in.width = scenario.grid.width();
    for (const Threat& t : scenario.threats) in.threats.push_back({t.id, t.cell, t.cls, t.surface()});
    for (const Candidate& c : a.candidates()) {
      CandidateOutcome o;
      o.cell = c.cell;
      o.status = c.status;
      o.cls = c.status == CandidateStatus::suspected ? c.best_class() : candidate_class(a, c);
      o.low_confidence = c.low_confidence;
      in.candidates.push_back(o);
    }
    in.sent = totals.sent;
    in.delivered = totals.delivered;
    in.dropped = totals.dropped;
    in.robots_failed = robots_failed;
    return in;
  }
};

Engine::Engine(Scenario scenario, RunOptions options)
    : impl_(std::make_unique<Impl>(std::move(scenario), std::move(options))) {}
Engine::~Engine() = default;

const Scenario& Engine::scenario() const noexcept { return impl_->scenario; }
const RunOptions& Engine::options() const noexcept { return impl_->options; }
Tick Engine::tick() const noexcept { return impl_->tick; }
bool Engine::finished() const noexcept { return impl_->outcome != RunOutcome::running; }
bool Engine::paused() const noexcept { return impl_->paused; }
RunOutcome Engine::outcome() const noexcept { return impl_->outcome; }

void Engine::step() { impl_->step(); }

RunOutcome Engine::run() {
  while (!finished()) {
    step();
    if (paused() && impl_->commands.empty()) break;
  }
  return impl_->outcome;
}

void Engine::submit(const OperatorCommand& cmd) {
  if (finished()) throw Error(ErrorCode::invalid_command, "the run has finished");
  impl_->controllers[impl_->authority_node].check_command(cmd);
  impl_->commands.push_back(cmd);
}

const Controller& Engine::authority() const { return impl_->controllers[impl_->authority_node]; }
MissionPhase Engine::phase() const { return authority().phase(); }
std::vector<Candidate> Engine::candidates() const { return authority().candidates(); }
const std::vector<RobotAgent>& Engine::robots() const noexcept { return impl_->agents; }
const MnsState& Engine::mns() const noexcept { return impl_->mns; }
const NetTotals& Engine::net_totals() const noexcept { return impl_->totals; }
std::size_t Engine::in_flight() const noexcept { return impl_->in_flight.size(); }
const EventLog& Engine::log() const noexcept { return impl_->log; }
MetricsInputs Engine::metrics_inputs() const { return impl_->inputs(); }
MetricsReport Engine::report() const { return compute_metrics(impl_->inputs()); }

std::string heatmap_csv(const ThreatHeatmap& heatmap, const WorldGrid& grid) {
  std::string out = "x,y,prior,posterior\n";
  out.reserve(out.size() + heatmap.size() * 32);
  char buf[96];
  for (CellIndex c = 0; c < heatmap.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f\n", grid.x_of(c), grid.y_of(c), heatmap.prior(c),
                  heatmap.posterior(c));
    out += buf;
  }
  return out;
}

}  // namespace ciedsim
