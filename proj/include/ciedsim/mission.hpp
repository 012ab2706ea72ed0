#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "ciedsim/fleet.hpp"
#include "ciedsim/fusion.hpp"
#include "ciedsim/mission_config.hpp"
#include "ciedsim/netsim.hpp"
#include "ciedsim/scenario.hpp"

namespace ciedsim {

enum class MissionPhase : std::uint8_t { explore, specialised_detection, confirmation, complete };
inline constexpr std::size_t kMissionPhaseCount = 4;
std::string_view to_string(MissionPhase p) noexcept;
std::optional<MissionPhase> mission_phase_from_string(std::string_view s) noexcept;

enum class TaskState : std::uint8_t { pending, assigned, done, abandoned };
std::string_view to_string(TaskState s) noexcept;

// Task ids pack (kind, round, key): key is a tile index for region tasks and
// a cell index for cell tasks; round distinguishes repeat visits.
std::uint64_t make_task_id(TaskKind kind, std::uint32_t round, std::uint32_t key) noexcept;
TaskKind task_id_kind(std::uint64_t id) noexcept;
std::uint32_t task_id_round(std::uint64_t id) noexcept;
std::uint32_t task_id_key(std::uint64_t id) noexcept;

struct Task {
  std::uint64_t id = 0;
  TaskKind kind = TaskKind::explore_region;
  std::vector<CellIndex> targets;  // waypoints, visited in order
  std::optional<NodeId> assigned_robot;
  TaskState state = TaskState::pending;
  double priority = 0.0;

  friend bool operator==(const Task&, const Task&) = default;
};

bool task_eligible(TaskKind task, RobotKind robot) noexcept;

using ReadingPtr = std::shared_ptr<const SensorReading>;

struct TaskDone {
  std::uint64_t task_id = 0;
  NodeId robot = 0;
  Tick tick = 0;
  CellIndex target = 0;  // last waypoint
  std::vector<std::uint64_t> reading_ids;  // readings of the final scan

  friend bool operator==(const TaskDone&, const TaskDone&) = default;
};

struct Decision {
  CellIndex cell = 0;
  CandidateStatus status = CandidateStatus::suspected;
  ThreatClass cls = ThreatClass::ied;
  bool low_confidence = false;
  bool by_operator = false;

  friend bool operator==(const Decision&, const Decision&) = default;
};

struct RecordBatch {
  std::vector<ReadingPtr> readings;
  std::vector<TaskDone> done;
  std::vector<Decision> decisions;
  MissionPhase phase = MissionPhase::explore;

  bool empty() const noexcept { return readings.empty() && done.empty() && decisions.empty(); }
  std::uint32_t size_bytes() const noexcept;
};

// ---------------------------------------------------------------------------
// Message bodies

struct StatusBody {
  RobotKind kind = RobotKind::suav;
  Vec2 pose;
  double battery = 0.0;
  Health health = Health::ok;
  std::optional<std::uint64_t> task;
};

struct ReadingsBody {
  std::vector<ReadingPtr> readings;
  std::vector<TaskDone> done;
};

struct AckBody {
  std::vector<std::uint64_t> readings;
  std::vector<std::uint64_t> done;
};

struct TaskBody {
  std::optional<Task> task;  // nullopt cancels `cancel_id`
  std::uint64_t cancel_id = 0;
};

struct DeltaBody {
  RecordBatch records;
};

struct SyncBody {
  RecordBatch records;
};

struct Payload {
  std::variant<StatusBody, ReadingsBody, AckBody, TaskBody, DeltaBody, SyncBody> body;
};

std::uint32_t payload_size(const Payload& p) noexcept;

struct Outgoing {
  NodeId dst = 0;  // kBroadcast floods the sender's component
  MessageKind kind = MessageKind::status;
  std::shared_ptr<const Payload> payload;
};

// ---------------------------------------------------------------------------
// Static per-run context shared by every controller and agent.

struct RosterEntry {
  NodeId id = 0;
  RobotKind kind = RobotKind::suav;
};

struct MissionContext {
  const WorldGrid* grid = nullptr;
  MissionConfig config;
  FleetConfig fleet;
  ThreatModel threat_model;
  FusionModel fusion;
  CellIndex deployment = 0;
  Vec2 deployment_pos;
  ControllerMode mode = ControllerMode::centralized;
  bool supervised = false;
  std::vector<RosterEntry> roster;
  std::array<std::vector<std::uint8_t>, 4> reachable;  // per robot kind, from deployment
  std::vector<std::uint8_t> coverage_mask;             // cells counted for coverage
  std::uint32_t coverage_total = 0;
  std::vector<std::vector<CellIndex>> tiles;           // coverage cells per tile
  std::vector<std::uint32_t> tile_of;                  // cell -> tile
  std::vector<std::vector<CellIndex>> explore_waypoints;
  std::vector<std::vector<CellIndex>> sweep_waypoints;

  bool reachable_by(RobotKind k, CellIndex c) const noexcept {
    return reachable[static_cast<std::size_t>(k)][c] != 0;
  }
};

std::shared_ptr<const MissionContext> make_mission_context(const Scenario& scenario, bool supervised);

// Waypoints (boustrophedon order) whose footprints of `radius` cover every
// cell in `cells`; waypoints stay on cells where mask is set.
std::vector<CellIndex> cover_waypoints(const WorldGrid& grid, std::span<const CellIndex> cells, int radius,
                                       const std::vector<std::uint8_t>& mask);

// ---------------------------------------------------------------------------
// Replicated mission knowledge. Every update is idempotent and commutative,
// so replicas that saw the same records agree exactly.

class Knowledge {
 public:
  Knowledge() = default;
  explicit Knowledge(std::shared_ptr<const MissionContext> ctx);

  bool add_reading(const ReadingPtr& reading);
  bool add_done(const TaskDone& done);
  bool add_decision(const Decision& decision);
  void note_phase(MissionPhase p) noexcept {
    if (p > phase_) phase_ = p;
  }
  // Returns the number of new records.
  std::size_t merge(const RecordBatch& batch);

  const MissionContext& context() const noexcept { return *ctx_; }
  const ThreatHeatmap& heatmap() const noexcept { return heatmap_; }
  const EvidenceGrid& evidence() const noexcept { return evidence_; }
  MissionPhase phase() const noexcept { return phase_; }
  std::uint64_t version() const noexcept { return version_; }

  bool has_reading(std::uint64_t id) const { return reading_ids_.count(id) != 0; }
  bool has_done(std::uint64_t task_id) const { return done_ids_.count(task_id) != 0; }
  const TaskDone* done(std::uint64_t task_id) const;
  // Completed visits of a cell task kind at `cell`.
  std::uint32_t visits(TaskKind kind, CellIndex cell) const;

  bool covered(CellIndex c) const noexcept { return covered_[c] != 0; }
  std::uint32_t covered_count() const noexcept { return covered_count_; }
  double coverage() const noexcept;
  double tile_coverage(std::uint32_t tile) const noexcept;
  bool gpr_scanned(CellIndex c) const noexcept { return gpr_[c] != 0; }
  bool emi_scanned(CellIndex c) const noexcept { return emi_[c] != 0; }
  bool contact_scanned(CellIndex c) const noexcept { return contact_[c] != 0; }
  std::uint32_t vision_hits(CellIndex c) const noexcept { return vision_hits_[c]; }

  const std::map<CellIndex, Decision>& decisions() const noexcept { return decisions_; }
  const Decision* decision(CellIndex c) const;

  // Append-ordered record logs, for shipping deltas by offset.
  const std::vector<ReadingPtr>& reading_log() const noexcept { return reading_log_; }
  const std::vector<TaskDone>& done_log() const noexcept { return done_log_; }
  const std::vector<Decision>& decision_log() const noexcept { return decision_log_; }
  RecordBatch all_records() const;

 private:
  std::shared_ptr<const MissionContext> ctx_;
  ThreatHeatmap heatmap_;
  EvidenceGrid evidence_;
  MissionPhase phase_ = MissionPhase::explore;
  std::uint64_t version_ = 0;
  std::unordered_set<std::uint64_t> reading_ids_;
  std::unordered_map<std::uint64_t, std::size_t> done_ids_;
  std::map<std::pair<std::uint8_t, CellIndex>, std::uint32_t> visits_;
  std::vector<std::uint8_t> covered_;
  std::uint32_t covered_count_ = 0;
  std::vector<std::uint32_t> tile_covered_;
  std::vector<std::uint8_t> gpr_;
  std::vector<std::uint8_t> emi_;
  std::vector<std::uint8_t> contact_;
  std::vector<std::uint32_t> vision_hits_;
  std::map<CellIndex, Decision> decisions_;
  std::vector<ReadingPtr> reading_log_;
  std::vector<TaskDone> done_log_;
  std::vector<Decision> decision_log_;
};

// Suspected blobs plus every confirmed or classified decision.
std::vector<Candidate> current_candidates(const Knowledge& k);

// ---------------------------------------------------------------------------
// Allocation and phase gates

struct IdleRobot {
  NodeId id = 0;
  RobotKind kind = RobotKind::suav;
  CellIndex cell = 0;
};

struct Assignment {
  std::uint64_t task = 0;
  NodeId robot = 0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Caches BFS distance fields keyed by (target cell, robot kind).
class DistanceOracle {
 public:
  explicit DistanceOracle(const WorldGrid* grid = nullptr) : grid_(grid) {}
  std::int32_t distance(CellIndex from, CellIndex to, RobotKind kind);

 private:
  const WorldGrid* grid_;
  std::unordered_map<std::uint64_t, std::vector<std::int32_t>> cache_;
};

// Greedy: tasks by priority desc (then id asc), each to the nearest eligible
// idle robot by path distance to its first target (then robot id asc).
std::vector<Assignment> allocate_tasks(MissionPhase phase, std::span<const Task> pending,
                                       std::span<const IdleRobot> idle, DistanceOracle& distances);

struct GateStatus {
  double coverage = 0.0;
  bool sweep_done = false;          // every GPR sweep finished (or no LUAV left)
  bool candidates_scanned = false;  // every suspected candidate saw GPR or EMI
  bool candidates_resolved = false; // every candidate classified or dismissed
};

struct PhaseDecision {
  MissionPhase phase = MissionPhase::explore;
  std::optional<MissionPhase> proposal;  // supervised mode: awaiting approval
};

PhaseDecision advance_phase(MissionPhase current, const GateStatus& gates, const MissionConfig& config,
                            bool supervised);

// ---------------------------------------------------------------------------
// Operator commands

enum class CommandKind : std::uint8_t {
  approve_phase,
  retask,
  confirm_candidate,
  dismiss_candidate,
  pause,
  resume,
  abort
};
std::string_view to_string(CommandKind k) noexcept;
std::optional<CommandKind> command_kind_from_string(std::string_view s) noexcept;

struct OperatorCommand {
  CommandKind kind = CommandKind::pause;
  NodeId robot = 0;
  std::uint64_t task = 0;
  std::uint32_t candidate = 0;
};

// ---------------------------------------------------------------------------
// Controller: the command centre, or an MNS brain.

struct MissionEvent {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> fields;  // pre-rendered JSON values
};

struct RobotView {
  NodeId id = 0;
  RobotKind kind = RobotKind::suav;
  bool known = false;
  Vec2 pose;
  double battery = 0.0;
  Health health = Health::ok;
  std::optional<std::uint64_t> reported_task;
  Tick last_seen = 0;
  bool lost = false;
  bool member = false;  // in the controller's component this tick
  std::optional<std::uint64_t> assigned;
  Tick last_task_send = 0;
};

class Controller {
 public:
  Controller() = default;
  Controller(std::shared_ptr<const MissionContext> ctx, NodeId self);

  NodeId self() const noexcept { return self_; }
  bool active() const noexcept { return active_; }
  Knowledge& knowledge() noexcept { return knowledge_; }
  const Knowledge& knowledge() const noexcept { return knowledge_; }
  MissionPhase phase() const noexcept { return phase_; }
  std::optional<MissionPhase> proposal() const noexcept { return proposal_; }
  const std::map<std::uint64_t, Task>& tasks() const noexcept { return tasks_; }
  const std::vector<RobotView>& robots() const noexcept { return robots_; }
  const std::vector<Candidate>& candidates() const noexcept { return candidates_; }

  void activate(Tick now);
  void deactivate();

  // Status of a co-located robot (an MNS brain's own body).
  void observe_status(NodeId robot, const StatusBody& status, Tick now);
  // One coordination cycle. `members` is the controller's component.
  void step(Tick now, std::span<const Message> inbox, std::span<const NodeId> members, std::vector<Outgoing>& out);

  // Validates against current state; throws InvalidCommand.
  void check_command(const OperatorCommand& cmd) const;
  void apply_command(const OperatorCommand& cmd, Tick now, std::vector<Outgoing>& out);

  // Records added since the previous call (MNS flood content).
  RecordBatch take_delta();

  std::vector<MissionEvent> drain_events() { return std::exchange(events_, {}); }

 private:
  void handle(const Message& m, Tick now, std::map<NodeId, AckBody>& acks);
  void refresh(Tick now, std::vector<Outgoing>& out);
  void sync_tasks(Tick now, std::vector<Outgoing>& out);
  void decide_candidates(Tick now);
  void update_phase(Tick now);
  void allocate(Tick now, std::vector<Outgoing>& out);
  void send_task(RobotView& r, const Task& t, Tick now, std::vector<Outgoing>& out);
  void send_cancel(NodeId robot, std::uint64_t task, std::vector<Outgoing>& out);
  void release(Task& t, const char* reason);
  void finish(Task& t);
  RobotView* robot(NodeId id);
  const RobotView* robot(NodeId id) const;
  bool any_alive(RobotKind kind) const;
  void emit(std::string kind, std::vector<std::pair<std::string, std::string>> fields);
  void put_task(Task t);
  void record_decision(const Decision& d);

  std::shared_ptr<const MissionContext> ctx_;
  NodeId self_ = 0;
  bool active_ = false;
  Knowledge knowledge_;
  MissionPhase phase_ = MissionPhase::explore;
  std::optional<MissionPhase> proposal_;
  std::map<std::uint64_t, Task> tasks_;
  std::vector<RobotView> robots_;
  std::vector<Candidate> candidates_;
  DistanceOracle distances_;
  std::uint64_t seen_version_ = ~0ull;
  std::uint32_t explore_round_ = 0;
  std::size_t delta_readings_ = 0;
  std::size_t delta_done_ = 0;
  std::size_t delta_decisions_ = 0;
  MissionPhase delta_phase_ = MissionPhase::explore;
  std::vector<MissionEvent> events_;
};

// ---------------------------------------------------------------------------
// Robot agent: executes one task at a time, buffers readings until the
// current brain acknowledges them.

class RobotAgent {
 public:
  RobotAgent() = default;
  RobotAgent(std::shared_ptr<const MissionContext> ctx, RobotState state);

  const RobotState& state() const noexcept { return state_; }
  RobotState& state() noexcept { return state_; }
  const std::optional<Task>& task() const noexcept { return task_; }
  std::size_t waypoint() const noexcept { return waypoint_; }
  bool returning() const noexcept { return returning_; }
  std::size_t unacked() const noexcept { return pending_readings_.size(); }
  StatusBody status() const;

  // Inbox handling and uplink. `brain` is the node coordinating this robot,
  // `linked` whether a route to it exists; self-brains pass deliver=false.
  void communicate(Tick now, std::span<const Message> inbox, NodeId brain, bool linked, bool self_brain,
                   std::uint32_t retransmit_interval, std::vector<Outgoing>& out);
  void accept_task(const TaskBody& body);

  // Motion for one tick; returns true when a waypoint was reached.
  void move(double dt);
  // Scans at the reached waypoint; returns readings produced this tick.
  std::vector<ReadingPtr> scan(const ScanContext& ctx, RngStream& rng, Tick now, double dt);
  // Task completions produced by the latest scan (moved out).
  std::vector<TaskDone> take_done() { return std::exchange(new_done_, {}); }
  // Readings kept for the uplink until acknowledged.
  void queue(const ReadingPtr& r);
  void queue_done(const TaskDone& d);

 private:
  struct Pending {
    ReadingPtr reading;
    std::optional<Tick> last_sent;
  };
  struct PendingDone {
    TaskDone done;
    std::optional<Tick> last_sent;
  };

  void plan_leg(CellIndex target);
  void drop_task();

  std::shared_ptr<const MissionContext> ctx_;
  RobotState state_;
  std::optional<Task> task_;
  std::size_t waypoint_ = 0;
  std::vector<Vec2> leg_;
  std::optional<CellIndex> leg_target_;
  bool at_waypoint_ = false;
  bool returning_ = false;
  std::map<std::uint64_t, TaskDone> completed_;
  std::map<std::uint64_t, Pending> pending_readings_;
  std::map<std::uint64_t, PendingDone> pending_done_;
  std::vector<ReadingPtr> recent_;  // resent to a new brain
  std::vector<TaskDone> new_done_;
  NodeId brain_ = kCommandCentre;
  std::uint64_t next_reading_ = 0;
};

}  // namespace ciedsim
