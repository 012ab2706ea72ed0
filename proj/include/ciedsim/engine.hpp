#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ciedsim/mission.hpp"
#include "ciedsim/scenario.hpp"

namespace ciedsim {

inline constexpr int kEventLogVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Fault schedule

enum class FaultKind : std::uint8_t { robot_failure, comms_blackout, jamming_spike };
std::string_view to_string(FaultKind k) noexcept;

struct FaultEntry {
  FaultKind kind = FaultKind::robot_failure;
  NodeId robot = 0;  // robot_failure
  Tick tick = 0;     // robot_failure
  Tick start = 0;    // blackout / jamming: active on [start, end)
  std::optional<Tick> end;
  std::optional<std::array<int, 4>> region;  // x0, y0, x1, y1 (cells, inclusive)
  std::vector<NodeId> nodes;
  std::vector<std::pair<NodeId, NodeId>> links;
  double p_loss = 0.0;  // jamming_spike

  bool active(Tick t) const noexcept { return t >= start && (!end || t < *end); }
};

struct FaultSchedule {
  std::vector<FaultEntry> entries;
};

// Throws InvalidSchedule on unknown robots, bad ranges, duplicate failures or
// overlapping jamming spikes.
void validate(const FaultSchedule& schedule, const Scenario& scenario);
FaultSchedule parse_fault_schedule(std::string_view text, const Scenario& scenario);
FaultSchedule load_fault_schedule(const std::filesystem::path& path, const Scenario& scenario);

// ---------------------------------------------------------------------------
// Event log: one JSON object per line; the first line is the header.

class EventLog {
 public:
  void append(std::string line);
  const std::vector<std::string>& lines() const noexcept { return lines_; }
  std::uint64_t hash() const noexcept { return hash_; }
  std::string hash_hex() const;
  std::string text() const;

 private:
  std::vector<std::string> lines_;
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) noexcept;

// ---------------------------------------------------------------------------
// Metrics

enum class RunOutcome : std::uint8_t { running, complete, max_ticks, aborted };
std::string_view to_string(RunOutcome o) noexcept;

struct CandidateOutcome {
  CellIndex cell = 0;
  CandidateStatus status = CandidateStatus::suspected;
  ThreatClass cls = ThreatClass::ied;
  bool low_confidence = false;

  friend bool operator==(const CandidateOutcome&, const CandidateOutcome&) = default;
};

struct ThreatSummary {
  std::uint32_t id = 0;
  CellIndex cell = 0;
  ThreatClass cls = ThreatClass::ied;
  bool surface = false;

  friend bool operator==(const ThreatSummary&, const ThreatSummary&) = default;
};

// Everything the report is computed from; the engine fills it live and the
// replayer fills it from a log.
struct MetricsInputs {
  std::uint64_t seed = 0;
  ControllerMode mode = ControllerMode::centralized;
  RunOutcome outcome = RunOutcome::running;
  Tick ticks = 0;
  MissionPhase final_phase = MissionPhase::explore;
  std::array<std::optional<Tick>, 3> phase_ticks{};  // SpecialisedDetection, Confirmation, Complete
  std::vector<std::pair<Tick, std::uint32_t>> coverage_timeline;
  std::uint32_t covered_cells = 0;
  std::uint32_t reachable_cells = 0;
  int width = 1;
  std::vector<ThreatSummary> threats;
  std::vector<CandidateOutcome> candidates;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::array<std::uint64_t, 3> dropped{};  // by DropReason
  std::uint32_t robots_failed = 0;

  friend bool operator==(const MetricsInputs&, const MetricsInputs&) = default;
};

struct MetricsReport {
  int schema_version = kReportSchemaVersion;
  std::uint64_t seed = 0;
  std::string mode;
  std::string outcome;
  std::uint64_t ticks = 0;
  std::string final_phase;
  int final_phase_index = 0;
  std::array<std::optional<std::uint64_t>, 3> phase_ticks{};
  double coverage = 0.0;
  std::uint32_t covered_cells = 0;
  std::uint32_t reachable_cells = 0;
  std::vector<std::pair<std::uint64_t, double>> coverage_timeline;
  std::uint32_t threats = 0;
  std::uint32_t surface_threats = 0;
  std::uint32_t candidates = 0;
  std::uint32_t true_candidates = 0;
  std::uint32_t false_candidates = 0;
  std::uint32_t dismissed = 0;
  std::optional<double> recall;
  std::optional<double> surface_recall;
  std::optional<double> precision;
  std::uint32_t classified = 0;
  std::optional<double> classification_accuracy;
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t dropped_loss = 0;
  std::uint64_t dropped_ttl = 0;
  std::uint64_t dropped_node_down = 0;
  std::optional<double> loss_rate;
  std::uint32_t robots_failed = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport compute_metrics(const MetricsInputs& in);
std::string report_to_json(const MetricsReport& r);
MetricsReport report_from_json(std::string_view text);  // throws IncompatibleReports
std::string report_summary(const MetricsReport& r);

struct MetricDelta {
  std::string name;
  std::optional<double> a;
  std::optional<double> b;
  std::optional<double> delta;  // b - a
};
std::vector<MetricDelta> compare_reports(const MetricsReport& a, const MetricsReport& b);
std::string format_comparison(const std::vector<MetricDelta>& rows);

// Recomputes the metrics from a log; throws IncompatibleLog.
MetricsInputs replay_inputs(std::string_view log_text);
MetricsReport replay(std::string_view log_text);

// ---------------------------------------------------------------------------
// Engine

struct RunOptions {
  Tick max_ticks = 5000;
  bool supervised = false;
  FaultSchedule faults;
};

struct MnsState {
  std::uint64_t epoch = 0;
  std::vector<std::optional<NodeId>> brain;   // per node; nullopt when absent
  std::vector<std::optional<NodeId>> parent;  // tree towards the brain
  std::vector<std::vector<NodeId>> components;
};

struct NetTotals {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::array<std::uint64_t, 3> dropped{};
};

class Engine {
 public:
  Engine(Scenario scenario, RunOptions options = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const Scenario& scenario() const noexcept;
  const RunOptions& options() const noexcept;
  Tick tick() const noexcept;
  bool finished() const noexcept;
  bool paused() const noexcept;
  RunOutcome outcome() const noexcept;

  // Executes one tick (or only drains commands while paused).
  void step();
  RunOutcome run();

  // Validates now and queues for the next tick boundary; throws InvalidCommand.
  void submit(const OperatorCommand& cmd);

  const Controller& authority() const;
  MissionPhase phase() const;
  std::vector<Candidate> candidates() const;
  const std::vector<RobotAgent>& robots() const noexcept;
  const MnsState& mns() const noexcept;
  const NetTotals& net_totals() const noexcept;
  std::size_t in_flight() const noexcept;

  const EventLog& log() const noexcept;
  MetricsInputs metrics_inputs() const;
  MetricsReport report() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string heatmap_csv(const ThreatHeatmap& heatmap, const WorldGrid& grid);

}  // namespace ciedsim
