// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Tolerances are pinned here; nothing is read from the environment.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "ciedsim/engine.hpp"
#include "ciedsim/errors.hpp"
#include "oracles/oracles.hpp"

using namespace ciedsim;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Scenario standard_scenario(std::uint64_t seed, ControllerMode mode) {
  ScenarioParams p;  // 50x50, 6 robots, 10 threats
  p.controller_mode = mode;
  return generate_scenario(p, seed);
}

// ---------------------------------------------------------------------------

Verdict fusion_oracle() {
  const auto t0 = Clock::now();
  RngStream rng(1001, 0, StreamPurpose::scan);
  constexpr std::array kinds{SensorKind::rgb, SensorKind::gpr, SensorKind::emi, SensorKind::xrb};
  double worst = 0.0;
  int instances = 0;
  for (; instances < 250; ++instances) {
    const int w = 1 + static_cast<int>(rng.below(10)), h = 1 + static_cast<int>(rng.below(10));
    WorldGrid grid(w, h);
    std::vector<double> priors(grid.size());
    for (CellIndex c = 0; c < grid.size(); ++c) {
      priors[c] = 0.001 + 0.3 * rng.uniform();
      grid.at(c).terrain_prior = priors[c];
    }
    std::array<std::optional<DetectionOdds>, kSensorKindCount> odds{};
    for (SensorKind k : kinds) {
      const double fp = 0.005 + 0.1 * rng.uniform();
      odds[static_cast<std::size_t>(k)] = DetectionOdds{fp + (0.99 - fp) * rng.uniform(), fp};
    }
    const FusionModel model = FusionModel::from_odds(odds, false, 1e-6);
    ThreatHeatmap hm(grid);
    std::vector<std::vector<oracle::Observation>> obs(grid.size());
    const int readings = 1 + static_cast<int>(rng.below(50));
    for (int r = 0; r < readings; ++r) {
      SensorReading rd;
      rd.kind = kinds[rng.below(kinds.size())];
      const DetectionOdds& o = *odds[static_cast<std::size_t>(rd.kind)];
      rd.cells = footprint(grid, static_cast<CellIndex>(rng.below(grid.size())), static_cast<int>(rng.below(4)));
      for (CellIndex c : rd.cells) {
        const bool det = rng.bernoulli(0.25);
        rd.detections.push_back(det);
        obs[c].push_back({o.p_det_eff, o.p_fp, det});
      }
      integrate_reading(hm, rd, model);
    }
    for (CellIndex c = 0; c < grid.size(); ++c) {
      worst = std::max(worst, std::abs(hm.posterior(c) - oracle::posterior(priors[c], obs[c])));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0,
          fmt("%d instances, max |posterior - oracle| = %.3g (tol 1e-9), %.2f s (limit 10 s)", instances, worst, secs)};
}

// Supervised run with a scripted operator who approves each phase proposal
// a fixed delay after it appears, so the run spans the whole tick budget.
std::uint64_t scripted_run(const Scenario& s, const RunOptions& o, Tick approve_delay, Tick& ticks) {
  Engine e(s, o);
  std::optional<Tick> seen;
  while (!e.finished()) {
    if (e.authority().proposal()) {
      if (!seen) seen = e.tick();
      if (e.tick() - *seen >= approve_delay) {
        e.submit({CommandKind::approve_phase});
        seen.reset();
      }
    }
    e.step();
  }
  ticks = e.tick();
  return e.log().hash();
}

Verdict determinism() {
  const auto t0 = Clock::now();
  const Scenario s = standard_scenario(2024, ControllerMode::mns);
  RunOptions o;
  o.max_ticks = 5000;
  o.supervised = true;
  o.faults = parse_fault_schedule(
      R"([{"type":"jamming_spike","start":200,"end":400,"p_loss":0.3},
          {"type":"robot_failure","robot":2,"tick":600}])",
      s);
  std::set<std::uint64_t> hashes;
  Tick ticks = 0;
  for (int i = 0; i < 20; ++i) hashes.insert(scripted_run(s, o, 1500, ticks));
  const double secs = seconds_since(t0);
  return {hashes.size() == 1 && ticks == 5000 && secs < 60.0,
          fmt("20 runs of %llu ticks (want 5000), %zu distinct log hash(es) (want 1), %.2f s (limit 60 s)",
              static_cast<unsigned long long>(ticks), hashes.size(), secs)};
}

std::vector<std::string> assignments(const EventLog& log) {
  std::vector<std::string> out;
  for (const std::string& l : log.lines()) {
    const json j = json::parse(l);
    if (j["e"] == "assign") out.push_back(j["t"].dump() + ":" + j["task"].dump() + ">" + j["robot"].dump());
  }
  return out;
}

Verdict centralized_equals_mns() {
  int equal = 0;
  std::string first_diff;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ScenarioParams p;
    p.net.p_link_loss = 0.0;
    p.net.radio_range = 1e9;
    const Scenario c = generate_scenario(p, 300 + seed);
    Scenario m = c;
    m.controller_mode = ControllerMode::mns;
    Engine ec(c), em(m);
    ec.run();
    em.run();
    const bool same_assign = assignments(ec.log()) == assignments(em.log());
    const bool same_heat = ec.authority().knowledge().heatmap() == em.authority().knowledge().heatmap();
    if (same_assign && same_heat && !assignments(ec.log()).empty()) {
      ++equal;
    } else if (first_diff.empty()) {
      first_diff = fmt("; first mismatch seed %llu (assign %d, heatmap %d)", static_cast<unsigned long long>(300 + seed),
                       same_assign, same_heat);
    }
  }
  return {equal == 10, fmt("%d/10 scenarios with identical assignment sequences and heatmaps%s", equal,
                           first_diff.c_str())};
}

Verdict robustness() {
  int ok = 0;
  double min_cov = 1.0;
  std::string failures;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Scenario s = standard_scenario(500 + seed, ControllerMode::centralized);
    Engine nominal(s);
    nominal.run();
    const Tick kill = nominal.tick() / 4;
    RunOptions o;
    const NodeId sugv = seed % 2 ? 4 : 5;
    FaultEntry f;
    f.kind = FaultKind::robot_failure;
    f.robot = sugv;
    f.tick = kill;
    o.faults.entries.push_back(f);
    validate(o.faults, s);
    Engine e(s, o);
    const RunOutcome out = e.run();
    const MetricsReport r = e.report();
    min_cov = std::min(min_cov, r.coverage);
    if (out == RunOutcome::complete && r.coverage >= 0.9 && r.robots_failed == 1) {
      ++ok;
    } else {
      failures += fmt(" seed %llu", static_cast<unsigned long long>(500 + seed));
    }
  }
  return {ok == 20, fmt("%d/20 complete after losing one SUGV at T/4, min coverage %.3f (want >= 0.9)%s", ok,
                        min_cov, failures.empty() ? "" : (";" + failures).c_str())};
}

Verdict centre_loss() {
  int ok = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::uint64_t sd = 700 + seed;
    const Scenario cen = standard_scenario(sd, ControllerMode::centralized);
    Scenario mns = cen;
    mns.controller_mode = ControllerMode::mns;
    RunOptions o;
    o.max_ticks = 5000;
    o.faults = parse_fault_schedule(R"([{"type":"comms_blackout","start":100,"nodes":[0]}])", cen);
    Engine ec(cen, o), em(mns, o);
    ec.run();
    em.run();
    const MetricsReport a = ec.report(), b = em.report();
    double d_completed = 0.0, d_phase = 0.0;
    for (const MetricDelta& row : compare_reports(a, b)) {
      if (row.name == "completed" && row.delta) d_completed = *row.delta;
      if (row.name == "final_phase_index" && row.delta) d_phase = *row.delta;
    }
    const bool pass = b.outcome == "complete" && a.final_phase_index < 2 && d_completed > 0.0 && d_phase > 0.0;
    ok += pass;
    detail += fmt(" %llu:%s/%s", static_cast<unsigned long long>(sd), a.final_phase.c_str(), b.final_phase.c_str());
  }
  return {ok == 5, fmt("%d/5 scenarios: MNS completes, centralized stalls before Confirmation (centralized/mns:%s)",
                       ok, detail.c_str())};
}

// ---------------------------------------------------------------------------

Topology random_topology(RngStream& rng, std::size_t n, double p_edge, std::vector<std::vector<bool>>& adj) {
  Topology t(n);
  adj.assign(n, std::vector<bool>(n, false));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (rng.bernoulli(p_edge)) {
        t.connect(static_cast<NodeId>(a), static_cast<NodeId>(b));
        adj[a][b] = adj[b][a] = true;
      }
    }
  }
  return t;
}

Message message(NodeId src, NodeId dst) {
  Message m;
  m.id = 1;
  m.src = src;
  m.dst = dst;
  m.at = src;
  m.ttl = 64;
  return m;
}

Verdict network_properties() {
  RngStream rng(4242, 0, StreamPurpose::placement);
  RngStream net(4242, 0, StreamPurpose::net);
  int bound_cases = 0, bound_ok = 0;
  int heal_cases = 0, heal_ok = 0;
  int split_cases = 0, split_ok = 0;

  while (bound_cases < 1000) {
    const std::size_t n = 2 + rng.below(14);
    std::vector<std::vector<bool>> adj;
    const Topology t = random_topology(rng, n, 0.3, adj);
    const NodeId src = static_cast<NodeId>(rng.below(n)), dst = static_cast<NodeId>(rng.below(n));
    const int hops = oracle::hop_distances(adj, src)[dst];
    if (hops <= 0) continue;
    ++bound_cases;
    const std::uint32_t latency = 1 + static_cast<std::uint32_t>(rng.below(4));
    std::vector<Message> flight{message(src, dst)};
    Tick delivered_at = 0;
    for (Tick tick = 1; tick <= 1000 && !flight.empty(); ++tick) {
      auto r = deliver(std::move(flight), t, 0.0, latency, net, tick);
      flight = std::move(r.in_flight);
      if (!r.delivered.empty()) delivered_at = tick;
    }
    bound_ok += delivered_at > 0 && delivered_at <= static_cast<Tick>(hops) * latency;
  }

  while (heal_cases < 1000) {
    const std::size_t n = 3 + rng.below(13);
    std::vector<std::vector<bool>> adj;
    Topology t = random_topology(rng, n, 0.35, adj);
    const NodeId src = static_cast<NodeId>(rng.below(n)), dst = static_cast<NodeId>(rng.below(n));
    if (oracle::hop_distances(adj, src)[dst] < 2) continue;
    const auto path = route(t, src, dst);
    if (!path || path->size() < 3) continue;
    // Cut one edge of the current route after the first hop has been taken.
    const std::size_t cut = 1 + rng.below(path->size() - 2);
    const NodeId a = (*path)[cut], b = (*path)[cut + 1];
    auto after = adj;
    after[a][b] = after[b][a] = false;
    oracle::UnionFind uf(n);
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        if (after[x][y]) uf.unite(x, y);
    if (!uf.same(a, dst)) continue;
    ++heal_cases;
    std::vector<Message> flight{message(src, dst)};
    bool got = false, cut_done = false;
    for (Tick tick = 1; tick <= 500 && !flight.empty(); ++tick) {
      if (!cut_done && flight.front().at == a) {
        t.disconnect(a, b);
        cut_done = true;
      }
      auto r = deliver(std::move(flight), t, 0.0, 1, net, tick);
      flight = std::move(r.in_flight);
      got = got || !r.delivered.empty();
    }
    heal_ok += got && cut_done;
  }

  while (split_cases < 1000) {
    const std::size_t n = 3 + rng.below(13);
    std::vector<std::vector<bool>> adj;
    const Topology t = random_topology(rng, n, 0.1, adj);
    oracle::UnionFind uf(n);
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        if (adj[x][y]) uf.unite(x, y);
    const NodeId src = static_cast<NodeId>(rng.below(n)), dst = static_cast<NodeId>(rng.below(n));
    if (uf.same(src, dst)) continue;
    ++split_cases;
    std::vector<Message> flight{message(src, dst)};
    bool phantom = false;
    for (Tick tick = 1; tick <= 100 && !flight.empty(); ++tick) {
      auto r = deliver(std::move(flight), t, 0.0, 1, net, tick);
      flight = std::move(r.in_flight);
      phantom = phantom || !r.delivered.empty();
      for (const Message& m : flight) phantom = phantom || !uf.same(m.at, src);
    }
    split_ok += !phantom;
  }

  return {bound_ok == bound_cases && heal_ok == heal_cases && split_ok == split_cases,
          fmt("hops*latency bound %d/%d, single-edge self-healing %d/%d, no cross-partition delivery %d/%d",
              bound_ok, bound_cases, heal_ok, heal_cases, split_ok, split_cases)};
}

Verdict sensor_statistics() {
  constexpr std::uint64_t kTrials = 100000;
  const ThreatModel tm = ThreatModel::defaults();
  const SensorTable table = SensorTable::defaults();
  WorldGrid grid(3, 3);
  struct Case {
    SensorKind kind;
    double depth;
    double metal;
    double expected;  // from the detection curve parameters
  };
  const std::vector<Case> cases{
      {SensorKind::rgb, 0.0, 0.5, 0.85},
      {SensorKind::gpr, 0.3, 0.5, 0.85 * std::pow(0.7, 0.3)},
      {SensorKind::gpr, 1.0, 0.5, 0.85 * 0.7},
      {SensorKind::emi, 0.2, 0.8, 0.95 * std::pow(0.6, 0.2) * 0.8},
      {SensorKind::xrb, 0.1, 0.5, 0.95 * std::pow(0.8, 0.1)},
      {SensorKind::raman, 0.0, 0.5, 0.90},
  };
  int ok = 0, total = 0;
  std::string worst;
  double worst_z = 0.0;
  auto check = [&](const std::string& name, std::uint64_t hits, double p) {
    ++total;
    const auto [lo, hi] = oracle::binomial_band(kTrials, p);
    const double x = static_cast<double>(hits);
    ok += x >= lo && x <= hi;
    const double z = std::abs(x - kTrials * p) / std::sqrt(kTrials * p * (1 - p));
    if (z >= worst_z) {
      worst_z = z;
      worst = name;
    }
  };
  std::uint32_t node = 1;
  for (const Case& c : cases) {
    SensorModel m = table.get(c.kind);
    m.footprint_radius = 0;
    Threat t;
    t.cell = grid.index(1, 1);
    t.depth = c.depth;
    t.metal_fraction = c.metal;
    const std::vector<Threat> ts{t};
    const ThreatIndex truth(grid.size(), ts);
    RngStream rng(77, node++, StreamPurpose::scan);
    std::uint64_t hits = 0, fps = 0;
    for (std::uint64_t i = 0; i < kTrials; ++i) {
      hits += scan(m, grid.center(t.cell), grid, truth, tm, rng, i).detection_count();
      fps += scan(m, grid.center(0), grid, truth, tm, rng, i).detection_count();
    }
    check(std::string(to_string(c.kind)) + " detection", hits, c.expected);
    check(std::string(to_string(c.kind)) + " false positive", fps, m.p_fp);
  }

  // Per-hop loss on a two-node link.
  Topology link(2);
  link.connect(0, 1);
  for (double p : {0.05, 0.3}) {
    RngStream net(78, static_cast<std::uint32_t>(p * 100), StreamPurpose::net);
    std::vector<Message> flight;
    for (std::uint64_t i = 0; i < kTrials; ++i) flight.push_back(message(0, 1));
    const DeliveryResult r = deliver(std::move(flight), link, p, 1, net, 1);
    std::uint64_t lost = 0;
    for (const auto& d : r.dropped) lost += d.reason == DropReason::loss;
    check(fmt("per-hop loss %.2f", p), lost, p);
  }
  return {ok == total, fmt("%d/%d frequencies inside 3-sigma binomial bands over 1e5 trials (largest |z| %.2f: %s)",
                           ok, total, worst_z, worst.c_str())};
}

Verdict calibration() {
  const ThreatModel tm = ThreatModel::defaults();
  const SensorTable table = SensorTable::defaults();
  const FusionModel model = FusionModel::build(table, tm, false, 1e-6);
  constexpr std::array kinds{SensorKind::rgb, SensorKind::gpr, SensorKind::emi};
  std::uint64_t outcomes = 0, in_bucket = 0, threats_in_bucket = 0;
  std::uint32_t world = 0;
  while (in_bucket < 10000 && world < 2000) {
    ++world;
    RngStream rng(9000 + world, 0, StreamPurpose::placement);
    WorldGrid grid(40, 40);
    std::vector<Threat> threats;
    for (CellIndex c = 0; c < grid.size(); ++c) {
      grid.at(c).terrain_prior = 0.05 + 0.25 * rng.uniform();
      if (rng.bernoulli(grid.at(c).terrain_prior)) {
        Threat t;
        t.id = static_cast<std::uint32_t>(threats.size());
        t.cell = c;
        threats.push_back(t);
      }
    }
    const ThreatIndex truth(grid.size(), threats);
    ThreatHeatmap hm(grid);
    RngStream scan_rng(9000 + world, 1, StreamPurpose::scan);
    for (int i = 0; i < 400; ++i) {
      const SensorModel& m = table.get(kinds[rng.below(kinds.size())]);
      ScanOptions opt;
      opt.generative_match = true;
      opt.p_det_eff = model.odds(m.kind).p_det_eff;
      const CellIndex at = static_cast<CellIndex>(rng.below(grid.size()));
      integrate_reading(hm, scan(m, grid.center(at), grid, truth, tm, scan_rng, i, opt), model);
    }
    for (CellIndex c = 0; c < grid.size(); ++c) {
      ++outcomes;
      const double p = hm.posterior(c);
      if (p >= 0.8 && p < 0.9) {
        ++in_bucket;
        threats_in_bucket += truth.at(c) != nullptr;
      }
    }
  }
  const double freq = in_bucket ? static_cast<double>(threats_in_bucket) / static_cast<double>(in_bucket) : 0.0;
  return {in_bucket >= 10000 && freq >= 0.75 && freq <= 0.95,
          fmt("bucket [0.8,0.9): %llu of %llu cell outcomes, threat frequency %.4f (want [0.75, 0.95])",
              static_cast<unsigned long long>(in_bucket), static_cast<unsigned long long>(outcomes), freq)};
}

Verdict limiting_recall() {
  int ok = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ScenarioParams p;
    p.fleet.pose_noise = false;
    p.fleet.clamp_degenerate = true;
    for (auto& m : p.fleet.sensors.models) {
      if (!m) continue;
      m->p_det_base = 1.0;
      m->depth_decay = 1.0;
      m->p_fp = 0.0;
    }
    p.mission.coverage_gate = 1.0;
    const Scenario s = generate_scenario(p, 900 + seed);
    Engine e(s);
    e.run();
    const MetricsReport r = e.report();
    const bool pass = r.outcome == "complete" && r.coverage == 1.0 && r.surface_recall && *r.surface_recall == 1.0;
    ok += pass;
    if (!pass) {
      detail += fmt(" seed %llu: %s cov %.3f surface_recall %s;", static_cast<unsigned long long>(900 + seed),
                    r.outcome.c_str(), r.coverage,
                    r.surface_recall ? fmt("%.3f", *r.surface_recall).c_str() : "n/a");
    }
  }
  return {ok == 10, fmt("%d/10 scenarios with full coverage and surface-threat recall 1.0%s", ok, detail.c_str())};
}

Verdict path_planning() {
  RngStream rng(5150, 0, StreamPurpose::placement);
  int ok = 0;
  for (int g = 0; g < 500; ++g) {
    const int w = 2 + static_cast<int>(rng.below(30)), h = 2 + static_cast<int>(rng.below(30));
    WorldGrid grid(w, h);
    const double density = 0.4 * rng.uniform();
    for (CellIndex c = 0; c < grid.size(); ++c) {
      grid.at(c).obstacle = rng.bernoulli(density);
      grid.at(c).indoor = rng.bernoulli(0.3);
    }
    const RobotKind kind = kAllRobotKinds[rng.below(4)];
    auto passable = [&](int c) {
      const Cell& cell = grid.cells()[static_cast<std::size_t>(c)];
      return is_aerial(kind) ? !(cell.obstacle && cell.indoor) : !cell.obstacle;
    };
    const CellIndex from = static_cast<CellIndex>(rng.below(grid.size()));
    const auto d = oracle::grid_distances(w, h, static_cast<int>(from), passable);
    bool good = true;
    for (int k = 0; k < 20 && good; ++k) {
      const CellIndex to = static_cast<CellIndex>(rng.below(grid.size()));
      if (d[to] < 0) {
        try {
          plan_path(grid, from, to, kind);
          good = false;
        } catch (const Error& e) {
          good = e.code() == ErrorCode::unreachable;
        }
        continue;
      }
      const auto path = plan_path(grid, from, to, kind);
      good = path.size() == static_cast<std::size_t>(d[to]) + 1 && path.front() == from && path.back() == to;
      for (std::size_t i = 1; good && i < path.size(); ++i) {
        good = passable(static_cast<int>(path[i])) && std::abs(grid.x_of(path[i]) - grid.x_of(path[i - 1])) <= 1 &&
               std::abs(grid.y_of(path[i]) - grid.y_of(path[i - 1])) <= 1;
      }
    }
    const auto field = distance_field(grid, from, kind);
    for (CellIndex c = 0; good && c < grid.size(); ++c) good = field[c] == d[c];
    ok += good;
  }
  return {ok == 500, fmt("%d/500 random grids: path lengths and distance fields equal the oracle", ok)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"fusion-oracle", fusion_oracle},
      {"determinism", determinism},
      {"centralized-equals-mns", centralized_equals_mns},
      {"robustness-sugv-loss", robustness},
      {"centre-loss", centre_loss},
      {"network-properties", network_properties},
      {"sensor-statistics", sensor_statistics},
      {"calibration", calibration},
      {"limiting-recall", limiting_recall},
      {"path-planning", path_planning},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %-24s %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
