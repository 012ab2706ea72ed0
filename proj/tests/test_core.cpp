#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ciedsim/errors.hpp"
#include "ciedsim/fixed.hpp"
#include "ciedsim/fleet.hpp"
#include "ciedsim/fusion.hpp"
#include "ciedsim/netsim.hpp"
#include "ciedsim/rng.hpp"
#include "ciedsim/scenario.hpp"
#include "ciedsim/sensors.hpp"
#include "oracles/oracles.hpp"

using namespace ciedsim;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

WorldGrid random_grid(RngStream& rng, int w, int h, double obstacles) {
  WorldGrid g(w, h);
  for (CellIndex c = 0; c < g.size(); ++c) {
    g.at(c).obstacle = rng.bernoulli(obstacles);
    g.at(c).indoor = rng.bernoulli(0.3);
  }
  return g;
}

}  // namespace

TEST_CASE("rng streams are pure functions of their key and counter") {
  RngStream a(7, 3, StreamPurpose::scan), b(7, 3, StreamPurpose::scan);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(7, 4, StreamPurpose::scan), d(7, 3, StreamPurpose::net);
  CHECK(c.key() != a.key());
  CHECK(d.key() != a.key());

  RngStream u(1, 0, StreamPurpose::placement);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    sum += x;
  }
  CHECK(std::abs(sum / 100000.0 - 0.5) < 0.005);

  RngStream k(2, 0, StreamPurpose::placement);
  for (int i = 0; i < 1000; ++i) CHECK(k.below(7) < 7u);
}

TEST_CASE("fixed-point log-odds addition is order independent") {
  RngStream rng(11, 0, StreamPurpose::scan);
  std::vector<LogOdds> terms;
  for (int i = 0; i < 200; ++i) terms.push_back(LogOdds::from_double(rng.normal() * 3.0));
  LogOdds fwd, rev;
  for (auto t : terms) fwd += t;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) rev += *it;
  CHECK(fwd == rev);
  CHECK(sigmoid(logit(0.3)) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("scenario generation is deterministic and round-trips") {
  ScenarioParams p;
  p.width = 30;
  p.height = 25;
  p.threat_count = 8;
  const Scenario a = generate_scenario(p, 42);
  const Scenario b = generate_scenario(p, 42);
  CHECK(a == b);
  CHECK_FALSE(a == generate_scenario(p, 43));

  const std::string text = serialize_scenario(a);
  CHECK(parse_scenario(text) == a);
  CHECK(serialize_scenario(parse_scenario(text)) == text);

  SUBCASE("threats are legal placements") {
    const auto reach = reachable_mask(a.grid, a.deployment_cell, RobotKind::sugv);
    std::set<CellIndex> cells;
    for (const Threat& t : a.threats) {
      CHECK_FALSE(a.grid.at(t.cell).obstacle);
      CHECK(reach[t.cell] == 1);
      CHECK(cells.insert(t.cell).second);
      CHECK(ground_truth_at(a, t.cell).has_value());
    }
    CHECK(a.threats.size() == 8);
  }

  SUBCASE("format version mismatch is rejected") {
    auto j = text;
    const auto at = j.find("\"format_version\": 1");
    REQUIRE(at != std::string::npos);
    j.replace(at, 19, "\"format_version\": 9");
    CHECK(code_of([&] { parse_scenario(j); }) == ErrorCode::version_mismatch);
  }

  SUBCASE("malformed text is a parse error") {
    CHECK(code_of([] { parse_scenario("{ not json"); }) == ErrorCode::parse);
  }

  SUBCASE("too many threats is infeasible") {
    ScenarioParams q = p;
    q.width = 4;
    q.height = 4;
    q.threat_count = 40;
    CHECK(code_of([&] { generate_scenario(q, 1); }) == ErrorCode::infeasible_placement);
  }
}

TEST_CASE("single-cell detection frequencies match the detection curve") {
  WorldGrid grid(3, 3);
  const ThreatModel tm = ThreatModel::defaults();
  Threat t;
  t.cell = grid.index(1, 1);
  t.depth = 0.5;
  t.metal_fraction = 0.6;
  const std::vector<Threat> threats{t};
  const ThreatIndex truth(grid.size(), threats);

  SensorModel gpr = SensorTable::defaults().get(SensorKind::gpr);
  gpr.footprint_radius = 0;
  const double expected = 0.85 * std::pow(0.7, 0.5);
  CHECK(p_det(gpr, t) == doctest::Approx(expected).epsilon(1e-12));

  RngStream rng(5, 1, StreamPurpose::scan);
  const std::uint64_t n = 20000;
  std::uint64_t hits = 0, fps = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    hits += scan(gpr, grid.center(t.cell), grid, truth, tm, rng, i).detection_count();
    fps += scan(gpr, grid.center(0), grid, truth, tm, rng, i).detection_count();
  }
  const auto [lo, hi] = oracle::binomial_band(n, expected);
  CHECK(static_cast<double>(hits) >= lo);
  CHECK(static_cast<double>(hits) <= hi);
  const auto [flo, fhi] = oracle::binomial_band(n, 0.03);
  CHECK(static_cast<double>(fps) >= flo);
  CHECK(static_cast<double>(fps) <= fhi);
}

TEST_CASE("footprints are euclidean discs clipped to the grid") {
  WorldGrid grid(9, 9);
  const auto fp = footprint(grid, grid.index(4, 4), 2);
  std::size_t expect = 0;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x)
      if ((x - 4) * (x - 4) + (y - 4) * (y - 4) <= 4) ++expect;
  CHECK(fp.size() == expect);
  CHECK(std::is_sorted(fp.begin(), fp.end()));
  CHECK(footprint(grid, grid.index(0, 0), 1).size() == 3);
}

TEST_CASE("degenerate detectors need explicit clamping") {
  std::array<std::optional<DetectionOdds>, kSensorKindCount> odds{};
  odds[static_cast<std::size_t>(SensorKind::rgb)] = DetectionOdds{1.0, 0.0};
  CHECK(code_of([&] { FusionModel::from_odds(odds, false, 1e-6); }) == ErrorCode::degenerate_model);
  const FusionModel m = FusionModel::from_odds(odds, true, 1e-6);
  CHECK(std::isfinite(m.lr(SensorKind::rgb, true).value()));
  CHECK(m.lr(SensorKind::rgb, false).value() < -10.0);
}

TEST_CASE("incremental posterior matches the brute-force Bayes oracle") {
  RngStream rng(99, 0, StreamPurpose::scan);
  for (int inst = 0; inst < 50; ++inst) {
    const int w = 1 + static_cast<int>(rng.below(4));
    const int h = 1 + static_cast<int>(rng.below(3));
    WorldGrid grid(w, h);
    std::vector<double> priors(grid.size());
    for (CellIndex c = 0; c < grid.size(); ++c) {
      priors[c] = 0.001 + 0.5 * rng.uniform();
      grid.at(c).terrain_prior = priors[c];
    }
    std::array<std::optional<DetectionOdds>, kSensorKindCount> odds{};
    for (SensorKind k : {SensorKind::rgb, SensorKind::gpr, SensorKind::emi}) {
      const double fp = 0.01 + 0.2 * rng.uniform();
      odds[static_cast<std::size_t>(k)] = DetectionOdds{fp + (0.98 - fp) * rng.uniform(), fp};
    }
    const FusionModel model = FusionModel::from_odds(odds, false, 1e-6);
    ThreatHeatmap hm(grid);
    std::vector<std::vector<oracle::Observation>> obs(grid.size());
    const int readings = 1 + static_cast<int>(rng.below(50));
    for (int r = 0; r < readings; ++r) {
      SensorReading rd;
      rd.kind = std::array{SensorKind::rgb, SensorKind::gpr, SensorKind::emi}[rng.below(3)];
      const DetectionOdds& o = *odds[static_cast<std::size_t>(rd.kind)];
      for (CellIndex c = 0; c < grid.size(); ++c) {
        if (!rng.bernoulli(0.6)) continue;
        const bool det = rng.bernoulli(0.3);
        rd.cells.push_back(c);
        rd.detections.push_back(det);
        obs[c].push_back({o.p_det_eff, o.p_fp, det});
      }
      integrate_reading(hm, rd, model);
    }
    const auto joint = oracle::joint_posteriors(priors, obs);
    for (CellIndex c = 0; c < grid.size(); ++c) {
      CHECK(std::abs(hm.posterior(c) - oracle::posterior(priors[c], obs[c])) < 1e-9);
      CHECK(std::abs(hm.posterior(c) - joint[c]) < 1e-9);
    }
  }
}

TEST_CASE("fusion result does not depend on reading order") {
  ScenarioParams p;
  p.width = 20;
  p.height = 20;
  const Scenario s = generate_scenario(p, 3);
  const ThreatIndex truth(s.grid.size(), s.threats);
  const FusionModel model = FusionModel::build(s.fleet.sensors, s.threat_model, false, 1e-6);
  RngStream rng(3, 1, StreamPurpose::scan);
  std::vector<SensorReading> rs;
  for (int i = 0; i < 100; ++i) {
    const auto kind = std::array{SensorKind::rgb, SensorKind::gpr, SensorKind::emi}[i % 3];
    const CellIndex at = static_cast<CellIndex>(rng.below(s.grid.size()));
    rs.push_back(scan(s.fleet.sensors.get(kind), s.grid.center(at), s.grid, truth, s.threat_model, rng, i));
  }
  ThreatHeatmap a(s.grid), b(s.grid);
  for (const auto& r : rs) integrate_reading(a, r, model);
  for (auto it = rs.rbegin(); it != rs.rend(); ++it) integrate_reading(b, *it, model);
  for (CellIndex c = 0; c < s.grid.size(); ++c) CHECK(a.log_odds(c) == b.log_odds(c));
}

TEST_CASE("candidate extraction finds one blob per hot component") {
  WorldGrid grid(6, 6);
  ThreatHeatmap hm(grid);
  hm.add(grid.index(1, 1), LogOdds::from_double(8.0), 1);
  hm.add(grid.index(2, 2), LogOdds::from_double(9.0), 1);  // diagonal neighbour: same blob
  hm.add(grid.index(5, 5), LogOdds::from_double(7.0), 1);
  const auto blobs = extract_candidates(hm, 0.5);
  REQUIRE(blobs.size() == 2);
  CHECK(blobs[0].cell == grid.index(2, 2));
  CHECK(blobs[0].cells.size() == 2);
  CHECK(blobs[1].cell == grid.index(5, 5));
}

TEST_CASE("candidate status transitions are checked") {
  Candidate c;
  CHECK(code_of([&] { transition(c, CandidateStatus::classified); }) == ErrorCode::invalid_transition);
  transition(c, CandidateStatus::confirmed);
  transition(c, CandidateStatus::classified);
  CHECK(code_of([&] { transition(c, CandidateStatus::dismissed); }) == ErrorCode::invalid_transition);
}

TEST_CASE("planned paths are shortest and legal") {
  RngStream rng(17, 0, StreamPurpose::placement);
  for (int g = 0; g < 60; ++g) {
    const int w = 3 + static_cast<int>(rng.below(18)), h = 3 + static_cast<int>(rng.below(18));
    const WorldGrid grid = random_grid(rng, w, h, 0.3);
    const RobotKind kind = kAllRobotKinds[rng.below(4)];
    auto passable = [&](int c) {
      const Cell& cell = grid.cells()[static_cast<std::size_t>(c)];
      return is_aerial(kind) ? !(cell.obstacle && cell.indoor) : !cell.obstacle;
    };
    const CellIndex from = static_cast<CellIndex>(rng.below(grid.size()));
    const auto d = oracle::grid_distances(w, h, static_cast<int>(from), passable);
    const auto field = distance_field(grid, from, kind);
    for (CellIndex to = 0; to < grid.size(); ++to) {
      REQUIRE(field[to] == d[to]);
      if (d[to] < 0) {
        CHECK(code_of([&] { plan_path(grid, from, to, kind); }) == ErrorCode::unreachable);
        continue;
      }
      const auto path = plan_path(grid, from, to, kind);
      REQUIRE(path.size() == static_cast<std::size_t>(d[to]) + 1);
      CHECK(path.front() == from);
      CHECK(path.back() == to);
      for (std::size_t i = 1; i < path.size(); ++i) {
        CHECK(passable(static_cast<int>(path[i])));
        CHECK(std::abs(grid.x_of(path[i]) - grid.x_of(path[i - 1])) <= 1);
        CHECK(std::abs(grid.y_of(path[i]) - grid.y_of(path[i - 1])) <= 1);
      }
    }
  }
}

TEST_CASE("motion respects speed and battery") {
  FleetConfig cfg;
  auto robots = default_fleet(cfg, {0.5, 0.5});
  REQUIRE(robots.size() == 6);
  CHECK(robots[0].kind == RobotKind::suav);
  CHECK(robots[5].kind == RobotKind::lugv);
  RobotState r = robots[3];  // SUGV, 1.5 m/s
  const std::vector<Vec2> path{{10.5, 0.5}};
  const MotionResult m = step_motion(r, path, 1.0);
  CHECK(m.distance == doctest::Approx(1.5));
  CHECK(m.robot.pose.x == doctest::Approx(2.0));
  CHECK(m.robot.battery < r.battery);

  CHECK(fail_robot(robots, 3));
  CHECK_FALSE(fail_robot(robots, 3));
  CHECK_FALSE(robots[2].can_move());
}

namespace {

Topology random_topology(RngStream& rng, std::size_t n, double p_edge,
                         std::vector<std::vector<bool>>& adj) {
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

Message make_message(NodeId src, NodeId dst, std::uint64_t id) {
  Message m;
  m.id = id;
  m.src = src;
  m.dst = dst;
  m.at = src;
  m.ttl = 64;
  return m;
}

}  // namespace

TEST_CASE("partitions agree with union-find") {
  RngStream rng(23, 0, StreamPurpose::net);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.below(12);
    std::vector<std::vector<bool>> adj;
    const Topology t = random_topology(rng, n, 0.2, adj);
    oracle::UnionFind uf(n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (adj[a][b]) uf.unite(a, b);
    const auto parts = partitions(t);
    std::size_t total = 0;
    for (const auto& p : parts) {
      total += p.size();
      for (NodeId x : p) CHECK(uf.same(p.front(), x));
    }
    CHECK(total == n);
    for (std::size_t i1 = 0; i1 < parts.size(); ++i1)
      for (std::size_t i2 = i1 + 1; i2 < parts.size(); ++i2) CHECK_FALSE(uf.same(parts[i1][0], parts[i2][0]));
  }
}

TEST_CASE("lossless delivery takes hops times latency") {
  RngStream rng(29, 0, StreamPurpose::net);
  RngStream net(29, 0, StreamPurpose::scan);
  int checked = 0;
  while (checked < 200) {
    const std::size_t n = 2 + rng.below(10);
    std::vector<std::vector<bool>> adj;
    const Topology t = random_topology(rng, n, 0.35, adj);
    const NodeId src = static_cast<NodeId>(rng.below(n)), dst = static_cast<NodeId>(rng.below(n));
    const int hops = oracle::hop_distances(adj, src)[dst];
    if (hops <= 0) continue;
    const std::uint32_t latency = 1 + static_cast<std::uint32_t>(rng.below(3));
    std::vector<Message> flight{make_message(src, dst, 1)};
    Tick tick = 0;
    bool got = false;
    while (!flight.empty() && tick < 500) {
      ++tick;
      auto r = deliver(std::move(flight), t, 0.0, latency, net, tick);
      flight = std::move(r.in_flight);
      CHECK(r.dropped.empty());
      if (!r.delivered.empty()) {
        got = true;
        CHECK(tick <= static_cast<Tick>(hops) * latency);
        CHECK(r.delivered[0].hops == static_cast<std::uint32_t>(hops));
      }
    }
    CHECK(got);
    ++checked;
  }
}

TEST_CASE("messages never cross partitions") {
  RngStream rng(31, 0, StreamPurpose::net);
  RngStream net(31, 0, StreamPurpose::scan);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 3 + rng.below(10);
    std::vector<std::vector<bool>> adj;
    const Topology t = random_topology(rng, n, 0.12, adj);
    const NodeId src = static_cast<NodeId>(rng.below(n)), dst = static_cast<NodeId>(rng.below(n));
    if (oracle::hop_distances(adj, src)[dst] >= 0) continue;
    std::vector<Message> flight{make_message(src, dst, 1)};
    for (Tick tick = 1; tick <= 80 && !flight.empty(); ++tick) {
      auto r = deliver(std::move(flight), t, 0.0, 1, net, tick);
      CHECK(r.delivered.empty());
      for (const auto& d : r.dropped) CHECK(d.reason == DropReason::ttl);
      flight = std::move(r.in_flight);
    }
    CHECK(flight.empty());
  }
}

TEST_CASE("broadcast reaches exactly the source component when lossless") {
  RngStream rng(37, 0, StreamPurpose::net);
  RngStream net(37, 0, StreamPurpose::scan);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng.below(12);
    std::vector<std::vector<bool>> adj;
    const Topology t = random_topology(rng, n, 0.2, adj);
    const NodeId src = static_cast<NodeId>(rng.below(n));
    const auto d = oracle::hop_distances(adj, src);
    const BroadcastResult b = broadcast(src, t, 0.0, net);
    std::vector<NodeId> expect;
    for (std::size_t k = 0; k < n; ++k)
      if (d[k] >= 0) expect.push_back(static_cast<NodeId>(k));
    CHECK(b.reached == expect);
  }
}

TEST_CASE("disk topology honours radio range and blocks") {
  NetConfig cfg;
  cfg.radio_range = 10.0;
  std::vector<std::optional<Vec2>> poses{Vec2{0, 0}, Vec2{5, 0}, Vec2{14, 0}, std::nullopt};
  Topology t = rebuild_topology(poses, cfg);
  CHECK(t.linked(0, 1));
  CHECK(t.linked(1, 2));
  CHECK_FALSE(t.linked(0, 2));
  CHECK_FALSE(t.present(3));
  LinkBlock block;
  block.isolated = {1};
  t = rebuild_topology(poses, cfg, &block);
  CHECK_FALSE(t.linked(0, 1));
  CHECK(partitions(t).size() == 3);
  const auto r = route(rebuild_topology(poses, cfg), 0, 2);
  REQUIRE(r.has_value());
  CHECK(*r == std::vector<NodeId>{0, 1, 2});
}
