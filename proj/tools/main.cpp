// ciedsim command-line front end. Talks to the simulator only through the
// C interface in ciedsim.h.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ciedsim/ciedsim.h"
#include "json.hpp"
#include "opserver.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIncomplete = 3;

// Library failure carrying the status and last error message.
struct LibError : std::runtime_error {
  ciedsim_status status;
  LibError(ciedsim_status s, const std::string& what) : std::runtime_error(what), status(s) {}
};

void check(ciedsim_status st, const std::string& ctx) {
  if (st == CIEDSIM_OK) return;
  throw LibError(st, ctx + ": " + ciedsim_status_name(st) + ": " + ciedsim_last_error());
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ciedsim_string_free(s);
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LibError(CIEDSIM_E_IO, "cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw LibError(CIEDSIM_E_IO, "cannot write " + p.string());
  out << text;
}

struct ScenarioPtr {
  ciedsim_scenario* p = nullptr;
  ~ScenarioPtr() { ciedsim_scenario_free(p); }
};

struct EnginePtr {
  ciedsim_engine* p = nullptr;
  ~EnginePtr() { ciedsim_engine_free(p); }
};

std::pair<int, int> parse_size(const std::string& s) {
  static const std::regex re(R"(^(\d{1,5})x(\d{1,5})$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw CLI::ValidationError("--size", "expected WIDTHxHEIGHT, got '" + s + "'");
  return {std::stoi(m[1]), std::stoi(m[2])};
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  static const std::regex re(R"(^(\d+)\.\.(\d+)$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw CLI::ValidationError("--seeds", "expected A..B, got '" + s + "'");
  const std::uint64_t a = std::stoull(m[1]), b = std::stoull(m[2]);
  if (a > b || b - a > 100000) throw CLI::ValidationError("--seeds", "range '" + s + "' is empty or too large");
  std::vector<std::uint64_t> out;
  for (std::uint64_t x = a; x <= b; ++x) out.push_back(x);
  return out;
}

int parse_mode(const std::string& s) {
  if (s == "centralized") return CIEDSIM_CENTRALIZED;
  if (s == "mns") return CIEDSIM_MNS;
  throw CLI::ValidationError("--mode", "expected centralized or mns, got '" + s + "'");
}

fs::path default_out_dir() {
  if (const char* env = std::getenv("CIEDSIM_OUT"); env && *env) return env;
  return "ciedsim-out";
}

// Generation flags shared by generate, run and serve.
struct GenFlags {
  std::string size = "50x50";
  int threats = 10;
  double indoor = 0.1;
  double obstacles = 0.05;

  void add(CLI::App& app) {
    app.add_option("--size", size, "grid size WIDTHxHEIGHT")->capture_default_str();
    app.add_option("--threats", threats, "number of threats")->capture_default_str();
    app.add_option("--indoor", indoor, "indoor fraction")->capture_default_str();
    app.add_option("--obstacles", obstacles, "outdoor obstacle density")->capture_default_str();
  }
  ciedsim_gen_params params(int mode) const {
    ciedsim_gen_params p;
    ciedsim_gen_params_default(&p);
    const auto [w, h] = parse_size(size);
    p.width = w;
    p.height = h;
    p.threats = threats;
    p.indoor_fraction = indoor;
    p.obstacle_density = obstacles;
    p.mode = mode;
    return p;
  }
};

// Everything that picks the scenario and how it runs.
struct RunFlags {
  GenFlags gen;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string mode;
  std::string faults;
  std::uint64_t max_ticks = 5000;
  bool supervised = false;

  void add(CLI::App& app, bool batch) {
    gen.add(app);
    app.add_option("--scenario", scenario, "scenario file (instead of generation flags)");
    app.add_option("--seed", seed, "seed");
    if (batch) app.add_option("--seeds", seeds, "inclusive seed range A..B");
    app.add_option("--mode", mode, "centralized or mns (default: scenario's own mode, else centralized)");
    app.add_option("--faults", faults, "fault schedule file");
    app.add_option("--max-ticks", max_ticks, "tick budget")->capture_default_str();
  }

  std::vector<std::uint64_t> seed_list() const {
    if (seed && !seeds.empty()) throw CLI::ValidationError("--seed", "give --seed or --seeds, not both");
    if (!seeds.empty()) return parse_seeds(seeds);
    if (seed) return {*seed};
    if (scenario.empty()) throw CLI::ValidationError("--seed", "generation needs --seed or --seeds");
    return {};
  }

  // Scenario for one seed; an empty optional seed keeps a file's own seed.
  void make(std::optional<std::uint64_t> s, ScenarioPtr& out) const {
    const int m = mode.empty() ? -1 : parse_mode(mode);
    if (!scenario.empty()) {
      check(ciedsim_scenario_load(scenario.c_str(), &out.p), "loading " + scenario);
      if (s) check(ciedsim_scenario_set_seed(out.p, *s), "seed");
    } else {
      const ciedsim_gen_params p = gen.params(m < 0 ? CIEDSIM_CENTRALIZED : m);
      check(ciedsim_scenario_generate(&p, *s, &out.p), "generating scenario");
    }
    if (m >= 0) check(ciedsim_scenario_set_mode(out.p, m), "mode");
  }

  void engine(const ScenarioPtr& s, bool supervised_run, EnginePtr& out) const {
    ciedsim_run_options o;
    ciedsim_run_options_default(&o);
    o.max_ticks = max_ticks;
    o.supervised = supervised_run ? 1 : 0;
    std::string text;
    if (!faults.empty()) {
      text = read_file(faults);
      o.faults_json = text.c_str();
    }
    check(ciedsim_engine_create(s.p, &o, &out.p), "creating engine");
  }
};

void validate_flags(const RunFlags& f, const CLI::App& app) {
  const bool gen_flags = app.count("--size") || app.count("--threats") || app.count("--indoor") ||
                         app.count("--obstacles");
  if (!f.scenario.empty() && gen_flags) {
    throw CLI::ValidationError("--scenario", "give a scenario file or generation flags, not both");
  }
  if (f.scenario.empty()) f.gen.params(CIEDSIM_CENTRALIZED);
  if (!f.mode.empty()) parse_mode(f.mode);
}

// ---------------------------------------------------------------------------

int cmd_generate(const GenFlags& gen, std::uint64_t seed, const std::string& mode, const std::string& out_path) {
  const ciedsim_gen_params p = gen.params(mode.empty() ? CIEDSIM_CENTRALIZED : parse_mode(mode));
  ScenarioPtr s;
  check(ciedsim_scenario_generate(&p, seed, &s.p), "generating scenario");
  const fs::path path =
      out_path.empty() ? default_out_dir() / ("scenario-" + std::to_string(seed) + ".json") : fs::path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  check(ciedsim_scenario_save(s.p, path.string().c_str()), "saving scenario");
  ciedsim_scenario_info info{};
  check(ciedsim_scenario_info_get(s.p, &info), "scenario info");
  std::cout << path.string() << "\n"
            << "grid " << info.width << "x" << info.height << "  threats " << info.threats << "  robots "
            << info.robots << "  reachable cells " << info.reachable_cells << "  seed " << info.seed << "\n";
  return kExitOk;
}

struct Stat {
  double sum = 0, sq = 0;
  int n = 0;
  void add(double v) {
    sum += v;
    sq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / n : NAN; }
  double sd() const { return n > 1 ? std::sqrt(std::max(0.0, (sq - sum * sum / n) / (n - 1))) : 0.0; }
};

const std::vector<std::pair<std::string, std::vector<std::string>>>& aggregate_columns() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> cols{
      {"ticks", {"ticks"}},
      {"final_phase_index", {"final_phase_index"}},
      {"coverage", {"coverage", "final"}},
      {"recall", {"detection", "recall"}},
      {"surface_recall", {"detection", "surface_recall"}},
      {"precision", {"detection", "precision"}},
      {"candidates", {"detection", "candidates"}},
      {"false_candidates", {"detection", "false_candidates"}},
      {"classification_accuracy", {"detection", "classification_accuracy"}},
      {"messages_sent", {"messages", "sent"}},
      {"loss_rate", {"messages", "loss_rate"}},
      {"robots_failed", {"robots_failed"}},
  };
  return cols;
}

const json* dig(const json& j, const std::vector<std::string>& path) {
  const json* cur = &j;
  for (const auto& k : path) {
    if (!cur->is_object() || !cur->contains(k)) return nullptr;
    cur = &(*cur)[k];
  }
  return cur;
}

std::string cell(const json* v) {
  if (!v || v->is_null()) return "";
  if (v->is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v->get<double>());
    return buf;
  }
  return v->dump();
}

int cmd_run(const RunFlags& f, const std::string& out_dir) {
  const fs::path dir = out_dir.empty() ? default_out_dir() : fs::path(out_dir);
  fs::create_directories(dir);
  std::vector<std::optional<std::uint64_t>> seeds;
  for (std::uint64_t s : f.seed_list()) seeds.emplace_back(s);
  if (seeds.empty()) seeds.emplace_back(std::nullopt);
  const bool batch = seeds.size() > 1;

  std::vector<json> reports;
  bool incomplete = false;
  for (const auto& seed : seeds) {
    ScenarioPtr s;
    f.make(seed, s);
    ciedsim_scenario_info info{};
    check(ciedsim_scenario_info_get(s.p, &info), "scenario info");
    EnginePtr e;
    f.engine(s, f.supervised, e);
    int outcome = 0;
    check(ciedsim_engine_run(e.p, &outcome), "running");
    const std::string stem =
        std::string("run-") + (info.mode == CIEDSIM_MNS ? "mns" : "centralized") + "-" + std::to_string(info.seed);
    char* text = nullptr;
    check(ciedsim_engine_log_lines(e.p, 0, &text), "event log");
    write_file(dir / (stem + ".events.jsonl"), take(text));
    check(ciedsim_engine_report_json(e.p, &text), "report");
    const std::string report = take(text);
    write_file(dir / (stem + ".metrics.json"), report);
    check(ciedsim_engine_heatmap_csv(e.p, &text), "heatmap");
    write_file(dir / (stem + ".heatmap.csv"), take(text));
    if (outcome != CIEDSIM_COMPLETE) incomplete = true;
    if (!batch) {
      check(ciedsim_report_summary(report.c_str(), &text), "summary");
      std::cout << take(text);
      std::cout << "artifacts: " << (dir / stem).string() << ".{events.jsonl,metrics.json,heatmap.csv}\n";
    } else {
      const json r = json::parse(report);
      std::cout << "seed " << info.seed << "  " << r["outcome"].get<std::string>() << "  ticks "
                << r["ticks"].get<std::uint64_t>() << "\n";
      reports.push_back(r);
    }
  }

  if (batch) {
    std::ostringstream rows;
    rows << "seed,mode,outcome";
    for (const auto& [name, path] : aggregate_columns()) rows << "," << name;
    rows << "\n";
    std::vector<Stat> stats(aggregate_columns().size());
    for (const json& r : reports) {
      rows << r["seed"].get<std::uint64_t>() << "," << r["mode"].get<std::string>() << ","
           << r["outcome"].get<std::string>();
      for (std::size_t i = 0; i < aggregate_columns().size(); ++i) {
        const json* v = dig(r, aggregate_columns()[i].second);
        rows << "," << cell(v);
        if (v && v->is_number()) stats[i].add(v->get<double>());
      }
      rows << "\n";
    }
    write_file(dir / "aggregate.csv", rows.str());
    std::ostringstream summary;
    summary << "metric,n,mean,sd\n";
    char line[160];
    std::printf("%-26s %6s %14s %14s\n", "metric", "n", "mean", "sd");
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const std::string& name = aggregate_columns()[i].first;
      std::snprintf(line, sizeof line, "%s,%d,%.6g,%.6g\n", name.c_str(), stats[i].n, stats[i].mean(), stats[i].sd());
      summary << line;
      std::printf("%-26s %6d %14.6g %14.6g\n", name.c_str(), stats[i].n, stats[i].mean(), stats[i].sd());
    }
    write_file(dir / "aggregate_summary.csv", summary.str());
    std::cout << "aggregate: " << (dir / "aggregate.csv").string() << " (" << reports.size() << " rows)\n";
  }
  return incomplete ? kExitIncomplete : kExitOk;
}

int cmd_compare(const std::string& a, const std::string& b) {
  char* table = nullptr;
  check(ciedsim_compare(read_file(a).c_str(), read_file(b).c_str(), &table), "compare");
  std::cout << take(table);
  return kExitOk;
}

int cmd_replay(const std::string& log_path, const std::string& out) {
  const std::string text = read_file(log_path);
  char* report = nullptr;
  check(ciedsim_replay(text.data(), text.size(), &report), "replay");
  const std::string r = take(report);
  if (!out.empty()) write_file(out, r);
  char* summary = nullptr;
  check(ciedsim_report_summary(r.c_str(), &summary), "summary");
  std::cout << take(summary);
  return kExitOk;
}

ciedsim::op::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const RunFlags& f, std::uint16_t port, double pace, bool exit_on_finish, const std::string& bind) {
  const auto seeds = f.seed_list();
  if (seeds.size() > 1) throw CLI::ValidationError("--seed", "serve runs a single seed");
  ScenarioPtr s;
  f.make(seeds.empty() ? std::nullopt : std::optional<std::uint64_t>(seeds[0]), s);
  EnginePtr e;
  f.engine(s, true, e);
  ciedsim::op::ServeOptions o;
  o.port = port;
  o.ticks_per_second = pace;
  o.exit_on_finish = exit_on_finish;
  o.bind_address = bind;
  ciedsim::op::Server server(e.p, o);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving ws://" << bind << ":" << server.port() << "/  (" << pace << " ticks/s)" << std::endl;
  server.run();
  g_server = nullptr;
  char* report = nullptr;
  check(ciedsim_engine_report_json(e.p, &report), "report");
  const std::string r = take(report);
  char* summary = nullptr;
  check(ciedsim_report_summary(r.c_str(), &summary), "summary");
  std::cout << take(summary);
  return ciedsim_engine_outcome(e.p) == CIEDSIM_COMPLETE ? kExitOk : kExitIncomplete;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ciedsim: multi-robot counter-IED mission simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ciedsim_version()));

  auto* gen = app.add_subcommand("generate", "generate a scenario file");
  GenFlags gen_flags;
  std::uint64_t gen_seed = 1;
  std::string gen_mode, gen_out;
  gen_flags.add(*gen);
  gen->add_option("--seed", gen_seed, "seed")->capture_default_str();
  gen->add_option("--mode", gen_mode, "controller mode stored in the scenario");
  gen->add_option("--out,-o", gen_out, "output file (default: $CIEDSIM_OUT/scenario-SEED.json)");

  auto* run = app.add_subcommand("run", "run one scenario or a batch of seeds");
  RunFlags run_flags;
  std::string run_out;
  run_flags.add(*run, true);
  run->add_flag("--supervised", run_flags.supervised, "wait for operator approval at phase gates");
  run->add_option("--out,-o", run_out, "output directory (default: $CIEDSIM_OUT or ./ciedsim-out)");

  auto* cmp = app.add_subcommand("compare", "compare two metrics reports");
  std::string rep_a, rep_b;
  cmp->add_option("report_a", rep_a, "baseline report")->required();
  cmp->add_option("report_b", rep_b, "other report")->required();

  auto* rep = app.add_subcommand("replay", "recompute metrics from an event log");
  std::string log_path, replay_out;
  rep->add_option("log", log_path, "event log")->required();
  rep->add_option("--out,-o", replay_out, "write the recomputed report here");

  auto* serve = app.add_subcommand("serve", "paced supervised run behind the operator gateway");
  RunFlags serve_flags;
  std::uint16_t port = 8765;
  double pace = 10.0;
  bool exit_on_finish = false;
  std::string bind = "127.0.0.1";
  serve_flags.add(*serve, false);
  serve->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();
  serve->add_option("--pace", pace, "ticks per second")->capture_default_str()->check(CLI::PositiveNumber);
  serve->add_option("--bind", bind, "listen address")->capture_default_str();
  serve->add_flag("--exit-on-finish", exit_on_finish, "stop serving once the run ends");

  try {
    app.parse(argc, argv);
    if (*gen) return cmd_generate(gen_flags, gen_seed, gen_mode, gen_out);
    if (*run) {
      validate_flags(run_flags, *run);
      return cmd_run(run_flags, run_out);
    }
    if (*cmp) return cmd_compare(rep_a, rep_b);
    if (*rep) return cmd_replay(log_path, replay_out);
    if (*serve) {
      validate_flags(serve_flags, *serve);
      return cmd_serve(serve_flags, port, pace, exit_on_finish, bind);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const LibError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ciedsim::op::PortInUse& e) {
    std::cerr << "error: PortInUse: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
