#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef CIEDSIM_CLI_PATH
#error "CIEDSIM_CLI_PATH must point at the built command-line tool"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "ciedsim_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(CIEDSIM_CLI_PATH) + " " + args + " >" + (workdir() / "stdout.txt").string() +
                          " 2>" + (workdir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli: generate, run, replay, compare") {
  const fs::path dir = workdir();
  const fs::path scen = dir / "s.json";
  REQUIRE(cli("generate --size 20x20 --threats 3 --seed 4 -o " + scen.string()) == 0);
  REQUIRE(fs::exists(scen));

  REQUIRE(cli("run --scenario " + scen.string() + " --mode centralized -o " + (dir / "c").string()) == 0);
  REQUIRE(cli("run --scenario " + scen.string() + " --mode mns -o " + (dir / "m").string()) == 0);
  const fs::path log = dir / "c" / "run-centralized-4.events.jsonl";
  const fs::path met = dir / "c" / "run-centralized-4.metrics.json";
  REQUIRE(fs::exists(log));
  REQUIRE(fs::exists(met));
  CHECK(fs::exists(dir / "c" / "run-centralized-4.heatmap.csv"));

  REQUIRE(cli("replay " + log.string() + " -o " + (dir / "replayed.json").string()) == 0);
  CHECK(json::parse(slurp(dir / "replayed.json")) == json::parse(slurp(met)));

  REQUIRE(cli("compare " + met.string() + " " + (dir / "m" / "run-mns-4.metrics.json").string()) == 0);
  CHECK(slurp(dir / "stdout.txt").find("summary:") != std::string::npos);
}

TEST_CASE("cli: batch runs write aggregates") {
  const fs::path out = workdir() / "batch";
  REQUIRE(cli("run --size 16x16 --threats 2 --seeds 1..3 -o " + out.string()) == 0);
  const std::string agg = slurp(out / "aggregate.csv");
  CHECK(std::count(agg.begin(), agg.end(), '\n') == 4);
  CHECK(fs::exists(out / "aggregate_summary.csv"));
}

TEST_CASE("cli: exit codes") {
  CHECK(cli("--help") == 0);
  CHECK(cli("run --bogus-flag") == 2);
  CHECK(cli("run --scenario /nonexistent.json") == 2);
  CHECK(cli("replay /nonexistent.jsonl") == 2);

  const fs::path bad = workdir() / "truncated.jsonl";
  std::ofstream(bad) << "{\"t\":0,\"n\":0,\"e\":\"coverage\"}\n";
  CHECK(cli("replay " + bad.string()) == 2);
  CHECK(slurp(workdir() / "stderr.txt").find("IncompatibleLog") != std::string::npos);

  // A tick budget too small to finish.
  CHECK(cli("run --size 16x16 --threats 2 --seed 1 --max-ticks 20 -o " + (workdir() / "short").string()) == 3);
}
