#pragma once

#include <cstdint>
#include <string>

namespace maple::cli {

// Exit codes are a stable contract:
//   0 success, 1 usage/config error, 2 terminated run, 3 step budget exhausted.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitTerminated = 2;
inline constexpr int kExitBudget = 3;

struct RunConfig {
  std::string task;            // run: task JSON path
  std::string suite;           // bench: directory containing tasks/
  std::string device = "sim";  // "sim" | "adb"
  std::string world;           // sim world JSON; required with --device sim
  std::string model = "replay";  // replay | oracle | openai:<m> | anthropic:<m> | google:<m>
  std::string replay;            // archive dir; required with --model replay
  std::string record;            // archive dir to record into (oracle/live)
  std::uint64_t seed = 0;
  double p_noop = 0.0;
  double p_misroute = 0.0;
  int budget = 40;
  bool no_planner = false;
  bool single_plan = false;
  bool no_conditions = false;
  bool no_mentor = false;
  std::string out = "runs";
  std::string kb;        // knowledge store path; default <out>/knowledge.json
  std::string packages;  // adb: app-name -> package map JSON
};

int cmd_run(const RunConfig& config);
int cmd_bench(const RunConfig& config);
int cmd_export(const std::string& trace_dir, const std::string& app,
               const std::string& format, const std::string& out_file);
int cmd_kb(const std::string& verb, const std::string& store_path);

int run_cli(int argc, char** argv);

}  // namespace maple::cli
