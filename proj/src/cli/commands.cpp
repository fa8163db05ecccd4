#include "maple/cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maple/agents/crew.hpp"
#include "maple/agents/knowledge.hpp"
#include "maple/agents/orchestrator.hpp"
#include "maple/agents/prompts.hpp"
#include "maple/agents/trace.hpp"
#include "maple/device/device.hpp"
#include "maple/eval/metrics.hpp"
#include "maple/eval/task.hpp"
#include "maple/fsm/serialize.hpp"
#include "maple/gateway/backend.hpp"
#include "maple/gateway/gateway.hpp"
#include "maple/gateway/live.hpp"
#include "maple/perception/perception.hpp"
#include "maple/sim/oracle.hpp"
#include "maple/sim/world.hpp"
#include "maple/util/fsio.hpp"

namespace maple::cli {

namespace {

namespace fs = std::filesystem;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& detail) : std::runtime_error(detail) {}
};

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char c : name) {
    out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c))
                                                       : '_';
  }
  return out.empty() ? std::string("unnamed") : out;
}

std::optional<std::string> env_value(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

struct ModelStack {
  std::shared_ptr<gateway::ModelBackend> backend;
  sim::SimOracleBackend* oracle = nullptr;  // non-owning; needs the task bound per run
  bool live = false;
};

ModelStack make_model_stack(const RunConfig& cfg, const sim::World* world) {
  ModelStack stack;
  const std::string& m = cfg.model;
  if (m == "replay") {
    if (cfg.replay.empty()) throw ConfigError("--model replay requires --replay <dir>");
    stack.backend = std::make_shared<gateway::ReplayBackend>(cfg.replay);
  } else if (m == "oracle") {
    if (world == nullptr) throw ConfigError("--model oracle requires --device sim");
    auto oracle = std::make_shared<sim::SimOracleBackend>(*world);
    stack.oracle = oracle.get();
    stack.backend = std::move(oracle);
  } else if (m.rfind("openai:", 0) == 0) {
    stack.backend = gateway::make_openai_backend(m.substr(7), gateway::make_httplib_transport());
    stack.live = true;
  } else if (m.rfind("anthropic:", 0) == 0) {
    stack.backend =
        gateway::make_anthropic_backend(m.substr(10), gateway::make_httplib_transport());
    stack.live = true;
  } else if (m.rfind("google:", 0) == 0) {
    stack.backend = gateway::make_google_backend(m.substr(7), gateway::make_httplib_transport());
    stack.live = true;
  } else {
    throw ConfigError("unknown model backend '" + m +
                      "' (expected replay, oracle, openai:<m>, anthropic:<m> or google:<m>)");
  }
  if (!cfg.record.empty()) {
    stack.backend = std::make_shared<gateway::RecordingBackend>(stack.backend, cfg.record);
  }
  return stack;
}

nlohmann::json config_snapshot(const RunConfig& cfg, const std::string& task_id) {
  return nlohmann::json{{"task_id", task_id},
                        {"device", cfg.device},
                        {"world", cfg.world},
                        {"model", cfg.model},
                        {"replay", cfg.replay},
                        {"record", cfg.record},
                        {"seed", cfg.seed},
                        {"p_noop", cfg.p_noop},
                        {"p_misroute", cfg.p_misroute},
                        {"budget", cfg.budget},
                        {"no_planner", cfg.no_planner},
                        {"single_plan", cfg.single_plan},
                        {"no_conditions", cfg.no_conditions},
                        {"no_mentor", cfg.no_mentor}};
}

struct RunOutcome {
  eval::TaskResult result;
  agents::Trace trace;
};

RunOutcome run_one(const RunConfig& cfg, const eval::TaskSpec& task,
                   const fs::path& run_dir, agents::KnowledgeStore* store) {
  std::optional<sim::World> world;
  std::unique_ptr<device::DeviceBackend> dev;
  std::unique_ptr<perception::Perceiver> perceiver;

  if (cfg.device == "sim") {
    if (cfg.world.empty()) throw ConfigError("--device sim requires --world <file>");
    world.emplace(sim::World::load(cfg.world));
    world->set_fault_policy({cfg.seed, cfg.p_noop, cfg.p_misroute});
    dev = std::make_unique<device::SimDevice>(*world);
    perceiver = std::make_unique<perception::MockPerceiver>(*world);
  } else if (cfg.device == "adb") {
    device::AdbConfig adb;
    if (!cfg.packages.empty()) adb.packages = device::load_package_map(cfg.packages);
    dev = std::make_unique<device::AdbDevice>(adb);
    const auto url = env_value("MAPLE_PERCEPTION_URL");
    if (!url) throw ConfigError("--device adb requires MAPLE_PERCEPTION_URL");
    perceiver = std::make_unique<perception::ServicePerceiver>(
        gateway::make_httplib_transport(), *url);
  } else {
    throw ConfigError("unknown device backend '" + cfg.device + "'");
  }

  ModelStack stack = make_model_stack(cfg, world ? &*world : nullptr);
  if (stack.oracle != nullptr) stack.oracle->set_task(task);
  // Replay and oracle backends never benefit from retry backoff.
  gateway::Sleeper sleeper =
      stack.live ? gateway::Sleeper(nullptr) : [](std::chrono::milliseconds) {};
  gateway::Gateway gw(stack.backend, {}, std::move(sleeper));

  agents::PromptLibrary prompts;
  agents::AgentOptions options;
  options.multi_plan = !cfg.single_plan;
  options.use_conditions = !cfg.no_conditions;
  agents::AgentCrew crew(gw, prompts, options);
  if (world && !cfg.no_conditions) {
    crew.set_condition_evaluator([&w = *world](const std::string& predicate) {
      return sim::eval_predicate(w, predicate, {});
    });
  }

  agents::OrchestratorConfig ocfg;
  ocfg.step_budget = cfg.budget;
  ocfg.planner = !cfg.no_planner;
  ocfg.mentor = !cfg.no_mentor;
  agents::Orchestrator orchestrator(crew, *dev, *perceiver, ocfg, store);

  agents::RunResult rr = orchestrator.run(task);

  util::write_file(run_dir / "trace.jsonl", agents::trace_to_jsonl(rr.trace));
  util::write_file(run_dir / "summary.json", agents::trace_summary(rr.trace).dump(2) + "\n");
  util::write_file(run_dir / "config.json",
                   config_snapshot(cfg, task.task_id).dump(2) + "\n");
  util::write_file(run_dir / "journal.json", rr.journal.to_json().dump(2) + "\n");
  nlohmann::json fsms = nlohmann::json::object();
  for (const auto& [app, machine] : rr.fsms) {
    fsms[app] = fsm::fsm_to_json(machine);
    util::write_file(run_dir / ("fsm_" + sanitize_filename(app) + ".dot"),
                     fsm::fsm_to_dot(machine));
  }
  util::write_file(run_dir / "fsms.json", fsms.dump(2) + "\n");

  RunOutcome outcome;
  outcome.trace = std::move(rr.trace);
  outcome.result.task_id = task.task_id;
  outcome.result.status = outcome.trace.status;
  outcome.result.recovery_episodes = outcome.trace.recovery_episodes;
  outcome.result.recovered = outcome.trace.recovered;
  const auto executed = outcome.trace.executed_tokens();
  if (world) {
    try {
      outcome.result.satisfaction = eval::score_rubrics(executed, *world, task.rubrics);
    } catch (const eval::MissingPredicateError& e) {
      outcome.result.satisfaction = {};
      std::cerr << "note: " << task.task_id << ": " << e.what()
                << "; satisfaction not scored\n";
    }
  }
  if (!task.human_reference_operations.empty()) {
    std::vector<device::ActionToken> reference;
    reference.reserve(task.human_reference_operations.size());
    for (const auto& op : task.human_reference_operations) {
      reference.push_back(device::normalize_op(op));
    }
    outcome.result.accuracy = eval::action_accuracy(executed, reference);
  }
  return outcome;
}

int exit_code_for(const std::string& status) {
  if (status == "success") return kExitOk;
  if (status == "step-budget-exhausted") return kExitBudget;
  return kExitTerminated;
}

// Missing keys keep their current values, so file config sits below env and
// flags in precedence.
void apply_config_file(RunConfig& cfg, const std::string& path) {
  const auto doc = nlohmann::json::parse(util::read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ConfigError("config file " + path + " is not a JSON object");
  }
  cfg.task = doc.value("task", cfg.task);
  cfg.suite = doc.value("suite", cfg.suite);
  cfg.device = doc.value("device", cfg.device);
  cfg.world = doc.value("world", cfg.world);
  cfg.model = doc.value("model", cfg.model);
  cfg.replay = doc.value("replay", cfg.replay);
  cfg.record = doc.value("record", cfg.record);
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.p_noop = doc.value("p_noop", cfg.p_noop);
  cfg.p_misroute = doc.value("p_misroute", cfg.p_misroute);
  cfg.budget = doc.value("budget", cfg.budget);
  cfg.no_planner = doc.value("no_planner", cfg.no_planner);
  cfg.single_plan = doc.value("single_plan", cfg.single_plan);
  cfg.no_conditions = doc.value("no_conditions", cfg.no_conditions);
  cfg.no_mentor = doc.value("no_mentor", cfg.no_mentor);
  cfg.out = doc.value("out", cfg.out);
  cfg.kb = doc.value("kb", cfg.kb);
  cfg.packages = doc.value("packages", cfg.packages);
}

void apply_env(RunConfig& cfg) {
  const auto str = [&](const char* name, std::string& slot) {
    if (auto v = env_value(name)) slot = *v;
  };
  const auto flag = [&](const char* name, bool& slot) {
    if (auto v = env_value(name)) slot = (*v == "1" || *v == "true");
  };
  str("MAPLE_TASK", cfg.task);
  str("MAPLE_SUITE", cfg.suite);
  str("MAPLE_DEVICE", cfg.device);
  str("MAPLE_WORLD", cfg.world);
  str("MAPLE_MODEL", cfg.model);
  str("MAPLE_REPLAY", cfg.replay);
  str("MAPLE_RECORD", cfg.record);
  str("MAPLE_OUT", cfg.out);
  str("MAPLE_KB", cfg.kb);
  str("MAPLE_PACKAGES", cfg.packages);
  if (auto v = env_value("MAPLE_SEED")) cfg.seed = std::stoull(*v);
  if (auto v = env_value("MAPLE_P_NOOP")) cfg.p_noop = std::stod(*v);
  if (auto v = env_value("MAPLE_P_MISROUTE")) cfg.p_misroute = std::stod(*v);
  if (auto v = env_value("MAPLE_BUDGET")) cfg.budget = std::stoi(*v);
  flag("MAPLE_NO_PLANNER", cfg.no_planner);
  flag("MAPLE_SINGLE_PLAN", cfg.single_plan);
  flag("MAPLE_NO_CONDITIONS", cfg.no_conditions);
  flag("MAPLE_NO_MENTOR", cfg.no_mentor);
}

}  // namespace

int cmd_run(const RunConfig& cfg) {
  const eval::TaskSpec task = eval::load_task(cfg.task);
  const fs::path run_dir = fs::path(cfg.out) / task.task_id;
  fs::create_directories(run_dir);

  // Default store lives inside the run directory and starts empty, so
  // repeated runs are byte-identical; pass --kb for a persistent store.
  std::optional<agents::KnowledgeStore> store;
  if (!cfg.kb.empty()) {
    store.emplace(cfg.kb);
  } else {
    store.emplace((run_dir / "knowledge.json").string());
    store->clear();
  }

  RunOutcome outcome = run_one(cfg, task, run_dir, &*store);
  const auto report = eval::compute_metrics({outcome.result});
  util::write_file(run_dir / "report.json", eval::report_to_json(report).dump(2) + "\n");

  std::cout << task.task_id << ": " << outcome.trace.status << " ("
            << outcome.trace.steps.size() << " steps, " << outcome.trace.recovery_episodes
            << " recovery episodes)\n"
            << "run dir: " << run_dir.string() << "\n"
            << eval::report_to_text(report);
  return exit_code_for(outcome.trace.status);
}

int cmd_bench(const RunConfig& cfg) {
  const std::vector<eval::TaskSpec> tasks = eval::load_suite(cfg.suite);
  const fs::path out_dir(cfg.out);
  fs::create_directories(out_dir);

  std::optional<agents::KnowledgeStore> store;
  if (!cfg.kb.empty()) {
    store.emplace(cfg.kb);
  } else {
    // Fresh per bench so two invocations replay the same prompt stream.
    store.emplace((out_dir / "knowledge.json").string());
    store->clear();
  }

  std::vector<eval::TaskResult> results;
  for (const auto& task : tasks) {
    const fs::path run_dir = out_dir / task.task_id;
    fs::create_directories(run_dir);
    RunOutcome outcome = run_one(cfg, task, run_dir, &*store);
    std::cout << task.task_id << ": " << outcome.trace.status << "\n";
    results.push_back(std::move(outcome.result));
  }

  const auto report = eval::compute_metrics(results);
  util::write_file(out_dir / "report.json", eval::report_to_json(report).dump(2) + "\n");
  util::write_file(out_dir / "report.csv", eval::report_to_csv(report));
  util::write_file(out_dir / "report.txt", eval::report_to_text(report));
  std::cout << eval::report_to_text(report);
  return kExitOk;
}

int cmd_export(const std::string& trace_dir, const std::string& app,
               const std::string& format, const std::string& out_file) {
  const fs::path doc_path = fs::path(trace_dir) / "fsms.json";
  if (!fs::exists(doc_path)) {
    std::cerr << "error: no fsms.json under " << trace_dir << "\n";
    return kExitConfig;
  }
  const auto doc = nlohmann::json::parse(util::read_file(doc_path));
  if (!doc.contains(app)) {
    std::cerr << "error: no FSM for app '" << app << "' (have:";
    for (const auto& [name, _] : doc.items()) std::cerr << " " << name;
    std::cerr << ")\n";
    return kExitConfig;
  }
  const fsm::AppFsm machine = fsm::fsm_from_json(doc[app]);
  const std::string rendered = fsm::export_fsm(machine, format);
  if (out_file.empty()) {
    std::cout << rendered;
  } else {
    util::write_file(out_file, rendered);
    std::cout << "wrote " << out_file << "\n";
  }
  return kExitOk;
}

int cmd_kb(const std::string& verb, const std::string& store_path) {
  agents::KnowledgeStore store(store_path);
  if (verb == "clear") {
    store.clear();
    std::cout << "cleared " << store_path << "\n";
    return kExitOk;
  }
  if (!fs::exists(store_path)) {
    std::cerr << "error: no knowledge store at " << store_path << "\n";
    return kExitConfig;
  }
  const agents::KnowledgeBase kb = store.load();
  if (verb == "list") {
    std::cout << kb.cues.size() << " cues, " << kb.sequences.size() << " sequences, "
              << kb.fsms.size() << " fsms\n";
    return kExitOk;
  }
  if (verb == "show") {
    std::cout << agents::kb_to_json(kb).dump(2) << "\n";
    return kExitOk;
  }
  std::cerr << "error: unknown kb verb '" << verb << "'\n";
  return kExitConfig;
}

int run_cli(int argc, char** argv) {
  RunConfig cfg;

  // Precedence: flags > environment > config file. The file is applied first,
  // then the environment, and CLI11 only writes options that were given.
  try {
    std::string config_path;
    if (auto v = env_value("MAPLE_CONFIG")) config_path = *v;
    for (int i = 1; i + 1 < argc; ++i) {
      if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    }
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    apply_env(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  CLI::App app{"state-aware mobile GUI agent runner"};
  app.require_subcommand(1);

  std::string config_path_opt;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path_opt, "JSON config file (lowest precedence)");
    sub->add_option("--device", cfg.device, "device backend: sim | adb");
    sub->add_option("--world", cfg.world, "sim world JSON");
    sub->add_option("--model", cfg.model,
                    "model backend: replay | oracle | openai:<m> | anthropic:<m> | google:<m>");
    sub->add_option("--replay", cfg.replay, "replay archive directory");
    sub->add_option("--record", cfg.record, "record exchanges into this archive directory");
    sub->add_option("--seed", cfg.seed, "fault RNG seed");
    sub->add_option("--p-noop", cfg.p_noop, "probability a tap is dropped");
    sub->add_option("--p-misroute", cfg.p_misroute, "probability a transition misroutes");
    sub->add_option("--budget", cfg.budget, "step budget");
    sub->add_flag("--no-planner", cfg.no_planner, "treat the instruction as a single subtask");
    sub->add_flag("--single-plan", cfg.single_plan, "one plan candidate, no judge");
    sub->add_flag("--no-conditions", cfg.no_conditions, "drop pre/post-conditions");
    sub->add_flag("--no-mentor", cfg.no_mentor, "skip knowledge retention");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--kb", cfg.kb, "knowledge store path");
    sub->add_option("--packages", cfg.packages, "adb app-name to package map JSON");
  };

  auto* run = app.add_subcommand("run", "Run a single task");
  run->add_option("--task", cfg.task, "task JSON path");
  add_common(run);

  auto* bench = app.add_subcommand("bench", "Run a task suite and report metrics");
  bench->add_option("--suite", cfg.suite, "directory of task JSONs");
  add_common(bench);

  std::string trace_dir, export_app, export_format = "dot", export_out;
  auto* exp = app.add_subcommand("export", "Export an app FSM from a run directory");
  exp->add_option("--trace", trace_dir, "run directory")->required();
  exp->add_option("--app", export_app, "app name")->required();
  exp->add_option("--format", export_format, "dot | json");
  exp->add_option("--out", export_out, "output file (default stdout)");

  std::string kb_verb, kb_store;
  auto* kb = app.add_subcommand("kb", "Inspect or mutate the knowledge store");
  kb->add_option("verb", kb_verb, "list | clear | show")
      ->required()
      ->check(CLI::IsMember({"list", "clear", "show"}));
  kb->add_option("--store", kb_store, "knowledge store path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) {
      if (cfg.task.empty()) throw ConfigError("run requires --task (or MAPLE_TASK)");
      return cmd_run(cfg);
    }
    if (bench->parsed()) {
      if (cfg.suite.empty()) throw ConfigError("bench requires --suite (or MAPLE_SUITE)");
      return cmd_bench(cfg);
    }
    if (exp->parsed()) return cmd_export(trace_dir, export_app, export_format, export_out);
    if (kb->parsed()) return cmd_kb(kb_verb, kb_store);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace maple::cli
