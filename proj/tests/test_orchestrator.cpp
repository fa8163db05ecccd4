#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "maple/agents/crew.hpp"
#include "maple/agents/orchestrator.hpp"
#include "maple/agents/trace.hpp"
#include "maple/device/device.hpp"
#include "maple/eval/metrics.hpp"
#include "maple/eval/task.hpp"
#include "maple/gateway/backend.hpp"
#include "maple/gateway/gateway.hpp"
#include "maple/perception/perception.hpp"
#include "maple/sim/oracle.hpp"
#include "maple/sim/world.hpp"
#include "maple/util/fsio.hpp"

using namespace maple;
using nlohmann::json;

namespace {

const char* kGoldenWorld = MAPLE_SOURCE_DIR "/assets/worlds/golden.json";
const char* kGoldenTasks = MAPLE_SOURCE_DIR "/assets/tasks/golden";

eval::TaskSpec golden_task(const std::string& file) {
  return eval::load_task(std::string(kGoldenTasks) + "/" + file);
}

// The full sim-deterministic stack: oracle model, mock perception, simulated
// device, machine-checkable conditions.
struct Rig {
  sim::World world;
  device::SimDevice dev{world};
  perception::MockPerceiver perceiver{world};
  std::shared_ptr<sim::SimOracleBackend> oracle =
      std::make_shared<sim::SimOracleBackend>(world);
  std::shared_ptr<gateway::ScriptedBackend> scripted;  // optional planner override
  gateway::Gateway gw;
  agents::PromptLibrary prompts{MAPLE_SOURCE_DIR "/assets/prompts"};
  agents::AgentCrew crew;

  explicit Rig(json world_doc, agents::AgentOptions opts = {},
               bool script_planner = false)
      : world(sim::World::from_json(std::move(world_doc))),
        scripted(script_planner ? std::make_shared<gateway::ScriptedBackend>()
                                : nullptr),
        gw(scripted ? std::static_pointer_cast<gateway::ModelBackend>(scripted)
                    : std::static_pointer_cast<gateway::ModelBackend>(oracle),
           {}, [](std::chrono::milliseconds) {}),
        crew(gw, prompts, opts) {
    crew.set_condition_evaluator([this](const std::string& predicate) {
      return sim::eval_predicate(world, predicate, {});
    });
  }

  agents::RunResult run(const eval::TaskSpec& task,
                        agents::OrchestratorConfig cfg = {},
                        agents::KnowledgeStore* store = nullptr) {
    if (scripted && !delegated) {
      // Registered last: tags without a scripted handler fall to the oracle.
      scripted->on_tag_prefix("", [this](const gateway::ModelRequest& req) {
        return oracle->complete(req).text;
      });
      delegated = true;
    }
    oracle->set_task(task);
    agents::Orchestrator orchestrator(crew, dev, perceiver, cfg, store);
    return orchestrator.run(task);
  }

  bool delegated = false;
};

json load_world_doc() {
  return json::parse(util::read_file(kGoldenWorld));
}

// One screen, one dead element, one working one: taps on 'Broken thing'
// never change anything, so verification keeps failing there.
json widgets_world() {
  return json::parse(R"({
    "screen_size": [480, 800],
    "apps": [
      {
        "name": "Widgets",
        "initial": "main",
        "screens": {
          "main": {
            "beacon": "Main Page of Widgets",
            "elements": [
              {"kind": "text", "content": "Broken thing", "bounds": [40, 60, 440, 120]},
              {"kind": "text", "content": "Finish", "bounds": [40, 200, 440, 280]}
            ]
          }
        },
        "rules": [
          {"screen": "main", "on": {"kind": "tap", "element": "Finish"},
           "next": "main", "mutations": ["flag:finished"]}
        ]
      }
    ]
  })");
}

eval::TaskSpec widgets_task() {
  json doc = {
      {"task_id", "widgets_finish"},
      {"instruction", "Finish the widget task."},
      {"type", "single_app"},
      {"apps", {"Widgets"}},
      {"rubrics", json::array({json{{"text", "Finished"}, {"predicate", "flag:finished"}}})},
      {"human_reference_operations",
       {"open the Widgets app", "tap 'Broken thing'", "tap 'Finish'"}},
  };
  return eval::task_from_json(doc);
}

}  // namespace

TEST_CASE("clean oracle run walks the plan with all-success verdicts") {
  Rig rig(load_world_doc());
  const auto task = golden_task("t05_notes_create.json");
  const auto rr = rig.run(task);

  CHECK(rr.trace.status == "success");
  CHECK(rr.trace.plan.items.size() == 4);
  CHECK(rr.trace.plan.source == "fresh");
  REQUIRE(rr.trace.steps.size() == 4);  // one action per subtask
  for (const auto& s : rr.trace.steps) {
    CHECK(s.verdict == "Success");
    CHECK(s.phase == "normal");
  }
  CHECK(rr.trace.recovery_episodes == 0);
  CHECK(rr.trace.replans == 0);

  // Full marks on both rubric satisfaction and step accuracy.
  const auto ss = eval::score_rubrics(rr.trace.executed_tokens(), rig.world, task.rubrics);
  CHECK(ss.num == ss.den);
  std::vector<device::ActionToken> reference;
  for (const auto& op : task.human_reference_operations) {
    reference.push_back(device::normalize_op(op));
  }
  const auto aa = eval::action_accuracy(rr.trace.executed_tokens(), reference);
  CHECK(aa.num == aa.den);
}

TEST_CASE("steps are strictly ordered and every success verifies its state") {
  Rig rig(load_world_doc());
  const auto rr = rig.run(golden_task("t01_walmart_card.json"));
  REQUIRE(rr.trace.status == "success");

  int last = 0;
  for (const auto& s : rr.trace.steps) {
    CHECK(s.step == last + 1);
    last = s.step;
    REQUIRE(rr.fsms.count(s.app) == 1);
    const auto& machine = rr.fsms.at(s.app);
    REQUIRE(machine.contains(s.state_after));
    if (s.verdict == "Success") CHECK(machine.state(s.state_after).verified);
    CHECK(machine.state(s.state_after).beacon == s.beacon_after);
  }
  CHECK(rr.journal.entries().size() == rr.trace.steps.size());
  // Opening Walmart from the launcher is the one cross-app hop.
  CHECK(rr.journal.cross_app_edges().size() == 1);
  CHECK(rr.journal.cross_app_edges()[0].to_app == "Walmart");
}

TEST_CASE("an injected no-op fault triggers one recovered episode") {
  Rig rig(load_world_doc());
  rig.world.set_fault_policy({7, 0.3, 0.0});
  const auto task = golden_task("t01_walmart_card.json");
  const auto rr = rig.run(task);

  CHECK(rr.trace.status == "success");
  REQUIRE(rig.world.fault_events().size() == 1);
  const auto& fault = rig.world.fault_events()[0];
  CHECK(fault.kind == "noop");

  // The swallowed tap is exactly the NoChange step, and nothing else is.
  std::set<int> nochange_steps;
  for (const auto& s : rr.trace.steps) {
    if (s.verdict == "NoChange") nochange_steps.insert(s.step);
  }
  CHECK(nochange_steps == std::set<int>{fault.step});

  CHECK(rr.trace.recovery_episodes == 1);
  CHECK(rr.trace.recovered == 1);
  CHECK(rr.trace.replans == 0);

  // The episode is an in-place re-attempt: the step after the fault runs in
  // the recovery phase and succeeds.
  const auto& retry = rr.trace.steps[static_cast<std::size_t>(fault.step)];
  CHECK(retry.phase == "recovery");
  CHECK(retry.verdict == "Success");

  // The detour costs nothing on either metric.
  const auto ss = eval::score_rubrics(rr.trace.executed_tokens(), rig.world, task.rubrics);
  CHECK(ss.num == ss.den);
  std::vector<device::ActionToken> reference;
  for (const auto& op : task.human_reference_operations) {
    reference.push_back(device::normalize_op(op));
  }
  const auto aa = eval::action_accuracy(rr.trace.executed_tokens(), reference);
  CHECK(aa.num == aa.den);
}

TEST_CASE("repeated recovery failures force a replan that finishes the task") {
  Rig rig(widgets_world(), {}, true);
  rig.scripted->on_tag_prefix("planner.judge",
                              [](const gateway::ModelRequest&) {
                                return std::string("best: 1");
                              });
  int plan_calls = 0;
  rig.scripted->on_tag_prefix("planner.candidate", [&](const gateway::ModelRequest& req) {
    ++plan_calls;
    const std::string prompt = req.messages.front().parts.front().text;
    if (prompt.find("Execution progress:") != std::string::npos) {
      CHECK(prompt.find("repeated recovery failures on 'tap 'Broken thing''") !=
            std::string::npos);
      return std::string("- subtask: tap 'Finish' | rationale: skip the dead control\n");
    }
    return std::string(
        "- subtask: open the Widgets app | rationale: entry\n"
        "- subtask: tap 'Broken thing' | rationale: intended path\n"
        "- subtask: tap 'Finish' | rationale: wrap up\n");
  });

  const auto rr = rig.run(widgets_task());

  CHECK(rr.trace.status == "success");
  CHECK(rr.trace.replans == 1);
  CHECK(rr.trace.recovery_episodes == 1);
  CHECK(rr.trace.recovered == 0);  // the episode ended unrecovered
  CHECK(rig.world.flag("finished"));

  // open, failed tap, two in-place re-attempts, then the revised plan's tap.
  REQUIRE(rr.trace.steps.size() == 5);
  CHECK(rr.trace.steps[0].verdict == "Success");
  CHECK(rr.trace.steps[1].verdict == "NoChange");
  CHECK(rr.trace.steps[1].phase == "normal");
  CHECK(rr.trace.steps[2].phase == "recovery");
  CHECK(rr.trace.steps[3].phase == "recovery");
  CHECK(rr.trace.steps[4].verdict == "Success");
  CHECK(rr.trace.steps[4].phase == "normal");

  CHECK(rr.trace.plan.source == "revised");
  CHECK(rr.trace.plan.items.size() == 1);
  bool noted = false;
  for (const auto& n : rr.trace.notes) noted = noted || n == "replan 1";
  CHECK(noted);
  // Fresh plan fan-out (5) plus one revised fan-out (5).
  CHECK(plan_calls == 10);
}

TEST_CASE("replanning is bounded and exhaustion terminates the run") {
  Rig rig(widgets_world(), {}, true);
  rig.scripted->on_tag_prefix("planner.judge",
                              [](const gateway::ModelRequest&) {
                                return std::string("best: 1");
                              });
  // Every plan, fresh or revised, insists on the dead element.
  rig.scripted->on_tag_prefix("planner.candidate", [](const gateway::ModelRequest&) {
    return std::string(
        "- subtask: open the Widgets app | rationale: entry\n"
        "- subtask: tap 'Broken thing' | rationale: stubborn\n");
  });

  agents::OrchestratorConfig cfg;
  cfg.max_replans = 2;
  const auto rr = rig.run(widgets_task(), cfg);

  CHECK(rr.trace.status == "terminated");
  CHECK(rr.trace.replans == 2);
  CHECK(rr.trace.recovery_episodes == 3);  // one per plan generation
  CHECK(rr.trace.recovered == 0);
  REQUIRE_FALSE(rr.trace.notes.empty());
  CHECK(rr.trace.notes.back().find("recovery and replanning exhausted") !=
        std::string::npos);
}

TEST_CASE("the step budget cuts the run off cleanly") {
  Rig rig(load_world_doc());
  agents::OrchestratorConfig cfg;
  cfg.step_budget = 1;
  const auto rr = rig.run(golden_task("t05_notes_create.json"), cfg);
  CHECK(rr.trace.status == "step-budget-exhausted");
  CHECK(rr.trace.steps.size() == 1);
}

TEST_CASE("without the planner the instruction is the single subtask") {
  Rig rig(load_world_doc());
  agents::OrchestratorConfig cfg;
  cfg.planner = false;
  const auto task = golden_task("t01_walmart_card.json");
  const auto rr = rig.run(task, cfg);

  REQUIRE(rr.trace.plan.items.size() == 1);
  CHECK(rr.trace.plan.items[0].subtask == task.instruction);
  CHECK(rr.trace.plan.items[0].rationale == "execute the instruction directly");

  // The run "succeeds" only in the bookkeeping sense; the rubrics expose it.
  const auto ss = eval::score_rubrics(rr.trace.executed_tokens(), rig.world, task.rubrics);
  CHECK(ss.num == 0);
}

TEST_CASE("identical runs produce byte-identical traces") {
  auto run_once = [] {
    Rig rig(load_world_doc());
    rig.world.set_fault_policy({21, 0.25, 0.0});
    const auto rr = rig.run(golden_task("t02_walmart_browse.json"));
    return std::make_pair(agents::trace_to_jsonl(rr.trace),
                          agents::trace_summary(rr.trace).dump(2));
  };
  const auto a = run_once();
  const auto b = run_once();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("the mentor persists knowledge only when enabled") {
  const auto dir = std::filesystem::temp_directory_path() / "maple_orch_kb";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  SUBCASE("enabled: cues and maps reach the store") {
    agents::KnowledgeStore store((dir / "kb.json").string());
    Rig rig(load_world_doc());
    const auto rr = rig.run(golden_task("t05_notes_create.json"), {}, &store);
    REQUIRE(rr.retained.has_value());
    CHECK_FALSE(rr.retained->cues.empty());
    CHECK(rr.retained->fsms.count("Notes") == 1);

    const auto kb = store.load();
    CHECK_FALSE(kb.cues.empty());
    CHECK(kb.fsms.count("Notes") == 1);
  }
  SUBCASE("disabled: the store stays untouched") {
    agents::KnowledgeStore store((dir / "kb_off.json").string());
    Rig rig(load_world_doc());
    agents::OrchestratorConfig cfg;
    cfg.mentor = false;
    const auto rr = rig.run(golden_task("t05_notes_create.json"), cfg, &store);
    CHECK_FALSE(rr.retained.has_value());
    CHECK(store.load().empty());
    CHECK_FALSE(std::filesystem::exists(dir / "kb_off.json"));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("cross-app tasks journal the hops and keep per-app machines") {
  Rig rig(load_world_doc());
  const auto rr = rig.run(golden_task("t06_cross_app_note.json"));
  REQUIRE(rr.trace.status == "success");

  CHECK(rr.fsms.count("Maps") == 1);
  CHECK(rr.fsms.count("Notes") == 1);
  // launcher -> Maps, then Maps -> Notes via the second open.
  REQUIRE(rr.journal.cross_app_edges().size() == 2);
  CHECK(rr.journal.cross_app_edges()[0].to_app == "Maps");
  CHECK(rr.journal.cross_app_edges()[1].from_app == "Maps");
  CHECK(rr.journal.cross_app_edges()[1].to_app == "Notes");

  // No Maps state leaks into the Notes machine.
  for (const auto& [id, node] : rr.fsms.at("Notes").states()) {
    CHECK(node.app == "Notes");
  }
}

TEST_CASE("agent failures terminate the trace instead of escaping") {
  Rig rig(widgets_world(), {}, true);
  rig.scripted->on_tag_prefix("planner.judge",
                              [](const gateway::ModelRequest&) {
                                return std::string("best: 1");
                              });
  rig.scripted->on_tag_prefix("planner.candidate", [](const gateway::ModelRequest&) {
    return std::string("- subtask: tap 'Phantom button' | rationale: not on screen\n");
  });
  const auto rr = rig.run(widgets_task());
  CHECK(rr.trace.status == "terminated");
  REQUIRE_FALSE(rr.trace.notes.empty());
  CHECK(rr.trace.notes.back().find("element not on screen") != std::string::npos);
}
