#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "maple/agents/crew.hpp"
#include "maple/agents/knowledge.hpp"
#include "maple/agents/prompts.hpp"
#include "maple/fsm/fsm.hpp"
#include "maple/fsm/serialize.hpp"
#include "maple/gateway/backend.hpp"
#include "maple/gateway/gateway.hpp"
#include "maple/gateway/sections.hpp"
#include "maple/util/fsio.hpp"

using namespace maple;
using agents::AgentCrew;
using agents::AgentOptions;
using agents::KnowledgeBase;
using gateway::ModelRequest;
using gateway::ScriptedBackend;

namespace {

std::string prompt_of(const ModelRequest& req) {
  return req.messages.front().parts.front().text;
}

struct Crew {
  std::shared_ptr<ScriptedBackend> backend = std::make_shared<ScriptedBackend>();
  gateway::Gateway gw{backend, {}, [](std::chrono::milliseconds) {}};
  agents::PromptLibrary prompts{MAPLE_SOURCE_DIR "/assets/prompts"};
  AgentCrew crew;

  explicit Crew(AgentOptions opts = {}) : crew(gw, prompts, opts) {}
};

perception::PerceptionResult product_screen() {
  perception::PerceptionResult p;
  p.width = 480;
  p.height = 800;
  p.source = "mock";
  p.screenshot_ref = "digest-product";
  p.elements = {
      {"text", "Birthday Greeting Card", 40, 60, 440, 120, 240, 90, 1.0},
      {"text", "Product details", 40, 160, 440, 260, 240, 210, 1.0},
      {"text", "Add to cart", 40, 600, 440, 680, 240, 640, 1.0},
  };
  return p;
}

fsm::UiState node(const std::string& app, const std::string& beacon, int step = 1) {
  fsm::UiState s;
  s.app = app;
  s.beacon = beacon;
  s.description = beacon + " description";
  s.id = fsm::state_id(app, beacon);
  s.first_seen_step = s.last_seen_step = step;
  return s;
}

const char* kStateReply = R"(### State Description ###
The Walmart homepage with a search bar and cart icon.

### Predicted Next State ###
The search bar is focused and ready for input.

### App Inference ###
Walmart

### State Beacon ###
Homepage of Walmart

### Post-condition of Current State ###
flag:search_focused

### Pre-condition of Next State ###
flag:search_focused
)";

}  // namespace

TEST_CASE("multi-plan fans out five candidates and the judge picks one") {
  Crew f;
  f.backend->on_tag_prefix("planner.candidate", [](const ModelRequest& req) {
    const std::string n = req.tag.substr(req.tag.rfind('.') + 1);
    return "- subtask: open app variant " + n + " | rationale: candidate " + n + "\n";
  });
  std::vector<std::string> judge_prompts;
  f.backend->on_tag_prefix("planner.judge", [&](const ModelRequest& req) {
    judge_prompts.push_back(prompt_of(req));
    return std::string("best: 4");
  });

  const auto plan = f.crew.plan("buy a card", {});
  CHECK(f.backend->calls() == 6);
  REQUIRE(plan.items.size() == 1);
  CHECK(plan.items[0].subtask == "open app variant 4");
  CHECK(plan.source == "fresh");
  REQUIRE(judge_prompts.size() == 1);
  CHECK(judge_prompts[0].find("Candidate 1:") != std::string::npos);
  CHECK(judge_prompts[0].find("Candidate 5:") != std::string::npos);
  CHECK(judge_prompts[0].find("goal relevance, execution efficiency") !=
        std::string::npos);
}

TEST_CASE("single-plan mode issues one candidate call and no judgment") {
  AgentOptions opts;
  opts.multi_plan = false;
  Crew f(opts);
  f.backend->on_tag_prefix("planner.candidate", [](const ModelRequest&) {
    return std::string("- subtask: do the thing | rationale: only plan\n");
  });
  f.backend->on_tag_prefix("planner.judge", [](const ModelRequest&) {
    FAIL("judge must not be consulted for a single candidate");
    return std::string();
  });
  const auto plan = f.crew.plan("buy a card", {});
  CHECK(f.backend->calls() == 1);
  CHECK(plan.items[0].subtask == "do the thing");
}

TEST_CASE("planner surfaces malformed candidates after one retry round") {
  Crew f;
  f.backend->on_tag_prefix("planner.candidate", [](const ModelRequest&) {
    return std::string("I cannot plan right now.");
  });
  CHECK_THROWS_AS(f.crew.plan("buy a card", {}), agents::AllCandidatesMalformedError);
  CHECK(f.backend->calls() == 10);  // 5 + 5 corrective retries, judge never runs
}

TEST_CASE("judgment parsing is 1-based with a single corrective reprompt") {
  Crew f;
  const std::vector<agents::Plan> two = {
      agents::Plan{{{"a", ""}}, "fresh"},
      agents::Plan{{{"b", ""}}, "fresh"},
  };

  SUBCASE("clean pick") {
    f.backend->on_tag_prefix("planner.judge",
                             [](const ModelRequest&) { return std::string("Best: 2"); });
    CHECK(f.crew.judge(two, "rubric", "task") == 1);
    CHECK(f.backend->calls() == 1);
  }
  SUBCASE("out-of-range then corrected") {
    int n = 0;
    f.backend->on_tag_prefix("planner.judge", [&](const ModelRequest& req) {
      ++n;
      if (n == 1) return std::string("best: 7");
      CHECK(prompt_of(req).find("did not follow the required format") !=
            std::string::npos);
      return std::string("best: 1");
    });
    CHECK(f.crew.judge(two, "rubric", "task") == 0);
    CHECK(n == 2);
  }
  SUBCASE("never parsable") {
    f.backend->on_tag_prefix("planner.judge", [](const ModelRequest&) {
      return std::string("they are all fine");
    });
    CHECK_THROWS_AS(f.crew.judge(two, "rubric", "task"),
                    agents::UnparsableJudgmentError);
    CHECK(f.backend->calls() == 2);
  }
  SUBCASE("a lone candidate needs no model") {
    CHECK(f.crew.judge({two[0]}, "rubric", "task") == 0);
    CHECK(f.backend->calls() == 0);
  }
}

TEST_CASE("state description parses the sectioned reply") {
  Crew f;
  std::vector<std::string> prompts;
  f.backend->on_tag_prefix("state.describe", [&](const ModelRequest& req) {
    prompts.push_back(prompt_of(req));
    return std::string(kStateReply);
  });

  const auto p = product_screen();
  const auto state = f.crew.describe_state(p, "shot", "buy a card", "open the app",
                                           {"Homepage of Walmart", "homepage  of walmart",
                                            "Homepage of Walmart"});
  CHECK(state.app == "Walmart");
  CHECK(state.beacon == "Homepage of Walmart");
  CHECK(state.description == "The Walmart homepage with a search bar and cart icon.");
  CHECK(state.postcondition == "flag:search_focused");
  CHECK(state.precondition == "flag:search_focused");
  CHECK(state.id == fsm::state_id("Walmart", "Homepage of Walmart"));
  CHECK_FALSE(state.verified);

  // Case and spacing variants of one beacon collapse to a single history line.
  REQUIRE(prompts.size() == 1);
  const auto first = prompts[0].find("- Homepage of Walmart");
  REQUIRE(first != std::string::npos);
  CHECK(prompts[0].find("- Homepage of Walmart", first + 1) == std::string::npos);
  CHECK(prompts[0].find("homepage  of walmart") == std::string::npos);
  CHECK(prompts[0].find("Add to cart | text | (240, 640)") != std::string::npos);
}

TEST_CASE("state description maps system UI and strips beacon bullets") {
  Crew f;
  f.backend->on_tag_prefix("state.describe", [](const ModelRequest&) {
    return std::string(
        "### State Description ###\nThe launcher grid.\n\n"
        "### Predicted Next State ###\nAn app opens.\n\n"
        "### App Inference ###\nSystem Operation\n\n"
        "### State Beacon ###\n- Home Screen\n\n"
        "### Post-condition of Current State ###\ntrue\n\n"
        "### Pre-condition of Next State ###\ntrue\n");
  });
  const auto state = f.crew.describe_state({}, "shot", "task", "subtask", {});
  CHECK(state.app == agents::kSystemApp);
  CHECK(state.beacon == "Home Screen");
  CHECK(state.id == fsm::state_id(agents::kSystemApp, "Home Screen"));
}

TEST_CASE("state description without conditions needs only four sections") {
  AgentOptions opts;
  opts.use_conditions = false;
  Crew f(opts);
  std::vector<std::string> prompts;
  f.backend->on_tag_prefix("state.describe", [&](const ModelRequest& req) {
    prompts.push_back(prompt_of(req));
    return std::string(
        "### State Description ###\nA screen.\n\n"
        "### Predicted Next State ###\nAnother screen.\n\n"
        "### App Inference ###\nMaps\n\n"
        "### State Beacon ###\nHomepage of Maps\n");
  });
  const auto state = f.crew.describe_state({}, "shot", "task", "subtask", {});
  CHECK(state.app == "Maps");
  CHECK(state.postcondition.empty());
  CHECK(state.precondition.empty());
  REQUIRE(prompts.size() == 1);
  CHECK(prompts[0].find("Post-condition") == std::string::npos);
}

TEST_CASE("state description reprompts once on a malformed reply") {
  Crew f;
  int n = 0;
  f.backend->on_tag_prefix("state.describe", [&](const ModelRequest&) {
    return std::string(++n == 1 ? "total garbage" : kStateReply);
  });
  const auto state = f.crew.describe_state({}, "shot", "task", "subtask", {});
  CHECK(state.app == "Walmart");
  CHECK(n == 2);

  f.backend->on_tag_prefix("state.describe",
                           [](const ModelRequest&) { return std::string("garbage"); });
  Crew g;
  g.backend->on_tag_prefix("state.describe",
                           [](const ModelRequest&) { return std::string("garbage"); });
  CHECK_THROWS_AS(g.crew.describe_state({}, "shot", "task", "subtask", {}),
                  gateway::MalformedResponseError);
  CHECK(g.backend->calls() == 2);
}

TEST_CASE("actor resolves element taps through perception") {
  Crew f;
  const auto p = product_screen();
  const auto state = node("Walmart", "Product Detail Page of Walmart");

  SUBCASE("named tap becomes center coordinates") {
    f.backend->on_tag_prefix("actor.decide", [](const ModelRequest&) {
      return std::string("Tap('Add to cart')");
    });
    const auto d = f.crew.decide_action("tap 'Add to cart'", p, state, {});
    CHECK(d.action == device::AtomicAction{device::Tap{240, 640}});
    CHECK(d.element == "Add to cart");
  }
  SUBCASE("coordinate tap picks up the element label") {
    f.backend->on_tag_prefix("actor.decide", [](const ModelRequest&) {
      return std::string("Tap(250, 645)");
    });
    const auto d = f.crew.decide_action("tap 'Add to cart'", p, state, {});
    CHECK(d.action == device::AtomicAction{device::Tap{250, 645}});
    CHECK(d.element == "Add to cart");
  }
  SUBCASE("non-tap calls pass through") {
    f.backend->on_tag_prefix("actor.decide", [](const ModelRequest&) {
      return std::string("Open_App('Maps')");
    });
    const auto d = f.crew.decide_action("open the Maps app", p, state, {});
    CHECK(d.action == device::AtomicAction{device::OpenApp{"Maps"}});
    CHECK(d.element.empty());
  }
  SUBCASE("a named element that is not on screen is a typed error") {
    f.backend->on_tag_prefix("actor.decide", [](const ModelRequest&) {
      return std::string("Tap('Checkout now')");
    });
    CHECK_THROWS_AS(f.crew.decide_action("tap checkout", p, state, {}),
                    agents::ElementNotFoundError);
  }
  SUBCASE("unparsable output reprompts once then throws") {
    f.backend->on_tag_prefix("actor.decide", [](const ModelRequest&) {
      return std::string("hmm, not sure");
    });
    CHECK_THROWS_AS(f.crew.decide_action("tap checkout", p, state, {}),
                    agents::NoActionParsedError);
    CHECK(f.backend->calls() == 2);
  }
}

TEST_CASE("verification short-circuits on machine-checkable conditions") {
  Crew f;
  f.backend->on_tag_prefix("reflection.verify", [](const ModelRequest&) {
    FAIL("machine conditions must not reach the model");
    return std::string();
  });
  auto prev = node("Walmart", "Homepage of Walmart");
  prev.postcondition = "flag:searched";

  perception::PerceptionResult before, after;
  before.screenshot_ref = "digest-a";
  after.screenshot_ref = "digest-a";

  bool holds = true;
  f.crew.set_condition_evaluator([&](const std::string& pred) {
    CHECK(pred == "flag:searched");
    return holds;
  });

  auto v = f.crew.verify(prev, "", before, after, "s1", "s1", "press enter", {});
  CHECK(v.outcome == Outcome::Success);

  holds = false;  // unmet postcondition on an unchanged screen
  v = f.crew.verify(prev, "", before, after, "s1", "s1", "press enter", {});
  CHECK(v.outcome == Outcome::NoChange);
  CHECK(f.backend->calls() == 0);
}

TEST_CASE("verification falls back to the model when the screen changed") {
  Crew f;
  auto prev = node("Walmart", "Homepage of Walmart");
  prev.postcondition = "flag:searched";
  f.crew.set_condition_evaluator([](const std::string&) { return false; });

  perception::PerceptionResult before, after;
  before.screenshot_ref = "digest-a";
  after.screenshot_ref = "digest-b";

  SUBCASE("scripted failure carries its reason") {
    f.backend->on_tag_prefix("reflection.verify", [](const ModelRequest&) {
      return std::string("verdict: Fail\nreason: wrong screen");
    });
    const auto v = f.crew.verify(prev, "", before, after, "s1", "s2", "enter", {});
    CHECK(v.outcome == Outcome::Fail);
    CHECK(v.reason == "wrong screen");
  }
  SUBCASE("scripted success") {
    f.backend->on_tag_prefix("reflection.verify", [](const ModelRequest&) {
      return std::string("Verdict: Success");
    });
    const auto v = f.crew.verify(prev, "", before, after, "s1", "s2", "enter", {});
    CHECK(v.outcome == Outcome::Success);
  }
  SUBCASE("unparsable twice is a typed error") {
    f.backend->on_tag_prefix("reflection.verify", [](const ModelRequest&) {
      return std::string("perhaps");
    });
    CHECK_THROWS_AS(f.crew.verify(prev, "", before, after, "s1", "s2", "enter", {}),
                    agents::UnparsableVerdictError);
    CHECK(f.backend->calls() == 2);
  }
}

TEST_CASE("recovery planning renders the recorded path for the model") {
  Crew f;
  fsm::AppFsm maps("Maps");
  const auto results = node("Maps", "Search Results Page of Maps", 3);
  const auto detail = node("Maps", "Place Detail Page of Maps", 4);
  maps.upsert_state(results);
  maps.upsert_state(detail);
  maps.mark_verified(results.id, Verdict::success());
  maps.record_transition(results.id, device::Tap{240, 210}, detail.id, "", "", 4);

  std::vector<std::string> prompts;
  f.backend->on_tag_prefix("reflection.recovery", [&](const ModelRequest& req) {
    prompts.push_back(prompt_of(req));
    return std::string(
        R"({"thought": "The search results page is verified and one step away.",
            "plan": ["Ensure the Maps app is active and in the foreground.",
                     "Navigate back to the search results page if not already visible."],
            "current_subtask": "Ensure the Maps app is active and in the foreground."})");
  });

  fsm::RecoveryTarget target;
  target.target = results.id;
  target.path = {fsm::Transition{detail.id, device::Back{}, results.id, "", "", 5}};

  const auto plan = f.crew.build_recovery_plan(maps, target, detail.id,
                                               "tap produced no change",
                                               "tap 'Copy address'");
  REQUIRE(plan.steps.size() == 2);
  CHECK(plan.current_subtask == plan.steps[0]);
  CHECK(plan.target == results.id);
  CHECK(plan.goal == "Return to Search Results Page of Maps");  // fallback goal
  REQUIRE(prompts.size() == 1);
  CHECK(prompts[0].find("Target beacon: Search Results Page of Maps") !=
        std::string::npos);
  CHECK(prompts[0].find("- Back() leads to Search Results Page of Maps") !=
        std::string::npos);
  CHECK(prompts[0].find("Failed subtask: tap 'Copy address'") != std::string::npos);
}

TEST_CASE("recovery at the anchor state needs no model at all") {
  Crew f;
  fsm::AppFsm maps("Maps");
  const auto detail = node("Maps", "Place Detail Page of Maps");
  maps.upsert_state(detail);

  const auto plan = f.crew.build_recovery_plan(
      maps, fsm::RecoveryTarget{detail.id, {}}, detail.id, "no change",
      "tap 'Copy address'");
  CHECK(f.backend->calls() == 0);
  CHECK(plan.steps == std::vector<std::string>{"tap 'Copy address'"});
  CHECK(plan.current_subtask == "tap 'Copy address'");
  CHECK(plan.target == detail.id);
}

TEST_CASE("recovery replies missing required keys are rejected") {
  Crew f;
  fsm::AppFsm maps("Maps");
  const auto a = node("Maps", "Homepage of Maps");
  const auto b = node("Maps", "Search Results Page of Maps");
  maps.upsert_state(a);
  maps.upsert_state(b);

  SUBCASE("no current_subtask") {
    f.backend->on_tag_prefix("reflection.recovery", [](const ModelRequest&) {
      return std::string(R"({"thought": "x", "plan": ["go home"]})");
    });
    CHECK_THROWS_AS(f.crew.build_recovery_plan(maps, {a.id, {}}, b.id, "r", "s"),
                    agents::UnparsableRecoveryError);
    CHECK(f.backend->calls() == 2);
  }
  SUBCASE("current_subtask not among the steps") {
    f.backend->on_tag_prefix("reflection.recovery", [](const ModelRequest&) {
      return std::string(
          R"({"plan": ["go home"], "current_subtask": "something else"})");
    });
    CHECK_THROWS_AS(f.crew.build_recovery_plan(maps, {a.id, {}}, b.id, "r", "s"),
                    agents::UnparsableRecoveryError);
  }
}

TEST_CASE("retain keeps the FSMs even when cue extraction fails") {
  Crew f;
  fsm::AppFsm maps("Maps");
  maps.upsert_state(node("Maps", "Homepage of Maps"));
  const std::map<std::string, fsm::AppFsm> fsms = {{"Maps", maps}};

  SUBCASE("well-formed mentor output") {
    f.backend->on_tag_prefix("mentor.retain", [](const ModelRequest&) {
      return std::string(
          "### Guidance Cues ###\n"
          "- Search before tapping results.\n"
          "- The Saved tab lists bookmarked places.\n\n"
          "### Action Sequences ###\n"
          R"json([{"label": "search flow", "precondition": "screen:Maps/home",
               "actions": ["Tap(240, 90)", "Type('venice')", "Enter()", "Tap('ghost')"]}])json");
    });
    const auto r = f.crew.retain("find the beach", "success", {"tap 'Search bar'"}, {},
                                 {"Homepage -> Results"}, fsms, {"Maps"});
    CHECK_FALSE(r.warning.has_value());
    REQUIRE(r.delta.cues.size() == 2);
    CHECK(r.delta.cues[0].text == "Search before tapping results.");
    CHECK(r.delta.cues[0].apps == std::vector<std::string>{"Maps"});
    REQUIRE(r.delta.sequences.size() == 1);
    CHECK(r.delta.sequences[0].label == "search flow");
    CHECK(r.delta.sequences[0].precondition == "screen:Maps/home");
    // Element-form taps have no coordinates yet, so they cannot be stored.
    CHECK(r.delta.sequences[0].actions.size() == 3);
    REQUIRE(r.delta.fsms.count("Maps") == 1);
  }
  SUBCASE("malformed mentor output downgrades to a warning") {
    f.backend->on_tag_prefix("mentor.retain", [](const ModelRequest&) {
      return std::string("no sections at all");
    });
    const auto r = f.crew.retain("find the beach", "terminated", {}, {}, {}, fsms,
                                 {"Maps"});
    REQUIRE(r.warning.has_value());
    CHECK(r.delta.cues.empty());
    CHECK(r.delta.sequences.empty());
    CHECK(r.delta.fsms.count("Maps") == 1);  // the map survives regardless
  }
}

TEST_CASE("knowledge store merges with dedup and clears") {
  const auto dir = std::filesystem::temp_directory_path() / "maple_kb_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto path = (dir / "knowledge.json").string();

  agents::KnowledgeStore store(path);
  CHECK(store.load().empty());

  KnowledgeBase delta;
  delta.cues.push_back({"Search before tapping results.", {"Maps"}});
  delta.sequences.push_back(
      {"search flow", "screen:Maps/home", {device::Tap{240, 90}}, {"Maps"}});
  fsm::AppFsm maps("Maps");
  maps.upsert_state(node("Maps", "Homepage of Maps"));
  delta.fsms["Maps"] = fsm::fsm_to_json(maps);

  store.merge(delta);
  store.merge(delta);  // a second identical merge must not duplicate
  auto loaded = store.load();
  CHECK(loaded.cues.size() == 1);
  CHECK(loaded.sequences.size() == 1);
  CHECK(loaded.fsms.size() == 1);

  // FSMs overwrite by app name: a grown map replaces the stored one.
  maps.upsert_state(node("Maps", "Search Results Page of Maps", 2));
  KnowledgeBase delta2;
  delta2.fsms["Maps"] = fsm::fsm_to_json(maps);
  store.merge(delta2);
  loaded = store.load();
  const auto restored = fsm::fsm_from_json(loaded.fsms.at("Maps"));
  CHECK(restored.states().size() == 2);

  store.clear();
  CHECK(store.load().empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("knowledge selection filters by app overlap") {
  KnowledgeBase kb;
  kb.cues.push_back({"maps tip", {"Maps"}});
  kb.cues.push_back({"global tip", {}});
  kb.cues.push_back({"walmart tip", {"Walmart"}});
  kb.sequences.push_back({"maps seq", "true", {}, {"Maps"}});
  fsm::AppFsm maps("Maps");
  maps.upsert_state(node("Maps", "Homepage of Maps"));
  kb.fsms["Maps"] = fsm::fsm_to_json(maps);
  kb.fsms["Walmart"] = kb.fsms["Maps"];

  const auto picked = agents::select_for(kb, {"Maps", "Notes"});
  REQUIRE(picked.cues.size() == 2);
  CHECK(picked.cues[0].text == "maps tip");
  CHECK(picked.cues[1].text == "global tip");
  CHECK(picked.sequences.size() == 1);
  CHECK(picked.fsms.count("Maps") == 1);
  CHECK(picked.fsms.count("Walmart") == 0);
}

TEST_CASE("prompt knowledge block renders tips, sequences and maps") {
  CHECK(agents::render_knowledge({}).empty());

  KnowledgeBase kb;
  kb.cues.push_back({"Search before tapping results.", {"Maps"}});
  kb.sequences.push_back({"search flow",
                          "screen:Maps/home",
                          {device::Tap{240, 90}, device::Type{"venice"}},
                          {"Maps"}});
  fsm::AppFsm maps("Maps");
  maps.upsert_state(node("Maps", "Homepage of Maps"));
  kb.fsms["Maps"] = fsm::fsm_to_json(maps);

  const auto text = agents::render_knowledge(kb);
  CHECK(text.find("- tip: Search before tapping results.") != std::string::npos);
  CHECK(text.find("'search flow' (when screen:Maps/home): Tap(240, 90), "
                  "Type('venice')") != std::string::npos);
  CHECK(text.find("stored navigation maps for: Maps") != std::string::npos);
}

TEST_CASE("plan item lines parse leniently") {
  const auto items = agents::parse_plan_items(
      "Here is the plan.\n"
      "- subtask: open the app | rationale: entry point\n"
      "- subtask: tap 'Search bar'\n"
      "unrelated line\n");
  REQUIRE(items.has_value());
  REQUIRE(items->size() == 2);
  CHECK((*items)[0].subtask == "open the app");
  CHECK((*items)[0].rationale == "entry point");
  CHECK((*items)[1].subtask == "tap 'Search bar'");
  CHECK((*items)[1].rationale.empty());

  CHECK_FALSE(agents::parse_plan_items("no plan lines here").has_value());
}
