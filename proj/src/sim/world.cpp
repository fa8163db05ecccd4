#include "maple/sim/world.hpp"

#include <algorithm>
#include <sstream>

#include "maple/util/fsio.hpp"
#include "maple/util/hash.hpp"
#include "maple/util/text.hpp"

namespace maple::sim {

namespace {

using nlohmann::json;

Bounds parse_bounds(const json& arr, const std::string& path) {
  if (!arr.is_array() || arr.size() != 4) throw SchemaError(path);
  Bounds b{arr[0].get<int>(), arr[1].get<int>(), arr[2].get<int>(), arr[3].get<int>()};
  if (b.left >= b.right || b.top >= b.bottom) throw SchemaError(path + " (bounds not well-ordered)");
  return b;
}

Mutation parse_mutation(const std::string& text, const std::string& path) {
  Mutation m;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw SchemaError(path + " '" + text + "'");
  const std::string op = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  if (op == "flag") {
    m.kind = Mutation::Kind::SetFlag;
    m.name = rest;
  } else if (op == "inc") {
    m.kind = Mutation::Kind::IncVar;
    m.name = rest;
  } else if (op == "set") {
    const auto eq = rest.find('=');
    if (eq == std::string::npos) throw SchemaError(path + " '" + text + "'");
    m.kind = Mutation::Kind::SetVar;
    m.name = rest.substr(0, eq);
    m.value = rest.substr(eq + 1);
  } else {
    throw SchemaError(path + " unknown mutation '" + op + "'");
  }
  if (m.name.empty()) throw SchemaError(path + " empty mutation name");
  return m;
}

}  // namespace

World World::load(const std::string& path) {
  json doc = json::parse(util::read_file(path), nullptr, false);
  if (doc.is_discarded()) throw SchemaError(path + " (not JSON)");
  return from_json(doc, path);
}

World World::from_json(const json& doc, const std::string& origin) {
  World w;
  if (!doc.is_object() || !doc.contains("apps")) throw SchemaError(origin + ":apps");
  if (doc.contains("screen_size")) {
    const auto& sz = doc["screen_size"];
    if (!sz.is_array() || sz.size() != 2) throw SchemaError(origin + ":screen_size");
    w.width_ = sz[0].get<int>();
    w.height_ = sz[1].get<int>();
  }
  std::set<std::string> names;
  for (std::size_t ai = 0; ai < doc["apps"].size(); ++ai) {
    const auto& adoc = doc["apps"][ai];
    const std::string apath = origin + ":apps[" + std::to_string(ai) + "]";
    AppScript app;
    if (!adoc.contains("name") || !adoc["name"].is_string()) throw SchemaError(apath + ".name");
    app.name = adoc["name"].get<std::string>();
    if (app.name.empty() || app.name == kLauncher) throw SchemaError(apath + ".name");
    if (!names.insert(app.name).second) throw SchemaError(apath + ".name (duplicate)");
    if (!adoc.contains("screens") || !adoc["screens"].is_object()) {
      throw SchemaError(apath + ".screens");
    }
    for (const auto& [sid, sdoc] : adoc["screens"].items()) {
      const std::string spath = apath + ".screens." + sid;
      ScreenScript screen;
      screen.id = sid;
      screen.beacon = sdoc.value("beacon", "");
      if (screen.beacon.empty()) throw SchemaError(spath + ".beacon");
      screen.entry = sdoc.value("entry", "");
      for (std::size_t ei = 0; sdoc.contains("elements") && ei < sdoc["elements"].size(); ++ei) {
        const auto& edoc = sdoc["elements"][ei];
        const std::string epath = spath + ".elements[" + std::to_string(ei) + "]";
        SimElement el;
        el.kind = edoc.value("kind", "text");
        if (el.kind != "text" && el.kind != "icon") throw SchemaError(epath + ".kind");
        el.content = edoc.value("content", "");
        if (el.content.empty()) throw SchemaError(epath + ".content");
        el.bounds = parse_bounds(edoc.at("bounds"), epath + ".bounds");
        if (el.bounds.left < 0 || el.bounds.top < 0 || el.bounds.right > w.width_ ||
            el.bounds.bottom > w.height_) {
          throw SchemaError(epath + ".bounds (outside screen)");
        }
        screen.elements.push_back(std::move(el));
      }
      app.screens.emplace(sid, std::move(screen));
    }
    app.initial = adoc.value("initial", "");
    if (app.screens.find(app.initial) == app.screens.end()) {
      throw DanglingScreenError(app.name + "/" + app.initial);
    }
    for (std::size_t ri = 0; adoc.contains("rules") && ri < adoc["rules"].size(); ++ri) {
      const auto& rdoc = adoc["rules"][ri];
      const std::string rpath = apath + ".rules[" + std::to_string(ri) + "]";
      Rule rule;
      rule.screen = rdoc.value("screen", "");
      if (app.screens.find(rule.screen) == app.screens.end()) {
        throw DanglingScreenError(app.name + "/" + rule.screen);
      }
      const auto& on = rdoc.at("on");
      rule.trigger.kind = on.value("kind", "");
      if (rule.trigger.kind.empty()) throw SchemaError(rpath + ".on.kind");
      rule.trigger.element = on.value("element", "");
      rule.trigger.text = on.value("text", "");
      if (rule.trigger.kind == "tap" && rule.trigger.element.empty()) {
        throw SchemaError(rpath + ".on.element");
      }
      rule.next = rdoc.value("next", "");
      if (app.screens.find(rule.next) == app.screens.end()) {
        throw DanglingScreenError(app.name + "/" + rule.next);
      }
      for (std::size_t mi = 0; rdoc.contains("mutations") && mi < rdoc["mutations"].size(); ++mi) {
        rule.mutations.push_back(parse_mutation(
            rdoc["mutations"][mi].get<std::string>(),
            rpath + ".mutations[" + std::to_string(mi) + "]"));
      }
      if (rdoc.contains("misroute_to")) {
        const std::string target = rdoc["misroute_to"].get<std::string>();
        if (app.screens.find(target) == app.screens.end()) {
          throw DanglingScreenError(app.name + "/" + target);
        }
        rule.misroute_to = target;
      }
      app.rules.push_back(std::move(rule));
    }
    w.apps_.push_back(std::move(app));
  }
  if (w.apps_.empty()) throw SchemaError(origin + ":apps (empty)");

  // Launcher icons: fixed grid in declaration order, three per row.
  int col = 0, row = 0;
  for (const auto& app : w.apps_) {
    const int x = 40 + col * 150;
    const int y = 120 + row * 140;
    w.launcher_icons_.push_back(
        SimElement{"icon", app.name, Bounds{x, y, x + 110, y + 100}});
    if (++col == 3) {
      col = 0;
      ++row;
    }
  }
  for (const auto& app : w.apps_) w.app_screen_[app.name] = app.initial;
  w.rng_.seed(w.policy_.seed);
  return w;
}

void World::set_fault_policy(const FaultPolicy& policy) {
  if (policy.p_noop < 0.0 || policy.p_noop > 1.0 || policy.p_misroute < 0.0 ||
      policy.p_misroute > 1.0) {
    throw SchemaError("fault policy probabilities must lie in [0,1]");
  }
  policy_ = policy;
  rng_.seed(policy_.seed);
  faults_.clear();
}

const std::string& World::screen_of(const std::string& app) const {
  const auto it = app_screen_.find(app);
  if (it == app_screen_.end()) throw DanglingScreenError(app + "/?");
  return it->second;
}

const ScreenScript& World::screen_script(const std::string& app,
                                         const std::string& id) const {
  for (const auto& a : apps_) {
    if (a.name == app) {
      const auto it = a.screens.find(id);
      if (it == a.screens.end()) throw DanglingScreenError(app + "/" + id);
      return it->second;
    }
  }
  throw DanglingScreenError(app + "/" + id);
}

const ScreenScript* World::current_screen() const {
  if (foreground_ == kLauncher) return nullptr;
  return &screen_script(foreground_, screen_of(foreground_));
}

const AppScript* World::app_script(const std::string& name) const {
  for (const auto& a : apps_) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::vector<std::string> World::app_names() const {
  std::vector<std::string> names;
  for (const auto& a : apps_) names.push_back(a.name);
  return names;
}

bool World::has_app(const std::string& name) const {
  for (const auto& a : apps_) {
    if (a.name == name) return true;
  }
  return false;
}

const std::string& World::var(const std::string& name) const {
  static const std::string empty;
  const auto it = vars_.find(name);
  return it == vars_.end() ? empty : it->second;
}

bool World::visited(const std::string& app, const std::string& screen) const {
  return visited_.count(app + "/" + screen) > 0;
}

void World::enter(const std::string& app, const std::string& screen) {
  app_screen_[app] = screen;
  visited_.insert(app + "/" + screen);
}

void World::apply_mutations(const std::vector<Mutation>& mutations) {
  for (const auto& m : mutations) {
    switch (m.kind) {
      case Mutation::Kind::SetFlag:
        flags_.insert(m.name);
        break;
      case Mutation::Kind::SetVar:
        vars_[m.name] = m.value;
        break;
      case Mutation::Kind::IncVar: {
        int v = 0;
        const auto it = vars_.find(m.name);
        if (it != vars_.end()) v = std::stoi(it->second);
        vars_[m.name] = std::to_string(v + 1);
        break;
      }
    }
  }
}

bool World::trigger_matches(const Trigger& trig, const device::AtomicAction& action,
                            const ScreenScript& screen) const {
  if (trig.kind != device::action_kind(action)) return false;
  if (trig.kind == "tap") {
    const auto* tap = std::get_if<device::Tap>(&action);
    for (const auto& el : screen.elements) {
      if (!util::iequals(el.content, trig.element)) continue;
      if (tap->x >= el.bounds.left && tap->x < el.bounds.right &&
          tap->y >= el.bounds.top && tap->y < el.bounds.bottom) {
        return true;
      }
    }
    return false;
  }
  if (trig.kind == "type" && !trig.text.empty()) {
    const auto* ty = std::get_if<device::Type>(&action);
    return util::icontains(ty->text, trig.text);
  }
  return true;
}

void World::step(const device::AtomicAction& action) {
  ++step_count_;
  clock_ms_ += std::holds_alternative<device::Wait>(action) ? 10000 : 1000;

  if (std::holds_alternative<device::Home>(action)) {
    if (foreground_ != kLauncher) previous_foreground_ = foreground_;
    foreground_ = kLauncher;
    return;
  }
  if (std::holds_alternative<device::Wait>(action)) return;
  if (std::holds_alternative<device::SwitchApp>(action)) {
    if (!previous_foreground_.empty()) std::swap(foreground_, previous_foreground_);
    return;
  }
  if (const auto* open = std::get_if<device::OpenApp>(&action)) {
    if (has_app(open->name)) {
      if (foreground_ != open->name) previous_foreground_ = foreground_;
      foreground_ = open->name;
      enter(open->name, app_screen_[open->name]);
    }
    return;
  }

  if (foreground_ == kLauncher) {
    // Built-in launcher: tapping an icon opens that app at its current screen.
    if (const auto* tap = std::get_if<device::Tap>(&action)) {
      if (policy_.p_noop > 0.0) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        if (unit(rng_) < policy_.p_noop) {
          faults_.push_back(FaultEvent{step_count_, "noop", kLauncher, "home",
                                       device::action_call(action)});
          return;
        }
      }
      for (const auto& icon : launcher_icons_) {
        if (tap->x >= icon.bounds.left && tap->x < icon.bounds.right &&
            tap->y >= icon.bounds.top && tap->y < icon.bounds.bottom) {
          previous_foreground_ = foreground_;
          foreground_ = icon.content;
          enter(icon.content, app_screen_[icon.content]);
          return;
        }
      }
    }
    return;
  }

  // Noop fault: the tap is swallowed before any rule can see it.
  if (std::holds_alternative<device::Tap>(action) && policy_.p_noop > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng_) < policy_.p_noop) {
      faults_.push_back(FaultEvent{step_count_, "noop", foreground_,
                                   screen_of(foreground_),
                                   device::action_call(action)});
      return;
    }
  }

  const AppScript* app = nullptr;
  for (const auto& a : apps_) {
    if (a.name == foreground_) app = &a;
  }
  const std::string current = screen_of(foreground_);
  const ScreenScript& screen = app->screens.at(current);
  for (const auto& rule : app->rules) {
    if (rule.screen != current) continue;
    if (!trigger_matches(rule.trigger, action, screen)) continue;
    std::string destination = rule.next;
    if (rule.misroute_to && policy_.p_misroute > 0.0) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      if (unit(rng_) < policy_.p_misroute) {
        destination = *rule.misroute_to;
        faults_.push_back(FaultEvent{step_count_, "misroute", foreground_, current,
                                     rule.next + " -> " + destination});
        enter(foreground_, destination);
        return;
      }
    }
    apply_mutations(rule.mutations);
    enter(foreground_, destination);
    return;
  }
  // No matching rule: the screen stays put by design.
}

namespace {

// Flat-box renderer. The comment line carries the screen identity so screen
// digests are distinct even when layouts coincide.
std::string render_pgm(const std::string& app, const std::string& screen_id,
                       const std::vector<SimElement>& elements, int w, int h) {
  std::ostringstream head;
  head << "P5\n# " << app << "/" << screen_id << "\n" << w << " " << h << "\n255\n";
  std::string img(static_cast<std::size_t>(w) * h, static_cast<char>(230));
  const auto put = [&](int x, int y, unsigned char v) {
    if (x >= 0 && x < w && y >= 0 && y < h) {
      img[static_cast<std::size_t>(y) * w + x] = static_cast<char>(v);
    }
  };
  for (const auto& el : elements) {
    const auto fill = static_cast<unsigned char>(
        120 + (util::fnv1a128(el.content).lo % 96));
    for (int y = el.bounds.top; y < el.bounds.bottom; ++y) {
      for (int x = el.bounds.left; x < el.bounds.right; ++x) {
        const bool border = y < el.bounds.top + 2 || y >= el.bounds.bottom - 2 ||
                            x < el.bounds.left + 2 || x >= el.bounds.right - 2;
        put(x, y, border ? 40 : fill);
      }
    }
  }
  return head.str() + img;
}

}  // namespace

RenderResult World::render() {
  RenderResult out;
  out.width = width_;
  out.height = height_;
  std::string app = foreground_;
  std::string screen_id;
  if (foreground_ == kLauncher) {
    screen_id = "home";
    out.elements = launcher_icons_;
  } else {
    screen_id = screen_of(foreground_);
    out.elements = screen_script(foreground_, screen_id).elements;
  }
  const std::string key = app + "/" + screen_id;
  auto it = render_cache_.find(key);
  if (it == render_cache_.end()) {
    it = render_cache_.emplace(key, render_pgm(app, screen_id, out.elements, width_, height_))
             .first;
  }
  out.image = it->second;
  return out;
}

bool eval_predicate(const World& world, const std::string& predicate,
                    const std::vector<device::ActionToken>& executed) {
  const auto eval_one = [&](const std::string& raw) -> bool {
    const std::string term = util::trim(raw);
    if (term.empty()) throw PredicateError("empty term");
    if (term == "true") return true;
    const auto colon = term.find(':');
    if (colon == std::string::npos) throw PredicateError(term);
    const std::string head = term.substr(0, colon);
    const std::string rest = term.substr(colon + 1);
    if (head == "screen" || head == "visited") {
      const auto slash = rest.find('/');
      if (slash == std::string::npos) throw PredicateError(term);
      const std::string app = rest.substr(0, slash);
      const std::string id = rest.substr(slash + 1);
      if (head == "visited") return world.visited(app, id);
      return world.foreground() == app && world.screen_of(app) == id;
    }
    if (head == "foreground") return world.foreground() == rest;
    if (head == "flag") return world.flag(rest);
    if (head == "var") {
      const auto eq = rest.find('=');
      if (eq == std::string::npos) throw PredicateError(term);
      return world.var(rest.substr(0, eq)) == rest.substr(eq + 1);
    }
    if (head == "action") {
      std::string kind = rest;
      std::string target;
      const auto second = rest.find(':');
      if (second != std::string::npos) {
        kind = rest.substr(0, second);
        target = rest.substr(second + 1);
      }
      for (const auto& tok : executed) {
        if (tok.kind != kind) continue;
        if (target.empty() || util::icontains(tok.target, target)) return true;
      }
      return false;
    }
    throw PredicateError(term);
  };

  std::size_t pos = 0;
  while (true) {
    const auto amp = predicate.find("&&", pos);
    const std::string term =
        amp == std::string::npos ? predicate.substr(pos) : predicate.substr(pos, amp - pos);
    if (!eval_one(term)) return false;
    if (amp == std::string::npos) return true;
    pos = amp + 2;
  }
}

}  // namespace maple::sim
