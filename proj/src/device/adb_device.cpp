#include "maple/device/device.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "maple/util/fsio.hpp"

namespace maple::device {

namespace {

// Default runner: spawn via popen. Arguments produced by this module are
// numeric, keyevent codes, %s-escaped text, or package ids, so single-quote
// wrapping is sufficient.
CommandResult popen_runner(const std::vector<std::string>& argv) {
  std::string cmd;
  for (const auto& a : argv) {
    if (!cmd.empty()) cmd += ' ';
    std::string quoted = "'";
    for (const char c : a) {
      if (c == '\'') {
        quoted += "'\\''";
      } else {
        quoted += c;
      }
    }
    quoted += "'";
    cmd += quoted;
  }
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw DeviceGoneError("cannot spawn adb");
  std::string output;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) output.append(buf.data(), n);
  const int status = pclose(pipe);
  return CommandResult{status, std::move(output)};
}

}  // namespace

std::string adb_escape_text(const std::string& text) {
  std::string out;
  for (const char c : text) {
    if (c == ' ') {
      out += "%s";
    } else {
      out += c;
    }
  }
  return out;
}

std::map<std::string, std::string> load_package_map(const std::string& path) {
  const auto doc = nlohmann::json::parse(util::read_file(path));
  std::map<std::string, std::string> out;
  for (const auto& [name, pkg] : doc.items()) out[name] = pkg.get<std::string>();
  return out;
}

AdbDevice::AdbDevice(AdbConfig config, CommandRunner runner, Sleeper sleeper)
    : config_(std::move(config)),
      runner_(runner ? std::move(runner) : popen_runner),
      sleeper_(sleeper ? std::move(sleeper) : [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
      }) {
  if (config_.serial.empty()) {
    if (const char* env = std::getenv("MAPLE_ADB_SERIAL")) config_.serial = env;
  }
  if (config_.serial.empty()) throw DeviceGoneError("no serial; set MAPLE_ADB_SERIAL");
}

CommandResult AdbDevice::run(const std::vector<std::string>& argv) {
  const CommandResult result = runner_(argv);
  if (result.exit_code != 0) {
    throw DeviceGoneError(argv[0] + " exited " + std::to_string(result.exit_code));
  }
  return result;
}

std::vector<std::string> AdbDevice::shell(std::initializer_list<std::string> tail) const {
  std::vector<std::string> argv{"adb", "-s", config_.serial, "shell"};
  argv.insert(argv.end(), tail.begin(), tail.end());
  return argv;
}

void AdbDevice::execute(const AtomicAction& action) {
  if (const auto* tap = std::get_if<Tap>(&action)) {
    if (tap->x < 0 || tap->y < 0) {
      throw InvalidCoordinatesError("(" + std::to_string(tap->x) + ", " +
                                    std::to_string(tap->y) + ")");
    }
    run(shell({"input", "tap", std::to_string(tap->x), std::to_string(tap->y)}));
  } else if (const auto* type = std::get_if<Type>(&action)) {
    run(shell({"input", "text", adb_escape_text(type->text)}));
  } else if (std::holds_alternative<Enter>(action)) {
    run(shell({"input", "keyevent", "66"}));
  } else if (std::holds_alternative<Back>(action)) {
    run(shell({"input", "keyevent", "4"}));
  } else if (std::holds_alternative<Home>(action)) {
    run(shell({"input", "keyevent", "3"}));
  } else if (std::holds_alternative<SwitchApp>(action)) {
    run(shell({"input", "keyevent", "187"}));
  } else if (const auto* swipe = std::get_if<Swipe>(&action)) {
    if (swipe->x1 < 0 || swipe->y1 < 0 || swipe->x2 < 0 || swipe->y2 < 0) {
      throw InvalidCoordinatesError("swipe endpoints must be non-negative");
    }
    run(shell({"input", "swipe", std::to_string(swipe->x1), std::to_string(swipe->y1),
               std::to_string(swipe->x2), std::to_string(swipe->y2), "300"}));
  } else if (const auto* open = std::get_if<OpenApp>(&action)) {
    const auto it = config_.packages.find(open->name);
    if (it == config_.packages.end()) {
      throw DeviceGoneError("no package mapping for app '" + open->name + "'");
    }
    run(shell({"monkey", "-p", it->second, "-c", "android.intent.category.LAUNCHER", "1"}));
  } else if (std::holds_alternative<Wait>(action)) {
    sleeper_(std::chrono::milliseconds(10000));
    return;  // no settle on top of the pause
  }
  sleeper_(config_.settle);
}

DeviceObservation AdbDevice::observe() {
  const CommandResult shot =
      run({"adb", "-s", config_.serial, "exec-out", "screencap", "-p"});
  if (shot.output.empty()) throw DeviceGoneError("empty screencap");
  DeviceObservation obs;
  obs.screenshot = shot.output;
  obs.timestamp_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
  return obs;
}

}  // namespace maple::device
