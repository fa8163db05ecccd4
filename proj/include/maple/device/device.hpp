#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maple/device/action.hpp"
#include "maple/sim/world.hpp"

namespace maple::device {

struct DeviceGoneError : std::runtime_error {
  explicit DeviceGoneError(const std::string& detail)
      : std::runtime_error("device gone: " + detail) {}
};
struct InvalidCoordinatesError : std::runtime_error {
  explicit InvalidCoordinatesError(const std::string& detail)
      : std::runtime_error("invalid coordinates: " + detail) {}
};

struct DeviceObservation {
  std::string screenshot;
  std::optional<std::string> foreground_app;
  std::int64_t timestamp_ms = 0;
};

class DeviceBackend {
 public:
  virtual ~DeviceBackend() = default;
  virtual void execute(const AtomicAction& action) = 0;
  virtual DeviceObservation observe() = 0;
  virtual std::string name() const = 0;
};

// Drives the scripted world; Wait advances the simulated clock, never the
// wall clock.
class SimDevice : public DeviceBackend {
 public:
  explicit SimDevice(sim::World& world) : world_(world) {}
  void execute(const AtomicAction& action) override;
  DeviceObservation observe() override;
  std::string name() const override { return "sim"; }

  sim::World& world() { return world_; }

 private:
  sim::World& world_;
};

struct CommandResult {
  int exit_code = 0;
  std::string output;
};
// Spawns argv and captures stdout; injected so tests can stub adb.
using CommandRunner = std::function<CommandResult(const std::vector<std::string>&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct AdbConfig {
  std::string serial;  // falls back to MAPLE_ADB_SERIAL
  std::map<std::string, std::string> packages;  // app name -> package
  std::chrono::milliseconds settle{2000};       // post-action delay
};

class AdbDevice : public DeviceBackend {
 public:
  AdbDevice(AdbConfig config, CommandRunner runner = nullptr, Sleeper sleeper = nullptr);

  void execute(const AtomicAction& action) override;
  DeviceObservation observe() override;
  std::string name() const override { return "adb"; }

 private:
  CommandResult run(const std::vector<std::string>& argv);
  std::vector<std::string> shell(std::initializer_list<std::string> tail) const;

  AdbConfig config_;
  CommandRunner runner_;
  Sleeper sleeper_;
};

// `input text` argument escaping: spaces become %s.
std::string adb_escape_text(const std::string& text);

// name -> package map, JSON object document.
std::map<std::string, std::string> load_package_map(const std::string& path);

}  // namespace maple::device
