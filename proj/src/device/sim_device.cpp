#include "maple/device/device.hpp"

namespace maple::device {

namespace {

void check_point(int x, int y, int w, int h) {
  if (x < 0 || y < 0 || x >= w || y >= h) {
    throw InvalidCoordinatesError("(" + std::to_string(x) + ", " + std::to_string(y) +
                                  ") outside " + std::to_string(w) + "x" +
                                  std::to_string(h));
  }
}

}  // namespace

void SimDevice::execute(const AtomicAction& action) {
  if (const auto* tap = std::get_if<Tap>(&action)) {
    check_point(tap->x, tap->y, world_.width(), world_.height());
  } else if (const auto* swipe = std::get_if<Swipe>(&action)) {
    check_point(swipe->x1, swipe->y1, world_.width(), world_.height());
    check_point(swipe->x2, swipe->y2, world_.width(), world_.height());
  }
  world_.step(action);
}

DeviceObservation SimDevice::observe() {
  DeviceObservation obs;
  obs.screenshot = world_.render().image;
  obs.foreground_app = world_.foreground();
  obs.timestamp_ms = world_.clock_ms();
  return obs;
}

}  // namespace maple::device
