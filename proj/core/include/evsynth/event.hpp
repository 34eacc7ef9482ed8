#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "evsynth/error.hpp"

namespace evsynth {

// One sensor event: pixel location, nanosecond timestamp, polarity (+1/-1).
struct Event {
  uint16_t x = 0;
  uint16_t y = 0;
  uint64_t t = 0;
  int8_t p = 1;

  bool operator==(const Event&) const = default;
};

// Closed time interval [t_start, t_start + tau]; both endpoints included.
struct AccumulationWindow {
  uint64_t t_start = 0;
  uint64_t tau = 0;

  AccumulationWindow(uint64_t start, uint64_t duration)
      : t_start(start), tau(duration) {
    if (duration == 0) throw ConfigError("accumulation window: tau must be > 0");
    if (start > std::numeric_limits<uint64_t>::max() - duration)
      throw ConfigError("accumulation window: t_start + tau overflows");
  }

  uint64_t t_end() const { return t_start + tau; }
  bool contains(uint64_t t) const { return t >= t_start && t <= t_end(); }
};

// Per-pixel signed polarity counts, saturated to [-sat, +sat].
struct EventFrame {
  int width = 0;
  int height = 0;
  int sat = 0;
  std::vector<int32_t> values;  // height * width, row-major

  EventFrame() = default;
  EventFrame(int w, int h, int saturation)
      : width(w), height(h), sat(saturation),
        values(static_cast<size_t>(w) * h, 0) {
    if (w <= 0 || h <= 0)
      throw ShapeError("event frame: invalid dims " + std::to_string(w) + "x" +
                       std::to_string(h));
    if (saturation <= 0)
      throw ConfigError("event frame: saturation must be positive, got " +
                        std::to_string(saturation));
  }

  int32_t& at(int y, int x) {
    return values[static_cast<size_t>(y) * width + x];
  }
  int32_t at(int y, int x) const {
    return values[static_cast<size_t>(y) * width + x];
  }
};

}  // namespace evsynth
