#include "evsynth/event_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "evsynth/error.hpp"

namespace evsynth {

EventFrame accumulate_events(std::span<const Event> events,
                             const AccumulationWindow& window, int width,
                             int height, int sat) {
  EventFrame frame(width, height, sat);
  std::vector<int32_t> sums(frame.values.size(), 0);

  uint64_t prev_t = 0;
  bool first = true;
  size_t index = 0;
  for (const Event& e : events) {
    if (!first && e.t < prev_t)
      throw DataError("event stream: timestamp decreases at index " +
                      std::to_string(index) + " (" + std::to_string(e.t) +
                      " after " + std::to_string(prev_t) + ")");
    prev_t = e.t;
    first = false;
    if (e.x >= width || e.y >= height)
      throw DataError("event stream: coordinate (" + std::to_string(e.x) +
                      "," + std::to_string(e.y) + ") outside " +
                      std::to_string(width) + "x" + std::to_string(height) +
                      " at index " + std::to_string(index));
    if (e.p != 1 && e.p != -1)
      throw DataError("event stream: polarity must be +1 or -1, got " +
                      std::to_string(static_cast<int>(e.p)) + " at index " +
                      std::to_string(index));
    if (window.contains(e.t))
      sums[static_cast<size_t>(e.y) * width + e.x] += e.p;
    ++index;
  }

  for (size_t i = 0; i < sums.size(); ++i) {
    int32_t v = sums[i];
    frame.values[i] = v > sat ? sat : (v < -sat ? -sat : v);
  }
  return frame;
}

BrightnessImage brightness(const IntensityFrame& frame) {
  BrightnessImage out(frame.width, frame.height);
  size_t n = frame.pixel_count();
  if (frame.channels == 1) {
    for (size_t i = 0; i < n; ++i) out.values[i] = frame.values[i];
  } else {
    const float* r = frame.values.data();
    const float* g = r + n;
    const float* b = g + n;
    for (size_t i = 0; i < n; ++i)
      out.values[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  }
  return out;
}

FloatPlane simulate_event_frame(const IntensityFrame& prev,
                                const IntensityFrame& next, float eps) {
  if (prev.width != next.width || prev.height != next.height ||
      prev.channels != next.channels)
    throw ShapeError("log difference: frame geometry mismatch (" +
                     std::to_string(prev.width) + "x" +
                     std::to_string(prev.height) + "x" +
                     std::to_string(prev.channels) + " vs " +
                     std::to_string(next.width) + "x" +
                     std::to_string(next.height) + "x" +
                     std::to_string(next.channels) + ")");
  if (eps <= 0.0f) throw ConfigError("log difference: eps must be > 0");

  BrightnessImage a = brightness(prev);
  BrightnessImage b = brightness(next);
  FloatPlane out(prev.width, prev.height);
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = std::log(b.values[i] + eps) - std::log(a.values[i] + eps);
  return out;
}

EventFrame quantize_log_diff(const FloatPlane& delta, float contrast_clip,
                             int levels) {
  if (levels < 3 || levels % 2 == 0)
    throw ConfigError("quantize: levels must be odd and >= 3, got " +
                      std::to_string(levels));
  if (!(contrast_clip > 0.0f))
    throw ConfigError("quantize: contrast clip must be > 0");

  int half = (levels - 1) / 2;
  EventFrame out(delta.width, delta.height, half);
  float scale = static_cast<float>(half) / contrast_clip;
  for (size_t i = 0; i < delta.values.size(); ++i) {
    float v = delta.values[i];
    if (v > contrast_clip) v = contrast_clip;
    if (v < -contrast_clip) v = -contrast_clip;
    // std::round rounds halfway cases away from zero.
    out.values[i] = static_cast<int32_t>(std::round(v * scale));
  }
  return out;
}

FloatPlane event_frame_to_model_input(const EventFrame& frame) {
  FloatPlane out(frame.width, frame.height);
  float inv = 1.0f / static_cast<float>(frame.sat);
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = static_cast<float>(frame.values[i]) * inv;
  return out;
}

std::vector<Event> realize_events(std::span<const IntensityFrame> frames,
                                  uint64_t period_ns, float eps,
                                  float contrast_clip, int levels) {
  if (frames.size() < 2)
    throw ConfigError("realize_events: need at least two frames");
  if (period_ns == 0) throw ConfigError("realize_events: period must be > 0");
  if (period_ns > (uint64_t{1} << 55))
    throw ConfigError("realize_events: period too large");

  std::vector<Event> events;
  for (size_t i = 0; i + 1 < frames.size(); ++i) {
    FloatPlane delta = simulate_event_frame(frames[i], frames[i + 1], eps);
    EventFrame q = quantize_log_diff(delta, contrast_clip, levels);
    size_t window_start = events.size();
    uint64_t t0 = static_cast<uint64_t>(i) * period_ns;
    for (int y = 0; y < q.height; ++y) {
      for (int x = 0; x < q.width; ++x) {
        int count = q.at(y, x);
        int k = std::abs(count);
        int8_t polarity = count > 0 ? int8_t{1} : int8_t{-1};
        for (int j = 0; j < k; ++j) {
          uint64_t offset = period_ns * static_cast<uint64_t>(j + 1) /
                            static_cast<uint64_t>(k + 1);
          events.push_back(Event{static_cast<uint16_t>(x),
                                 static_cast<uint16_t>(y), t0 + offset,
                                 polarity});
        }
      }
    }
    std::stable_sort(events.begin() + static_cast<ptrdiff_t>(window_start),
                     events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
  }
  return events;
}

}  // namespace evsynth
