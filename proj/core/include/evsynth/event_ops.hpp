#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evsynth/event.hpp"
#include "evsynth/image.hpp"

namespace evsynth {

inline constexpr float kDefaultLogEps = 1.0f / 255.0f;
inline constexpr int kDefaultLevels = 255;
inline constexpr int kDefaultSaturation = 127;  // (kDefaultLevels - 1) / 2
// Default contrast threshold for quantization: one stop of brightness change
// maps to full scale.
inline const float kDefaultContrastClip = 0.6931471805599453f;  // ln(2)

// Sum event polarities per pixel over a closed window, clamping the total to
// [-sat, +sat]. The stream must be sorted by timestamp (non-decreasing) and
// every event must lie inside the sensor plane; violations raise DataError.
// Events outside the window are ignored. Single pass over the stream.
EventFrame accumulate_events(std::span<const Event> events,
                             const AccumulationWindow& window, int width,
                             int height, int sat = kDefaultSaturation);

// Luma-style brightness: 0.299 R + 0.587 G + 0.114 B for RGB input, identity
// for single-channel input.
BrightnessImage brightness(const IntensityFrame& frame);

// Per-pixel log-brightness change between two frames of identical geometry:
//   ln(Br(next) + eps) - ln(Br(prev) + eps)
// eps keeps zero-brightness pixels finite.
FloatPlane simulate_event_frame(const IntensityFrame& prev,
                                const IntensityFrame& next,
                                float eps = kDefaultLogEps);

// Map log differences onto the signed integer grid of an event frame:
// clamp to [-contrast_clip, +contrast_clip], scale so the clip maps to
// (levels-1)/2, round half away from zero. levels must be odd and >= 3.
EventFrame quantize_log_diff(const FloatPlane& delta,
                             float contrast_clip = kDefaultContrastClip,
                             int levels = kDefaultLevels);

// Normalize an event frame for network input: value / sat, giving a plane in
// [-1, 1] with 0 meaning "no events".
FloatPlane event_frame_to_model_input(const EventFrame& frame);

// Realize a frame sequence as an event stream: for every consecutive pair,
// quantize the log-brightness change and emit |count| unit events of its sign
// per pixel, timestamped uniformly and strictly inside the frame interval
// (so closed accumulation windows never share an event). The stream is
// sorted by timestamp. Accumulating window i over the result reproduces
// quantize_log_diff(simulate_event_frame(frames[i], frames[i+1])) exactly.
std::vector<Event> realize_events(std::span<const IntensityFrame> frames,
                                  uint64_t period_ns,
                                  float eps = kDefaultLogEps,
                                  float contrast_clip = kDefaultContrastClip,
                                  int levels = kDefaultLevels);

}  // namespace evsynth
