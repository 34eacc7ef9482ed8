#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "evsynth/error.hpp"

namespace evsynth {

// Intensity image, channels-first (CHW), values in [0, 1]. 1 channel (gray)
// or 3 channels (RGB).
struct IntensityFrame {
  int channels = 0;
  int width = 0;
  int height = 0;
  std::vector<float> values;  // channels * height * width, row-major per channel

  IntensityFrame() = default;
  IntensityFrame(int c, int w, int h)
      : channels(c), width(w), height(h),
        values(static_cast<size_t>(c) * w * h, 0.0f) {
    if ((c != 1 && c != 3) || w <= 0 || h <= 0)
      throw ShapeError("intensity frame: invalid dims c=" + std::to_string(c) +
                       " w=" + std::to_string(w) + " h=" + std::to_string(h));
  }

  float& at(int c, int y, int x) {
    return values[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return values[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

// Single-channel f32 plane (log differences, normalized event planes, ...).
struct FloatPlane {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // height * width, row-major

  FloatPlane() = default;
  FloatPlane(int w, int h)
      : width(w), height(h), values(static_cast<size_t>(w) * h, 0.0f) {
    if (w <= 0 || h <= 0)
      throw ShapeError("plane: invalid dims " + std::to_string(w) + "x" +
                       std::to_string(h));
  }

  float& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
  float at(int y, int x) const {
    return values[static_cast<size_t>(y) * width + x];
  }
};

// Per-pixel brightness in [0, 1], produced from an IntensityFrame.
struct BrightnessImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  BrightnessImage() = default;
  BrightnessImage(int w, int h)
      : width(w), height(h), values(static_cast<size_t>(w) * h, 0.0f) {}

  float at(int y, int x) const {
    return values[static_cast<size_t>(y) * width + x];
  }
};

// Quantize a unit-interval intensity to the nearest 8-bit code and back.
// This is exactly the value an image survives a PGM/PPM round trip with.
inline float quantize_u8(float v) {
  float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  int code = static_cast<int>(std::lround(c * 255.0f));
  return static_cast<float>(code) / 255.0f;
}

}  // namespace evsynth
