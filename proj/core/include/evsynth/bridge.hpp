#pragma once

#include <span>

#include "evsynth/image.hpp"
#include "evsynth/tensor.hpp"

namespace evsynth {

// [C,H,W] tensor from an intensity frame.
inline Tensor to_tensor(const IntensityFrame& f) {
  return Tensor::from_data(Shape{f.channels, f.height, f.width}, f.values);
}

// [1,H,W] tensor from a plane.
inline Tensor to_tensor(const FloatPlane& p) {
  return Tensor::from_data(Shape{1, p.height, p.width}, p.values);
}

// Intensity frame from a [C,H,W] or [1,C,H,W] tensor, clamped to [0,1].
inline IntensityFrame to_frame(const Tensor& t) {
  Shape s = t.shape();
  int c, h, w;
  if (s.rank() == 3) {
    c = s[0]; h = s[1]; w = s[2];
  } else if (s.rank() == 4 && s[0] == 1) {
    c = s[1]; h = s[2]; w = s[3];
  } else {
    throw ShapeError("to_frame: expected [C,H,W] or [1,C,H,W], got " +
                     s.to_string());
  }
  IntensityFrame f(c, w, h);
  std::span<const float> src = t.data();
  for (size_t i = 0; i < f.values.size(); ++i) {
    float v = src[i];
    f.values[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  }
  return f;
}

}  // namespace evsynth
