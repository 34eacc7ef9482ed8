#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "evsynth/event.hpp"
#include "evsynth/image.hpp"

namespace evsynth {

// Moving-shapes scene: colored rectangles and disks translating with constant
// velocity over a smooth seeded background, rendered at a fixed resolution.
struct ToySceneConfig {
  int width = 64;
  int height = 64;
  int frame_count = 7;  // one keyframe + the frames to synthesize
  int shape_count = 3;
  double min_speed = 0.5;  // pixels per frame
  double max_speed = 2.0;
  uint64_t texture_seed = 7;  // background pattern
  uint64_t seed = 42;         // shapes, colors, motion
  uint64_t period_ns = 10'000'000;  // time between frames
  int sequence_count = 1;
};

// One rendered sequence. Frames hold u8-quantized values so writing them as
// PNM and reading them back reproduces the in-memory data bit-exactly. The
// event stream realizes each inter-frame quantized log-brightness change as
// |count| unit events per pixel, timestamped strictly inside the frame
// interval; accumulating them over window i reproduces the quantized
// difference plane between frames i and i+1 exactly.
struct ToySequence {
  std::vector<IntensityFrame> frames;
  std::vector<Event> events;
  uint64_t period_ns = 0;
};

// Renders sequence `sequence_index` of the configured dataset. Deterministic:
// the same (config, index) always produces the same result.
ToySequence render_toy_sequence(const ToySceneConfig& cfg,
                                uint64_t sequence_index);

// Writes sequences seq_000 .. seq_NNN under out_dir, each directory holding
// frame_000.ppm.., events.evt1 and manifest.txt. Returns the directories
// written, in order.
std::vector<std::filesystem::path> write_toy_dataset(
    const std::filesystem::path& out_dir, const ToySceneConfig& cfg);

}  // namespace evsynth
