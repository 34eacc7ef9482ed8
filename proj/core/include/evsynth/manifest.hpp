#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evsynth/event.hpp"
#include "evsynth/image.hpp"

namespace evsynth {

// Sequence manifest: UTF-8 text, LF line endings, one key=value per line,
// '#' starts a comment. Keys:
//   frame=<file>      repeated; order defines the frame order
//   events=<file>     EVT1 stream covering the whole sequence
//   period_ns=<int>   time between consecutive frames, nanoseconds
// File names are resolved relative to the manifest's directory.
struct SequenceManifest {
  std::vector<std::string> frames;
  std::string events;
  uint64_t period_ns = 0;
  std::string base_dir;

  std::string frame_path(size_t i) const;
  std::string events_path() const;
};

SequenceManifest parse_manifest(const std::string& text);
SequenceManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const SequenceManifest& manifest);

// A fully loaded sequence: n frames plus the n-1 event frames accumulated
// over the inter-frame windows [i*period, (i+1)*period].
struct LoadedSequence {
  std::vector<IntensityFrame> frames;
  std::vector<EventFrame> event_frames;
};

inline constexpr int kDefaultSequenceSat = 127;

// Read every frame and the event stream, accumulate per-window event frames
// and cross-check geometry between images and the event stream header.
LoadedSequence load_sequence(const std::string& manifest_path,
                             int sat = kDefaultSequenceSat);

}  // namespace evsynth
