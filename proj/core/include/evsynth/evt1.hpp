#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evsynth/event.hpp"

namespace evsynth {

// EVT1 container: little-endian throughout.
//   header (16 bytes): magic "EVT1" (the trailing '1' is the format version),
//                      width u16, height u16, event count u64
//   records (13 bytes): t u64, x u16, y u16, p i8 (0x01 = +1, 0xFF = -1)
struct Evt1Header {
  uint16_t version = 1;
  uint16_t width = 0;
  uint16_t height = 0;
  uint64_t event_count = 0;
};

inline constexpr size_t kEvt1HeaderBytes = 16;
inline constexpr size_t kEvt1RecordBytes = 13;

// Write a full stream. Events must be sorted by timestamp and in-bounds;
// returns total bytes written (16 + 13 * n).
size_t encode_events(std::ostream& sink, std::span<const Event> events,
                     uint16_t width, uint16_t height);

// Incremental reader. Validates the header on construction, then yields
// events one record at a time, enforcing timestamp order, coordinate bounds
// and polarity encoding as it goes.
class Evt1Decoder {
 public:
  explicit Evt1Decoder(std::istream& source);

  const Evt1Header& header() const { return header_; }
  uint16_t width() const { return header_.width; }
  uint16_t height() const { return header_.height; }

  // Next event, or nullopt once event_count records were read.
  std::optional<Event> next();

 private:
  std::istream& source_;
  Evt1Header header_;
  uint64_t read_ = 0;
  uint64_t prev_t_ = 0;
  size_t offset_ = 0;  // byte offset of the next unread byte
};

// Convenience: decode the entire stream into memory.
std::vector<Event> decode_events(std::istream& source, Evt1Header* header = nullptr);

// File-level helpers. write_events_file is atomic (temp file + rename).
void write_events_file(const std::string& path, std::span<const Event> events,
                       uint16_t width, uint16_t height);
std::vector<Event> read_events_file(const std::string& path,
                                    Evt1Header* header = nullptr);

}  // namespace evsynth
