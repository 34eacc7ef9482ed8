#include "evsynth/evt1.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>

#include "evsynth/fsio.hpp"

namespace evsynth {

namespace {

void put_u16(uint8_t* p, uint16_t v) {
  p[0] = static_cast<uint8_t>(v);
  p[1] = static_cast<uint8_t>(v >> 8);
}

void put_u64(uint8_t* p, uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

size_t encode_events(std::ostream& sink, std::span<const Event> events,
                     uint16_t width, uint16_t height) {
  if (width == 0 || height == 0)
    throw ConfigError("evt1: resolution must be nonzero");

  std::array<uint8_t, kEvt1HeaderBytes> header{};
  std::memcpy(header.data(), "EVT1", 4);
  put_u16(header.data() + 4, width);
  put_u16(header.data() + 6, height);
  put_u64(header.data() + 8, events.size());
  sink.write(reinterpret_cast<const char*>(header.data()), header.size());

  uint64_t prev_t = 0;
  bool first = true;
  std::array<uint8_t, kEvt1RecordBytes> rec{};
  for (size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (!first && e.t < prev_t)
      throw DataError("evt1: events out of order at index " + std::to_string(i));
    prev_t = e.t;
    first = false;
    if (e.x >= width || e.y >= height)
      throw DataError("evt1: coordinate (" + std::to_string(e.x) + "," +
                      std::to_string(e.y) + ") outside " +
                      std::to_string(width) + "x" + std::to_string(height) +
                      " at index " + std::to_string(i));
    if (e.p != 1 && e.p != -1)
      throw DataError("evt1: polarity must be +1 or -1 at index " +
                      std::to_string(i));
    put_u64(rec.data(), e.t);
    put_u16(rec.data() + 8, e.x);
    put_u16(rec.data() + 10, e.y);
    rec[12] = static_cast<uint8_t>(e.p);
    sink.write(reinterpret_cast<const char*>(rec.data()), rec.size());
  }
  if (!sink) throw IoError("evt1: sink write failed");
  return kEvt1HeaderBytes + kEvt1RecordBytes * events.size();
}

Evt1Decoder::Evt1Decoder(std::istream& source) : source_(source) {
  std::array<uint8_t, kEvt1HeaderBytes> raw{};
  source_.read(reinterpret_cast<char*>(raw.data()), raw.size());
  size_t got = static_cast<size_t>(source_.gcount());
  if (got < raw.size())
    throw FormatError("evt1: truncated header at byte " + std::to_string(got));
  if (std::memcmp(raw.data(), "EVT", 3) != 0)
    throw FormatError("evt1: bad magic");
  if (raw[3] != '1')
    throw FormatError("evt1: unsupported version byte '" +
                      std::string(1, static_cast<char>(raw[3])) + "'");
  header_.version = 1;
  header_.width = get_u16(raw.data() + 4);
  header_.height = get_u16(raw.data() + 6);
  header_.event_count = get_u64(raw.data() + 8);
  if (header_.width == 0 || header_.height == 0)
    throw FormatError("evt1: zero resolution in header");
  offset_ = kEvt1HeaderBytes;
}

std::optional<Event> Evt1Decoder::next() {
  if (read_ >= header_.event_count) return std::nullopt;
  std::array<uint8_t, kEvt1RecordBytes> raw{};
  source_.read(reinterpret_cast<char*>(raw.data()), raw.size());
  size_t got = static_cast<size_t>(source_.gcount());
  if (got < raw.size())
    throw FormatError("evt1: truncated record at byte " +
                      std::to_string(offset_ + got) + " (event " +
                      std::to_string(read_) + " of " +
                      std::to_string(header_.event_count) + ")");
  offset_ += raw.size();

  Event e;
  e.t = get_u64(raw.data());
  e.x = get_u16(raw.data() + 8);
  e.y = get_u16(raw.data() + 10);
  uint8_t pol = raw[12];
  if (pol == 0x01)
    e.p = 1;
  else if (pol == 0xFF)
    e.p = -1;
  else
    throw FormatError("evt1: invalid polarity byte 0x" + [pol] {
      char b[3];
      std::snprintf(b, sizeof b, "%02X", pol);
      return std::string(b);
    }() + " in event " + std::to_string(read_));
  if (read_ > 0 && e.t < prev_t_)
    throw DataError("evt1: events out of order at event " +
                    std::to_string(read_));
  prev_t_ = e.t;
  if (e.x >= header_.width || e.y >= header_.height)
    throw DataError("evt1: coordinate (" + std::to_string(e.x) + "," +
                    std::to_string(e.y) + ") outside " +
                    std::to_string(header_.width) + "x" +
                    std::to_string(header_.height) + " in event " +
                    std::to_string(read_));
  ++read_;
  return e;
}

std::vector<Event> decode_events(std::istream& source, Evt1Header* header) {
  Evt1Decoder dec(source);
  if (header) *header = dec.header();
  std::vector<Event> events;
  events.reserve(static_cast<size_t>(dec.header().event_count));
  while (auto e = dec.next()) events.push_back(*e);
  return events;
}

void write_events_file(const std::string& path, std::span<const Event> events,
                       uint16_t width, uint16_t height) {
  atomic_write(path, [&](std::ostream& out) {
    encode_events(out, events, width, height);
  });
}

std::vector<Event> read_events_file(const std::string& path,
                                    Evt1Header* header) {
  std::ifstream in = open_input(path);
  return decode_events(in, header);
}

}  // namespace evsynth
