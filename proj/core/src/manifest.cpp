#include "evsynth/manifest.hpp"

#include <filesystem>
#include <sstream>

#include "evsynth/event_ops.hpp"
#include "evsynth/evt1.hpp"
#include "evsynth/fsio.hpp"
#include "evsynth/pnm.hpp"

namespace evsynth {

namespace fs = std::filesystem;

std::string SequenceManifest::frame_path(size_t i) const {
  return base_dir.empty() ? frames[i] : (fs::path(base_dir) / frames[i]).string();
}

std::string SequenceManifest::events_path() const {
  return base_dir.empty() ? events : (fs::path(base_dir) / events).string();
}

SequenceManifest parse_manifest(const std::string& text) {
  SequenceManifest m;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_period = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    // Trim trailing whitespace (covers stray CR as well).
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' ||
                             line.back() == '\r'))
      line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    size_t eq = line.find('=', start);
    if (eq == std::string::npos)
      throw FormatError("manifest: line " + std::to_string(line_no) +
                        ": expected key=value");
    std::string key = line.substr(start, eq - start);
    std::string value = line.substr(eq + 1);
    if (key == "frame") {
      if (value.empty())
        throw FormatError("manifest: line " + std::to_string(line_no) +
                          ": empty frame name");
      m.frames.push_back(value);
    } else if (key == "events") {
      m.events = value;
    } else if (key == "period_ns") {
      try {
        size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        m.period_ns = v;
      } catch (const std::exception&) {
        throw FormatError("manifest: line " + std::to_string(line_no) +
                          ": bad period_ns '" + value + "'");
      }
      have_period = true;
    } else {
      throw FormatError("manifest: line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (m.frames.size() < 2)
    throw FormatError("manifest: need at least 2 frames, got " +
                      std::to_string(m.frames.size()));
  if (m.events.empty()) throw FormatError("manifest: missing events entry");
  if (!have_period || m.period_ns == 0)
    throw FormatError("manifest: period_ns must be present and > 0");
  return m;
}

SequenceManifest read_manifest(const std::string& path) {
  std::ifstream in = open_input(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  SequenceManifest m = parse_manifest(buf.str());
  m.base_dir = fs::path(path).parent_path().string();
  return m;
}

void write_manifest(const std::string& path, const SequenceManifest& manifest) {
  atomic_write(path, [&](std::ostream& out) {
    for (const std::string& f : manifest.frames) out << "frame=" << f << "\n";
    out << "events=" << manifest.events << "\n";
    out << "period_ns=" << manifest.period_ns << "\n";
  });
}

LoadedSequence load_sequence(const std::string& manifest_path, int sat) {
  SequenceManifest m = read_manifest(manifest_path);

  LoadedSequence seq;
  seq.frames.reserve(m.frames.size());
  for (size_t i = 0; i < m.frames.size(); ++i) {
    IntensityFrame f = read_image(m.frame_path(i));
    if (i > 0 && (f.width != seq.frames[0].width ||
                  f.height != seq.frames[0].height ||
                  f.channels != seq.frames[0].channels))
      throw DataError("sequence: frame " + m.frames[i] +
                      " geometry differs from " + m.frames[0]);
    seq.frames.push_back(std::move(f));
  }

  Evt1Header header;
  std::vector<Event> events = read_events_file(m.events_path(), &header);
  if (header.width != seq.frames[0].width ||
      header.height != seq.frames[0].height)
    throw DataError("sequence: event stream is " +
                    std::to_string(header.width) + "x" +
                    std::to_string(header.height) + " but frames are " +
                    std::to_string(seq.frames[0].width) + "x" +
                    std::to_string(seq.frames[0].height));

  seq.event_frames.reserve(seq.frames.size() - 1);
  for (size_t i = 0; i + 1 < seq.frames.size(); ++i) {
    AccumulationWindow window(i * m.period_ns, m.period_ns);
    seq.event_frames.push_back(accumulate_events(
        events, window, header.width, header.height, sat));
  }
  return seq;
}

}  // namespace evsynth
