#include "evsynth/pnm.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include "evsynth/fsio.hpp"

namespace evsynth {

namespace {

// Skip whitespace and '#' comments between header tokens.
void skip_separators(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_header_int(std::istream& in, const char* what) {
  skip_separators(in);
  int value = 0;
  bool any = false;
  int c;
  while ((c = in.peek()) != EOF && std::isdigit(c)) {
    value = value * 10 + (in.get() - '0');
    any = true;
    if (value > 1 << 20) throw FormatError(std::string("pnm: absurd ") + what);
  }
  if (!any) throw FormatError(std::string("pnm: missing ") + what);
  return value;
}

}  // namespace

IntensityFrame read_pnm(std::istream& in) {
  int m0 = in.get();
  int m1 = in.get();
  if (m0 != 'P' || (m1 != '5' && m1 != '6'))
    throw FormatError("pnm: bad magic (expected P5 or P6)");
  int channels = m1 == '5' ? 1 : 3;

  int width = read_header_int(in, "width");
  int height = read_header_int(in, "height");
  int maxval = read_header_int(in, "maxval");
  if (width <= 0 || height <= 0)
    throw FormatError("pnm: non-positive dimensions");
  if (maxval != 255)
    throw FormatError("pnm: unsupported maxval " + std::to_string(maxval) +
                      " (only 255)");
  // Exactly one whitespace byte separates the header from the pixel data.
  int sep = in.get();
  if (sep == EOF || !std::isspace(sep))
    throw FormatError("pnm: missing separator before pixel data");

  size_t pixels = static_cast<size_t>(width) * height;
  std::vector<unsigned char> raw(pixels * channels);
  in.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw FormatError("pnm: short pixel data (" + std::to_string(in.gcount()) +
                      " of " + std::to_string(raw.size()) + " bytes)");

  IntensityFrame frame(channels, width, height);
  if (channels == 1) {
    for (size_t i = 0; i < pixels; ++i)
      frame.values[i] = static_cast<float>(raw[i]) / 255.0f;
  } else {
    // Interleaved RGB on disk, planar in memory.
    for (size_t i = 0; i < pixels; ++i) {
      frame.values[i] = static_cast<float>(raw[3 * i]) / 255.0f;
      frame.values[pixels + i] = static_cast<float>(raw[3 * i + 1]) / 255.0f;
      frame.values[2 * pixels + i] = static_cast<float>(raw[3 * i + 2]) / 255.0f;
    }
  }
  return frame;
}

void write_pnm(std::ostream& out, const IntensityFrame& frame) {
  char header[48];
  int n = std::snprintf(header, sizeof header, "P%c\n%d %d\n255\n",
                        frame.channels == 1 ? '5' : '6', frame.width,
                        frame.height);
  out.write(header, n);

  size_t pixels = frame.pixel_count();
  std::vector<unsigned char> raw(pixels * frame.channels);
  auto code = [](float v) {
    float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<unsigned char>(std::lround(c * 255.0f));
  };
  if (frame.channels == 1) {
    for (size_t i = 0; i < pixels; ++i) raw[i] = code(frame.values[i]);
  } else {
    for (size_t i = 0; i < pixels; ++i) {
      raw[3 * i] = code(frame.values[i]);
      raw[3 * i + 1] = code(frame.values[pixels + i]);
      raw[3 * i + 2] = code(frame.values[2 * pixels + i]);
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!out) throw IoError("pnm: sink write failed");
}

IntensityFrame read_image(const std::string& path) {
  std::ifstream in = open_input(path);
  try {
    return read_pnm(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_image(const std::string& path, const IntensityFrame& frame) {
  atomic_write(path, [&](std::ostream& out) { write_pnm(out, frame); });
}

}  // namespace evsynth
