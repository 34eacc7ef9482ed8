#pragma once

#include <iosfwd>
#include <string>

#include "evsynth/image.hpp"

namespace evsynth {

// Binary PGM (P5, 1 channel) / PPM (P6, 3 channels), maxval 255 only.
// Byte value v maps to intensity v/255. Writers emit the canonical header
// "P6\n<w> <h>\n255\n"; the reader additionally accepts standard whitespace
// and '#' comments. write(read(f)) is byte-identical for canonical files.
IntensityFrame read_pnm(std::istream& in);
void write_pnm(std::ostream& out, const IntensityFrame& frame);

// File-level helpers; write_image is atomic (temp file + rename).
IntensityFrame read_image(const std::string& path);
void write_image(const std::string& path, const IntensityFrame& frame);

}  // namespace evsynth
