#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "evsynth/error.hpp"

namespace evsynth {

// Write a file atomically: the payload goes to a temp name in the same
// directory and is renamed over the target only after a successful flush, so
// an interrupted write never leaves a partial file under the final name.
inline void atomic_write(const std::string& path,
                         const std::function<void(std::ostream&)>& writer) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    writer(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed: " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp + " into place: " + ec.message());
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return in;
}

}  // namespace evsynth
