#include "evsynth/checkpoint.hpp"

#include <cstring>
#include <istream>
#include <ostream>

#include "evsynth/fsio.hpp"

namespace evsynth {

namespace {

void put_u16(std::ostream& out, uint16_t v) {
  char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 4);
}

uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void Checkpoint::put(const std::string& name, Tensor t) {
  if (name.empty() || name.size() > 65535)
    throw ConfigError("checkpoint: invalid tensor name length");
  if (!t.defined()) throw ConfigError("checkpoint: undefined tensor " + name);
  entries_[name] = std::move(t);
}

const Tensor& Checkpoint::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw ConfigError("checkpoint: missing tensor '" + name + "'");
  return it->second;
}

void Checkpoint::put_scalar(const std::string& name, double v) {
  put(name, Tensor::scalar(static_cast<float>(v)));
}

double Checkpoint::get_scalar(const std::string& name) const {
  const Tensor& t = get(name);
  if (t.numel() != 1)
    throw ConfigError("checkpoint: '" + name + "' is not a scalar");
  return static_cast<double>(t.data()[0]);
}

std::vector<std::string> Checkpoint::names_under(
    const std::string& prefix) const {
  std::string full = prefix + "/";
  std::vector<std::string> out;
  for (const auto& [name, t] : entries_)
    if (name.starts_with(full)) out.push_back(name.substr(full.size()));
  return out;
}

void Checkpoint::save(std::ostream& out) const {
  out.write("EVCK", 4);
  put_u16(out, 1);
  for (const auto& [name, t] : entries_) {
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& s = t.shape();
    out.put(static_cast<char>(s.rank()));
    for (int i = 0; i < s.rank(); ++i)
      put_u32(out, static_cast<uint32_t>(s[i]));
    std::span<const float> d = t.data();
    static_assert(sizeof(float) == 4);
    // f32 little-endian payload; portable hosts here are little-endian.
    out.write(reinterpret_cast<const char*>(d.data()),
              static_cast<std::streamsize>(d.size() * 4));
  }
  if (!out) throw IoError("checkpoint: sink write failed");
}

Checkpoint Checkpoint::load(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "EVCK", 4) != 0)
    throw FormatError("checkpoint: bad magic");
  uint16_t version = get_u16(in);
  if (!in) throw FormatError("checkpoint: truncated header");
  if (version != 1)
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version));

  Checkpoint ckpt;
  for (;;) {
    int peek = in.peek();
    if (peek == std::char_traits<char>::eof()) break;
    uint16_t name_len = get_u16(in);
    if (!in) throw FormatError("checkpoint: truncated record header");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != name_len)
      throw FormatError("checkpoint: truncated tensor name");
    int rank = in.get();
    if (rank == std::char_traits<char>::eof())
      throw FormatError("checkpoint: truncated rank for '" + name + "'");
    if (rank > 5)
      throw FormatError("checkpoint: rank " + std::to_string(rank) +
                        " too large for '" + name + "'");
    std::vector<int> dims(rank);
    for (int i = 0; i < rank; ++i) {
      uint32_t d = get_u32(in);
      if (!in)
        throw FormatError("checkpoint: truncated dims for '" + name + "'");
      if (d == 0 || d > (1u << 28))
        throw FormatError("checkpoint: bad dim " + std::to_string(d) +
                          " for '" + name + "'");
      dims[i] = static_cast<int>(d);
    }
    Shape shape(dims);
    std::vector<float> values(static_cast<size_t>(shape.numel()));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * 4));
    if (static_cast<size_t>(in.gcount()) != values.size() * 4)
      throw FormatError("checkpoint: truncated payload for '" + name + "'");
    if (ckpt.entries_.count(name))
      throw FormatError("checkpoint: duplicate tensor '" + name + "'");
    ckpt.entries_[name] = Tensor::from_data(shape, std::move(values));
  }
  return ckpt;
}

void Checkpoint::save_file(const std::string& path) const {
  atomic_write(path, [&](std::ostream& out) { save(out); });
}

Checkpoint Checkpoint::load_file(const std::string& path) {
  std::ifstream in = open_input(path);
  return load(in);
}

void restore_params(const Checkpoint& ckpt, const std::string& prefix,
                    std::vector<std::pair<std::string, Tensor>> params) {
  std::vector<std::string> stored = ckpt.names_under(prefix);
  std::map<std::string, bool> wanted;
  for (auto& [name, t] : params) wanted[name] = false;
  for (const std::string& name : stored) {
    if (!wanted.count(name))
      throw ConfigError("checkpoint: unknown tensor '" + prefix + "/" + name +
                        "' for this configuration");
    wanted[name] = true;
  }
  for (auto& [name, seen] : wanted)
    if (!seen)
      throw ConfigError("checkpoint: missing tensor '" + prefix + "/" + name +
                        "'");
  for (auto& [name, t] : params) {
    const Tensor& src = ckpt.get(prefix + "/" + name);
    if (!(src.shape() == t.shape()))
      throw ConfigError("checkpoint: tensor '" + prefix + "/" + name +
                        "' has shape " + src.shape().to_string() +
                        ", expected " + t.shape().to_string());
    std::span<const float> s = src.data();
    std::copy(s.begin(), s.end(), t.data().begin());
  }
}

void store_params(Checkpoint& ckpt, const std::string& prefix,
                  const std::vector<std::pair<std::string, Tensor>>& params) {
  for (const auto& [name, t] : params) ckpt.put(prefix + "/" + name, t.clone());
}

}  // namespace evsynth
