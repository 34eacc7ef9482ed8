#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "evsynth/tensor.hpp"

namespace evsynth {

// EVCK tensor archive, little-endian:
//   magic "EVCK", version u16 (= 1), then records until EOF:
//     name length u16, UTF-8 name, rank u8, dims u32 * rank, f32 payload.
// Names are unique; save writes them in lexicographic order so identical
// contents serialize to identical bytes.
class Checkpoint {
 public:
  void put(const std::string& name, Tensor t);
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  // Throws ConfigError when absent.
  const Tensor& get(const std::string& name) const;
  // Scalar convenience (1-element tensors).
  void put_scalar(const std::string& name, double v);
  double get_scalar(const std::string& name) const;

  const std::map<std::string, Tensor>& entries() const { return entries_; }

  // All names under "prefix/" with the prefix stripped.
  std::vector<std::string> names_under(const std::string& prefix) const;

  void save(std::ostream& out) const;
  static Checkpoint load(std::istream& in);

  void save_file(const std::string& path) const;  // atomic
  static Checkpoint load_file(const std::string& path);

 private:
  std::map<std::string, Tensor> entries_;
};

// Copy values from checkpoint entries "<prefix>/<name>" into the named
// parameters of a model. The name sets must match exactly and every shape
// must agree; mismatches raise ConfigError naming the offending tensor.
void restore_params(const Checkpoint& ckpt, const std::string& prefix,
                    std::vector<std::pair<std::string, Tensor>> params);

// Store a parameter set under "<prefix>/<name>".
void store_params(Checkpoint& ckpt, const std::string& prefix,
                  const std::vector<std::pair<std::string, Tensor>>& params);

}  // namespace evsynth
