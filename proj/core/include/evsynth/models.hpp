#pragma once

#include <string>
#include <utility>
#include <vector>

#include "evsynth/tensor.hpp"

namespace evsynth {

// ---- generator -------------------------------------------------------------

// Encoder-decoder with skip connections. Encoder: `depth` stride-2 4x4 convs
// with leaky ReLU (0.2), channels base*2^level. Decoder: stride-2 2x2
// transposed convs with ReLU, each output concatenated with the encoder
// activation of the same spatial size. Final transposed conv + tanh, mapped
// affinely from [-1,1] to [0,1].
struct UNetConfig {
  int in_channels = 4;   // key frame channels + 1 event plane
  int out_channels = 3;
  int depth = 4;
  int base_channels = 16;

  int enc_channels(int level) const { return base_channels << level; }
};

class Generator {
 public:
  Generator() = default;
  explicit Generator(UNetConfig cfg);

  void init_params(Rng& rng, double stddev = 0.02);

  // x: [B, in_channels, H, W] with H and W divisible by 2^depth.
  // zero_skips replaces every skip input with zeros (ablation aid).
  Tensor forward(Tape& tape, const Tensor& x, bool zero_skips = false) const;

  const UNetConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;

 private:
  UNetConfig cfg_;
  std::vector<Tensor> enc_w_, enc_b_;   // per encoder level
  std::vector<Tensor> dec_w_, dec_b_;   // per decoder level, index = level
  Tensor out_w_, out_b_;
};

// ---- discriminator -----------------------------------------------------

// Patch classifier: three stride-2 4x4 conv blocks, one stride-1 block, and
// a stride-1 projection to one channel followed by a sigmoid. Each output
// cell scores one receptive-field patch (64x64 input -> 6x6 grid).
struct DiscConfig {
  int in_channels = 7;  // condition channels + candidate channels
  int base_channels = 16;
};

class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(DiscConfig cfg);

  void init_params(Rng& rng, double stddev = 0.02);

  // Scores the candidate under the condition it was generated from; both are
  // [B,*,H,W] and get concatenated on channels. Returns patch probabilities.
  Tensor forward(Tape& tape, const Tensor& condition,
                 const Tensor& candidate) const;

  const DiscConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;

 private:
  DiscConfig cfg_;
  std::vector<Tensor> w_, b_;
  std::vector<int> stride_;
};

// ---- convolutional LSTM ------------------------------------------------

struct ConvLstmState {
  Tensor h, c;
};

// Peephole-free ConvLSTM cell: gates from same-padded convolutions of the
// input (W*) and previous hidden state (U*), biases on the input path only.
//   I = sig(Wi*X + Ui*H + bi)   F = sig(Wf*X + Uf*H + bf)
//   O = sig(Wo*X + Uo*H + bo)   G = tanh(Wc*X + Uc*H + bc)
//   C = F . Cprev + I . G       H = O . tanh(C)
class ConvLstmCell {
 public:
  ConvLstmCell() = default;
  ConvLstmCell(int in_channels, int hidden_channels, int kernel = 3);

  void init_params(Rng& rng, double stddev = 0.02);

  ConvLstmState zero_state(int batch, int height, int width) const;
  ConvLstmState step(Tape& tape, const Tensor& x,
                     const ConvLstmState& prev) const;

  int in_channels() const { return in_channels_; }
  int hidden_channels() const { return hidden_channels_; }
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;

 private:
  int in_channels_ = 0, hidden_channels_ = 0, kernel_ = 3, pad_ = 1;
  Tensor wi_, wf_, wo_, wc_;  // input kernels
  Tensor ui_, uf_, uo_, uc_;  // hidden kernels
  Tensor bi_, bf_, bo_, bc_;
};

// ---- refiner -------------------------------------------------------------

// Same encoder/decoder layout as the generator but with two stacked ConvLSTM
// cells at the bottleneck; their state is threaded across the frames of a
// sequence so late frames benefit from earlier ones.
struct RefinerConfig {
  int channels = 3;
  int depth = 4;
  int base_channels = 16;
  int lstm_channels = 64;
  int lstm_kernel = 3;
};

struct RefinerState {
  ConvLstmState l1, l2;
};

class Refiner {
 public:
  Refiner() = default;
  explicit Refiner(RefinerConfig cfg);

  void init_params(Rng& rng, double stddev = 0.02);

  // Fresh all-zero recurrent state for frames of the given geometry.
  RefinerState zero_state(int batch, int height, int width) const;

  // One frame through the network, advancing the recurrent state.
  Tensor step(Tape& tape, const Tensor& frame, RefinerState& state) const;

  // Whole sequence with state threaded from a zero start.
  std::vector<Tensor> forward_sequence(Tape& tape,
                                       const std::vector<Tensor>& frames) const;

  const RefinerConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<Tensor> params() const;

 private:
  RefinerConfig cfg_;
  std::vector<Tensor> enc_w_, enc_b_;
  ConvLstmCell cell1_, cell2_;
  std::vector<Tensor> dec_w_, dec_b_;
  Tensor out_w_, out_b_;
};

// Order-sensitive FNV-1a hash over the raw f32 bytes of all parameters;
// used to verify that frozen networks stay frozen.
uint64_t params_fingerprint(const std::vector<Tensor>& params);

}  // namespace evsynth
