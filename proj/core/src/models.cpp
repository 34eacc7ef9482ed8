#include "evsynth/models.hpp"

#include <cstring>

namespace evsynth {

namespace {

Tensor param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

void gaussian_fill(Tensor& t, Rng& rng, double stddev) {
  for (float& v : t.data()) v = static_cast<float>(rng.normal(0.0, stddev));
}

void zero_fill(Tensor& t) {
  std::fill(t.data().begin(), t.data().end(), 0.0f);
}

// Kernels get Gaussian noise, biases start at zero. A parameter is a bias
// when the last dotted component of its name starts with 'b'.
void init_gaussian(std::vector<std::pair<std::string, Tensor>> params,
                   Rng& rng, double stddev) {
  for (auto& [name, t] : params) {
    std::string leaf = name.substr(name.rfind('.') + 1);
    if (!leaf.empty() && leaf[0] == 'b')
      zero_fill(t);
    else
      gaussian_fill(t, rng, stddev);
  }
}

// tanh output in [-1,1] -> intensity in [0,1].
Tensor to_unit_range(Tape& tape, const Tensor& x) {
  return add_scalar(tape, mul_scalar(tape, x, 0.5f), 0.5f);
}

void check_unet_input(const Tensor& x, int in_channels, int depth,
                      const char* who) {
  if (x.shape().rank() != 4)
    throw ShapeError(std::string(who) + ": input must be [B,C,H,W]");
  if (x.shape()[1] != in_channels)
    throw ShapeError(std::string(who) + ": expected " +
                     std::to_string(in_channels) + " channels, got " +
                     std::to_string(x.shape()[1]));
  int div = 1 << depth;
  if (x.shape()[2] % div != 0 || x.shape()[3] % div != 0)
    throw ShapeError(std::string(who) + ": spatial dims " +
                     std::to_string(x.shape()[2]) + "x" +
                     std::to_string(x.shape()[3]) +
                     " must be divisible by 2^depth = " + std::to_string(div));
}

}  // namespace

// ---- Generator ---------------------------------------------------------

Generator::Generator(UNetConfig cfg) : cfg_(cfg) {
  if (cfg.depth < 2) throw ConfigError("generator: depth must be >= 2");
  if (cfg.base_channels < 1 || cfg.in_channels < 1 || cfg.out_channels < 1)
    throw ConfigError("generator: channel counts must be positive");
  int n = cfg.depth;
  for (int i = 0; i < n; ++i) {
    int cin = i == 0 ? cfg.in_channels : cfg.enc_channels(i - 1);
    int cout = cfg.enc_channels(i);
    enc_w_.push_back(param(Shape{cout, cin, 4, 4}));
    enc_b_.push_back(param(Shape{cout}));
  }
  dec_w_.resize(n - 1);
  dec_b_.resize(n - 1);
  for (int level = n - 2; level >= 0; --level) {
    int cin = level == n - 2 ? cfg.enc_channels(n - 1)
                             : 2 * cfg.enc_channels(level + 1);
    int cout = cfg.enc_channels(level);
    dec_w_[level] = param(Shape{cin, cout, 2, 2});
    dec_b_[level] = param(Shape{cout});
  }
  out_w_ = param(Shape{2 * cfg.enc_channels(0), cfg.out_channels, 2, 2});
  out_b_ = param(Shape{cfg.out_channels});
}

void Generator::init_params(Rng& rng, double stddev) {
  init_gaussian(named_params(), rng, stddev);
}

Tensor Generator::forward(Tape& tape, const Tensor& x, bool zero_skips) const {
  check_unet_input(x, cfg_.in_channels, cfg_.depth, "generator");
  int n = cfg_.depth;
  std::vector<Tensor> skips;
  Tensor h = x;
  for (int i = 0; i < n; ++i) {
    h = leaky_relu(tape, conv2d(tape, h, enc_w_[i], enc_b_[i], 2, 1), 0.2f);
    skips.push_back(h);
  }
  Tensor d = h;  // bottleneck = deepest encoder activation
  for (int level = n - 2; level >= 0; --level) {
    d = relu(tape, conv_transpose2d(tape, d, dec_w_[level], dec_b_[level], 2));
    Tensor skip = zero_skips ? Tensor::zeros(skips[level].shape())
                             : skips[level];
    d = concat_channels(tape, d, skip);
  }
  Tensor y = conv_transpose2d(tape, d, out_w_, out_b_, 2);
  return to_unit_range(tape, tanh_op(tape, y));
}

std::vector<std::pair<std::string, Tensor>> Generator::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t i = 0; i < enc_w_.size(); ++i) {
    out.emplace_back("enc" + std::to_string(i) + ".w", enc_w_[i]);
    out.emplace_back("enc" + std::to_string(i) + ".b", enc_b_[i]);
  }
  for (size_t i = 0; i < dec_w_.size(); ++i) {
    out.emplace_back("dec" + std::to_string(i) + ".w", dec_w_[i]);
    out.emplace_back("dec" + std::to_string(i) + ".b", dec_b_[i]);
  }
  out.emplace_back("out.w", out_w_);
  out.emplace_back("out.b", out_b_);
  return out;
}

std::vector<Tensor> Generator::params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

// ---- Discriminator -------------------------------------------------------

Discriminator::Discriminator(DiscConfig cfg) : cfg_(cfg) {
  if (cfg.base_channels < 1 || cfg.in_channels < 1)
    throw ConfigError("discriminator: channel counts must be positive");
  int bc = cfg.base_channels;
  struct Block {
    int cin, cout, stride;
  };
  Block blocks[5] = {
      {cfg.in_channels, bc, 2}, {bc, 2 * bc, 2},     {2 * bc, 4 * bc, 2},
      {4 * bc, 8 * bc, 1},      {8 * bc, 1, 1},
  };
  for (const Block& blk : blocks) {
    w_.push_back(param(Shape{blk.cout, blk.cin, 4, 4}));
    b_.push_back(param(Shape{blk.cout}));
    stride_.push_back(blk.stride);
  }
}

void Discriminator::init_params(Rng& rng, double stddev) {
  init_gaussian(named_params(), rng, stddev);
}

Tensor Discriminator::forward(Tape& tape, const Tensor& condition,
                              const Tensor& candidate) const {
  Tensor h = concat_channels(tape, condition, candidate);
  if (h.shape()[1] != cfg_.in_channels)
    throw ShapeError("discriminator: expected " +
                     std::to_string(cfg_.in_channels) +
                     " combined channels, got " +
                     std::to_string(h.shape()[1]));
  for (size_t i = 0; i < w_.size(); ++i) {
    h = conv2d(tape, h, w_[i], b_[i], stride_[i], 1);
    if (i + 1 < w_.size()) h = leaky_relu(tape, h, 0.2f);
  }
  return sigmoid_op(tape, h);
}

std::vector<std::pair<std::string, Tensor>> Discriminator::named_params()
    const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t i = 0; i < w_.size(); ++i) {
    out.emplace_back("c" + std::to_string(i) + ".w", w_[i]);
    out.emplace_back("c" + std::to_string(i) + ".b", b_[i]);
  }
  return out;
}

std::vector<Tensor> Discriminator::params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

// ---- ConvLstmCell --------------------------------------------------------

ConvLstmCell::ConvLstmCell(int in_channels, int hidden_channels, int kernel)
    : in_channels_(in_channels), hidden_channels_(hidden_channels),
      kernel_(kernel), pad_((kernel - 1) / 2) {
  if (kernel < 1 || kernel % 2 == 0)
    throw ConfigError("convlstm: kernel must be odd, got " +
                      std::to_string(kernel));
  if (in_channels < 1 || hidden_channels < 1)
    throw ConfigError("convlstm: channel counts must be positive");
  auto wshape = Shape{hidden_channels, in_channels, kernel, kernel};
  auto ushape = Shape{hidden_channels, hidden_channels, kernel, kernel};
  wi_ = param(wshape); wf_ = param(wshape); wo_ = param(wshape);
  wc_ = param(wshape);
  ui_ = param(ushape); uf_ = param(ushape); uo_ = param(ushape);
  uc_ = param(ushape);
  bi_ = param(Shape{hidden_channels});
  bf_ = param(Shape{hidden_channels});
  bo_ = param(Shape{hidden_channels});
  bc_ = param(Shape{hidden_channels});
}

void ConvLstmCell::init_params(Rng& rng, double stddev) {
  init_gaussian(named_params(), rng, stddev);
}

ConvLstmState ConvLstmCell::zero_state(int batch, int height, int width) const {
  return {Tensor::zeros(Shape{batch, hidden_channels_, height, width}),
          Tensor::zeros(Shape{batch, hidden_channels_, height, width})};
}

ConvLstmState ConvLstmCell::step(Tape& tape, const Tensor& x,
                                 const ConvLstmState& prev) const {
  if (x.shape().rank() != 4 || x.shape()[1] != in_channels_)
    throw ShapeError("convlstm: input must be [B," +
                     std::to_string(in_channels_) + ",H,W], got " +
                     x.shape().to_string());
  if (!(prev.h.shape() ==
        Shape{x.shape()[0], hidden_channels_, x.shape()[2], x.shape()[3]}))
    throw ShapeError("convlstm: state shape " + prev.h.shape().to_string() +
                     " does not match input " + x.shape().to_string());
  Tensor none;
  auto gate_in = [&](const Tensor& w, const Tensor& u, const Tensor& b) {
    return add(tape, conv2d(tape, x, w, b, 1, pad_),
               conv2d(tape, prev.h, u, none, 1, pad_));
  };
  Tensor i = sigmoid_op(tape, gate_in(wi_, ui_, bi_));
  Tensor f = sigmoid_op(tape, gate_in(wf_, uf_, bf_));
  Tensor o = sigmoid_op(tape, gate_in(wo_, uo_, bo_));
  Tensor g = tanh_op(tape, gate_in(wc_, uc_, bc_));
  Tensor c = add(tape, mul(tape, f, prev.c), mul(tape, i, g));
  Tensor h = mul(tape, o, tanh_op(tape, c));
  return {h, c};
}

std::vector<std::pair<std::string, Tensor>> ConvLstmCell::named_params() const {
  return {{"wi", wi_}, {"wf", wf_}, {"wo", wo_}, {"wc", wc_},
          {"ui", ui_}, {"uf", uf_}, {"uo", uo_}, {"uc", uc_},
          {"bi", bi_}, {"bf", bf_}, {"bo", bo_}, {"bc", bc_}};
}

std::vector<Tensor> ConvLstmCell::params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

// ---- Refiner -------------------------------------------------------------

Refiner::Refiner(RefinerConfig cfg) : cfg_(cfg) {
  if (cfg.depth < 2) throw ConfigError("refiner: depth must be >= 2");
  int n = cfg.depth;
  int bc = cfg.base_channels;
  for (int i = 0; i < n; ++i) {
    int cin = i == 0 ? cfg.channels : bc << (i - 1);
    int cout = bc << i;
    enc_w_.push_back(param(Shape{cout, cin, 4, 4}));
    enc_b_.push_back(param(Shape{cout}));
  }
  cell1_ = ConvLstmCell(bc << (n - 1), cfg.lstm_channels, cfg.lstm_kernel);
  cell2_ = ConvLstmCell(cfg.lstm_channels, cfg.lstm_channels, cfg.lstm_kernel);
  dec_w_.resize(n - 1);
  dec_b_.resize(n - 1);
  for (int level = n - 2; level >= 0; --level) {
    int cin = level == n - 2 ? cfg.lstm_channels : 2 * (bc << (level + 1));
    int cout = bc << level;
    dec_w_[level] = param(Shape{cin, cout, 2, 2});
    dec_b_[level] = param(Shape{cout});
  }
  out_w_ = param(Shape{2 * bc, cfg.channels, 2, 2});
  out_b_ = param(Shape{cfg.channels});
}

void Refiner::init_params(Rng& rng, double stddev) {
  init_gaussian(named_params(), rng, stddev);
}

RefinerState Refiner::zero_state(int batch, int height, int width) const {
  int div = 1 << cfg_.depth;
  if (height % div != 0 || width % div != 0)
    throw ShapeError("refiner: spatial dims must be divisible by 2^depth");
  return {cell1_.zero_state(batch, height / div, width / div),
          cell2_.zero_state(batch, height / div, width / div)};
}

Tensor Refiner::step(Tape& tape, const Tensor& frame,
                     RefinerState& state) const {
  check_unet_input(frame, cfg_.channels, cfg_.depth, "refiner");
  int n = cfg_.depth;
  std::vector<Tensor> skips;
  Tensor h = frame;
  for (int i = 0; i < n; ++i) {
    h = leaky_relu(tape, conv2d(tape, h, enc_w_[i], enc_b_[i], 2, 1), 0.2f);
    skips.push_back(h);
  }
  ConvLstmState s1 = cell1_.step(tape, h, state.l1);
  ConvLstmState s2 = cell2_.step(tape, s1.h, state.l2);
  state.l1 = s1;
  state.l2 = s2;
  Tensor d = s2.h;
  for (int level = n - 2; level >= 0; --level) {
    d = relu(tape, conv_transpose2d(tape, d, dec_w_[level], dec_b_[level], 2));
    d = concat_channels(tape, d, skips[level]);
  }
  Tensor y = conv_transpose2d(tape, d, out_w_, out_b_, 2);
  return to_unit_range(tape, tanh_op(tape, y));
}

std::vector<Tensor> Refiner::forward_sequence(
    Tape& tape, const std::vector<Tensor>& frames) const {
  if (frames.empty()) throw ShapeError("refiner: empty sequence");
  RefinerState state = zero_state(frames[0].shape()[0], frames[0].shape()[2],
                                  frames[0].shape()[3]);
  std::vector<Tensor> out;
  out.reserve(frames.size());
  for (const Tensor& f : frames) out.push_back(step(tape, f, state));
  return out;
}

std::vector<std::pair<std::string, Tensor>> Refiner::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (size_t i = 0; i < enc_w_.size(); ++i) {
    out.emplace_back("enc" + std::to_string(i) + ".w", enc_w_[i]);
    out.emplace_back("enc" + std::to_string(i) + ".b", enc_b_[i]);
  }
  for (auto& [name, t] : cell1_.named_params())
    out.emplace_back("lstm0." + name, t);
  for (auto& [name, t] : cell2_.named_params())
    out.emplace_back("lstm1." + name, t);
  for (size_t i = 0; i < dec_w_.size(); ++i) {
    out.emplace_back("dec" + std::to_string(i) + ".w", dec_w_[i]);
    out.emplace_back("dec" + std::to_string(i) + ".b", dec_b_[i]);
  }
  out.emplace_back("out.w", out_w_);
  out.emplace_back("out.b", out_b_);
  return out;
}

std::vector<Tensor> Refiner::params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params()) out.push_back(t);
  return out;
}

// ---- utilities -----------------------------------------------------------

uint64_t params_fingerprint(const std::vector<Tensor>& params) {
  uint64_t hash = 1469598103934665603ull;
  for (const Tensor& t : params) {
    for (float v : t.data()) {
      uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int s = 0; s < 32; s += 8) {
        hash ^= (bits >> s) & 0xFF;
        hash *= 1099511628211ull;
      }
    }
  }
  return hash;
}

}  // namespace evsynth
