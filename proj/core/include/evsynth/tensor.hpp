#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "evsynth/error.hpp"
#include "evsynth/rng.hpp"

namespace evsynth {

// Dense shape, rank 0..5. Rank-0 is a scalar with one element.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<int> dims) : Shape(std::vector<int>(dims)) {}
  explicit Shape(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() > 5)
      throw ShapeError("shape: rank " + std::to_string(dims_.size()) +
                       " exceeds 5");
    for (int d : dims_)
      if (d <= 0) throw ShapeError("shape: non-positive dim in " + to_string());
  }

  int rank() const { return static_cast<int>(dims_.size()); }
  int operator[](int i) const { return dims_[i]; }
  int64_t numel() const {
    int64_t n = 1;
    for (int d : dims_) n *= d;
    return n;
  }
  bool operator==(const Shape&) const = default;
  std::string to_string() const {
    std::string s = "[";
    for (size_t i = 0; i < dims_.size(); ++i)
      s += (i ? "," : "") + std::to_string(dims_[i]);
    return s + "]";
  }

 private:
  std::vector<int> dims_;
};

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;    // empty until gradients are needed
  std::vector<double> shadow;  // f64 values, filled only in precise mode
  bool requires_grad = false;
  bool has_precise = false;
  double precise = 0.0;  // f64 value for scalar reductions
};
}  // namespace detail

// Contiguous f32 tensor with shared storage. Copies are shallow; gradients
// accumulate additively into the `grad` buffer of tensors that require them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> values,
                          bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);
  // I.i.d. Gaussian entries.
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return node_->shape.numel(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  std::span<float> data() { return node_->data; }
  std::span<const float> data() const { return node_->data; }

  // Gradient buffer; allocates zeros on first use.
  std::span<float> grad();
  std::span<const float> grad() const;
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  void zero_grad();

  // Scalar value. Reductions keep an f64 copy which is returned when present.
  double item() const;
  void set_precise(double v) {
    node_->has_precise = true;
    node_->precise = v;
  }
  bool has_precise() const { return node_->has_precise; }

  // f64 companion values; empty unless an op produced this tensor while
  // precise-forward mode was enabled.
  std::span<const double> shadow() const { return node_->shadow; }
  std::span<double> alloc_shadow() {
    node_->shadow.resize(node_->data.size());
    return node_->shadow;
  }

  // Deep copy of values (gradients are not copied).
  Tensor clone() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
  explicit Tensor(std::shared_ptr<detail::TensorNode> node)
      : node_(std::move(node)) {}
  friend class Tape;
};

// Records the backward pass of each differentiable op. Ops executed while
// `recording()` append a closure; `backward(loss)` seeds d(loss)/d(loss) = 1
// and replays the closures in exact reverse order. Gradients accumulate, so
// two backward calls (on separate tapes) add up in shared parameters.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
  }
  size_t size() const { return ops_.size(); }

  // loss must be a recorded scalar. Clears the tape afterwards.
  void backward(const Tensor& loss);

 private:
  bool recording_;
  std::vector<std::function<void()>> ops_;
};

// ---- differentiable operations ------------------------------------------

// 2-D cross-correlation (kernels are not flipped).
// input [B,Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout] or undefined.
// Output spatial size: (H + 2*padding - kh) / stride + 1 (floor).
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel,
              const Tensor& bias, int stride, int padding);

// Adjoint of zero-padding conv2d. input [B,Ca,H,W], kernel [Ca,Cb,kh,kw],
// bias [Cb] or undefined. Output spatial size: (H-1)*stride + kh.
Tensor conv_transpose2d(Tape& tape, const Tensor& input, const Tensor& kernel,
                        const Tensor& bias, int stride);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor div(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add_scalar(Tape& tape, const Tensor& a, float s);
Tensor mul_scalar(Tape& tape, const Tensor& a, float s);

Tensor relu(Tape& tape, const Tensor& a);
Tensor leaky_relu(Tape& tape, const Tensor& a, float negative_slope);
Tensor tanh_op(Tape& tape, const Tensor& a);
Tensor sigmoid_op(Tape& tape, const Tensor& a);

// Concatenate along the channel axis of [B,C,H,W] tensors.
Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b);

// Mean over all elements -> scalar (f64 accumulation).
Tensor mean_all(Tape& tape, const Tensor& a);

// Per-channel uniform box filter: mean over every window x window patch
// (valid positions only, stride 1). input [B,C,H,W] ->
// [B,C,H-window+1,W-window+1].
Tensor box_mean(Tape& tape, const Tensor& a, int window);

// Mean squared error over all elements -> scalar.
Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target);

// Binary cross-entropy over probabilities. Inputs are clamped to
// [1e-7, 1 - 1e-7] before the logs; gradients vanish outside the clamp.
Tensor bce_loss(Tape& tape, const Tensor& prob, const Tensor& target);

// Mean structural similarity over all valid window positions and channels of
// two [B,C,H,W] tensors in [0,1]. Uniform window, population moments,
// stabilizers c1 = (0.01 L)^2, c2 = (0.03 L)^2 -> scalar.
Tensor ssim(Tape& tape, const Tensor& x, const Tensor& y, int window = 11,
            double value_range = 1.0);

// Stack rank-3 [C,H,W] tensors into one [B,C,H,W] batch (leaf tensor, not
// differentiable).
Tensor stack_batch(std::span<const Tensor> items);

// Optional instrumentation: while enabled, relu and leaky_relu record the
// smallest |input| they see. Gradient verification uses this to discard test
// cases whose piecewise-linear switch points sit close enough to zero that a
// finite-difference probe would straddle them.
void activation_watch_enable(bool on);
void activation_watch_reset();
double activation_watch_min();

// Precise-forward mode: while enabled, ops additionally carry f64 values
// (`shadow`) computed from the f64 values of their inputs, so a scalar loss
// evaluated through `item()` is free of f32 storage rounding. Tensors and
// their stored data stay f32 — this only removes round-off from the
// *measurement* path of finite-difference gradient checks, where storage
// noise would otherwise swamp the h=1e-3 signal of small-gradient elements.
// Never enabled during training.
void precise_forward_enable(bool on);
bool precise_forward_enabled();

// ---- verification --------------------------------------------------------

// Central finite differences of a scalar-valued function at x, one element at
// a time. The effective step is measured after f32 rounding of x +/- h.
std::vector<double> finite_diff_grad(
    const std::function<double(const Tensor&)>& f, const Tensor& x,
    float h = 1e-3f);

}  // namespace evsynth
