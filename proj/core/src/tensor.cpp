#include "evsynth/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace evsynth {

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<detail::TensorNode>();
  node->data.assign(static_cast<size_t>(shape.numel()), 0.0f);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.node_->data.begin(), t.node_->data.end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> values,
                         bool requires_grad) {
  if (static_cast<int64_t>(values.size()) != shape.numel())
    throw ShapeError("tensor: " + std::to_string(values.size()) +
                     " values for shape " + shape.to_string());
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  Tensor t = zeros(Shape{}, requires_grad);
  t.node_->data[0] = value;
  t.set_precise(value);
  return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (float& v : t.node_->data)
    v = static_cast<float>(rng.normal(0.0, stddev));
  return t;
}

std::span<float> Tensor::grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0f);
  return node_->grad;
}

std::span<const float> Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0f);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty())
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item: tensor has " + std::to_string(numel()) +
                     " elements");
  return node_->has_precise ? node_->precise
                            : static_cast<double>(node_->data[0]);
}

Tensor Tensor::clone() const {
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = node_->shape;
  node->data = node_->data;
  node->shadow = node_->shadow;
  node->has_precise = node_->has_precise;
  node->precise = node_->precise;
  return Tensor(std::move(node));
}

// ---- Tape ------------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ShapeError("backward: loss must be scalar, got " +
                     loss.shape().to_string());
  if (!loss.requires_grad())
    throw ConfigError("backward: loss was not recorded on a live tape");
  Tensor seed = loss;
  seed.grad()[0] += 1.0f;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  ops_.clear();
}

// ---- op plumbing -----------------------------------------------------------

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> ins) {
  for (const Tensor* t : ins)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Marks `out` differentiable and pre-allocates its gradient buffer so the
// recorded closure can read it unconditionally.
bool arm(Tape& tape, Tensor& out, std::initializer_list<const Tensor*> ins) {
  if (!tape.recording() || !any_requires_grad(ins)) return false;
  out.set_requires_grad(true);
  (void)out.grad();
  return true;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape()))
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     a.shape().to_string() + " vs " + b.shape().to_string());
}

bool g_precise_forward = false;

// f64 view of a tensor's values: the shadow when its producer stored one,
// else the stored f32 values widened (exact).
struct DView {
  const float* f;
  const double* d;
  double operator[](size_t i) const {
    return d ? d[i] : static_cast<double>(f[i]);
  }
};

DView dview(const Tensor& t) {
  return DView{t.data().data(),
               t.shadow().empty() ? nullptr : t.shadow().data()};
}

// Output shadow buffer, or null when precise mode is off.
double* shadow_out(Tensor& t) {
  return g_precise_forward ? t.alloc_shadow().data() : nullptr;
}

std::vector<double> widened(const Tensor& t) {
  DView v = dview(t);
  std::vector<double> out(t.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = v[i];
  return out;
}

// Inclusive output-column range [lo, hi] such that 0 <= ow*stride + k - pad
// <= limit-1 for all ow in range; hi < lo means empty.
inline void conv_col_range(int k, int pad, int stride, int limit, int out_size,
                           int& lo, int& hi) {
  int off = k - pad;  // iw = ow*stride + off
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  int top = limit - 1 - off;
  hi = top < 0 ? -1 : std::min(out_size - 1, top / stride);
}

// Summed-area table over an h*w plane; sat is (h+1)*(w+1).
template <typename T>
void build_sat(const T* src, int h, int w, double* sat) {
  int w1 = w + 1;
  for (int x = 0; x <= w; ++x) sat[x] = 0.0;
  for (int y = 0; y < h; ++y) {
    sat[(y + 1) * w1] = 0.0;
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += src[y * w + x];
      sat[(y + 1) * w1 + x + 1] = sat[y * w1 + x + 1] + row;
    }
  }
}

void build_sat_product(const float* a, const float* b, int h, int w,
                       double* sat) {
  int w1 = w + 1;
  for (int x = 0; x <= w; ++x) sat[x] = 0.0;
  for (int y = 0; y < h; ++y) {
    sat[(y + 1) * w1] = 0.0;
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += static_cast<double>(a[y * w + x]) * b[y * w + x];
      sat[(y + 1) * w1 + x + 1] = sat[y * w1 + x + 1] + row;
    }
  }
}

// Inclusive box [y0..y1] x [x0..x1].
inline double box_sum(const double* sat, int w1, int y0, int x0, int y1,
                      int x1) {
  return sat[(y1 + 1) * w1 + x1 + 1] - sat[y0 * w1 + x1 + 1] -
         sat[(y1 + 1) * w1 + x0] + sat[y0 * w1 + x0];
}

template <class F, class DF>
Tensor unary_op(Tape& tape, const Tensor& a, F fwd, DF dfdx) {
  Tensor out = Tensor::zeros(a.shape());
  const float* x = a.data().data();
  float* y = out.data().data();
  size_t n = a.data().size();
  if (double* so = shadow_out(out)) {
    DView xv = dview(a);
    for (size_t i = 0; i < n; ++i) {
      double v = fwd(xv[i]);
      so[i] = v;
      y[i] = static_cast<float>(v);
    }
  } else {
    for (size_t i = 0; i < n; ++i)
      y[i] = static_cast<float>(fwd(static_cast<double>(x[i])));
  }
  if (arm(tape, out, {&a})) {
    Tensor in = a;
    tape.record([in, out, dfdx]() mutable {
      if (!in.requires_grad()) return;
      std::span<const float> go = out.grad();
      std::span<const float> x = in.data();
      std::span<const float> y = out.data();
      std::span<float> gi = in.grad();
      for (size_t i = 0; i < gi.size(); ++i)
        gi[i] += go[i] * dfdx(x[i], y[i]);
    });
  }
  return out;
}

}  // namespace

void precise_forward_enable(bool on) { g_precise_forward = on; }

bool precise_forward_enabled() { return g_precise_forward; }

// ---- convolution -----------------------------------------------------------

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel,
              const Tensor& bias, int stride, int padding) {
  if (input.shape().rank() != 4 || kernel.shape().rank() != 4)
    throw ShapeError("conv2d: input and kernel must be rank 4");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
  const int B = input.shape()[0], Cin = input.shape()[1], H = input.shape()[2],
            W = input.shape()[3];
  const int Cout = kernel.shape()[0], kh = kernel.shape()[2],
            kw = kernel.shape()[3];
  if (kernel.shape()[1] != Cin)
    throw ShapeError("conv2d: kernel expects " +
                     std::to_string(kernel.shape()[1]) + " input channels, got " +
                     std::to_string(Cin));
  if (bias.defined() &&
      !(bias.shape().rank() == 1 && bias.shape()[0] == Cout))
    throw ShapeError("conv2d: bias must be [" + std::to_string(Cout) + "]");
  const int OH = (H + 2 * padding - kh) / stride + 1;
  const int OW = (W + 2 * padding - kw) / stride + 1;
  if (H + 2 * padding < kh || W + 2 * padding < kw || OH < 1 || OW < 1)
    throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" +
                     std::to_string(kw) + " too large for " +
                     std::to_string(H) + "x" + std::to_string(W) +
                     " with padding " + std::to_string(padding));

  Tensor out = Tensor::zeros(Shape{B, Cout, OH, OW});
  float* o = out.data().data();
  double* so = shadow_out(out);

  auto run = [&](const auto* in, const auto* k, const auto* bs) {
    std::vector<double> acc(static_cast<size_t>(OH) * OW);
    for (int b = 0; b < B; ++b) {
      for (int co = 0; co < Cout; ++co) {
        std::fill(acc.begin(), acc.end(),
                  bs ? static_cast<double>(bs[co]) : 0.0);
        for (int ci = 0; ci < Cin; ++ci) {
          const auto* plane = in + (static_cast<size_t>(b) * Cin + ci) * H * W;
          const auto* kbase =
              k + ((static_cast<size_t>(co) * Cin + ci) * kh) * kw;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const double kval = kbase[ky * kw + kx];
              int lo, hi;
              conv_col_range(kx, padding, stride, W, OW, lo, hi);
              if (hi < lo) continue;
              const int off = kx - padding;
              for (int oh = 0; oh < OH; ++oh) {
                const int ih = oh * stride - padding + ky;
                if (ih < 0 || ih >= H) continue;
                const auto* row = plane + static_cast<size_t>(ih) * W + off;
                double* arow = acc.data() + static_cast<size_t>(oh) * OW;
                for (int ow = lo; ow <= hi; ++ow)
                  arow[ow] += kval * row[ow * stride];
              }
            }
          }
        }
        size_t base = (static_cast<size_t>(b) * Cout + co) * OH * OW;
        for (size_t i = 0; i < acc.size(); ++i) {
          o[base + i] = static_cast<float>(acc[i]);
          if (so) so[base + i] = acc[i];
        }
      }
    }
  };
  if (!so) {
    run(input.data().data(), kernel.data().data(),
        bias.defined() ? bias.data().data()
                       : static_cast<const float*>(nullptr));
  } else {
    std::vector<double> win = widened(input), wk = widened(kernel);
    std::vector<double> wb =
        bias.defined() ? widened(bias) : std::vector<double>{};
    run(win.data(), wk.data(),
        bias.defined() ? wb.data() : static_cast<const double*>(nullptr));
  }

  if (arm(tape, out, {&input, &kernel, &bias})) {
    Tensor in_t = input, k_t = kernel, b_t = bias;
    tape.record([in_t, k_t, b_t, out, stride, padding]() mutable {
      const int B = in_t.shape()[0], Cin = in_t.shape()[1],
                H = in_t.shape()[2], W = in_t.shape()[3];
      const int Cout = k_t.shape()[0], kh = k_t.shape()[2],
                kw = k_t.shape()[3];
      const int OH = out.shape()[2], OW = out.shape()[3];
      std::span<const float> go = out.grad();
      const float* g = go.data();

      if (b_t.defined() && b_t.requires_grad()) {
        std::span<float> gb = b_t.grad();
        for (int co = 0; co < Cout; ++co) {
          double s = 0.0;
          for (int b = 0; b < B; ++b) {
            const float* gp =
                g + (static_cast<size_t>(b) * Cout + co) * OH * OW;
            for (int i = 0; i < OH * OW; ++i) s += gp[i];
          }
          gb[co] = static_cast<float>(gb[co] + s);
        }
      }

      if (k_t.requires_grad()) {
        std::span<float> gk = k_t.grad();
        const float* in = in_t.data().data();
        for (int co = 0; co < Cout; ++co) {
          for (int ci = 0; ci < Cin; ++ci) {
            for (int ky = 0; ky < kh; ++ky) {
              for (int kx = 0; kx < kw; ++kx) {
                int lo, hi;
                conv_col_range(kx, padding, stride, W, OW, lo, hi);
                double s = 0.0;
                if (hi >= lo) {
                  const int off = kx - padding;
                  for (int b = 0; b < B; ++b) {
                    const float* plane =
                        in + (static_cast<size_t>(b) * Cin + ci) * H * W;
                    const float* gp =
                        g + (static_cast<size_t>(b) * Cout + co) * OH * OW;
                    for (int oh = 0; oh < OH; ++oh) {
                      const int ih = oh * stride - padding + ky;
                      if (ih < 0 || ih >= H) continue;
                      const float* row =
                          plane + static_cast<size_t>(ih) * W + off;
                      const float* grow = gp + static_cast<size_t>(oh) * OW;
                      for (int ow = lo; ow <= hi; ++ow)
                        s += static_cast<double>(grow[ow]) * row[ow * stride];
                    }
                  }
                }
                size_t ki = ((static_cast<size_t>(co) * Cin + ci) * kh + ky) *
                                kw + kx;
                gk[ki] = static_cast<float>(gk[ki] + s);
              }
            }
          }
        }
      }

      if (in_t.requires_grad()) {
        std::span<float> gi = in_t.grad();
        const float* k = k_t.data().data();
        std::vector<double> acc(static_cast<size_t>(H) * W);
        for (int b = 0; b < B; ++b) {
          for (int ci = 0; ci < Cin; ++ci) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int co = 0; co < Cout; ++co) {
              const float* gp =
                  g + (static_cast<size_t>(b) * Cout + co) * OH * OW;
              const float* kbase =
                  k + ((static_cast<size_t>(co) * Cin + ci) * kh) * kw;
              for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                  const double kval = kbase[ky * kw + kx];
                  int lo, hi;
                  conv_col_range(kx, padding, stride, W, OW, lo, hi);
                  if (hi < lo) continue;
                  const int off = kx - padding;
                  for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - padding + ky;
                    if (ih < 0 || ih >= H) continue;
                    double* arow = acc.data() + static_cast<size_t>(ih) * W + off;
                    const float* grow = gp + static_cast<size_t>(oh) * OW;
                    for (int ow = lo; ow <= hi; ++ow)
                      arow[ow * stride] += kval * grow[ow];
                  }
                }
              }
            }
            float* gplane =
                gi.data() + (static_cast<size_t>(b) * Cin + ci) * H * W;
            for (size_t i = 0; i < acc.size(); ++i)
              gplane[i] = static_cast<float>(gplane[i] + acc[i]);
          }
        }
      }
    });
  }
  return out;
}

Tensor conv_transpose2d(Tape& tape, const Tensor& input, const Tensor& kernel,
                        const Tensor& bias, int stride) {
  if (input.shape().rank() != 4 || kernel.shape().rank() != 4)
    throw ShapeError("conv_transpose2d: input and kernel must be rank 4");
  if (stride < 1) throw ConfigError("conv_transpose2d: stride must be >= 1");
  const int B = input.shape()[0], Ca = input.shape()[1], H = input.shape()[2],
            W = input.shape()[3];
  const int kh = kernel.shape()[2], kw = kernel.shape()[3];
  const int Cb = kernel.shape()[1];
  if (kernel.shape()[0] != Ca)
    throw ShapeError("conv_transpose2d: kernel expects " +
                     std::to_string(kernel.shape()[0]) +
                     " input channels, got " + std::to_string(Ca));
  if (bias.defined() && !(bias.shape().rank() == 1 && bias.shape()[0] == Cb))
    throw ShapeError("conv_transpose2d: bias must be [" + std::to_string(Cb) +
                     "]");
  const int OH = (H - 1) * stride + kh;
  const int OW = (W - 1) * stride + kw;

  Tensor out = Tensor::zeros(Shape{B, Cb, OH, OW});
  float* o = out.data().data();
  double* so = shadow_out(out);

  auto run = [&](const auto* in, const auto* k, const auto* bs) {
    std::vector<double> acc(static_cast<size_t>(OH) * OW);
    for (int b = 0; b < B; ++b) {
      for (int cb = 0; cb < Cb; ++cb) {
        std::fill(acc.begin(), acc.end(),
                  bs ? static_cast<double>(bs[cb]) : 0.0);
        for (int ca = 0; ca < Ca; ++ca) {
          const auto* plane = in + (static_cast<size_t>(b) * Ca + ca) * H * W;
          const auto* kbase =
              k + ((static_cast<size_t>(ca) * Cb + cb) * kh) * kw;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              const double kval = kbase[ky * kw + kx];
              for (int ih = 0; ih < H; ++ih) {
                double* arow = acc.data() +
                               (static_cast<size_t>(ih) * stride + ky) * OW +
                               kx;
                const auto* row = plane + static_cast<size_t>(ih) * W;
                for (int iw = 0; iw < W; ++iw)
                  arow[iw * stride] += kval * row[iw];
              }
            }
          }
        }
        size_t base = (static_cast<size_t>(b) * Cb + cb) * OH * OW;
        for (size_t i = 0; i < acc.size(); ++i) {
          o[base + i] = static_cast<float>(acc[i]);
          if (so) so[base + i] = acc[i];
        }
      }
    }
  };
  if (!so) {
    run(input.data().data(), kernel.data().data(),
        bias.defined() ? bias.data().data()
                       : static_cast<const float*>(nullptr));
  } else {
    std::vector<double> win = widened(input), wk = widened(kernel);
    std::vector<double> wb =
        bias.defined() ? widened(bias) : std::vector<double>{};
    run(win.data(), wk.data(),
        bias.defined() ? wb.data() : static_cast<const double*>(nullptr));
  }

  if (arm(tape, out, {&input, &kernel, &bias})) {
    Tensor in_t = input, k_t = kernel, b_t = bias;
    tape.record([in_t, k_t, b_t, out, stride]() mutable {
      const int B = in_t.shape()[0], Ca = in_t.shape()[1],
                H = in_t.shape()[2], W = in_t.shape()[3];
      const int Cb = k_t.shape()[1], kh = k_t.shape()[2], kw = k_t.shape()[3];
      const int OH = out.shape()[2], OW = out.shape()[3];
      const float* g = out.grad().data();

      if (b_t.defined() && b_t.requires_grad()) {
        std::span<float> gb = b_t.grad();
        for (int cb = 0; cb < Cb; ++cb) {
          double s = 0.0;
          for (int b = 0; b < B; ++b) {
            const float* gp = g + (static_cast<size_t>(b) * Cb + cb) * OH * OW;
            for (int i = 0; i < OH * OW; ++i) s += gp[i];
          }
          gb[cb] = static_cast<float>(gb[cb] + s);
        }
      }

      if (k_t.requires_grad()) {
        std::span<float> gk = k_t.grad();
        const float* in = in_t.data().data();
        for (int ca = 0; ca < Ca; ++ca) {
          for (int cb = 0; cb < Cb; ++cb) {
            for (int ky = 0; ky < kh; ++ky) {
              for (int kx = 0; kx < kw; ++kx) {
                double s = 0.0;
                for (int b = 0; b < B; ++b) {
                  const float* plane =
                      in + (static_cast<size_t>(b) * Ca + ca) * H * W;
                  const float* gp =
                      g + (static_cast<size_t>(b) * Cb + cb) * OH * OW;
                  for (int ih = 0; ih < H; ++ih) {
                    const float* row = plane + static_cast<size_t>(ih) * W;
                    const float* grow =
                        gp + (static_cast<size_t>(ih) * stride + ky) * OW + kx;
                    for (int iw = 0; iw < W; ++iw)
                      s += static_cast<double>(row[iw]) * grow[iw * stride];
                  }
                }
                size_t ki =
                    ((static_cast<size_t>(ca) * Cb + cb) * kh + ky) * kw + kx;
                gk[ki] = static_cast<float>(gk[ki] + s);
              }
            }
          }
        }
      }

      if (in_t.requires_grad()) {
        std::span<float> gi = in_t.grad();
        const float* k = k_t.data().data();
        for (int b = 0; b < B; ++b) {
          for (int ca = 0; ca < Ca; ++ca) {
            float* gplane =
                gi.data() + (static_cast<size_t>(b) * Ca + ca) * H * W;
            for (int ih = 0; ih < H; ++ih) {
              for (int iw = 0; iw < W; ++iw) {
                double s = 0.0;
                for (int cb = 0; cb < Cb; ++cb) {
                  const float* gp =
                      g + (static_cast<size_t>(b) * Cb + cb) * OH * OW;
                  const float* kbase =
                      k + ((static_cast<size_t>(ca) * Cb + cb) * kh) * kw;
                  for (int ky = 0; ky < kh; ++ky) {
                    const float* grow =
                        gp + (static_cast<size_t>(ih) * stride + ky) * OW +
                        iw * stride;
                    for (int kx = 0; kx < kw; ++kx)
                      s += static_cast<double>(kbase[ky * kw + kx]) * grow[kx];
                  }
                }
                size_t ii = static_cast<size_t>(ih) * W + iw;
                gplane[ii] = static_cast<float>(gplane[ii] + s);
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// ---- elementwise -----------------------------------------------------------

namespace {

// Propagate the f64 scalar through arithmetic on rank-0/1-element tensors so
// chained loss terms keep full precision for finite-difference comparisons.
void fold_precise(Tensor& out, double value) {
  if (out.numel() == 1) out.set_precise(value);
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const float* x = a.data().data();
  const float* y = b.data().data();
  float* z = out.data().data();
  if (double* so = shadow_out(out)) {
    DView xa = dview(a), xb = dview(b);
    for (size_t i = 0; i < out.data().size(); ++i) {
      so[i] = xa[i] + xb[i];
      z[i] = static_cast<float>(so[i]);
    }
  } else {
    for (size_t i = 0; i < out.data().size(); ++i) z[i] = x[i] + y[i];
  }
  if (a.numel() == 1 && a.has_precise() && b.has_precise())
    fold_precise(out, a.item() + b.item());
  if (arm(tape, out, {&a, &b})) {
    Tensor at = a, bt = b;
    tape.record([at, bt, out]() mutable {
      std::span<const float> go = out.grad();
      if (at.requires_grad()) {
        std::span<float> g = at.grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
      if (bt.requires_grad()) {
        std::span<float> g = bt.grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const float* x = a.data().data();
  const float* y = b.data().data();
  float* z = out.data().data();
  if (double* so = shadow_out(out)) {
    DView xa = dview(a), xb = dview(b);
    for (size_t i = 0; i < out.data().size(); ++i) {
      so[i] = xa[i] - xb[i];
      z[i] = static_cast<float>(so[i]);
    }
  } else {
    for (size_t i = 0; i < out.data().size(); ++i) z[i] = x[i] - y[i];
  }
  if (a.numel() == 1 && a.has_precise() && b.has_precise())
    fold_precise(out, a.item() - b.item());
  if (arm(tape, out, {&a, &b})) {
    Tensor at = a, bt = b;
    tape.record([at, bt, out]() mutable {
      std::span<const float> go = out.grad();
      if (at.requires_grad()) {
        std::span<float> g = at.grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += go[i];
      }
      if (bt.requires_grad()) {
        std::span<float> g = bt.grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] -= go[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const float* x = a.data().data();
  const float* y = b.data().data();
  float* z = out.data().data();
  if (double* so = shadow_out(out)) {
    DView xa = dview(a), xb = dview(b);
    for (size_t i = 0; i < out.data().size(); ++i) {
      so[i] = xa[i] * xb[i];
      z[i] = static_cast<float>(so[i]);
    }
  } else {
    for (size_t i = 0; i < out.data().size(); ++i) z[i] = x[i] * y[i];
  }
  if (a.numel() == 1 && a.has_precise() && b.has_precise())
    fold_precise(out, a.item() * b.item());
  if (arm(tape, out, {&a, &b})) {
    Tensor at = a, bt = b;
    tape.record([at, bt, out]() mutable {
      std::span<const float> go = out.grad();
      std::span<const float> x = at.data();
      std::span<const float> y = bt.data();
      if (at.requires_grad()) {
        std::span<float> g = at.grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += go[i] * y[i];
      }
      if (bt.requires_grad()) {
        std::span<float> g = bt.grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += go[i] * x[i];
      }
    });
  }
  return out;
}

Tensor div(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  Tensor out = Tensor::zeros(a.shape());
  const float* x = a.data().data();
  const float* y = b.data().data();
  float* z = out.data().data();
  if (double* so = shadow_out(out)) {
    DView xa = dview(a), xb = dview(b);
    for (size_t i = 0; i < out.data().size(); ++i) {
      so[i] = xa[i] / xb[i];
      z[i] = static_cast<float>(so[i]);
    }
  } else {
    for (size_t i = 0; i < out.data().size(); ++i) z[i] = x[i] / y[i];
  }
  if (arm(tape, out, {&a, &b})) {
    Tensor at = a, bt = b;
    tape.record([at, bt, out]() mutable {
      std::span<const float> go = out.grad();
      std::span<const float> x = at.data();
      std::span<const float> y = bt.data();
      if (at.requires_grad()) {
        std::span<float> g = at.grad();
        for (size_t i = 0; i < g.size(); ++i) g[i] += go[i] / y[i];
      }
      if (bt.requires_grad()) {
        std::span<float> g = bt.grad();
        for (size_t i = 0; i < g.size(); ++i)
          g[i] -= go[i] * x[i] / (y[i] * y[i]);
      }
    });
  }
  return out;
}

Tensor add_scalar(Tape& tape, const Tensor& a, float s) {
  Tensor out = unary_op(
      tape, a, [s](double x) { return x + s; },
      [](float, float) { return 1.0f; });
  if (a.numel() == 1 && a.has_precise())
    fold_precise(out, a.item() + static_cast<double>(s));
  return out;
}

Tensor mul_scalar(Tape& tape, const Tensor& a, float s) {
  Tensor out = unary_op(
      tape, a, [s](double x) { return x * s; },
      [s](float, float) { return s; });
  if (a.numel() == 1 && a.has_precise())
    fold_precise(out, a.item() * static_cast<double>(s));
  return out;
}

namespace {

bool g_act_watch_on = false;
double g_act_watch_min = std::numeric_limits<double>::infinity();

void observe_activation_inputs(const Tensor& a) {
  if (!g_act_watch_on) return;
  for (float x : a.data()) {
    double m = std::abs(static_cast<double>(x));
    if (m < g_act_watch_min) g_act_watch_min = m;
  }
}

}  // namespace

void activation_watch_enable(bool on) { g_act_watch_on = on; }

void activation_watch_reset() {
  g_act_watch_min = std::numeric_limits<double>::infinity();
}

double activation_watch_min() { return g_act_watch_min; }

Tensor relu(Tape& tape, const Tensor& a) {
  observe_activation_inputs(a);
  return unary_op(
      tape, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Tensor leaky_relu(Tape& tape, const Tensor& a, float negative_slope) {
  observe_activation_inputs(a);
  float ns = negative_slope;
  return unary_op(
      tape, a, [ns](double x) { return x > 0.0 ? x : ns * x; },
      [ns](float x, float) { return x > 0.0f ? 1.0f : ns; });
}

Tensor tanh_op(Tape& tape, const Tensor& a) {
  return unary_op(
      tape, a, [](double x) { return std::tanh(x); },
      [](float, float y) { return 1.0f - y * y; });
}

Tensor sigmoid_op(Tape& tape, const Tensor& a) {
  return unary_op(
      tape, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape().rank() != 4 || b.shape().rank() != 4)
    throw ShapeError("concat_channels: inputs must be rank 4");
  if (a.shape()[0] != b.shape()[0] || a.shape()[2] != b.shape()[2] ||
      a.shape()[3] != b.shape()[3])
    throw ShapeError("concat_channels: incompatible shapes " +
                     a.shape().to_string() + " vs " + b.shape().to_string());
  const int B = a.shape()[0], Ca = a.shape()[1], Cb = b.shape()[1],
            H = a.shape()[2], W = a.shape()[3];
  const size_t plane = static_cast<size_t>(H) * W;
  Tensor out = Tensor::zeros(Shape{B, Ca + Cb, H, W});
  float* o = out.data().data();
  const float* x = a.data().data();
  const float* y = b.data().data();
  for (int bi = 0; bi < B; ++bi) {
    std::memcpy(o + static_cast<size_t>(bi) * (Ca + Cb) * plane,
                x + static_cast<size_t>(bi) * Ca * plane,
                Ca * plane * sizeof(float));
    std::memcpy(o + (static_cast<size_t>(bi) * (Ca + Cb) + Ca) * plane,
                y + static_cast<size_t>(bi) * Cb * plane,
                Cb * plane * sizeof(float));
  }
  if (double* so = shadow_out(out)) {
    DView xa = dview(a), xb = dview(b);
    for (int bi = 0; bi < B; ++bi) {
      size_t obase = static_cast<size_t>(bi) * (Ca + Cb) * plane;
      for (size_t i = 0; i < Ca * plane; ++i)
        so[obase + i] = xa[static_cast<size_t>(bi) * Ca * plane + i];
      for (size_t i = 0; i < Cb * plane; ++i)
        so[obase + Ca * plane + i] = xb[static_cast<size_t>(bi) * Cb * plane + i];
    }
  }
  if (arm(tape, out, {&a, &b})) {
    Tensor at = a, bt = b;
    tape.record([at, bt, out, Ca, Cb, plane]() mutable {
      const int B = out.shape()[0];
      std::span<const float> go = out.grad();
      if (at.requires_grad()) {
        std::span<float> g = at.grad();
        for (int bi = 0; bi < B; ++bi) {
          const float* src =
              go.data() + static_cast<size_t>(bi) * (Ca + Cb) * plane;
          float* dst = g.data() + static_cast<size_t>(bi) * Ca * plane;
          for (size_t i = 0; i < Ca * plane; ++i) dst[i] += src[i];
        }
      }
      if (bt.requires_grad()) {
        std::span<float> g = bt.grad();
        for (int bi = 0; bi < B; ++bi) {
          const float* src =
              go.data() + (static_cast<size_t>(bi) * (Ca + Cb) + Ca) * plane;
          float* dst = g.data() + static_cast<size_t>(bi) * Cb * plane;
          for (size_t i = 0; i < Cb * plane; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

// ---- reductions and losses ---------------------------------------------

Tensor mean_all(Tape& tape, const Tensor& a) {
  DView v = dview(a);
  double sum = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) sum += v[i];
  double mean = sum / static_cast<double>(a.numel());
  Tensor out = Tensor::scalar(static_cast<float>(mean));
  out.set_precise(mean);
  if (arm(tape, out, {&a})) {
    Tensor at = a;
    tape.record([at, out]() mutable {
      if (!at.requires_grad()) return;
      float g = out.grad()[0] / static_cast<float>(at.numel());
      std::span<float> gi = at.grad();
      for (size_t i = 0; i < gi.size(); ++i) gi[i] += g;
    });
  }
  return out;
}

Tensor box_mean(Tape& tape, const Tensor& a, int window) {
  if (a.shape().rank() != 4) throw ShapeError("box_mean: input must be rank 4");
  if (window < 1) throw ConfigError("box_mean: window must be >= 1");
  const int B = a.shape()[0], C = a.shape()[1], H = a.shape()[2],
            W = a.shape()[3];
  if (H < window || W < window)
    throw ShapeError("box_mean: window " + std::to_string(window) +
                     " larger than " + std::to_string(H) + "x" +
                     std::to_string(W));
  const int OH = H - window + 1, OW = W - window + 1;
  const double inv = 1.0 / (static_cast<double>(window) * window);

  Tensor out = Tensor::zeros(Shape{B, C, OH, OW});
  float* o = out.data().data();
  double* so = shadow_out(out);

  auto run = [&](const auto* x) {
    std::vector<double> sat(static_cast<size_t>(H + 1) * (W + 1));
    for (int p = 0; p < B * C; ++p) {
      const auto* plane = x + static_cast<size_t>(p) * H * W;
      build_sat(plane, H, W, sat.data());
      float* oplane = o + static_cast<size_t>(p) * OH * OW;
      double* splane = so ? so + static_cast<size_t>(p) * OH * OW : nullptr;
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double v = box_sum(sat.data(), W + 1, oh, ow, oh + window - 1,
                             ow + window - 1) *
                     inv;
          oplane[oh * OW + ow] = static_cast<float>(v);
          if (splane) splane[oh * OW + ow] = v;
        }
    }
  };
  if (!so) {
    run(a.data().data());
  } else {
    std::vector<double> wx = widened(a);
    run(wx.data());
  }

  if (arm(tape, out, {&a})) {
    Tensor at = a;
    tape.record([at, out, window, inv]() mutable {
      if (!at.requires_grad()) return;
      const int B = at.shape()[0], C = at.shape()[1], H = at.shape()[2],
                W = at.shape()[3];
      const int OH = out.shape()[2], OW = out.shape()[3];
      const float* g = out.grad().data();
      std::span<float> gi = at.grad();
      std::vector<double> sat(static_cast<size_t>(OH + 1) * (OW + 1));
      for (int p = 0; p < B * C; ++p) {
        const float* gplane = g + static_cast<size_t>(p) * OH * OW;
        build_sat(gplane, OH, OW, sat.data());
        float* dst = gi.data() + static_cast<size_t>(p) * H * W;
        for (int y = 0; y < H; ++y) {
          int y0 = std::max(0, y - window + 1), y1 = std::min(OH - 1, y);
          for (int x2 = 0; x2 < W; ++x2) {
            int x0 = std::max(0, x2 - window + 1), x1 = std::min(OW - 1, x2);
            double s = box_sum(sat.data(), OW + 1, y0, x0, y1, x1);
            size_t i = static_cast<size_t>(y) * W + x2;
            dst[i] = static_cast<float>(dst[i] + s * inv);
          }
        }
      }
    });
  }
  return out;
}

Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mse_loss");
  DView p = dview(pred), t = dview(target);
  const size_t n = pred.data().size();
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = p[i] - t[i];
    sum += d * d;
  }
  double mean = sum / static_cast<double>(n);
  Tensor out = Tensor::scalar(static_cast<float>(mean));
  out.set_precise(mean);
  if (arm(tape, out, {&pred, &target})) {
    Tensor pt = pred, tt = target;
    tape.record([pt, tt, out]() mutable {
      double g = 2.0 * out.grad()[0] / static_cast<double>(pt.numel());
      std::span<const float> p = pt.data();
      std::span<const float> t = tt.data();
      if (pt.requires_grad()) {
        std::span<float> gp = pt.grad();
        for (size_t i = 0; i < gp.size(); ++i)
          gp[i] = static_cast<float>(
              gp[i] + g * (static_cast<double>(p[i]) - t[i]));
      }
      if (tt.requires_grad()) {
        std::span<float> gt = tt.grad();
        for (size_t i = 0; i < gt.size(); ++i)
          gt[i] = static_cast<float>(
              gt[i] - g * (static_cast<double>(p[i]) - t[i]));
      }
    });
  }
  return out;
}

// Probability clamp for the cross-entropy log; outside it the op is constant
// (zero gradient), which keeps losses finite for saturated discriminators.
constexpr double kBceLo = 1e-7, kBceHi = 1.0 - 1e-7;

Tensor bce_loss(Tape& tape, const Tensor& prob, const Tensor& target) {
  check_same_shape(prob, target, "bce_loss");
  DView p = dview(prob), t = dview(target);
  const size_t n = prob.data().size();
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double pc = std::clamp(p[i], kBceLo, kBceHi);
    sum -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
  }
  double mean = sum / static_cast<double>(n);
  Tensor out = Tensor::scalar(static_cast<float>(mean));
  out.set_precise(mean);
  if (arm(tape, out, {&prob, &target})) {
    Tensor pt = prob, tt = target;
    tape.record([pt, tt, out]() mutable {
      double g = out.grad()[0] / static_cast<double>(pt.numel());
      std::span<const float> p = pt.data();
      std::span<const float> t = tt.data();
      if (pt.requires_grad()) {
        std::span<float> gp = pt.grad();
        for (size_t i = 0; i < gp.size(); ++i) {
          double pv = p[i];
          if (pv <= kBceLo || pv >= kBceHi) continue;  // clamped: no gradient
          gp[i] = static_cast<float>(gp[i] + g * (pv - t[i]) / (pv * (1.0 - pv)));
        }
      }
      if (tt.requires_grad()) {
        std::span<float> gt = tt.grad();
        for (size_t i = 0; i < gt.size(); ++i) {
          double pc = std::clamp(static_cast<double>(p[i]), kBceLo, kBceHi);
          gt[i] = static_cast<float>(gt[i] +
                                     g * std::log((1.0 - pc) / pc));
        }
      }
    });
  }
  return out;
}

// ---- ssim -------------------------------------------------------------

namespace {

struct SsimPlaneStats {
  // Per-window constant maps used by both value and gradient passes.
  std::vector<double> mu_x, mu_y, m1x, m1y, m2, m4;
  double sum = 0.0;
};

// Window statistics for one (batch, channel) plane; fills the constant maps
// needed by the analytic backward pass.
void ssim_plane(const float* x, const float* y, int H, int W, int k, double c1,
                double c2, SsimPlaneStats& st) {
  const int OH = H - k + 1, OW = W - k + 1;
  const int w1 = W + 1;
  const double n = static_cast<double>(k) * k;
  static thread_local std::vector<double> sx, sy, sxx, syy, sxy;
  size_t sat_sz = static_cast<size_t>(H + 1) * (W + 1);
  sx.resize(sat_sz);
  sy.resize(sat_sz);
  sxx.resize(sat_sz);
  syy.resize(sat_sz);
  sxy.resize(sat_sz);
  build_sat(x, H, W, sx.data());
  build_sat(y, H, W, sy.data());
  build_sat_product(x, x, H, W, sxx.data());
  build_sat_product(y, y, H, W, syy.data());
  build_sat_product(x, y, H, W, sxy.data());

  size_t wn = static_cast<size_t>(OH) * OW;
  st.mu_x.resize(wn);
  st.mu_y.resize(wn);
  st.m1x.resize(wn);
  st.m1y.resize(wn);
  st.m2.resize(wn);
  st.m4.resize(wn);
  st.sum = 0.0;

  for (int oh = 0; oh < OH; ++oh) {
    for (int ow = 0; ow < OW; ++ow) {
      int y1 = oh + k - 1, x1 = ow + k - 1;
      double mx = box_sum(sx.data(), w1, oh, ow, y1, x1) / n;
      double my = box_sum(sy.data(), w1, oh, ow, y1, x1) / n;
      double vx = box_sum(sxx.data(), w1, oh, ow, y1, x1) / n - mx * mx;
      double vy = box_sum(syy.data(), w1, oh, ow, y1, x1) / n - my * my;
      double cv = box_sum(sxy.data(), w1, oh, ow, y1, x1) / n - mx * my;
      double a1 = 2.0 * mx * my + c1;
      double a2 = 2.0 * cv + c2;
      double b1 = mx * mx + my * my + c1;
      double b2 = vx + vy + c2;
      double s = (a1 * a2) / (b1 * b2);
      st.sum += s;
      size_t i = static_cast<size_t>(oh) * OW + ow;
      st.mu_x[i] = mx;
      st.mu_y[i] = my;
      st.m1x[i] = 2.0 * (my * a2 - mx * s * b2) / (b1 * b2);
      st.m1y[i] = 2.0 * (mx * a2 - my * s * b2) / (b1 * b2);
      st.m2[i] = -2.0 * s / b2;
      st.m4[i] = 2.0 * a1 / (b1 * b2);
    }
  }
}

}  // namespace

Tensor ssim(Tape& tape, const Tensor& x, const Tensor& y, int window,
            double value_range) {
  check_same_shape(x, y, "ssim");
  if (x.shape().rank() != 4) throw ShapeError("ssim: inputs must be rank 4");
  if (window < 2) throw ConfigError("ssim: window must be >= 2");
  if (!(value_range > 0.0)) throw ConfigError("ssim: value range must be > 0");
  const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2],
            W = x.shape()[3];
  if (H < window || W < window)
    throw ShapeError("ssim: window " + std::to_string(window) +
                     " larger than image " + std::to_string(H) + "x" +
                     std::to_string(W));
  const double c1 = 0.01 * value_range * 0.01 * value_range;
  const double c2 = 0.03 * value_range * 0.03 * value_range;
  const int OH = H - window + 1, OW = W - window + 1;
  const double total_windows = static_cast<double>(B) * C * OH * OW;

  double sum = 0.0;
  {
    SsimPlaneStats st;
    const float* xp = x.data().data();
    const float* yp = y.data().data();
    for (int p = 0; p < B * C; ++p) {
      ssim_plane(xp + static_cast<size_t>(p) * H * W,
                 yp + static_cast<size_t>(p) * H * W, H, W, window, c1, c2, st);
      sum += st.sum;
    }
  }
  double mean = sum / total_windows;
  Tensor out = Tensor::scalar(static_cast<float>(mean));
  out.set_precise(mean);

  if (arm(tape, out, {&x, &y})) {
    Tensor xt = x, yt = y;
    tape.record([xt, yt, out, window, c1, c2, total_windows]() mutable {
      const int B = xt.shape()[0], C = xt.shape()[1], H = xt.shape()[2],
                W = xt.shape()[3];
      const int OH = H - window + 1, OW = W - window + 1;
      const double wgt = 1.0 / (static_cast<double>(window) * window);
      const double gscale = out.grad()[0] / total_windows;
      const float* xp = xt.data().data();
      const float* yp = yt.data().data();
      bool need_x = xt.requires_grad();
      bool need_y = yt.requires_grad();
      if (!need_x && !need_y) return;

      SsimPlaneStats st;
      size_t wsat = static_cast<size_t>(OH + 1) * (OW + 1);
      std::vector<double> prod(static_cast<size_t>(OH) * OW);
      std::vector<double> s_m1x(wsat), s_m1y(wsat), s_m2(wsat), s_m2mx(wsat),
          s_m2my(wsat), s_m4(wsat), s_m4mx(wsat), s_m4my(wsat);

      for (int p = 0; p < B * C; ++p) {
        const float* xplane = xp + static_cast<size_t>(p) * H * W;
        const float* yplane = yp + static_cast<size_t>(p) * H * W;
        ssim_plane(xplane, yplane, H, W, window, c1, c2, st);

        size_t wn = static_cast<size_t>(OH) * OW;
        auto sat_of = [&](const std::vector<double>& m, std::vector<double>& s) {
          build_sat(m.data(), OH, OW, s.data());
        };
        if (need_x) sat_of(st.m1x, s_m1x);
        if (need_y) sat_of(st.m1y, s_m1y);
        sat_of(st.m2, s_m2);
        for (size_t i = 0; i < wn; ++i) prod[i] = st.m2[i] * st.mu_x[i];
        sat_of(prod, s_m2mx);
        for (size_t i = 0; i < wn; ++i) prod[i] = st.m2[i] * st.mu_y[i];
        sat_of(prod, s_m2my);
        sat_of(st.m4, s_m4);
        for (size_t i = 0; i < wn; ++i) prod[i] = st.m4[i] * st.mu_x[i];
        sat_of(prod, s_m4mx);
        for (size_t i = 0; i < wn; ++i) prod[i] = st.m4[i] * st.mu_y[i];
        sat_of(prod, s_m4my);

        float* gx = need_x
                        ? xt.grad().data() + static_cast<size_t>(p) * H * W
                        : nullptr;
        float* gy = need_y
                        ? yt.grad().data() + static_cast<size_t>(p) * H * W
                        : nullptr;
        const int w1 = OW + 1;
        for (int py = 0; py < H; ++py) {
          int y0 = std::max(0, py - window + 1), y1 = std::min(OH - 1, py);
          for (int px = 0; px < W; ++px) {
            int x0 = std::max(0, px - window + 1), x1 = std::min(OW - 1, px);
            size_t i = static_cast<size_t>(py) * W + px;
            double xv = xplane[i], yv = yplane[i];
            if (need_x) {
              double g = box_sum(s_m1x.data(), w1, y0, x0, y1, x1) +
                         xv * box_sum(s_m2.data(), w1, y0, x0, y1, x1) -
                         box_sum(s_m2mx.data(), w1, y0, x0, y1, x1) +
                         yv * box_sum(s_m4.data(), w1, y0, x0, y1, x1) -
                         box_sum(s_m4my.data(), w1, y0, x0, y1, x1);
              gx[i] = static_cast<float>(gx[i] + gscale * wgt * g);
            }
            if (need_y) {
              double g = box_sum(s_m1y.data(), w1, y0, x0, y1, x1) +
                         yv * box_sum(s_m2.data(), w1, y0, x0, y1, x1) -
                         box_sum(s_m2my.data(), w1, y0, x0, y1, x1) +
                         xv * box_sum(s_m4.data(), w1, y0, x0, y1, x1) -
                         box_sum(s_m4mx.data(), w1, y0, x0, y1, x1);
              gy[i] = static_cast<float>(gy[i] + gscale * wgt * g);
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("stack_batch: empty batch");
  const Shape& s = items[0].shape();
  if (s.rank() != 3) throw ShapeError("stack_batch: items must be rank 3");
  Tensor out =
      Tensor::zeros(Shape{static_cast<int>(items.size()), s[0], s[1], s[2]});
  size_t stride = static_cast<size_t>(s.numel());
  double* so = shadow_out(out);
  for (size_t i = 0; i < items.size(); ++i) {
    if (!(items[i].shape() == s))
      throw ShapeError("stack_batch: mixed shapes " + s.to_string() + " vs " +
                       items[i].shape().to_string());
    std::span<const float> src = items[i].data();
    std::copy(src.begin(), src.end(), out.data().begin() + i * stride);
    if (so) {
      DView v = dview(items[i]);
      for (size_t j = 0; j < stride; ++j) so[i * stride + j] = v[j];
    }
  }
  return out;
}

// ---- finite differences ------------------------------------------------

std::vector<double> finite_diff_grad(
    const std::function<double(const Tensor&)>& f, const Tensor& x, float h) {
  std::vector<double> grad(static_cast<size_t>(x.numel()));
  Tensor probe = x.clone();
  std::span<float> d = probe.data();
  std::span<const float> orig = x.data();
  for (size_t i = 0; i < grad.size(); ++i) {
    float hi = orig[i] + h;
    float lo = orig[i] - h;
    d[i] = hi;
    double f_hi = f(probe);
    d[i] = lo;
    double f_lo = f(probe);
    d[i] = orig[i];
    double h_eff = static_cast<double>(hi) - static_cast<double>(lo);
    grad[i] = (f_hi - f_lo) / h_eff;
  }
  return grad;
}

}  // namespace evsynth
