#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <tuple>
#include <vector>

#include "evsynth/train.hpp"

using namespace evsynth;

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, float lo, float hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (float& v : t.data())
    v = lo + (hi - lo) * static_cast<float>(rng.uniform());
  return t;
}

std::vector<float> snapshot(const std::vector<Tensor>& params) {
  std::vector<float> out;
  for (const Tensor& t : params)
    out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

// Small nets keep each optimizer step around a millisecond.
TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.batch_gen = 2;
  cfg.batch_rec = 1;
  return cfg;
}

UNetConfig tiny_gen_config() {
  UNetConfig g;
  g.depth = 2;
  g.base_channels = 4;
  return g;
}

// The discriminator's three stride-2 stages plus two 4x4 valid-ish stages
// need at least 24 pixels per side.
std::vector<GenSample> tiny_gen_data(Rng& rng, int count, int side = 24) {
  std::vector<GenSample> data(count);
  for (GenSample& s : data) {
    s.key = uniform_tensor(Shape{3, side, side}, rng, 0, 1);
    s.plane = uniform_tensor(Shape{1, side, side}, rng, -1, 1);
    s.target = uniform_tensor(Shape{3, side, side}, rng, 0, 1);
  }
  return data;
}

// Refiner training scores frames with SSIM (window 11), so sequence frames
// must be at least 11 pixels on a side; 12 also divides by 2^depth for
// depth 2.
std::vector<SeqSample> tiny_seq_data(Rng& rng, int count, int len,
                                     int side = 12) {
  std::vector<SeqSample> data(count);
  for (SeqSample& s : data) {
    s.key = uniform_tensor(Shape{3, side, side}, rng, 0, 1);
    for (int i = 0; i < len; ++i) {
      s.planes.push_back(uniform_tensor(Shape{1, side, side}, rng, -1, 1));
      s.targets.push_back(uniform_tensor(Shape{3, side, side}, rng, 0, 1));
    }
  }
  return data;
}

RefinerConfig tiny_ref_config() { return RefinerConfig{3, 2, 4, 8, 3}; }

}  // namespace

TEST_SUITE("training") {

TEST_CASE("adam: first step moves parameters by about lr * sign(grad)") {
  Tensor p = Tensor::from_data(Shape{4}, {1.0f, -2.0f, 0.5f, 3.0f}, true);
  std::vector<float> before(p.data().begin(), p.data().end());
  std::span<float> g = p.grad();
  g[0] = 0.3f;
  g[1] = -0.02f;
  g[2] = 5.0f;
  g[3] = -1e-3f;

  AdamOpt opt({p}, /*lr=*/0.01, 0.9, 0.999, 1e-8);
  opt.step();
  // Bias-corrected first step: m_hat = g, v_hat = g^2, so the update is
  // lr * g / (|g| + eps) = lr * sign(g) up to eps.
  for (int i = 0; i < 4; ++i) {
    float sign = p.grad()[i] > 0 ? 1.0f : -1.0f;
    CHECK(p.data()[i] ==
          doctest::Approx(before[i] - 0.01 * sign).epsilon(1e-4));
  }
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam: zero gradient leaves parameters untouched, moments decay") {
  // Fresh optimizer, zero gradient: the update is exactly zero.
  Tensor q = Tensor::from_data(Shape{2}, {1.0f, -1.0f}, true);
  AdamOpt opt2({q}, 0.01);
  q.grad();  // allocate zeros
  opt2.step();
  CHECK(q.data()[0] == 1.0f);
  CHECK(q.data()[1] == -1.0f);

  // After a real step, a zero-gradient step decays the first moment by
  // beta1 while the moments keep nudging the parameters.
  Tensor p = Tensor::from_data(Shape{2}, {1.0f, -1.0f}, true);
  AdamOpt opt({p}, 0.01);  // beta1 = 0.5
  p.grad()[0] = 1.0f;
  p.grad()[1] = -2.0f;
  opt.step();
  std::vector<float> after_first(p.data().begin(), p.data().end());
  std::vector<float> m_first(opt.moment1(0).data().begin(),
                             opt.moment1(0).data().end());

  p.zero_grad();
  opt.step();
  CHECK(p.data()[0] != after_first[0]);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(opt.moment1(0).data()[i] ==
          doctest::Approx(0.5 * m_first[i]).epsilon(1e-6));
  }
}

TEST_CASE("adam: identical runs stay bit-identical over 100 steps") {
  Rng rng(501);
  Tensor init = uniform_tensor(Shape{6}, rng, -1, 1);
  auto run = [&]() {
    Tensor p = init.clone();
    p.set_requires_grad(true);
    AdamOpt opt({p}, 1e-3);
    Rng grads(77);
    for (int i = 0; i < 100; ++i) {
      p.zero_grad();
      for (float& g : p.grad()) g = static_cast<float>(grads.normal());
      opt.step();
    }
    return std::vector<float>(p.data().begin(), p.data().end());
  };
  auto a = run(), b = run();
  REQUIRE(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("batching: epochs partition the dataset, pure in (seed, step)") {
  // Dividing case: every epoch serves each example exactly once.
  const size_t n = 9;
  const int batch = 3;
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<int> seen(n, 0);
    for (int within = 0; within < 3; ++within) {
      int64_t step = epoch * 3 + within;
      auto idx = batch_indices(42, n, batch, step);
      REQUIRE(idx.size() == static_cast<size_t>(batch));
      for (size_t i : idx) {
        REQUIRE(i < n);
        ++seen[i];
      }
      // Pure function of its arguments: a repeat call gives the same batch.
      CHECK(batch_indices(42, n, batch, step) == idx);
    }
    for (int c : seen) CHECK(c == 1);
  }

  // Non-dividing case: within one epoch no example repeats (the remainder
  // is dropped, not recycled).
  std::vector<int> seen10(10, 0);
  for (int64_t step = 0; step < 3; ++step)
    for (size_t i : batch_indices(7, 10, 3, step)) ++seen10[i];
  CHECK(*std::max_element(seen10.begin(), seen10.end()) == 1);

  // Different seeds shuffle differently.
  std::vector<size_t> a, b;
  for (int64_t step = 0; step < 3; ++step) {
    auto ia = batch_indices(42, n, batch, step);
    auto ib = batch_indices(43, n, batch, step);
    a.insert(a.end(), ia.begin(), ia.end());
    b.insert(b.end(), ib.begin(), ib.end());
  }
  CHECK(a != b);

  CHECK_THROWS_AS(batch_indices(42, 2, 3, 0), ConfigError);
  CHECK_THROWS_AS(batch_indices(42, 4, 0, 0), ConfigError);
}

TEST_CASE("gen training: discriminator steps once per 8 generator steps") {
  Rng rng(502);
  auto data = tiny_gen_data(rng, 4);
  Generator gen{tiny_gen_config()};
  Discriminator disc{DiscConfig{7, 4}};
  Rng init(7);
  gen.init_params(init);
  disc.init_params(init);
  AdamOpt g_opt(gen.params(), 2e-4);
  AdamOpt d_opt(disc.params(), 2e-4);
  TrainConfig cfg = tiny_config();
  cfg.steps = 16;
  GenTrainResult r =
      train_generator_adversarial(data, gen, disc, g_opt, d_opt, cfg);
  CHECK(r.g_loss.size() == 16);
  CHECK(r.d_loss.size() == 2);  // floor(16 / 8)
  CHECK(g_opt.step_count() == 16);
  CHECK(d_opt.step_count() == 2);
  for (double v : r.g_loss) CHECK(std::isfinite(v));
  for (double v : r.d_loss) CHECK(std::isfinite(v));
}

TEST_CASE("gen training: pure regression descends on a repeated batch") {
  // With lambda_adv = 0 the adversarial term drops out; on a single repeated
  // batch the loss should fall over a short run for nearly every init.
  int descended = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(600 + seed);
    auto data = tiny_gen_data(rng, 2);
    Generator gen{tiny_gen_config()};
    Discriminator disc{DiscConfig{7, 4}};
    Rng init(seed);
    gen.init_params(init);
    disc.init_params(init);
    AdamOpt g_opt(gen.params(), 2e-3);
    AdamOpt d_opt(disc.params(), 2e-4);
    TrainConfig cfg = tiny_config();
    cfg.steps = 10;
    cfg.lambda_adv = 0.0;
    cfg.lambda_mse = 1.0;
    GenTrainResult r =
        train_generator_adversarial(data, gen, disc, g_opt, d_opt, cfg);
    if (r.g_loss.back() < r.g_loss.front()) ++descended;
  }
  CHECK(descended >= 9);
}

TEST_CASE("gen training: resuming from a step boundary replays one run") {
  Rng rng(503);
  auto data = tiny_gen_data(rng, 6);
  auto make = [&](int steps) {
    Generator gen{tiny_gen_config()};
    Discriminator disc{DiscConfig{7, 4}};
    Rng init(11);
    gen.init_params(init);
    disc.init_params(init);
    AdamOpt g_opt(gen.params(), 2e-4);
    AdamOpt d_opt(disc.params(), 2e-4);
    TrainConfig cfg = tiny_config();
    cfg.steps = steps;
    return std::tuple{std::move(gen), std::move(disc), std::move(g_opt),
                      std::move(d_opt), cfg};
  };

  // Uninterrupted run to 9 steps.
  auto [gen_a, disc_a, gopt_a, dopt_a, cfg_a] = make(9);
  train_generator_adversarial(data, gen_a, disc_a, gopt_a, dopt_a, cfg_a);

  // Same run split 4 + 5; the split lands mid-epoch on purpose.
  auto [gen_b, disc_b, gopt_b, dopt_b, cfg_b] = make(4);
  train_generator_adversarial(data, gen_b, disc_b, gopt_b, dopt_b, cfg_b);
  cfg_b.steps = 9;
  train_generator_adversarial(data, gen_b, disc_b, gopt_b, dopt_b, cfg_b,
                              /*start_step=*/4);

  CHECK(snapshot(gen_a.params()) == snapshot(gen_b.params()));
  CHECK(snapshot(disc_a.params()) == snapshot(disc_b.params()));
}

TEST_CASE("gen training: non-finite loss raises NumericError") {
  Rng rng(504);
  auto data = tiny_gen_data(rng, 2);
  data[0].target.data()[0] = std::numeric_limits<float>::quiet_NaN();
  Generator gen{tiny_gen_config()};
  Discriminator disc{DiscConfig{7, 4}};
  Rng init(7);
  gen.init_params(init);
  disc.init_params(init);
  AdamOpt g_opt(gen.params(), 2e-4);
  AdamOpt d_opt(disc.params(), 2e-4);
  TrainConfig cfg = tiny_config();
  cfg.steps = 3;
  CHECK_THROWS_AS(
      train_generator_adversarial(data, gen, disc, g_opt, d_opt, cfg),
      NumericError);
}

TEST_CASE("gen training: empty dataset is rejected") {
  Generator gen{tiny_gen_config()};
  Discriminator disc{DiscConfig{7, 4}};
  Rng init(7);
  gen.init_params(init);
  disc.init_params(init);
  AdamOpt g_opt(gen.params(), 2e-4);
  AdamOpt d_opt(disc.params(), 2e-4);
  TrainConfig cfg = tiny_config();
  CHECK_THROWS_AS(
      train_generator_adversarial({}, gen, disc, g_opt, d_opt, cfg),
      ConfigError);
}

TEST_CASE("rec training: generator parameters are bit-identical after") {
  Rng rng(505);
  auto data = tiny_seq_data(rng, 2, 2);
  Generator gen{tiny_gen_config()};
  Refiner ref{tiny_ref_config()};
  Rng init(13);
  gen.init_params(init);
  ref.init_params(init);
  AdamOpt r_opt(ref.params(), 2e-4);
  TrainConfig cfg = tiny_config();
  cfg.steps = 5;

  uint64_t g_before = params_fingerprint(gen.params());
  uint64_t r_before = params_fingerprint(ref.params());
  RecTrainResult res = train_recurrent(data, gen, ref, r_opt, cfg);

  CHECK(params_fingerprint(gen.params()) == g_before);  // frozen
  CHECK(params_fingerprint(ref.params()) != r_before);  // actually trained
  CHECK(res.r_loss.size() == 5);
  for (double v : res.r_loss) CHECK(std::isfinite(v));
  CHECK(r_opt.step_count() == 5);
}

TEST_CASE("rec training: loss falls on a single repeated sequence") {
  int descended = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(700 + seed);
    auto data = tiny_seq_data(rng, 1, 2);
    Generator gen{tiny_gen_config()};
    Refiner ref{tiny_ref_config()};
    Rng init(seed * 3 + 1);
    gen.init_params(init);
    ref.init_params(init);
    AdamOpt r_opt(ref.params(), 1e-3);
    TrainConfig cfg = tiny_config();
    cfg.steps = 20;
    RecTrainResult res = train_recurrent(data, gen, ref, r_opt, cfg);
    if (res.r_loss.back() < res.r_loss.front()) ++descended;
  }
  CHECK(descended >= 4);
}

TEST_CASE("rec training: resuming from a step boundary replays one run") {
  Rng rng(507);
  auto data = tiny_seq_data(rng, 2, 2);
  auto make = [&](int steps) {
    Generator gen{tiny_gen_config()};
    Refiner ref{tiny_ref_config()};
    Rng init(15);
    gen.init_params(init);
    ref.init_params(init);
    AdamOpt r_opt(ref.params(), 2e-4);
    TrainConfig cfg = tiny_config();
    cfg.steps = steps;
    return std::tuple{std::move(gen), std::move(ref), std::move(r_opt), cfg};
  };

  auto [gen_a, ref_a, ropt_a, cfg_a] = make(4);
  train_recurrent(data, gen_a, ref_a, ropt_a, cfg_a);

  auto [gen_b, ref_b, ropt_b, cfg_b] = make(2);
  train_recurrent(data, gen_b, ref_b, ropt_b, cfg_b);
  cfg_b.steps = 4;
  train_recurrent(data, gen_b, ref_b, ropt_b, cfg_b, /*start_step=*/2);

  CHECK(snapshot(ref_a.params()) == snapshot(ref_b.params()));
}

TEST_CASE("rec training: ragged sequence batches are rejected") {
  Rng rng(506);
  std::vector<SeqSample> data;
  {
    auto two = tiny_seq_data(rng, 1, 2);
    auto three = tiny_seq_data(rng, 1, 3);
    data.push_back(std::move(two[0]));
    data.push_back(std::move(three[0]));
  }
  Generator gen{tiny_gen_config()};
  Refiner ref{tiny_ref_config()};
  Rng init(9);
  gen.init_params(init);
  ref.init_params(init);
  AdamOpt r_opt(ref.params(), 2e-4);
  TrainConfig cfg = tiny_config();
  cfg.batch_rec = 2;  // both sequences land in the same batch
  cfg.steps = 1;
  CHECK_THROWS_AS(train_recurrent(data, gen, ref, r_opt, cfg), ShapeError);
}

}  // TEST_SUITE
