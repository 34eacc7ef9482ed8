#include "evsynth/train.hpp"

#include <cmath>
#include <cstdio>

#include "evsynth/error.hpp"
#include "evsynth/rng.hpp"

namespace evsynth {

void adam_step(std::span<float> param, std::span<const float> grad,
               std::span<float> m1, std::span<float> m2, int64_t t, double lr,
               double beta1, double beta2, double eps) {
  if (param.size() != grad.size() || param.size() != m1.size() ||
      param.size() != m2.size())
    throw ShapeError("adam_step: mismatched buffer sizes");
  if (t < 1) throw ConfigError("adam_step: step count must be >= 1");
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < param.size(); ++i) {
    double g = grad[i];
    double m = beta1 * static_cast<double>(m1[i]) + (1.0 - beta1) * g;
    double v = beta2 * static_cast<double>(m2[i]) + (1.0 - beta2) * g * g;
    m1[i] = static_cast<float>(m);
    m2[i] = static_cast<float>(v);
    double m_hat = m / bc1;
    double v_hat = v / bc2;
    param[i] = static_cast<float>(static_cast<double>(param[i]) -
                                  lr * m_hat / (std::sqrt(v_hat) + eps));
  }
}

AdamOpt::AdamOpt(std::vector<Tensor> params, double lr, double beta1,
                 double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  if (params_.empty()) throw ConfigError("AdamOpt: empty parameter list");
  m1_.reserve(params_.size());
  m2_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.defined()) throw ConfigError("AdamOpt: undefined parameter");
    m1_.push_back(Tensor::zeros(p.shape()));
    m2_.push_back(Tensor::zeros(p.shape()));
  }
}

void AdamOpt::step() {
  ++step_count_;
  for (size_t i = 0; i < params_.size(); ++i) {
    adam_step(params_[i].data(), params_[i].grad(), m1_[i].data(),
              m2_[i].data(), step_count_, lr_, beta1_, beta2_, eps_);
  }
}

void AdamOpt::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void AdamOpt::set_step_count(int64_t t) {
  if (t < 0) throw ConfigError("AdamOpt: negative step count");
  step_count_ = t;
}

// ---- batching --------------------------------------------------------------

namespace {

void check_finite_loss(double v, const char* phase, int64_t step) {
  if (!std::isfinite(v)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s: non-finite loss at step %lld", phase,
                  static_cast<long long>(step));
    throw NumericError(buf);
  }
}

}  // namespace

std::vector<size_t> batch_indices(uint64_t seed, size_t dataset_size,
                                  int batch_size, int64_t step) {
  if (batch_size < 1) throw ConfigError("batch_indices: batch size must be >= 1");
  if (dataset_size < static_cast<size_t>(batch_size))
    throw ConfigError("batch_indices: dataset smaller than one batch");
  if (step < 0) throw ConfigError("batch_indices: negative step");
  size_t per_epoch = dataset_size / static_cast<size_t>(batch_size);
  uint64_t epoch = static_cast<uint64_t>(step) / per_epoch;
  size_t within = static_cast<size_t>(static_cast<uint64_t>(step) % per_epoch);

  std::vector<size_t> perm(dataset_size);
  for (size_t i = 0; i < dataset_size; ++i) perm[i] = i;
  Rng rng(mix_seed(seed, epoch));
  rng.shuffle(perm.data(), perm.size());

  size_t base = within * static_cast<size_t>(batch_size);
  return std::vector<size_t>(perm.begin() + base,
                             perm.begin() + base + batch_size);
}

// ---- generator phase -------------------------------------------------------

namespace {

// Gathers one conditioning batch: [B, C+1, H, W] of keyframe + event plane,
// plus the [B, C, H, W] target stack.
struct GenBatch {
  Tensor cond;
  Tensor target;
};

GenBatch gather_gen_batch(std::span<const GenSample> data,
                          std::span<const size_t> idx) {
  std::vector<Tensor> keys, planes, targets;
  keys.reserve(idx.size());
  planes.reserve(idx.size());
  targets.reserve(idx.size());
  for (size_t i : idx) {
    keys.push_back(data[i].key);
    planes.push_back(data[i].plane);
    targets.push_back(data[i].target);
  }
  Tape off(false);
  return GenBatch{concat_channels(off, stack_batch(keys), stack_batch(planes)),
                  stack_batch(targets)};
}

}  // namespace

GenTrainResult train_generator_adversarial(std::span<const GenSample> data,
                                           Generator& gen, Discriminator& disc,
                                           AdamOpt& g_opt, AdamOpt& d_opt,
                                           const TrainConfig& cfg,
                                           int64_t start_step) {
  if (data.empty()) throw ConfigError("train_generator_adversarial: no data");
  if (cfg.d_update_period < 1)
    throw ConfigError("train_generator_adversarial: d_update_period must be >= 1");
  if (start_step < 0 || start_step > cfg.steps)
    throw ConfigError("train_generator_adversarial: start_step out of range");

  GenTrainResult result;
  for (int64_t s = start_step; s < cfg.steps; ++s) {
    std::vector<size_t> idx =
        batch_indices(cfg.seed, data.size(), cfg.batch_gen, s);
    GenBatch batch = gather_gen_batch(data, idx);

    // Generator update: fool D and match the target.
    {
      Tape tape(true);
      Tensor fake = gen.forward(tape, batch.cond);
      Tensor d_fake = disc.forward(tape, batch.cond, fake);
      Tensor ones = Tensor::full(d_fake.shape(), 1.0f);
      Tensor l_adv = bce_loss(tape, d_fake, ones);
      Tensor l_mse = mse_loss(tape, fake, batch.target);
      Tensor loss = add(tape, mul_scalar(tape, l_adv, cfg.lambda_adv),
                        mul_scalar(tape, l_mse, cfg.lambda_mse));
      double lv = loss.item();
      check_finite_loss(lv, "generator", s);
      g_opt.zero_grad();
      d_opt.zero_grad();  // grads flow through D here; discard them
      tape.backward(loss);
      g_opt.step();
      result.g_loss.push_back(lv);
    }

    // Periodic discriminator update on real vs detached fake.
    if ((s + 1) % cfg.d_update_period == 0) {
      Tape off(false);
      Tensor fake = gen.forward(off, batch.cond);  // detached from G
      Tape tape(true);
      Tensor d_real = disc.forward(tape, batch.cond, batch.target);
      Tensor d_fake = disc.forward(tape, batch.cond, fake);
      Tensor ones = Tensor::full(d_real.shape(), 1.0f);
      Tensor zeros = Tensor::zeros(d_fake.shape());
      Tensor loss = mul_scalar(
          tape,
          add(tape, bce_loss(tape, d_real, ones), bce_loss(tape, d_fake, zeros)),
          0.5);
      double lv = loss.item();
      check_finite_loss(lv, "discriminator", s);
      d_opt.zero_grad();
      tape.backward(loss);
      d_opt.step();
      result.d_loss.push_back(lv);
    }
  }
  return result;
}

// ---- refiner phase ---------------------------------------------------------

RecTrainResult train_recurrent(std::span<const SeqSample> data, Generator& gen,
                               Refiner& refiner, AdamOpt& r_opt,
                               const TrainConfig& cfg, int64_t start_step) {
  if (data.empty()) throw ConfigError("train_recurrent: no data");
  if (start_step < 0 || start_step > cfg.steps)
    throw ConfigError("train_recurrent: start_step out of range");

  RecTrainResult result;
  for (int64_t s = start_step; s < cfg.steps; ++s) {
    std::vector<size_t> idx =
        batch_indices(cfg.seed, data.size(), cfg.batch_rec, s);

    // Validate uniform sequence length across the batch.
    size_t steps_t = data[idx[0]].planes.size();
    for (size_t i : idx) {
      if (data[i].planes.size() != steps_t ||
          data[i].targets.size() != steps_t)
        throw ShapeError("train_recurrent: ragged sequence batch");
    }
    if (steps_t == 0) throw ConfigError("train_recurrent: empty sequences");

    // Roll the frozen generator chain: each raw frame conditions the next.
    Tape off(false);
    std::vector<Tensor> raw(steps_t);
    std::vector<Tensor> targets(steps_t);
    {
      std::vector<Tensor> keys, tgts;
      keys.reserve(idx.size());
      for (size_t i : idx) keys.push_back(data[i].key);
      Tensor prev = stack_batch(keys);  // [B,C,H,W]
      for (size_t t = 0; t < steps_t; ++t) {
        std::vector<Tensor> planes;
        planes.reserve(idx.size());
        tgts.clear();
        tgts.reserve(idx.size());
        for (size_t i : idx) {
          planes.push_back(data[i].planes[t]);
          tgts.push_back(data[i].targets[t]);
        }
        Tensor cond = concat_channels(off, prev, stack_batch(planes));
        prev = gen.forward(off, cond);
        raw[t] = prev;
        targets[t] = stack_batch(tgts);
      }
    }

    // Refine the whole sequence with state threading, then score it.
    Tape tape(true);
    std::vector<Tensor> refined = refiner.forward_sequence(tape, raw);
    Tensor one = Tensor::scalar(1.0);
    Tensor total;
    for (size_t t = 0; t < steps_t; ++t) {
      Tensor l_mse = mse_loss(tape, refined[t], targets[t]);
      Tensor l_ssim = sub(tape, one, ssim(tape, refined[t], targets[t]));
      Tensor term = add(tape, mul_scalar(tape, l_mse, cfg.w_mse),
                        mul_scalar(tape, l_ssim, cfg.w_ssim));
      total = (t == 0) ? term : add(tape, total, term);
    }
    Tensor loss = mul_scalar(tape, total, 1.0 / static_cast<double>(steps_t));
    double lv = loss.item();
    check_finite_loss(lv, "refiner", s);
    r_opt.zero_grad();
    tape.backward(loss);
    r_opt.step();
    result.r_loss.push_back(lv);
  }
  return result;
}

}  // namespace evsynth
