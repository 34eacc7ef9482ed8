#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evsynth/models.hpp"
#include "evsynth/tensor.hpp"

namespace evsynth {

// In-place Adam update for one parameter array. `t` is the 1-based step
// count used for bias correction. All arithmetic runs in double; the
// parameter and moment arrays stay float.
void adam_step(std::span<float> param, std::span<const float> grad,
               std::span<float> m1, std::span<float> m2, int64_t t, double lr,
               double beta1, double beta2, double eps);

// Adam optimizer over a fixed parameter list. Moment buffers are tensors so
// they can be checkpointed alongside the parameters they belong to.
class AdamOpt {
 public:
  AdamOpt(std::vector<Tensor> params, double lr, double beta1 = 0.5,
          double beta2 = 0.999, double eps = 1e-8);

  // Applies one update from the parameters' current gradients and advances
  // the step counter.
  void step();
  // Clears the gradients of every managed parameter.
  void zero_grad();

  int64_t step_count() const { return step_count_; }
  void set_step_count(int64_t t);

  size_t size() const { return params_.size(); }
  Tensor moment1(size_t i) const { return m1_.at(i); }
  Tensor moment2(size_t i) const { return m2_.at(i); }

 private:
  std::vector<Tensor> params_;
  std::vector<Tensor> m1_;
  std::vector<Tensor> m2_;
  double lr_, beta1_, beta2_, eps_;
  int64_t step_count_ = 0;
};

struct TrainConfig {
  int steps = 200;
  uint64_t seed = 42;

  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // Generator phase.
  int batch_gen = 8;
  int d_update_period = 8;  // discriminator steps once per this many G steps
  double lambda_adv = 1.0;
  double lambda_mse = 100.0;

  // Refiner phase.
  int batch_rec = 4;
  int sequence_length = 6;
  double w_mse = 0.5;
  double w_ssim = 0.5;
};

// One generator training example: a conditioning keyframe, the event plane
// for the step, and the intensity frame the pair should map to. All rank 3.
struct GenSample {
  Tensor key;     // [C,H,W]
  Tensor plane;   // [1,H,W]
  Tensor target;  // [C,H,W]
};

// One refiner training example: a keyframe plus an aligned run of event
// planes and target frames.
struct SeqSample {
  Tensor key;                   // [C,H,W]
  std::vector<Tensor> planes;   // each [1,H,W]
  std::vector<Tensor> targets;  // each [C,H,W]
};

// Deterministic shuffled batching. Examples are permuted once per epoch with
// a permutation derived only from (seed, epoch), so the batch served at any
// global step index is a pure function of its arguments — resuming at step k
// replays exactly the batches a fresh run would see from step k.
std::vector<size_t> batch_indices(uint64_t seed, size_t dataset_size,
                                  int batch_size, int64_t step);

struct GenTrainResult {
  std::vector<double> g_loss;  // one entry per generator step taken
  std::vector<double> d_loss;  // one entry per discriminator step taken
};

// Adversarial generator training. Every step updates G on
// lambda_adv * bce(D(cond, G(cond)), 1) + lambda_mse * mse(G(cond), target);
// every d_update_period-th step additionally updates D on
// 0.5 * [bce(D(cond, target), 1) + bce(D(cond, G(cond) detached), 0)].
// Runs steps [start_step, cfg.steps). Throws NumericError on non-finite loss.
GenTrainResult train_generator_adversarial(std::span<const GenSample> data,
                                           Generator& gen, Discriminator& disc,
                                           AdamOpt& g_opt, AdamOpt& d_opt,
                                           const TrainConfig& cfg,
                                           int64_t start_step = 0);

struct RecTrainResult {
  std::vector<double> r_loss;  // one entry per refiner step taken
};

// Refiner training on top of a frozen generator. Raw frames come from
// chaining G without recording (each step conditions on G's previous raw
// output); the refiner is trained on
// mean_t [ w_mse * mse(refined_t, target_t) + w_ssim * (1 - ssim(...)) ].
// The generator's parameters are never touched.
RecTrainResult train_recurrent(std::span<const SeqSample> data, Generator& gen,
                               Refiner& refiner, AdamOpt& r_opt,
                               const TrainConfig& cfg, int64_t start_step = 0);

}  // namespace evsynth
