#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evsynth {

inline constexpr double kGradCheckTolerance = 1e-3;
inline constexpr float kGradCheckStep = 1e-3f;

struct GradCheckCase {
  std::string name;  // "<op>/<leaf>", e.g. "conv2d_s2/kernel"
  double max_rel_err = 0.0;
  int64_t elements = 0;
  bool pass = false;
};

struct GradCheckSummary {
  std::vector<GradCheckCase> cases;
  double worst_rel_err = 0.0;
  bool all_pass = false;
};

// Verifies reverse-mode gradients against central finite differences
// (h = 1e-3) for every differentiable operation plus small end-to-end
// networks (generator forward, ConvLSTM step). Error per element is
// |g_auto - g_fd| / max(1e-6, |g_fd|); a case passes when its maximum stays
// below kGradCheckTolerance.
//
// Cases containing relu/leaky_relu draw their inputs (or re-seed their
// networks via the activation watch) so every activation input keeps a
// margin from zero; central differences are only a valid oracle where the
// function is differentiable.
GradCheckSummary run_gradcheck_suite(uint64_t seed = 42);

}  // namespace evsynth
