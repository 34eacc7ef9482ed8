#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evsynth/image.hpp"

namespace evsynth {

// Floor applied to log arguments and ratio operands so black pixels cannot
// produce infinities: every guarded value becomes max(value, kMetricEps).
inline constexpr double kMetricEps = 1e-4;

// All pairwise metrics take (pred, target), compute in double over all
// channels jointly, and expect storage-range [0,1] values. `target` is the
// reference: relative differences divide by it and delta ratios compare
// against it.
double metric_l1(const IntensityFrame& pred, const IntensityFrame& target);
// Mean squared error (the L2 column reports the mean of squared
// differences, not its square root).
double metric_l2(const IntensityFrame& pred, const IntensityFrame& target);
double metric_abs_rel(const IntensityFrame& pred, const IntensityFrame& target);
double metric_sqr_rel(const IntensityFrame& pred, const IntensityFrame& target);
double metric_rmse_lin(const IntensityFrame& pred, const IntensityFrame& target);
double metric_rmse_log(const IntensityFrame& pred, const IntensityFrame& target);
// Scale-invariant log error: mean(d^2) - mean(d)^2 with
// d = ln(max(pred,eps)) - ln(max(target,eps)). Reported without a final
// square root by default; pass take_root=true for the rooted variant.
double metric_rmse_scl(const IntensityFrame& pred, const IntensityFrame& target,
                       bool take_root = false);

struct DeltaThresholds {
  double delta1, delta2, delta3;  // fractions under ratio 1.25^i, i = 1..3
};
DeltaThresholds metric_deltas(const IntensityFrame& pred,
                              const IntensityFrame& target);

// 10*log10(max_value / L2); returns the 100.0 cap when L2 == 0.
double metric_psnr(const IntensityFrame& pred, const IntensityFrame& target,
                   double max_value = 1.0);

// Uniform-window SSIM (window 11, dynamic range 1), averaged over channels.
double metric_ssim(const IntensityFrame& pred, const IntensityFrame& target);

struct MetricReport {
  double l1 = 0, l2 = 0;
  double abs_rel = 0, sqr_rel = 0;
  double rmse_lin = 0, rmse_log = 0, rmse_scl = 0;
  double delta1 = 0, delta2 = 0, delta3 = 0;
  double psnr = 0, ssim = 0;
};

// All twelve metrics for one frame pair.
MetricReport evaluate_pair(const IntensityFrame& pred,
                           const IntensityFrame& target);

struct FrameIndexCurve {
  std::string metric;
  std::vector<double> values;  // index i-1 holds the value at frame index i
};

struct SequenceEvaluation {
  MetricReport report;                  // per-metric mean over all frames
  std::vector<FrameIndexCurve> curves;  // per-metric value at each index
};

// Evaluates aligned prediction/ground-truth sequences. The report averages
// each metric over the frames; the curves keep the per-frame-index values so
// degradation along the sequence stays visible.
SequenceEvaluation evaluate_sequence(std::span<const IntensityFrame> pred,
                                     std::span<const IntensityFrame> gt);

// Flat `name=value` lines, one metric per line, in MetricReport field order.
std::string format_report(const MetricReport& report);
// CSV with header `frame_index,metric,value`; frame indices are 1-based.
std::string format_curves(std::span<const FrameIndexCurve> curves);

void write_report(const std::filesystem::path& path, const MetricReport& report);
void write_curves(const std::filesystem::path& path,
                  std::span<const FrameIndexCurve> curves);

}  // namespace evsynth
