#include "evsynth/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "evsynth/bridge.hpp"
#include "evsynth/error.hpp"
#include "evsynth/fsio.hpp"
#include "evsynth/tensor.hpp"

namespace evsynth {

namespace {

void check_pair(const IntensityFrame& pred, const IntensityFrame& target,
                const char* what) {
  if (pred.channels != target.channels || pred.width != target.width ||
      pred.height != target.height)
    throw ShapeError(std::string(what) + ": mismatched frames " +
                     std::to_string(pred.channels) + "x" +
                     std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " vs " +
                     std::to_string(target.channels) + "x" +
                     std::to_string(target.height) + "x" +
                     std::to_string(target.width));
}

double guard(double v) { return v > kMetricEps ? v : kMetricEps; }

}  // namespace

double metric_l1(const IntensityFrame& pred, const IntensityFrame& target) {
  check_pair(pred, target, "l1");
  double sum = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i)
    sum += std::abs(static_cast<double>(target.values[i]) - pred.values[i]);
  return sum / static_cast<double>(pred.values.size());
}

double metric_l2(const IntensityFrame& pred, const IntensityFrame& target) {
  check_pair(pred, target, "l2");
  double sum = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    double d = static_cast<double>(target.values[i]) - pred.values[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.values.size());
}

double metric_abs_rel(const IntensityFrame& pred, const IntensityFrame& target) {
  check_pair(pred, target, "abs_rel");
  double sum = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    double y = target.values[i];
    sum += std::abs(y - static_cast<double>(pred.values[i])) / guard(y);
  }
  return sum / static_cast<double>(pred.values.size());
}

double metric_sqr_rel(const IntensityFrame& pred, const IntensityFrame& target) {
  check_pair(pred, target, "sqr_rel");
  double sum = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    double y = target.values[i];
    double d = y - static_cast<double>(pred.values[i]);
    sum += d * d / guard(y);
  }
  return sum / static_cast<double>(pred.values.size());
}

double metric_rmse_lin(const IntensityFrame& pred, const IntensityFrame& target) {
  return std::sqrt(metric_l2(pred, target));
}

double metric_rmse_log(const IntensityFrame& pred, const IntensityFrame& target) {
  check_pair(pred, target, "rmse_log");
  double sum = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    double d = std::log(guard(target.values[i])) - std::log(guard(pred.values[i]));
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.values.size()));
}

double metric_rmse_scl(const IntensityFrame& pred, const IntensityFrame& target,
                       bool take_root) {
  check_pair(pred, target, "rmse_scl");
  double sum = 0.0, sum_sq = 0.0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    double d = std::log(guard(target.values[i])) - std::log(guard(pred.values[i]));
    sum += d;
    sum_sq += d * d;
  }
  double n = static_cast<double>(pred.values.size());
  double mean = sum / n;
  double value = sum_sq / n - mean * mean;
  if (value < 0.0) value = 0.0;  // variance; clamp away f64 rounding dips
  return take_root ? std::sqrt(value) : value;
}

DeltaThresholds metric_deltas(const IntensityFrame& pred,
                              const IntensityFrame& target) {
  check_pair(pred, target, "delta_thresholds");
  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  size_t n1 = 0, n2 = 0, n3 = 0;
  for (size_t i = 0; i < pred.values.size(); ++i) {
    double a = guard(target.values[i]);
    double b = guard(pred.values[i]);
    double ratio = a > b ? a / b : b / a;
    if (ratio < t1) ++n1;
    if (ratio < t2) ++n2;
    if (ratio < t3) ++n3;
  }
  double n = static_cast<double>(pred.values.size());
  return DeltaThresholds{n1 / n, n2 / n, n3 / n};
}

double metric_psnr(const IntensityFrame& pred, const IntensityFrame& target,
                   double max_value) {
  if (!(max_value > 0.0)) throw ConfigError("psnr: max_value must be > 0");
  double l2 = metric_l2(pred, target);
  if (l2 == 0.0) return 100.0;
  return 10.0 * std::log10(max_value / l2);
}

double metric_ssim(const IntensityFrame& pred, const IntensityFrame& target) {
  check_pair(pred, target, "ssim");
  Tape off(false);
  Tensor items[2] = {to_tensor(pred), to_tensor(target)};
  Tensor x = stack_batch(std::span<const Tensor>(items, 1));
  Tensor y = stack_batch(std::span<const Tensor>(items + 1, 1));
  return ssim(off, x, y).item();
}

MetricReport evaluate_pair(const IntensityFrame& pred,
                           const IntensityFrame& target) {
  MetricReport r;
  r.l1 = metric_l1(pred, target);
  r.l2 = metric_l2(pred, target);
  r.abs_rel = metric_abs_rel(pred, target);
  r.sqr_rel = metric_sqr_rel(pred, target);
  r.rmse_lin = metric_rmse_lin(pred, target);
  r.rmse_log = metric_rmse_log(pred, target);
  r.rmse_scl = metric_rmse_scl(pred, target);
  DeltaThresholds d = metric_deltas(pred, target);
  r.delta1 = d.delta1;
  r.delta2 = d.delta2;
  r.delta3 = d.delta3;
  r.psnr = metric_psnr(pred, target);
  r.ssim = metric_ssim(pred, target);
  return r;
}

namespace {

// Field names and accessors, in report order; shared by the aggregator and
// both serializers so every output lists metrics identically.
struct MetricField {
  const char* name;
  double MetricReport::*member;
};

constexpr MetricField kFields[] = {
    {"l1", &MetricReport::l1},           {"l2", &MetricReport::l2},
    {"abs_rel", &MetricReport::abs_rel}, {"sqr_rel", &MetricReport::sqr_rel},
    {"rmse_lin", &MetricReport::rmse_lin}, {"rmse_log", &MetricReport::rmse_log},
    {"rmse_scl", &MetricReport::rmse_scl}, {"delta1", &MetricReport::delta1},
    {"delta2", &MetricReport::delta2},   {"delta3", &MetricReport::delta3},
    {"psnr", &MetricReport::psnr},       {"ssim", &MetricReport::ssim},
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SequenceEvaluation evaluate_sequence(std::span<const IntensityFrame> pred,
                                     std::span<const IntensityFrame> gt) {
  if (pred.empty()) throw ConfigError("evaluate_sequence: empty sequence");
  if (pred.size() != gt.size())
    throw ShapeError("evaluate_sequence: " + std::to_string(pred.size()) +
                     " predictions vs " + std::to_string(gt.size()) +
                     " ground-truth frames");

  SequenceEvaluation out;
  for (const MetricField& f : kFields)
    out.curves.push_back(FrameIndexCurve{f.name, {}});

  for (size_t i = 0; i < pred.size(); ++i) {
    MetricReport frame = evaluate_pair(pred[i], gt[i]);
    for (size_t m = 0; m < std::size(kFields); ++m)
      out.curves[m].values.push_back(frame.*(kFields[m].member));
  }
  double n = static_cast<double>(pred.size());
  for (size_t m = 0; m < std::size(kFields); ++m) {
    double sum = 0.0;
    for (double v : out.curves[m].values) sum += v;
    out.report.*(kFields[m].member) = sum / n;
  }
  return out;
}

std::string format_report(const MetricReport& report) {
  std::string text;
  for (const MetricField& f : kFields) {
    text += f.name;
    text += '=';
    text += format_double(report.*(f.member));
    text += '\n';
  }
  return text;
}

std::string format_curves(std::span<const FrameIndexCurve> curves) {
  std::string text = "frame_index,metric,value\n";
  for (const FrameIndexCurve& c : curves) {
    for (size_t i = 0; i < c.values.size(); ++i) {
      text += std::to_string(i + 1);
      text += ',';
      text += c.metric;
      text += ',';
      text += format_double(c.values[i]);
      text += '\n';
    }
  }
  return text;
}

void write_report(const std::filesystem::path& path,
                  const MetricReport& report) {
  std::string text = format_report(report);
  atomic_write(path, [&](std::ostream& os) { os.write(text.data(), text.size()); });
}

void write_curves(const std::filesystem::path& path,
                  std::span<const FrameIndexCurve> curves) {
  std::string text = format_curves(curves);
  atomic_write(path, [&](std::ostream& os) { os.write(text.data(), text.size()); });
}

}  // namespace evsynth
