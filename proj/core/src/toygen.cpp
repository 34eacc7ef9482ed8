#include "evsynth/toygen.hpp"

#include <cmath>
#include <cstdio>
#include <span>

#include "evsynth/error.hpp"
#include "evsynth/event_ops.hpp"
#include "evsynth/evt1.hpp"
#include "evsynth/manifest.hpp"
#include "evsynth/pnm.hpp"
#include "evsynth/rng.hpp"

namespace evsynth {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_config(const ToySceneConfig& cfg) {
  if (cfg.width < 8 || cfg.height < 8)
    throw ConfigError("toygen: resolution must be at least 8x8");
  if (cfg.width > 65535 || cfg.height > 65535)
    throw ConfigError("toygen: resolution exceeds 16-bit event coordinates");
  if (cfg.frame_count < 2)
    throw ConfigError("toygen: frame count must be >= 2");
  if (cfg.shape_count < 0)
    throw ConfigError("toygen: shape count must be >= 0");
  if (cfg.min_speed < 0.0 || cfg.max_speed < cfg.min_speed)
    throw ConfigError("toygen: speed range must satisfy 0 <= min <= max");
  if (cfg.period_ns == 0) throw ConfigError("toygen: period must be > 0");
  if (cfg.sequence_count < 1)
    throw ConfigError("toygen: sequence count must be >= 1");
}

struct Sinusoid {
  double fx, fy, phase, amplitude;
};

// Smooth low-frequency background, one sinusoid mix per channel.
struct Background {
  Sinusoid waves[3];
  double base[3];

  static Background make(Rng& rng) {
    Background bg;
    for (int c = 0; c < 3; ++c) {
      bg.waves[c].fx = static_cast<double>(1 + rng.uniform_int(3));
      bg.waves[c].fy = static_cast<double>(1 + rng.uniform_int(3));
      bg.waves[c].phase = rng.uniform(0.0, 2.0 * kPi);
      bg.waves[c].amplitude = rng.uniform(0.08, 0.2);
      bg.base[c] = rng.uniform(0.35, 0.65);
    }
    return bg;
  }

  float at(int c, int x, int y, int w, int h) const {
    const Sinusoid& s = waves[c];
    double v = base[c] +
               s.amplitude * std::sin(2.0 * kPi *
                                          (s.fx * x / static_cast<double>(w) +
                                           s.fy * y / static_cast<double>(h)) +
                                      s.phase);
    return static_cast<float>(v);
  }
};

struct MovingShape {
  bool disk;
  double cx, cy;    // center at frame 0
  double vx, vy;    // pixels per frame
  double half_w, half_h;  // rectangle half extents; disk uses half_w as radius
  float color[3];
};

MovingShape make_shape(Rng& rng, const ToySceneConfig& cfg, bool disk) {
  MovingShape s;
  s.disk = disk;
  s.cx = rng.uniform(0.0, cfg.width);
  s.cy = rng.uniform(0.0, cfg.height);
  double speed = rng.uniform(cfg.min_speed, cfg.max_speed);
  double angle = rng.uniform(0.0, 2.0 * kPi);
  s.vx = speed * std::cos(angle);
  s.vy = speed * std::sin(angle);
  double lo = cfg.width / 16.0, hi = cfg.width / 6.0;
  s.half_w = rng.uniform(lo, hi);
  s.half_h = s.disk ? s.half_w : rng.uniform(lo, hi);
  for (float& c : s.color) c = static_cast<float>(rng.uniform(0.15, 1.0));
  return s;
}

// Shortest wrapped offset from center to coordinate on a periodic axis.
double wrapped_delta(double coord, double center, int extent) {
  double d = coord - center;
  d -= extent * std::round(d / extent);
  return d;
}

IntensityFrame render_frame(const ToySceneConfig& cfg, const Background& bg,
                            std::span<const MovingShape> shapes, int frame) {
  IntensityFrame img(3, cfg.width, cfg.height);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x)
        img.at(c, y, x) = bg.at(c, x, y, cfg.width, cfg.height);

  for (const MovingShape& s : shapes) {
    double cx = s.cx + frame * s.vx;
    double cy = s.cy + frame * s.vy;
    for (int y = 0; y < cfg.height; ++y) {
      double dy = wrapped_delta(y, cy, cfg.height);
      for (int x = 0; x < cfg.width; ++x) {
        double dx = wrapped_delta(x, cx, cfg.width);
        bool inside = s.disk ? (dx * dx + dy * dy <= s.half_w * s.half_w)
                             : (std::abs(dx) <= s.half_w &&
                                std::abs(dy) <= s.half_h);
        if (inside)
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = s.color[c];
      }
    }
  }

  // Snap to the u8 grid the PNM files use, so disk round-trips are exact.
  for (float& v : img.values) v = quantize_u8(v);
  return img;
}

}  // namespace

ToySequence render_toy_sequence(const ToySceneConfig& cfg,
                                uint64_t sequence_index) {
  check_config(cfg);
  Rng tex_rng(mix_seed(cfg.texture_seed, sequence_index));
  Rng scene_rng(mix_seed(cfg.seed, sequence_index));

  Background bg = Background::make(tex_rng);
  std::vector<MovingShape> shapes;
  shapes.reserve(static_cast<size_t>(cfg.shape_count));
  for (int i = 0; i < cfg.shape_count; ++i)
    shapes.push_back(make_shape(scene_rng, cfg, i % 2 == 1));

  ToySequence seq;
  seq.period_ns = cfg.period_ns;
  seq.frames.reserve(static_cast<size_t>(cfg.frame_count));
  for (int f = 0; f < cfg.frame_count; ++f)
    seq.frames.push_back(render_frame(cfg, bg, shapes, f));
  seq.events = realize_events(seq.frames, cfg.period_ns);
  return seq;
}

std::vector<std::filesystem::path> write_toy_dataset(
    const std::filesystem::path& out_dir, const ToySceneConfig& cfg) {
  check_config(cfg);
  std::filesystem::create_directories(out_dir);

  std::vector<std::filesystem::path> dirs;
  char name[32];
  for (int s = 0; s < cfg.sequence_count; ++s) {
    std::snprintf(name, sizeof name, "seq_%03d", s);
    std::filesystem::path dir = out_dir / name;
    std::filesystem::create_directories(dir);

    ToySequence seq = render_toy_sequence(cfg, static_cast<uint64_t>(s));
    SequenceManifest manifest;
    manifest.period_ns = seq.period_ns;
    for (size_t f = 0; f < seq.frames.size(); ++f) {
      std::snprintf(name, sizeof name, "frame_%03zu.ppm", f);
      write_image((dir / name).string(), seq.frames[f]);
      manifest.frames.push_back(name);
    }
    manifest.events = "events.evt1";
    write_events_file((dir / manifest.events).string(), seq.events,
                      cfg.width, cfg.height);
    write_manifest((dir / "manifest.txt").string(), manifest);
    dirs.push_back(dir);
  }
  return dirs;
}

}  // namespace evsynth
