#include "evsynth/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evsynth/bridge.hpp"
#include "evsynth/checkpoint.hpp"
#include "evsynth/error.hpp"
#include "evsynth/evt1.hpp"
#include "evsynth/fsio.hpp"
#include "evsynth/manifest.hpp"
#include "evsynth/pnm.hpp"
#include "evsynth/rng.hpp"

namespace fs = std::filesystem;

namespace evsynth {

// ---- configuration ---------------------------------------------------------

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last)
    throw ConfigError("config: bad value '" + value + "' for key '" + key +
                      "'");
  return out;
}

std::string trim(std::string s) {
  size_t b = s.find_first_not_of(" \t\r");
  size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value) {
  auto i32 = [&] { return parse_number<int>(key, value); };
  auto i64 = [&] { return parse_number<int64_t>(key, value); };
  auto u64 = [&] { return parse_number<uint64_t>(key, value); };
  auto f64 = [&] { return parse_number<double>(key, value); };
  auto f32 = [&] { return parse_number<float>(key, value); };

  if (key == "toy.width") cfg.scene.width = i32();
  else if (key == "toy.height") cfg.scene.height = i32();
  else if (key == "toy.frame_count") cfg.scene.frame_count = i32();
  else if (key == "toy.shape_count") cfg.scene.shape_count = i32();
  else if (key == "toy.min_speed") cfg.scene.min_speed = f64();
  else if (key == "toy.max_speed") cfg.scene.max_speed = f64();
  else if (key == "toy.texture_seed") cfg.scene.texture_seed = u64();
  else if (key == "toy.seed") cfg.scene.seed = u64();
  else if (key == "toy.period_ns") cfg.scene.period_ns = u64();
  else if (key == "toy.sequence_count") cfg.scene.sequence_count = i32();
  else if (key == "gen.in_channels") cfg.gen.in_channels = i32();
  else if (key == "gen.out_channels") cfg.gen.out_channels = i32();
  else if (key == "gen.depth") cfg.gen.depth = i32();
  else if (key == "gen.base_channels") cfg.gen.base_channels = i32();
  else if (key == "disc.in_channels") cfg.disc.in_channels = i32();
  else if (key == "disc.base_channels") cfg.disc.base_channels = i32();
  else if (key == "refiner.channels") cfg.refiner.channels = i32();
  else if (key == "refiner.depth") cfg.refiner.depth = i32();
  else if (key == "refiner.base_channels") cfg.refiner.base_channels = i32();
  else if (key == "refiner.lstm_channels") cfg.refiner.lstm_channels = i32();
  else if (key == "refiner.lstm_kernel") cfg.refiner.lstm_kernel = i32();
  else if (key == "train.steps") cfg.train.steps = i32();
  else if (key == "train.seed") cfg.train.seed = u64();
  else if (key == "train.lr") cfg.train.lr = f64();
  else if (key == "train.beta1") cfg.train.beta1 = f64();
  else if (key == "train.beta2") cfg.train.beta2 = f64();
  else if (key == "train.adam_eps") cfg.train.adam_eps = f64();
  else if (key == "train.batch_gen") cfg.train.batch_gen = i32();
  else if (key == "train.d_update_period") cfg.train.d_update_period = i32();
  else if (key == "train.lambda_adv") cfg.train.lambda_adv = f64();
  else if (key == "train.lambda_mse") cfg.train.lambda_mse = f64();
  else if (key == "train.batch_rec") cfg.train.batch_rec = i32();
  else if (key == "train.sequence_length") cfg.train.sequence_length = i32();
  else if (key == "train.w_mse") cfg.train.w_mse = f64();
  else if (key == "train.w_ssim") cfg.train.w_ssim = f64();
  else if (key == "sim.eps") cfg.sim_eps = f32();
  else if (key == "sim.contrast_clip") cfg.sim_contrast_clip = f32();
  else if (key == "sim.levels") cfg.sim_levels = i32();
  else if (key == "sim.sat") cfg.sat = i32();
  else if (key == "data.event_source") {
    if (value == "accumulated") cfg.event_source = EventSource::accumulated;
    else if (value == "log_diff") cfg.event_source = EventSource::log_diff;
    else
      throw ConfigError("config: data.event_source must be 'accumulated' or "
                        "'log_diff', got '" + value + "'");
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
  (void)i64;
}

void apply_config_text(PipelineConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: line " + std::to_string(line_no) +
                        ": empty key");
    apply_config_entry(cfg, key, value);
  }
}

void apply_config_file(PipelineConfig& cfg, const fs::path& path) {
  std::ifstream in = open_input(path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str());
}

void validate_pipeline_config(const PipelineConfig& cfg) {
  const TrainConfig& t = cfg.train;
  if (cfg.gen.in_channels != cfg.gen.out_channels + 1)
    throw ConfigError(
        "config: gen.in_channels must equal gen.out_channels + 1 (frame "
        "channels plus one event plane)");
  if (cfg.disc.in_channels != 2 * cfg.gen.out_channels + 1)
    throw ConfigError(
        "config: disc.in_channels must equal 2*gen.out_channels + 1 "
        "(condition plus candidate)");
  if (cfg.refiner.channels != cfg.gen.out_channels)
    throw ConfigError("config: refiner.channels must equal gen.out_channels");
  int div = 1 << std::max(cfg.gen.depth, cfg.refiner.depth);
  if (cfg.scene.width % div != 0 || cfg.scene.height % div != 0)
    throw ConfigError("config: toy resolution must be divisible by 2^depth (" +
                      std::to_string(div) + ")");
  if (!(t.lr > 0.0) || !(t.adam_eps > 0.0))
    throw ConfigError("config: learning rate and adam_eps must be > 0");
  if (!(t.beta1 > 0.0 && t.beta1 < 1.0) || !(t.beta2 > 0.0 && t.beta2 < 1.0))
    throw ConfigError("config: adam betas must lie in (0, 1)");
  if (t.lambda_adv < 0.0 || t.lambda_mse < 0.0)
    throw ConfigError("config: loss weights must be >= 0");
  if (t.w_mse < 0.0 || t.w_ssim < 0.0 ||
      std::abs(t.w_mse + t.w_ssim - 1.0) > 1e-9)
    throw ConfigError("config: w_mse + w_ssim must equal 1");
  if (t.batch_gen < 1 || t.batch_rec < 1)
    throw ConfigError("config: batch sizes must be >= 1");
  if (t.d_update_period < 1)
    throw ConfigError("config: d_update_period must be >= 1");
  if (t.sequence_length < 1)
    throw ConfigError("config: sequence_length must be >= 1");
  if (t.steps < 0) throw ConfigError("config: steps must be >= 0");
  if (!(cfg.sim_eps > 0.0f) || !(cfg.sim_contrast_clip > 0.0f))
    throw ConfigError("config: sim.eps and sim.contrast_clip must be > 0");
  if (cfg.sim_levels < 3 || cfg.sim_levels % 2 == 0)
    throw ConfigError("config: sim.levels must be odd and >= 3");
  if (cfg.sat < 1) throw ConfigError("config: sim.sat must be >= 1");
}

// ---- datasets --------------------------------------------------------------

std::vector<SequenceTensors> load_dataset(const fs::path& dir,
                                          const PipelineConfig& cfg) {
  if (!fs::is_directory(dir))
    throw IoError("dataset: not a directory: " + dir.string());
  std::vector<fs::path> manifests;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.txt"))
      manifests.push_back(entry.path() / "manifest.txt");
  }
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty())
    throw DataError("dataset: no seq_*/manifest.txt under " + dir.string());

  std::vector<SequenceTensors> out;
  out.reserve(manifests.size());
  for (const fs::path& m : manifests) {
    LoadedSequence ls = load_sequence(m.string(), cfg.sat);
    SequenceTensors st;
    st.frames.reserve(ls.frames.size());
    for (const IntensityFrame& f : ls.frames) st.frames.push_back(to_tensor(f));
    st.planes.reserve(ls.event_frames.size());
    for (size_t i = 0; i + 1 < ls.frames.size(); ++i) {
      EventFrame ef =
          cfg.event_source == EventSource::accumulated
              ? std::move(ls.event_frames[i])
              : quantize_log_diff(
                    simulate_event_frame(ls.frames[i], ls.frames[i + 1],
                                         cfg.sim_eps),
                    cfg.sim_contrast_clip, cfg.sim_levels);
      st.planes.push_back(to_tensor(event_frame_to_model_input(ef)));
    }
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<GenSample> make_gen_samples(std::span<const SequenceTensors> seqs) {
  std::vector<GenSample> samples;
  for (const SequenceTensors& s : seqs)
    for (size_t i = 0; i < s.planes.size(); ++i)
      samples.push_back(GenSample{s.frames[i], s.planes[i], s.frames[i + 1]});
  if (samples.empty()) throw DataError("dataset: no frame pairs");
  return samples;
}

std::vector<SeqSample> make_seq_samples(std::span<const SequenceTensors> seqs,
                                        int sequence_length) {
  if (sequence_length < 1)
    throw ConfigError("make_seq_samples: sequence_length must be >= 1");
  std::vector<SeqSample> samples;
  size_t want = static_cast<size_t>(sequence_length);
  for (const SequenceTensors& s : seqs) {
    if (s.planes.size() < want) continue;  // too short for one full window
    SeqSample sample;
    sample.key = s.frames[0];
    for (size_t t = 0; t < want; ++t) {
      sample.planes.push_back(s.planes[t]);
      sample.targets.push_back(s.frames[t + 1]);
    }
    samples.push_back(std::move(sample));
  }
  if (samples.empty())
    throw DataError(
        "dataset: no sequence is long enough for the configured "
        "sequence_length");
  return samples;
}

// ---- synthesis -------------------------------------------------------------

std::vector<Tensor> synth_sequence(const Tensor& keyframe,
                                   std::span<const Tensor> planes,
                                   const Generator& gen, const Refiner* refiner,
                                   bool recycle_refined) {
  if (planes.empty()) throw ConfigError("synth_sequence: no event planes");
  if (keyframe.shape().rank() != 3)
    throw ShapeError("synth_sequence: keyframe must be [C,H,W]");

  Tape off(false);
  Tensor prev = stack_batch(std::span<const Tensor>(&keyframe, 1));
  const int height = keyframe.shape()[1], width = keyframe.shape()[2];

  RefinerState state;
  if (refiner) state = refiner->zero_state(1, height, width);

  std::vector<Tensor> out;
  out.reserve(planes.size());
  for (const Tensor& plane : planes) {
    if (plane.shape().rank() != 3 || plane.shape()[0] != 1)
      throw ShapeError("synth_sequence: event planes must be [1,H,W]");
    Tensor plane4 = stack_batch(std::span<const Tensor>(&plane, 1));
    Tensor cond = concat_channels(off, prev, plane4);
    Tensor raw = gen.forward(off, cond);
    if (refiner) {
      Tensor refined = refiner->step(off, raw, state);
      out.push_back(refined);
      prev = recycle_refined ? refined : raw;
    } else {
      out.push_back(raw);
      prev = raw;
    }
  }
  return out;
}

// ---- checkpoint plumbing ---------------------------------------------------

namespace {

void store_adam(Checkpoint& ck, const std::string& prefix, const AdamOpt& opt,
                const std::vector<std::pair<std::string, Tensor>>& named) {
  if (named.size() != opt.size())
    throw ConfigError("checkpoint: optimizer/parameter count mismatch");
  for (size_t i = 0; i < named.size(); ++i) {
    ck.put(prefix + "/m1/" + named[i].first, opt.moment1(i).clone());
    ck.put(prefix + "/m2/" + named[i].first, opt.moment2(i).clone());
  }
  ck.put_scalar(prefix + "/step", static_cast<double>(opt.step_count()));
}

void restore_adam(const Checkpoint& ck, const std::string& prefix,
                  AdamOpt& opt,
                  const std::vector<std::pair<std::string, Tensor>>& named) {
  if (named.size() != opt.size())
    throw ConfigError("checkpoint: optimizer/parameter count mismatch");
  for (size_t i = 0; i < named.size(); ++i) {
    for (int m = 1; m <= 2; ++m) {
      std::string name =
          prefix + "/m" + std::to_string(m) + "/" + named[i].first;
      const Tensor& src = ck.get(name);
      Tensor dst = m == 1 ? opt.moment1(i) : opt.moment2(i);
      if (!(src.shape() == dst.shape()))
        throw ConfigError("checkpoint: shape mismatch for " + name);
      std::copy(src.data().begin(), src.data().end(), dst.data().begin());
    }
  }
  opt.set_step_count(
      static_cast<int64_t>(std::llround(ck.get_scalar(prefix + "/step"))));
}

void store_gen_config(Checkpoint& ck, const PipelineConfig& cfg) {
  ck.put_scalar("cfg/gen.in_channels", cfg.gen.in_channels);
  ck.put_scalar("cfg/gen.out_channels", cfg.gen.out_channels);
  ck.put_scalar("cfg/gen.depth", cfg.gen.depth);
  ck.put_scalar("cfg/gen.base_channels", cfg.gen.base_channels);
  ck.put_scalar("cfg/sim.sat", cfg.sat);
}

void store_refiner_config(Checkpoint& ck, const PipelineConfig& cfg) {
  ck.put_scalar("cfg/refiner.channels", cfg.refiner.channels);
  ck.put_scalar("cfg/refiner.depth", cfg.refiner.depth);
  ck.put_scalar("cfg/refiner.base_channels", cfg.refiner.base_channels);
  ck.put_scalar("cfg/refiner.lstm_channels", cfg.refiner.lstm_channels);
  ck.put_scalar("cfg/refiner.lstm_kernel", cfg.refiner.lstm_kernel);
}

int scalar_int(const Checkpoint& ck, const std::string& name) {
  return static_cast<int>(std::llround(ck.get_scalar(name)));
}

UNetConfig gen_config_from(const Checkpoint& ck) {
  UNetConfig c;
  c.in_channels = scalar_int(ck, "cfg/gen.in_channels");
  c.out_channels = scalar_int(ck, "cfg/gen.out_channels");
  c.depth = scalar_int(ck, "cfg/gen.depth");
  c.base_channels = scalar_int(ck, "cfg/gen.base_channels");
  return c;
}

RefinerConfig refiner_config_from(const Checkpoint& ck) {
  RefinerConfig c;
  c.channels = scalar_int(ck, "cfg/refiner.channels");
  c.depth = scalar_int(ck, "cfg/refiner.depth");
  c.base_channels = scalar_int(ck, "cfg/refiner.base_channels");
  c.lstm_channels = scalar_int(ck, "cfg/refiner.lstm_channels");
  c.lstm_kernel = scalar_int(ck, "cfg/refiner.lstm_kernel");
  return c;
}

// Frame files of a directory, sorted by name.
std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

bool checkpoint_has_refiner(const fs::path& checkpoint_file) {
  Checkpoint ck = Checkpoint::load_file(checkpoint_file.string());
  return !ck.names_under("rec").empty();
}

// ---- commands --------------------------------------------------------------

ToygenResult cmd_toygen(const fs::path& out_dir, const PipelineConfig& cfg) {
  validate_pipeline_config(cfg);
  return ToygenResult{write_toy_dataset(out_dir, cfg.scene)};
}

size_t cmd_simulate(const fs::path& frames_dir, const fs::path& out_file,
                    const PipelineConfig& cfg, uint64_t period_ns) {
  std::vector<fs::path> files = list_frames(frames_dir);
  if (files.size() < 2)
    throw DataError("simulate: need at least two frames in " +
                    frames_dir.string());
  std::vector<IntensityFrame> frames;
  frames.reserve(files.size());
  for (const fs::path& f : files) frames.push_back(read_image(f.string()));
  std::vector<Event> events =
      realize_events(frames, period_ns, cfg.sim_eps, cfg.sim_contrast_clip,
                     cfg.sim_levels);
  write_events_file(out_file.string(), events, frames[0].width,
                    frames[0].height);
  return events.size();
}

size_t cmd_accumulate(const fs::path& events_file, const fs::path& out_dir,
                      const PipelineConfig& cfg, uint64_t period_ns) {
  if (period_ns == 0) throw ConfigError("accumulate: period must be > 0");
  Evt1Header header;
  std::vector<Event> events =
      read_events_file(events_file.string(), &header);
  fs::create_directories(out_dir);
  if (events.empty()) return 0;

  uint64_t windows = events.back().t / period_ns + 1;
  char name[32];
  for (uint64_t i = 0; i < windows; ++i) {
    AccumulationWindow window(i * period_ns, period_ns);
    EventFrame ef = accumulate_events(events, window, header.width,
                                      header.height, cfg.sat);
    IntensityFrame img(1, header.width, header.height);
    for (size_t p = 0; p < ef.values.size(); ++p)
      img.values[p] =
          static_cast<float>(ef.values[p] + cfg.sat) / 255.0f;
    std::snprintf(name, sizeof name, "window_%03llu.pgm",
                  static_cast<unsigned long long>(i));
    write_image((out_dir / name).string(), img);
  }
  return static_cast<size_t>(windows);
}

TrainGenResult cmd_train_gen(const fs::path& data_dir,
                             const fs::path& out_checkpoint,
                             const PipelineConfig& cfg,
                             const fs::path& resume_from) {
  validate_pipeline_config(cfg);
  std::vector<SequenceTensors> seqs = load_dataset(data_dir, cfg);
  std::vector<GenSample> samples = make_gen_samples(seqs);

  Generator gen(cfg.gen);
  Discriminator disc(cfg.disc);
  Rng init_rng(mix_seed(cfg.train.seed, 1));
  gen.init_params(init_rng);
  disc.init_params(init_rng);

  AdamOpt g_opt(gen.params(), cfg.train.lr, cfg.train.beta1, cfg.train.beta2,
                cfg.train.adam_eps);
  AdamOpt d_opt(disc.params(), cfg.train.lr, cfg.train.beta1, cfg.train.beta2,
                cfg.train.adam_eps);

  int64_t start_step = 0;
  if (!resume_from.empty()) {
    Checkpoint ck = Checkpoint::load_file(resume_from.string());
    restore_params(ck, "gen", gen.named_params());
    restore_params(ck, "disc", disc.named_params());
    restore_adam(ck, "adam_g", g_opt, gen.named_params());
    restore_adam(ck, "adam_d", d_opt, disc.named_params());
    start_step = g_opt.step_count();
    if (start_step > cfg.train.steps)
      throw ConfigError("resume: checkpoint is already past train.steps");
  }

  GenTrainResult result = train_generator_adversarial(
      samples, gen, disc, g_opt, d_opt, cfg.train, start_step);

  Checkpoint ck;
  store_params(ck, "gen", gen.named_params());
  store_params(ck, "disc", disc.named_params());
  store_adam(ck, "adam_g", g_opt, gen.named_params());
  store_adam(ck, "adam_d", d_opt, disc.named_params());
  store_gen_config(ck, cfg);
  ck.put_scalar("cfg/disc.in_channels", cfg.disc.in_channels);
  ck.put_scalar("cfg/disc.base_channels", cfg.disc.base_channels);
  ck.save_file(out_checkpoint.string());
  return TrainGenResult{std::move(result.g_loss), std::move(result.d_loss)};
}

TrainRecResult cmd_train_rec(const fs::path& data_dir,
                             const fs::path& gen_checkpoint,
                             const fs::path& out_checkpoint,
                             const PipelineConfig& cfg,
                             const fs::path& resume_from) {
  validate_pipeline_config(cfg);
  std::vector<SequenceTensors> seqs = load_dataset(data_dir, cfg);
  std::vector<SeqSample> samples =
      make_seq_samples(seqs, cfg.train.sequence_length);

  // The generator rides along frozen; its source is the resume checkpoint
  // when resuming (it was copied through), else the generator checkpoint.
  Generator gen(cfg.gen);
  Refiner refiner(cfg.refiner);
  Rng init_rng(mix_seed(cfg.train.seed, 2));
  refiner.init_params(init_rng);

  AdamOpt r_opt(refiner.params(), cfg.train.lr, cfg.train.beta1,
                cfg.train.beta2, cfg.train.adam_eps);

  int64_t start_step = 0;
  if (!resume_from.empty()) {
    Checkpoint ck = Checkpoint::load_file(resume_from.string());
    restore_params(ck, "gen", gen.named_params());
    restore_params(ck, "rec", refiner.named_params());
    restore_adam(ck, "adam_r", r_opt, refiner.named_params());
    start_step = r_opt.step_count();
    if (start_step > cfg.train.steps)
      throw ConfigError("resume: checkpoint is already past train.steps");
  } else {
    Checkpoint ck = Checkpoint::load_file(gen_checkpoint.string());
    restore_params(ck, "gen", gen.named_params());
  }

  RecTrainResult result =
      train_recurrent(samples, gen, refiner, r_opt, cfg.train, start_step);

  Checkpoint ck;
  store_params(ck, "gen", gen.named_params());
  store_params(ck, "rec", refiner.named_params());
  store_adam(ck, "adam_r", r_opt, refiner.named_params());
  store_gen_config(ck, cfg);
  store_refiner_config(ck, cfg);
  ck.save_file(out_checkpoint.string());
  return TrainRecResult{std::move(result.r_loss)};
}

SynthResult cmd_synth(const fs::path& keyframe_file,
                      const fs::path& events_file,
                      const fs::path& checkpoint_file, const fs::path& out_dir,
                      int steps, const PipelineConfig& cfg, uint64_t period_ns,
                      bool g_only, bool recycle_refined) {
  if (steps < 1) throw ConfigError("synth: steps must be >= 1");
  if (period_ns == 0) throw ConfigError("synth: period must be > 0");

  IntensityFrame keyframe = read_image(keyframe_file.string());
  Evt1Header header;
  std::vector<Event> events = read_events_file(events_file.string(), &header);
  if (header.width != keyframe.width || header.height != keyframe.height)
    throw DataError("synth: event stream geometry " +
                    std::to_string(header.width) + "x" +
                    std::to_string(header.height) +
                    " does not match keyframe " +
                    std::to_string(keyframe.width) + "x" +
                    std::to_string(keyframe.height));

  Checkpoint ck = Checkpoint::load_file(checkpoint_file.string());
  Generator gen(gen_config_from(ck));
  restore_params(ck, "gen", gen.named_params());
  if (keyframe.channels + 1 != gen.config().in_channels)
    throw DataError("synth: keyframe channel count does not fit the model");

  Refiner refiner;
  bool use_refiner = !g_only && !ck.names_under("rec").empty();
  if (use_refiner) {
    refiner = Refiner(refiner_config_from(ck));
    restore_params(ck, "rec", refiner.named_params());
  }

  int sat = scalar_int(ck, "cfg/sim.sat");
  std::vector<Tensor> planes;
  planes.reserve(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    AccumulationWindow window(static_cast<uint64_t>(i) * period_ns, period_ns);
    EventFrame ef = accumulate_events(events, window, keyframe.width,
                                      keyframe.height, sat);
    planes.push_back(to_tensor(event_frame_to_model_input(ef)));
  }

  std::vector<Tensor> frames =
      synth_sequence(to_tensor(keyframe), planes, gen,
                     use_refiner ? &refiner : nullptr, recycle_refined);

  fs::create_directories(out_dir);
  SynthResult result;
  char name[32];
  for (size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%03zu.ppm", i + 1);
    fs::path file = out_dir / name;
    write_image(file.string(), to_frame(frames[i]));
    result.frame_files.push_back(file);
  }
  return result;
}

SequenceEvaluation cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir,
                            const fs::path& out_dir) {
  std::vector<fs::path> pred_files = list_frames(pred_dir);
  std::vector<fs::path> gt_files = list_frames(gt_dir);
  if (pred_files.empty())
    throw DataError("eval: no frames under " + pred_dir.string());
  if (pred_files.size() != gt_files.size())
    throw DataError("eval: " + std::to_string(pred_files.size()) +
                    " prediction frames vs " + std::to_string(gt_files.size()) +
                    " ground-truth frames");

  std::vector<IntensityFrame> pred, gt;
  pred.reserve(pred_files.size());
  gt.reserve(gt_files.size());
  for (const fs::path& f : pred_files) pred.push_back(read_image(f.string()));
  for (const fs::path& f : gt_files) gt.push_back(read_image(f.string()));

  SequenceEvaluation eval = evaluate_sequence(pred, gt);
  fs::create_directories(out_dir);
  write_report(out_dir / "metrics.txt", eval.report);
  write_curves(out_dir / "curves.csv", eval.curves);
  return eval;
}

GradCheckSummary cmd_gradcheck(uint64_t seed) {
  return run_gradcheck_suite(seed);
}

}  // namespace evsynth
