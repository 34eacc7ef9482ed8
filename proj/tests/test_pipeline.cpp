#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "evsynth/bridge.hpp"
#include "evsynth/checkpoint.hpp"
#include "evsynth/error.hpp"
#include "evsynth/evt1.hpp"
#include "evsynth/manifest.hpp"
#include "evsynth/pipeline.hpp"
#include "evsynth/pnm.hpp"

using namespace evsynth;
namespace fs = std::filesystem;
using doctest::Contains;

namespace {

fs::path temp_root() {
  fs::path d = fs::temp_directory_path() /
               ("evsynth_pipeline_" + std::to_string(getpid()));
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) return false;
  return std::memcmp(a.data().data(), b.data().data(),
                     a.data().size() * sizeof(float)) == 0;
}

Tensor uniform_tensor(Shape shape, Rng& rng, float lo, float hi) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (float& v : t.data())
    v = lo + (hi - lo) * static_cast<float>(rng.uniform());
  return t;
}

// Small coherent setup for the training-command tests: 24x24 scenes (the
// smallest the discriminator accepts), depth-2 models, tiny channel counts.
PipelineConfig train_cfg() {
  PipelineConfig cfg;
  cfg.scene.width = 24;
  cfg.scene.height = 24;
  cfg.scene.frame_count = 3;
  cfg.scene.sequence_count = 3;
  cfg.scene.shape_count = 2;
  cfg.gen.depth = 2;
  cfg.gen.base_channels = 4;
  cfg.disc.base_channels = 4;
  cfg.refiner.depth = 2;
  cfg.refiner.base_channels = 4;
  cfg.refiner.lstm_channels = 8;
  cfg.train.batch_gen = 2;
  cfg.train.batch_rec = 2;
  cfg.train.sequence_length = 2;
  return cfg;
}

// Runs the shell command with output silenced and returns its exit code.
int run_cli(const std::string& command) {
  std::string cmd = command + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

const std::string kCli = EVSYNTH_CLI_PATH;

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("toygen: rendered sequences survive the disk round trip") {
  fs::path dir = temp_root() / "roundtrip";
  PipelineConfig cfg;
  cfg.scene.width = 16;
  cfg.scene.height = 16;
  cfg.scene.frame_count = 3;
  cfg.scene.sequence_count = 2;

  ToygenResult r = cmd_toygen(dir, cfg);
  REQUIRE(r.sequence_dirs.size() == 2);
  CHECK(r.sequence_dirs[0].filename() == "seq_000");
  CHECK(r.sequence_dirs[1].filename() == "seq_001");

  for (uint64_t i = 0; i < 2; ++i) {
    ToySequence want = render_toy_sequence(cfg.scene, i);
    fs::path seq = r.sequence_dirs[i];
    SequenceManifest m = read_manifest((seq / "manifest.txt").string());
    CHECK(m.period_ns == cfg.scene.period_ns);
    REQUIRE(m.frames.size() == 3);

    LoadedSequence loaded = load_sequence((seq / "manifest.txt").string());
    REQUIRE(loaded.frames.size() == 3);
    for (size_t f = 0; f < 3; ++f) {
      CHECK(loaded.frames[f].channels == want.frames[f].channels);
      CHECK(loaded.frames[f].values == want.frames[f].values);
    }
    std::vector<Event> events =
        read_events_file((seq / "events.evt1").string());
    CHECK(events == want.events);
  }
  fs::remove_all(dir);
}

TEST_CASE("toygen: the seed pins every byte of the dataset") {
  fs::path root = temp_root();
  PipelineConfig cfg;
  cfg.scene.width = 16;
  cfg.scene.height = 16;
  cfg.scene.frame_count = 3;
  cfg.scene.sequence_count = 1;

  cmd_toygen(root / "a", cfg);
  cmd_toygen(root / "b", cfg);
  PipelineConfig other = cfg;
  other.scene.seed = cfg.scene.seed + 1;
  cmd_toygen(root / "c", other);

  for (const char* file :
       {"seq_000/frame_000.ppm", "seq_000/frame_002.ppm",
        "seq_000/events.evt1", "seq_000/manifest.txt"}) {
    CHECK(slurp(root / "a" / file) == slurp(root / "b" / file));
  }
  CHECK(slurp(root / "a" / "seq_000/events.evt1") !=
        slurp(root / "c" / "seq_000/events.evt1"));
  fs::remove_all(root / "a");
  fs::remove_all(root / "b");
  fs::remove_all(root / "c");
}

TEST_CASE("toygen: a static scene produces identical frames and no events") {
  fs::path dir = temp_root() / "static";
  PipelineConfig cfg;
  cfg.scene.width = 16;
  cfg.scene.height = 16;
  cfg.scene.frame_count = 3;
  cfg.scene.sequence_count = 1;
  cfg.scene.min_speed = 0.0;
  cfg.scene.max_speed = 0.0;

  cmd_toygen(dir, cfg);
  LoadedSequence loaded =
      load_sequence((dir / "seq_000" / "manifest.txt").string());
  CHECK(loaded.frames[0].values == loaded.frames[1].values);
  CHECK(loaded.frames[1].values == loaded.frames[2].values);
  CHECK(read_events_file((dir / "seq_000" / "events.evt1").string()).empty());

  // The loaded dataset then carries all-zero event planes.
  cfg.event_source = EventSource::accumulated;
  std::vector<SequenceTensors> seqs = load_dataset(dir, cfg);
  REQUIRE(seqs.size() == 1);
  for (const Tensor& plane : seqs[0].planes)
    for (float v : plane.data()) REQUIRE(v == 0.0f);
  fs::remove_all(dir);
}

TEST_CASE("dataset: accumulated and recomputed event planes agree exactly") {
  fs::path dir = temp_root() / "sources";
  PipelineConfig cfg;
  cfg.scene.width = 16;
  cfg.scene.height = 16;
  cfg.scene.frame_count = 4;
  cfg.scene.sequence_count = 2;
  cmd_toygen(dir, cfg);

  cfg.event_source = EventSource::accumulated;
  std::vector<SequenceTensors> from_events = load_dataset(dir, cfg);
  cfg.event_source = EventSource::log_diff;
  std::vector<SequenceTensors> from_frames = load_dataset(dir, cfg);

  REQUIRE(from_events.size() == from_frames.size());
  for (size_t s = 0; s < from_events.size(); ++s) {
    REQUIRE(from_events[s].planes.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
      REQUIRE(tensors_equal(from_events[s].planes[i],
                            from_frames[s].planes[i]));
      REQUIRE(tensors_equal(from_events[s].frames[i],
                            from_frames[s].frames[i]));
    }
  }

  // Sample views share the loaded tensors and respect sequence_length.
  std::vector<GenSample> gen_samples = make_gen_samples(from_events);
  CHECK(gen_samples.size() == 6);  // 2 sequences x 3 pairs
  CHECK(gen_samples[0].key.same_node(from_events[0].frames[0]));
  std::vector<SeqSample> seq_samples = make_seq_samples(from_events, 2);
  REQUIRE(seq_samples.size() == 2);
  CHECK(seq_samples[0].planes.size() == 2);
  CHECK_THROWS_AS(make_seq_samples(from_events, 4), DataError);
  fs::remove_all(dir);
}

TEST_CASE("synthesis: each step conditions on the previous output") {
  Rng rng(210);
  Generator gen{UNetConfig{4, 3, 2, 4}};
  Rng init(21);
  gen.init_params(init);
  Refiner ref{RefinerConfig{3, 2, 4, 8, 3}};
  ref.init_params(init);

  Tensor key = uniform_tensor(Shape{3, 16, 16}, rng, 0, 1);
  std::vector<Tensor> planes;
  for (int i = 0; i < 3; ++i)
    planes.push_back(uniform_tensor(Shape{1, 16, 16}, rng, -1, 1));

  Tape off(false);
  auto lift = [&](const Tensor& t) {
    return stack_batch(std::span<const Tensor>(&t, 1));
  };

  // Generator only: raw_i = G(raw_{i-1} ++ plane_i).
  std::vector<Tensor> got = synth_sequence(key, planes, gen);
  REQUIRE(got.size() == 3);
  Tensor prev = lift(key);
  for (size_t i = 0; i < 3; ++i) {
    Tensor raw = gen.forward(off, concat_channels(off, prev, lift(planes[i])));
    REQUIRE(tensors_equal(got[i], raw));
    prev = raw;
  }

  // With a refiner the refined frame is recycled as the next condition...
  std::vector<Tensor> refined = synth_sequence(key, planes, gen, &ref, true);
  RefinerState state = ref.zero_state(1, 16, 16);
  prev = lift(key);
  for (size_t i = 0; i < 3; ++i) {
    Tensor raw = gen.forward(off, concat_channels(off, prev, lift(planes[i])));
    Tensor r = ref.step(off, raw, state);
    REQUIRE(tensors_equal(refined[i], r));
    prev = r;
  }

  // ...unless recycling is disabled, then G chains on its own raw output.
  std::vector<Tensor> norec = synth_sequence(key, planes, gen, &ref, false);
  state = ref.zero_state(1, 16, 16);
  prev = lift(key);
  for (size_t i = 0; i < 3; ++i) {
    Tensor raw = gen.forward(off, concat_channels(off, prev, lift(planes[i])));
    Tensor r = ref.step(off, raw, state);
    REQUIRE(tensors_equal(norec[i], r));
    prev = raw;
  }

  CHECK_THROWS_AS(synth_sequence(key, {}, gen), ConfigError);
  CHECK_THROWS_AS(synth_sequence(lift(key), planes, gen), ShapeError);
}

TEST_CASE("simulate/accumulate: window images encode saturated counts") {
  fs::path root = temp_root() / "simacc";
  fs::path frames_dir = root / "frames";
  fs::create_directories(frames_dir);

  Rng rng(220);
  std::vector<IntensityFrame> frames;
  char name[32];
  for (int i = 0; i < 3; ++i) {
    IntensityFrame f(3, 8, 8);
    for (float& v : f.values) v = static_cast<float>(rng.uniform());
    std::snprintf(name, sizeof name, "frame_%d.ppm", i);
    write_image((frames_dir / name).string(), f);
    frames.push_back(read_image((frames_dir / name).string()));
  }

  PipelineConfig cfg;
  const uint64_t period = 1000;
  size_t n = cmd_simulate(frames_dir, root / "events.evt1", cfg, period);
  CHECK(n > 0);
  size_t windows =
      cmd_accumulate(root / "events.evt1", root / "windows", cfg, period);
  REQUIRE(windows == 2);

  for (int w = 0; w < 2; ++w) {
    EventFrame want = quantize_log_diff(
        simulate_event_frame(frames[w], frames[w + 1]));
    std::snprintf(name, sizeof name, "window_%03d.pgm", w);
    IntensityFrame img = read_image((root / "windows" / name).string());
    REQUIRE(img.channels == 1);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        int code = static_cast<int>(std::lround(img.at(0, y, x) * 255.0f));
        REQUIRE(code - cfg.sat == want.at(y, x));
      }
    }
  }
  fs::remove_all(root);
}

TEST_CASE("config: parsing, unknown keys, and validation") {
  PipelineConfig cfg;
  apply_config_text(cfg,
                    "# a comment line\n"
                    "\n"
                    "toy.width = 32   # trailing comment\n"
                    "train.lr=0.001\n"
                    "train.steps=77\n"
                    "data.event_source=accumulated\n"
                    "sim.sat=63\n");
  CHECK(cfg.scene.width == 32);
  CHECK(cfg.train.lr == 0.001);
  CHECK(cfg.train.steps == 77);
  CHECK(cfg.event_source == EventSource::accumulated);
  CHECK(cfg.sat == 63);

  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "foo.bar=1\n"),
                       Contains("foo.bar"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "train.steps=abc\n"),
                       Contains("train.steps"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "no equals sign\n"),
                       Contains("key=value"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(cfg, "=5\n"), Contains("empty key"),
                       ConfigError);
  CHECK_THROWS_AS(apply_config_entry(cfg, "data.event_source", "nope"),
                  ConfigError);

  PipelineConfig good;
  validate_pipeline_config(good);  // defaults are coherent

  PipelineConfig bad = good;
  bad.gen.in_channels = 5;
  CHECK_THROWS_WITH_AS(validate_pipeline_config(bad),
                       Contains("in_channels"), ConfigError);
  bad = good;
  bad.train.w_mse = 0.7;
  CHECK_THROWS_WITH_AS(validate_pipeline_config(bad), Contains("w_mse"),
                       ConfigError);
  bad = good;
  bad.scene.width = 30;  // not divisible by 2^depth
  CHECK_THROWS_WITH_AS(validate_pipeline_config(bad), Contains("divisible"),
                       ConfigError);
  bad = good;
  bad.sim_levels = 4;
  CHECK_THROWS_WITH_AS(validate_pipeline_config(bad), Contains("levels"),
                       ConfigError);
}

TEST_CASE("training commands: checkpoints, resume, synthesis, evaluation") {
  fs::path root = temp_root() / "commands";
  fs::path data = root / "data";
  PipelineConfig cfg = train_cfg();
  cmd_toygen(data, cfg);

  // A 6-step run and a 3-step run resumed to 6 write identical checkpoints.
  cfg.train.steps = 6;
  TrainGenResult full = cmd_train_gen(data, root / "gen_full.evck", cfg);
  CHECK(full.g_loss.size() == 6);

  cfg.train.steps = 3;
  cmd_train_gen(data, root / "gen_half.evck", cfg);
  cfg.train.steps = 6;
  TrainGenResult resumed = cmd_train_gen(data, root / "gen_resumed.evck", cfg,
                                         root / "gen_half.evck");
  CHECK(resumed.g_loss.size() == 3);  // steps [3, 6)
  CHECK(slurp(root / "gen_full.evck") == slurp(root / "gen_resumed.evck"));
  CHECK(slurp(root / "gen_full.evck") != slurp(root / "gen_half.evck"));

  // Refiner training stacks rec/ entries onto the frozen generator.
  CHECK(!checkpoint_has_refiner(root / "gen_full.evck"));
  cfg.train.steps = 2;
  TrainRecResult rec = cmd_train_rec(data, root / "gen_full.evck",
                                     root / "rec.evck", cfg);
  CHECK(rec.r_loss.size() == 2);
  CHECK(checkpoint_has_refiner(root / "rec.evck"));
  {
    Checkpoint gen_ck = Checkpoint::load_file((root / "gen_full.evck").string());
    Checkpoint rec_ck = Checkpoint::load_file((root / "rec.evck").string());
    for (const std::string& name : gen_ck.names_under("gen"))
      REQUIRE(tensors_equal(gen_ck.get("gen/" + name),
                            rec_ck.get("gen/" + name)));
  }

  // Resumed refiner training also replays the uninterrupted run.
  cfg.train.steps = 4;
  cmd_train_rec(data, root / "gen_full.evck", root / "rec_full.evck", cfg);
  TrainRecResult rec_resumed = cmd_train_rec(
      data, root / "gen_full.evck", root / "rec_resumed.evck", cfg,
      root / "rec.evck");
  CHECK(rec_resumed.r_loss.size() == 2);
  CHECK(slurp(root / "rec_full.evck") == slurp(root / "rec_resumed.evck"));

  // Synthesis from the trained checkpoints.
  fs::path key = data / "seq_000" / "frame_000.ppm";
  fs::path events = data / "seq_000" / "events.evt1";
  SynthResult refined = cmd_synth(key, events, root / "rec.evck",
                                  root / "synth_refined", 2, cfg,
                                  cfg.scene.period_ns);
  REQUIRE(refined.frame_files.size() == 2);
  CHECK(refined.frame_files[0].filename() == "frame_001.ppm");
  IntensityFrame out0 = read_image(refined.frame_files[0].string());
  CHECK(out0.channels == 3);
  CHECK(out0.width == 24);
  CHECK(out0.height == 24);

  SynthResult raw = cmd_synth(key, events, root / "rec.evck",
                              root / "synth_gonly", 2, cfg,
                              cfg.scene.period_ns, /*g_only=*/true);
  CHECK(slurp(refined.frame_files[0]) != slurp(raw.frame_files[0]));

  // Geometry mismatches and bad step counts are rejected.
  write_events_file((root / "bad.evt1").string(), {}, 16, 16);
  CHECK_THROWS_AS(cmd_synth(key, root / "bad.evt1", root / "rec.evck",
                            root / "synth_bad", 1, cfg, cfg.scene.period_ns),
                  DataError);
  CHECK_THROWS_AS(cmd_synth(key, events, root / "rec.evck", root / "synth_bad",
                            0, cfg, cfg.scene.period_ns),
                  ConfigError);

  // Evaluation against the ground-truth frames of the same sequence.
  fs::path gt = root / "gt";
  fs::create_directories(gt);
  fs::copy_file(data / "seq_000" / "frame_001.ppm", gt / "frame_001.ppm");
  fs::copy_file(data / "seq_000" / "frame_002.ppm", gt / "frame_002.ppm");
  SequenceEvaluation ev =
      cmd_eval(root / "synth_refined", gt, root / "eval_out");
  REQUIRE(ev.curves.size() == 12);
  CHECK(ev.curves[0].values.size() == 2);
  CHECK(slurp(root / "eval_out" / "metrics.txt") == format_report(ev.report));
  CHECK(fs::exists(root / "eval_out" / "curves.csv"));

  fs::remove(gt / "frame_002.ppm");
  CHECK_THROWS_AS(cmd_eval(root / "synth_refined", gt, root / "eval_out"),
                  DataError);
  fs::path empty = root / "empty";
  fs::create_directories(empty);
  CHECK_THROWS_AS(cmd_eval(empty, gt, root / "eval_out"), DataError);

  fs::remove_all(root);
}

TEST_CASE("cli: exit codes distinguish usage, data, and success") {
  fs::path root = temp_root() / "cli";
  fs::create_directories(root);

  CHECK(run_cli(kCli) == 1);                      // missing subcommand
  CHECK(run_cli(kCli + " toygen") == 1);          // missing --out
  CHECK(run_cli(kCli + " accumulate --events " +
                (root / "missing.evt1").string() + " --out " +
                (root / "w").string()) == 2);     // unreadable input

  std::ofstream(root / "bad.cfg") << "foo.bar=1\n";
  CHECK(run_cli(kCli + " --config " + (root / "bad.cfg").string() +
                " toygen --out " + (root / "d").string()) == 1);

  std::ofstream(root / "tiny.cfg")
      << "toy.width=16\ntoy.height=16\ntoy.frame_count=2\n";
  CHECK(run_cli(kCli + " --config " + (root / "tiny.cfg").string() +
                " toygen --out " + (root / "ok").string()) == 0);
  CHECK(fs::exists(root / "ok" / "seq_000" / "manifest.txt"));

  fs::remove_all(root);
}

TEST_CASE("cli: seed flag beats the environment, environment beats config") {
  fs::path root = temp_root() / "cliseed";
  fs::create_directories(root);
  std::ofstream(root / "tiny.cfg")
      << "toy.width=16\ntoy.height=16\ntoy.frame_count=3\n";
  std::string base = kCli + " --config " + (root / "tiny.cfg").string();

  // --seed 7 with and without a conflicting environment value.
  CHECK(run_cli(base + " --seed 7 toygen --out " +
                (root / "flag").string()) == 0);
  CHECK(run_cli("EVSYNTH_SEED=9 " + base + " --seed 7 toygen --out " +
                (root / "flag_env").string()) == 0);
  CHECK(run_cli("EVSYNTH_SEED=9 " + base + " toygen --out " +
                (root / "env").string()) == 0);
  CHECK(run_cli("EVSYNTH_SEED=9 " + kCli + " --seed 9 --config " +
                (root / "tiny.cfg").string() + " toygen --out " +
                (root / "nine").string()) == 0);

  std::string flag = slurp(root / "flag" / "seq_000" / "events.evt1");
  std::string flag_env = slurp(root / "flag_env" / "seq_000" / "events.evt1");
  std::string env = slurp(root / "env" / "seq_000" / "events.evt1");
  std::string nine = slurp(root / "nine" / "seq_000" / "events.evt1");
  CHECK(flag == flag_env);  // the flag wins over the environment
  CHECK(flag != env);       // the environment departs from the flag value
  CHECK(env == nine);       // ...and matches an explicit --seed 9

  // A malformed environment seed is a usage error.
  CHECK(run_cli("EVSYNTH_SEED=bogus " + base + " toygen --out " +
                (root / "bad").string()) == 1);

  fs::remove_all(root);
}

}  // TEST_SUITE
