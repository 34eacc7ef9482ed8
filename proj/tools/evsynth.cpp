// evsynth — command-line front end for the event-driven video synthesis
// toolkit. Every subcommand is a thin wrapper over the cmd_* entry points in
// the core library so tests exercise the exact same code paths.
//
// Exit codes: 0 success, 1 usage error (bad flags, bad config), 2 data error
// (unreadable/malformed inputs), 3 numeric failure (non-finite loss, failed
// gradient check).

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "evsynth/error.hpp"
#include "evsynth/pipeline.hpp"

namespace {

using namespace evsynth;

// Seed precedence: --seed flag > EVSYNTH_SEED environment variable > the
// value from --config (which itself defaults to 42). Only an explicit flag
// or environment value overrides the config file.
void resolve_seed(PipelineConfig& cfg, bool flag_given, uint64_t flag_value) {
  uint64_t seed = 0;
  bool have = false;
  if (flag_given) {
    seed = flag_value;
    have = true;
  } else if (const char* env = std::getenv("EVSYNTH_SEED")) {
    std::string text(env);
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, seed);
    if (ec != std::errc{} || ptr != last || text.empty())
      throw ConfigError("EVSYNTH_SEED: not an unsigned integer: '" + text +
                        "'");
    have = true;
  }
  if (have) {
    cfg.train.seed = seed;
    cfg.scene.seed = seed;
  }
}

int run_gradcheck_cmd(uint64_t seed) {
  GradCheckSummary summary = run_gradcheck_suite(seed);
  std::printf("%-28s %10s %14s %s\n", "case", "elements", "max rel err",
              "status");
  for (const GradCheckCase& c : summary.cases)
    std::printf("%-28s %10zu %14.3e %s\n", c.name.c_str(), c.elements,
                c.max_rel_err, c.pass ? "PASS" : "FAIL");
  std::printf("gradient check: %zu cases, worst rel err %.3e — %s\n",
              summary.cases.size(), summary.worst_rel_err,
              summary.all_pass ? "all passed" : "FAILURES");
  return summary.all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evsynth: synthesize intensity video from event streams"};
  app.require_subcommand(1);
  app.fallthrough(true);

  std::string config_file;
  uint64_t seed_flag = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_flag, "RNG seed (overrides EVSYNTH_SEED)");
  app.add_option("--config", config_file,
                 "key=value config file with dotted keys (e.g. train.lr)");

  // toygen
  auto* toygen = app.add_subcommand(
      "toygen", "render a synthetic moving-shapes dataset (frames + events)");
  std::string toygen_out;
  int toygen_sequences = -1, toygen_frames = -1;
  toygen->add_option("--out", toygen_out, "output dataset directory")
      ->required();
  toygen->add_option("--sequences", toygen_sequences,
                     "number of sequences (overrides toy.sequence_count)");
  toygen->add_option("--frames", toygen_frames,
                     "frames per sequence (overrides toy.frame_count)");

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "derive an event stream from a directory of frames");
  std::string sim_frames, sim_out;
  uint64_t sim_period = 10'000'000;
  simulate->add_option("--frames", sim_frames, "directory of PNM frames")
      ->required();
  simulate->add_option("--out", sim_out, "output EVT1 file")->required();
  simulate->add_option("--period-ns", sim_period,
                       "inter-frame period in nanoseconds");

  // accumulate
  auto* accumulate = app.add_subcommand(
      "accumulate", "integrate an event stream into per-window PGM images");
  std::string acc_events, acc_out;
  uint64_t acc_period = 10'000'000;
  accumulate->add_option("--events", acc_events, "input EVT1 file")
      ->required();
  accumulate->add_option("--out", acc_out, "output directory")->required();
  accumulate->add_option("--period-ns", acc_period,
                         "accumulation window length in nanoseconds");

  // train-gen
  auto* train_gen = app.add_subcommand(
      "train-gen", "adversarially train the generator on a dataset");
  std::string tg_data, tg_out, tg_resume;
  int tg_steps = -1;
  train_gen->add_option("--data", tg_data, "dataset directory")->required();
  train_gen->add_option("--out", tg_out, "output checkpoint file")->required();
  train_gen->add_option("--resume", tg_resume,
                        "checkpoint to continue training from");
  train_gen->add_option("--steps", tg_steps,
                        "total training steps (overrides train.steps)");

  // train-rec
  auto* train_rec = app.add_subcommand(
      "train-rec", "train the recurrent refiner on top of a frozen generator");
  std::string tr_data, tr_gen, tr_out, tr_resume;
  int tr_steps = -1;
  train_rec->add_option("--data", tr_data, "dataset directory")->required();
  train_rec->add_option("--gen", tr_gen, "generator checkpoint");
  train_rec->add_option("--out", tr_out, "output checkpoint file")->required();
  train_rec->add_option("--resume", tr_resume,
                        "checkpoint to continue training from");
  train_rec->add_option("--steps", tr_steps,
                        "total training steps (overrides train.steps)");

  // synth
  auto* synth = app.add_subcommand(
      "synth", "synthesize frames from a keyframe and an event stream");
  std::string sy_key, sy_events, sy_ckpt, sy_out;
  int sy_steps = 6;
  uint64_t sy_period = 10'000'000;
  bool sy_g_only = false, sy_no_recycle = false;
  synth->add_option("--keyframe", sy_key, "key frame image (PNM)")->required();
  synth->add_option("--events", sy_events, "EVT1 event stream")->required();
  synth->add_option("--ckpt", sy_ckpt, "trained checkpoint")->required();
  synth->add_option("--out", sy_out, "output directory")->required();
  synth->add_option("--steps", sy_steps, "frames to synthesize per keyframe");
  synth->add_option("--period-ns", sy_period,
                    "accumulation window length in nanoseconds");
  synth->add_flag("--g-only", sy_g_only,
                  "ignore refiner parameters even if present");
  synth->add_flag("--no-recycle-refined", sy_no_recycle,
                  "condition each step on the raw generator output instead of "
                  "the refined frame");

  // eval
  auto* eval = app.add_subcommand(
      "eval", "compare predicted frames against ground truth");
  std::string ev_pred, ev_gt, ev_out = ".";
  eval->add_option("--pred", ev_pred, "directory of predicted frames")
      ->required();
  eval->add_option("--gt", ev_gt, "directory of ground-truth frames")
      ->required();
  eval->add_option("--out", ev_out,
                   "directory for metrics.txt and curves.csv (default: cwd)");

  // gradcheck
  app.add_subcommand("gradcheck",
                     "finite-difference check of every differentiable op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    resolve_seed(cfg, seed_opt->count() > 0, seed_flag);

    if (toygen->parsed()) {
      if (toygen_sequences > 0) cfg.scene.sequence_count = toygen_sequences;
      if (toygen_frames > 0) cfg.scene.frame_count = toygen_frames;
      ToygenResult r = cmd_toygen(toygen_out, cfg);
      std::printf("wrote %zu sequences under %s\n", r.sequence_dirs.size(),
                  toygen_out.c_str());
    } else if (simulate->parsed()) {
      size_t n = cmd_simulate(sim_frames, sim_out, cfg, sim_period);
      std::printf("wrote %zu events to %s\n", n, sim_out.c_str());
    } else if (accumulate->parsed()) {
      size_t n = cmd_accumulate(acc_events, acc_out, cfg, acc_period);
      std::printf("wrote %zu windows under %s\n", n, acc_out.c_str());
    } else if (train_gen->parsed()) {
      if (tg_steps >= 0) cfg.train.steps = tg_steps;
      TrainGenResult r = cmd_train_gen(tg_data, tg_out, cfg, tg_resume);
      std::printf("generator: %zu steps, final g_loss %.6f; checkpoint %s\n",
                  r.g_loss.size(), r.g_loss.empty() ? 0.0 : r.g_loss.back(),
                  tg_out.c_str());
    } else if (train_rec->parsed()) {
      if (tr_steps >= 0) cfg.train.steps = tr_steps;
      if (tr_gen.empty() && tr_resume.empty())
        throw ConfigError("train-rec: need --gen or --resume");
      TrainRecResult r =
          cmd_train_rec(tr_data, tr_gen, tr_out, cfg, tr_resume);
      std::printf("refiner: %zu steps, final r_loss %.6f; checkpoint %s\n",
                  r.r_loss.size(), r.r_loss.empty() ? 0.0 : r.r_loss.back(),
                  tr_out.c_str());
    } else if (synth->parsed()) {
      SynthResult r = cmd_synth(sy_key, sy_events, sy_ckpt, sy_out, sy_steps,
                                cfg, sy_period, sy_g_only, !sy_no_recycle);
      std::printf("wrote %zu frames under %s\n", r.frame_files.size(),
                  sy_out.c_str());
    } else if (eval->parsed()) {
      SequenceEvaluation e = cmd_eval(ev_pred, ev_gt, ev_out);
      std::fputs(format_report(e.report).c_str(), stdout);
      std::printf("wrote metrics.txt and curves.csv under %s\n",
                  ev_out.c_str());
    } else {  // gradcheck
      return run_gradcheck_cmd(cfg.train.seed);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
