#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "evsynth/event_ops.hpp"
#include "evsynth/gradcheck.hpp"
#include "evsynth/metrics.hpp"
#include "evsynth/models.hpp"
#include "evsynth/tensor.hpp"
#include "evsynth/toygen.hpp"
#include "evsynth/train.hpp"

namespace evsynth {

// Where training examples get their event planes from:
//   accumulated - decode the EVT1 stream and sum polarities per window;
//   log_diff    - recompute quantized log-brightness differences from the
//                 stored frames.
// Toy datasets make both paths numerically identical by construction, but
// they exercise different code and, for foreign data, different physics.
enum class EventSource { accumulated, log_diff };

// ---- configuration ---------------------------------------------------------

// Every tunable of the pipeline in one flat structure, settable from a
// key=value config file with dotted keys (e.g. train.lr=0.0002).
struct PipelineConfig {
  ToySceneConfig scene;     // toy.* keys
  UNetConfig gen;           // gen.* keys
  DiscConfig disc;          // disc.* keys
  RefinerConfig refiner;    // refiner.* keys
  TrainConfig train;        // train.* keys
  float sim_eps = kDefaultLogEps;              // sim.eps
  float sim_contrast_clip = kDefaultContrastClip;  // sim.contrast_clip
  int sim_levels = kDefaultLevels;             // sim.levels
  int sat = kDefaultSaturation;                // sim.sat
  EventSource event_source = EventSource::log_diff;  // data.event_source
};

// Applies one dotted key. Unknown keys and unparsable values raise
// ConfigError naming the key.
void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value);
// Parses flat key=value text ('#' comments, blank lines allowed).
void apply_config_text(PipelineConfig& cfg, const std::string& text);
// Reads and applies a config file.
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

// Ensures the model/scene combination is coherent (resolution divisible by
// 2^depth, channel counts matching, weights within documented ranges).
void validate_pipeline_config(const PipelineConfig& cfg);

// ---- datasets --------------------------------------------------------------

// One loaded sequence as tensors: n frames, n-1 normalized event planes.
struct SequenceTensors {
  std::vector<Tensor> frames;  // [C,H,W] each, values in [0,1]
  std::vector<Tensor> planes;  // [1,H,W] each, values in [-1,1]
};

// Scans dir for seq_*/manifest.txt (sorted), loads every sequence and
// converts to tensors using the configured event source.
std::vector<SequenceTensors> load_dataset(const std::filesystem::path& dir,
                                          const PipelineConfig& cfg);

// Views over loaded sequences (tensors are shared, not copied):
// every consecutive (frame, plane, next frame) triple.
std::vector<GenSample> make_gen_samples(std::span<const SequenceTensors> seqs);
// One sample per sequence: the keyframe plus the first sequence_length steps.
std::vector<SeqSample> make_seq_samples(std::span<const SequenceTensors> seqs,
                                        int sequence_length);

// ---- synthesis -------------------------------------------------------------

// Synthesizes one frame per event plane starting from a keyframe [C,H,W]:
// raw_i = G(prev (+) plane_i). With a refiner, each raw frame is refined with
// LSTM state threaded across steps and the refined frame becomes the next
// conditioning input (the raw frame instead when recycle_refined is false).
// Returns the refined frames when a refiner is given, else the raw frames.
std::vector<Tensor> synth_sequence(const Tensor& keyframe,
                                   std::span<const Tensor> planes,
                                   const Generator& gen,
                                   const Refiner* refiner = nullptr,
                                   bool recycle_refined = true);

// ---- commands --------------------------------------------------------------
// Shared by the CLI and by tests so both run the exact same code paths. All
// throw on failure (FormatError/IoError/DataError for bad inputs,
// NumericError for numeric failures).

struct ToygenResult {
  std::vector<std::filesystem::path> sequence_dirs;
};
ToygenResult cmd_toygen(const std::filesystem::path& out_dir,
                        const PipelineConfig& cfg);

// Frames directory (sorted *.ppm/*.pgm) -> EVT1 stream.
size_t cmd_simulate(const std::filesystem::path& frames_dir,
                    const std::filesystem::path& out_file,
                    const PipelineConfig& cfg, uint64_t period_ns);

// EVT1 stream -> one PGM per accumulation window (window_000.pgm ..), plus
// the count of windows written. Event counts map to gray levels as
// (count + sat) on the 0..255 scale, so "no events" is mid-gray 127.
size_t cmd_accumulate(const std::filesystem::path& events_file,
                      const std::filesystem::path& out_dir,
                      const PipelineConfig& cfg, uint64_t period_ns);

struct TrainGenResult {
  std::vector<double> g_loss;
  std::vector<double> d_loss;
};
TrainGenResult cmd_train_gen(const std::filesystem::path& data_dir,
                             const std::filesystem::path& out_checkpoint,
                             const PipelineConfig& cfg,
                             const std::filesystem::path& resume_from = {});

struct TrainRecResult {
  std::vector<double> r_loss;
};
TrainRecResult cmd_train_rec(const std::filesystem::path& data_dir,
                             const std::filesystem::path& gen_checkpoint,
                             const std::filesystem::path& out_checkpoint,
                             const PipelineConfig& cfg,
                             const std::filesystem::path& resume_from = {});

struct SynthResult {
  std::vector<std::filesystem::path> frame_files;  // frame_001.ppm ..
};
SynthResult cmd_synth(const std::filesystem::path& keyframe_file,
                      const std::filesystem::path& events_file,
                      const std::filesystem::path& checkpoint_file,
                      const std::filesystem::path& out_dir, int steps,
                      const PipelineConfig& cfg, uint64_t period_ns,
                      bool g_only = false, bool recycle_refined = true);

SequenceEvaluation cmd_eval(const std::filesystem::path& pred_dir,
                            const std::filesystem::path& gt_dir,
                            const std::filesystem::path& out_dir);

GradCheckSummary cmd_gradcheck(uint64_t seed);

// ---- checkpoint layout -----------------------------------------------------
// Generator training writes gen/, disc/, adam_g/, adam_d/ and meta/ entries;
// refiner training copies gen/ through and adds rec/, adam_r/, meta/.
// has_refiner_params says whether rec/ entries are present.
bool checkpoint_has_refiner(const std::filesystem::path& checkpoint_file);

}  // namespace evsynth
