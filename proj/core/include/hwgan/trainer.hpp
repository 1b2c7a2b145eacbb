#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwgan/checkpoint.hpp"
#include "hwgan/dataset.hpp"
#include "hwgan/discriminator.hpp"
#include "hwgan/generator.hpp"
#include "hwgan/psf.hpp"

namespace hwgan {

// Production scalar type. Checkpoints store f32 payloads, so float-backed
// models round-trip bit-exactly.
using Scalar = float;

enum class TrainMode { kPrediction, kSynthesis };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::kPrediction;
  uint64_t seed = 0;
  long steps = 1000;
  int batch_size = 8;

  double lr_g = 0.001;
  double lr_d = 0.001;
  double decay_factor = 0.97;
  long decay_interval = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  double label_smoothing = 0.1;
  double train_bias = 0.0;  // sampling bias while training (unbiased default)
  double baseline_momentum = 0.9;

  int max_len = 800;     // training sequence truncation
  int max_points = 400;  // prediction-mode sampling cap
  int points_per_char = 25;

  double psf_step = 2.0;
  std::vector<int> width_buckets = {256, 512, 768, 1024};

  double validation_fraction = 0.05;
  uint64_t split_seed = 0;

  long checkpoint_interval = 500;
  long sample_interval = 0;  // 0 disables periodic sample dumps
  int sample_dump_count = 4;

  PredictionConfig prediction;
  SynthesisConfig synthesis;
  DiscriminatorConfig discriminator;

  PsfConfig psf() const {
    PsfConfig cfg = PsfConfig::with_step(psf_step);
    cfg.width_buckets = width_buckets;
    return cfg;
  }

  double lr_at(double base, long step) const {
    const long exponent = decay_interval > 0 ? step / decay_interval : 0;
    return base * std::pow(decay_factor, static_cast<double>(exponent));
  }
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// --- adversarial pieces ------------------------------------------------------

struct FakeBatch {
  std::vector<SampleResult> sequences;
  std::vector<PsfRaster> rasters;
  std::vector<TextEncoding> texts;  // only for synthesis mode
};

// Samples count sequences, runs each through the feature pipeline (widths
// snapped to the configured buckets) and keeps the per-sequence log
// probabilities for the policy-gradient update.
FakeBatch make_fake_batch(const PredictionNet<Scalar>& net,
                          const TrainConfig& config, int count, Rng& rng);
FakeBatch make_fake_batch(const SynthesisNet<Scalar>& net,
                          const TrainConfig& config,
                          const std::vector<std::string>& texts, Rng& rng);

// Feature raster for training: scaled to the canvas height, squeezed
// horizontally into the largest width bucket when necessary, then run through
// the standard pipeline with bucket-snapped widths.
PsfRaster rasterize_for_training(const HandwritingSample& sample,
                                 const TrainConfig& config);

// One supervised discriminator update on bucket-matched rasters (one-sided
// label smoothing, real label 1). Throws ContractError when a raster width is
// not in the configured bucket set.
DiscriminatorMetrics d_adv_step(Discriminator<Scalar>& disc,
                                const std::vector<PsfRaster>& real,
                                const std::vector<PsfRaster>& fake,
                                const TrainConfig& config,
                                nn::Adam<Scalar>& opt, double lr,
                                long step_index = -1);

struct GeneratorStepMetrics {
  double reward_mean = 0.0;
  double baseline = 0.0;
  double grad_norm = 0.0;  // after rescaling; 1 unless the step was skipped
  double mean_nll = 0.0;
  bool stepped = false;
};

// Running-mean reward baseline for the score-function update.
struct RewardBaseline {
  double value = 0.0;
  bool initialized = false;
};

// Score-function (likelihood-ratio) generator update: replays the sampled
// sequences teacher-forced, weights each sequence's log-likelihood gradient
// by (reward - baseline), rescales the full gradient to unit norm, then takes
// one Adam step.
GeneratorStepMetrics g_adv_step(PredictionNet<Scalar>& net,
                                const Discriminator<Scalar>& disc,
                                const FakeBatch& fakes, const TrainConfig& config,
                                nn::Adam<Scalar>& opt, double lr,
                                RewardBaseline& baseline, long step_index = -1);
GeneratorStepMetrics g_adv_step(SynthesisNet<Scalar>& net,
                                const Discriminator<Scalar>& disc,
                                const FakeBatch& fakes, const TrainConfig& config,
                                nn::Adam<Scalar>& opt, double lr,
                                RewardBaseline& baseline, long step_index = -1);

// --- loops -------------------------------------------------------------------

struct GanStepRecord {
  long step = 0;
  double d_loss = 0.0;
  double g_reward_mean = 0.0;
  double d_acc_real = 0.0;
  double d_acc_fake = 0.0;
  double lr_g = 0.0;
  double lr_d = 0.0;
  double g_grad_norm = 0.0;
};

struct GanResult {
  long steps_run = 0;
  std::string final_checkpoint;
  std::vector<GanStepRecord> history;
};

// Alternating discriminator/generator training. Requires a pretrained
// generator checkpoint unless resuming. Writes metrics.jsonl, periodic and
// final checkpoints, and optional sample dumps under out_dir. On divergence
// a halt checkpoint is written and the error rethrown.
GanResult gan_loop(const TrainConfig& config,
                   const std::vector<HandwritingSample>& train_samples,
                   const std::string& out_dir,
                   const std::string& generator_init_checkpoint,
                   const std::string& resume_checkpoint = "");

struct PretrainResult {
  long steps_run = 0;
  std::string final_checkpoint;
  double first_nll = 0.0;
  double last_nll = 0.0;
};

// Maximum-likelihood pretraining of the configured generator. Writes
// pretrain-metrics.jsonl and checkpoints under out_dir.
PretrainResult pretrain_loop(const TrainConfig& config,
                             const std::vector<HandwritingSample>& train_samples,
                             const std::string& out_dir,
                             const std::string& resume_checkpoint = "");

}  // namespace hwgan
