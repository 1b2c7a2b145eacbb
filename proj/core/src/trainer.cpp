#include "hwgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "hwgan/error.hpp"

namespace fs = std::filesystem;

namespace hwgan {

std::string to_string(TrainMode mode) {
  return mode == TrainMode::kPrediction ? "prediction" : "synthesis";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "prediction") return TrainMode::kPrediction;
  if (name == "synthesis") return TrainMode::kSynthesis;
  throw ConfigError("unknown mode \"" + name +
                    "\" (expected prediction or synthesis)");
}

// --- config serialization ------------------------------------------------------

namespace {

nlohmann::json stack_to_json(const std::vector<nn::ConvSpec>& stack) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : stack) {
    if (s.op == nn::ConvSpec::Op::kPool)
      out.push_back({{"op", "pool"}});
    else
      out.push_back({{"op", "conv"},
                     {"channels", s.out_channels},
                     {"stride_w", s.stride_w},
                     {"stride_h", s.stride_h}});
  }
  return out;
}

std::vector<nn::ConvSpec> stack_from_json(const nlohmann::json& j) {
  std::vector<nn::ConvSpec> stack;
  for (const auto& item : j) {
    const std::string op = item.at("op").get<std::string>();
    if (op == "pool") {
      stack.push_back(nn::ConvSpec::pool());
    } else if (op == "conv") {
      stack.push_back(nn::ConvSpec::conv(item.at("channels").get<int>(),
                                         item.value("stride_w", 1),
                                         item.value("stride_h", 1)));
    } else {
      throw ConfigError("unknown conv stack op \"" + op + "\"");
    }
  }
  return stack;
}

}  // namespace

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["lr_g"] = c.lr_g;
  j["lr_d"] = c.lr_d;
  j["decay_factor"] = c.decay_factor;
  j["decay_interval"] = c.decay_interval;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["label_smoothing"] = c.label_smoothing;
  j["train_bias"] = c.train_bias;
  j["baseline_momentum"] = c.baseline_momentum;
  j["max_len"] = c.max_len;
  j["max_points"] = c.max_points;
  j["points_per_char"] = c.points_per_char;
  j["psf_step"] = c.psf_step;
  j["width_buckets"] = c.width_buckets;
  j["validation_fraction"] = c.validation_fraction;
  j["split_seed"] = c.split_seed;
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["sample_interval"] = c.sample_interval;
  j["sample_dump_count"] = c.sample_dump_count;
  j["mixture_components"] = c.prediction.mixture_components;
  j["window_components"] = c.synthesis.window_components;
  j["gp_hidden"] = {c.prediction.hidden1, c.prediction.hidden2,
                    c.prediction.hidden3};
  j["gs_hidden"] = {c.synthesis.hidden1, c.synthesis.hidden2};
  j["disc_stack"] = stack_to_json(c.discriminator.stack);
  j["disc_lstm_hidden"] = c.discriminator.lstm_hidden;
  j["disc_fc1"] = c.discriminator.fc1_out;
  j["disc_in_height"] = c.discriminator.in_height;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("mode")) c.mode = parse_train_mode(j["mode"]);
    c.seed = j.value("seed", c.seed);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_g = j.value("lr_g", c.lr_g);
    c.lr_d = j.value("lr_d", c.lr_d);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.decay_interval = j.value("decay_interval", c.decay_interval);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
    c.train_bias = j.value("train_bias", c.train_bias);
    c.baseline_momentum = j.value("baseline_momentum", c.baseline_momentum);
    c.max_len = j.value("max_len", c.max_len);
    c.max_points = j.value("max_points", c.max_points);
    c.points_per_char = j.value("points_per_char", c.points_per_char);
    c.psf_step = j.value("psf_step", c.psf_step);
    if (j.contains("width_buckets"))
      c.width_buckets = j["width_buckets"].get<std::vector<int>>();
    c.validation_fraction =
        j.value("validation_fraction", c.validation_fraction);
    c.split_seed = j.value("split_seed", c.split_seed);
    c.checkpoint_interval =
        j.value("checkpoint_interval", c.checkpoint_interval);
    c.sample_interval = j.value("sample_interval", c.sample_interval);
    c.sample_dump_count = j.value("sample_dump_count", c.sample_dump_count);
    const int mixture =
        j.value("mixture_components", c.prediction.mixture_components);
    c.prediction.mixture_components = mixture;
    c.synthesis.mixture_components = mixture;
    c.synthesis.window_components =
        j.value("window_components", c.synthesis.window_components);
    if (j.contains("gp_hidden")) {
      const auto h = j["gp_hidden"].get<std::vector<int>>();
      if (h.size() != 3) throw ConfigError("gp_hidden needs three sizes");
      c.prediction.hidden1 = h[0];
      c.prediction.hidden2 = h[1];
      c.prediction.hidden3 = h[2];
    }
    if (j.contains("gs_hidden")) {
      const auto h = j["gs_hidden"].get<std::vector<int>>();
      if (h.size() != 2) throw ConfigError("gs_hidden needs two sizes");
      c.synthesis.hidden1 = h[0];
      c.synthesis.hidden2 = h[1];
    }
    if (j.contains("disc_stack"))
      c.discriminator.stack = stack_from_json(j["disc_stack"]);
    c.discriminator.lstm_hidden =
        j.value("disc_lstm_hidden", c.discriminator.lstm_hidden);
    c.discriminator.fc1_out = j.value("disc_fc1", c.discriminator.fc1_out);
    c.discriminator.in_height =
        j.value("disc_in_height", c.discriminator.in_height);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  if (c.lr_g <= 0.0 || c.lr_d <= 0.0)
    throw ConfigError("learning rates must be positive");
  if (c.decay_factor <= 0.0 || c.decay_factor > 1.0)
    throw ConfigError("decay factor must be in (0, 1]");
  for (int w : c.width_buckets)
    if (w <= 0 || w % 16 != 0)
      throw ConfigError("width buckets must be positive multiples of 16");
  return c;
}

// --- rasterization for training -------------------------------------------------

PsfRaster rasterize_for_training(const HandwritingSample& sample,
                                 const TrainConfig& config) {
  const PsfConfig cfg = config.psf();
  HandwritingSample scaled =
      scale_to_height(sample, static_cast<double>(cfg.height));
  if (!cfg.width_buckets.empty()) {
    const int top =
        *std::max_element(cfg.width_buckets.begin(), cfg.width_buckets.end());
    const auto box = bounding_box(scaled);
    if (box.width() > static_cast<double>(top)) {
      const double squeeze = static_cast<double>(top) / box.width();
      for (auto& stroke : scaled.strokes)
        for (auto& p : stroke.points) p.x *= squeeze;
    }
  }
  const auto resampled = resample_uniform(scaled, cfg.resample_step);
  return normalize_psf(rasterize_psf(resampled, cfg), cfg.norm_scale);
}

// --- fake batches ---------------------------------------------------------------

namespace {

SamplerConfig sampler_config(const TrainConfig& config) {
  SamplerConfig s;
  s.bias = config.train_bias;
  s.max_points = config.max_points;
  s.points_per_char = config.points_per_char;
  return s;
}

}  // namespace

FakeBatch make_fake_batch(const PredictionNet<Scalar>& net,
                          const TrainConfig& config, int count, Rng& rng) {
  if (count < 1) throw InvalidArgumentError("make_fake_batch: count must be >= 1");
  FakeBatch batch;
  const SamplerConfig scfg = sampler_config(config);
  for (int i = 0; i < count; ++i) {
    batch.sequences.push_back(sample_sequence(net, scfg, rng));
    batch.rasters.push_back(
        rasterize_for_training(batch.sequences.back().sample, config));
  }
  return batch;
}

FakeBatch make_fake_batch(const SynthesisNet<Scalar>& net,
                          const TrainConfig& config,
                          const std::vector<std::string>& texts, Rng& rng) {
  if (texts.empty())
    throw InvalidArgumentError("make_fake_batch: texts must be non-empty");
  FakeBatch batch;
  const SamplerConfig scfg = sampler_config(config);
  const Vocabulary vocab;
  for (const auto& text : texts) {
    batch.texts.push_back(encode_text(text, vocab));
    batch.sequences.push_back(
        sample_sequence(net, batch.texts.back(), scfg, rng));
    batch.rasters.push_back(
        rasterize_for_training(batch.sequences.back().sample, config));
  }
  return batch;
}

// --- adversarial steps ----------------------------------------------------------

namespace {

void check_buckets(const std::vector<PsfRaster>& rasters,
                   const TrainConfig& config, const char* what) {
  if (config.width_buckets.empty()) return;
  for (const auto& r : rasters)
    if (std::find(config.width_buckets.begin(), config.width_buckets.end(),
                  r.width) == config.width_buckets.end())
      throw ContractError(std::string(what) + ": raster width " +
                          std::to_string(r.width) +
                          " is not in the configured buckets");
}

}  // namespace

DiscriminatorMetrics d_adv_step(Discriminator<Scalar>& disc,
                                const std::vector<PsfRaster>& real,
                                const std::vector<PsfRaster>& fake,
                                const TrainConfig& config,
                                nn::Adam<Scalar>& opt, double lr,
                                long step_index) {
  if (real.empty() || fake.empty())
    throw InvalidArgumentError("d_adv_step: batches must be non-empty");
  check_buckets(real, config, "d_adv_step(real)");
  check_buckets(fake, config, "d_adv_step(fake)");
  std::vector<nn::Tensor3<Scalar>> real_t, fake_t;
  real_t.reserve(real.size());
  fake_t.reserve(fake.size());
  for (const auto& r : real) real_t.push_back(to_tensor<Scalar>(r));
  for (const auto& r : fake) fake_t.push_back(to_tensor<Scalar>(r));
  return d_train_step(disc, real_t, fake_t, opt, lr, config.label_smoothing,
                      step_index);
}

namespace {

template <typename Net>
GeneratorStepMetrics g_adv_step_impl(Net& net, const Discriminator<Scalar>& disc,
                                     const FakeBatch& fakes,
                                     const TrainConfig& config,
                                     nn::Adam<Scalar>& opt, double lr,
                                     RewardBaseline& baseline, long step_index) {
  const std::size_t batch = fakes.sequences.size();
  if (batch == 0 || fakes.rasters.size() != batch)
    throw InvalidArgumentError("g_adv_step: empty or inconsistent fake batch");

  GeneratorStepMetrics metrics;
  std::vector<double> rewards(batch);
  double reward_sum = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    rewards[i] = disc.forward_prob(fakes.rasters[i]);
    reward_sum += rewards[i];
  }
  const double reward_mean = reward_sum / static_cast<double>(batch);
  const double used_baseline =
      baseline.initialized ? baseline.value : reward_mean;
  baseline.value = baseline.initialized
                       ? config.baseline_momentum * baseline.value +
                             (1.0 - config.baseline_momentum) * reward_mean
                       : reward_mean;
  baseline.initialized = true;

  std::vector<std::vector<OffsetPoint>> seqs;
  seqs.reserve(batch);
  for (const auto& s : fakes.sequences) seqs.push_back(s.offsets);
  const auto data = build_teacher_data<Scalar>(seqs);

  std::vector<double> weights(batch);
  for (std::size_t i = 0; i < batch; ++i)
    weights[i] = (rewards[i] - used_baseline) / static_cast<double>(batch);

  nn::zero_grads(opt.params());
  typename Net::Cache cache;
  std::vector<nn::Mat<Scalar>> raws;
  std::vector<nn::Mat<Scalar>> text_mats;
  if constexpr (std::is_same_v<Net, SynthesisNet<Scalar>>) {
    for (const auto& t : fakes.texts)
      text_mats.push_back(text_matrix<Scalar>(t));
    raws = net.forward_train(data.inputs, text_mats, cache);
  } else {
    raws = net.forward_train(data.inputs, cache);
  }
  std::vector<nn::Mat<Scalar>> draws;
  const double total_nll = mdn_sequence_draws<Scalar>(
      raws, data, net.config().mixture_components, weights, &draws);
  if constexpr (std::is_same_v<Net, SynthesisNet<Scalar>>)
    net.backward_train(cache, text_mats, draws);
  else
    net.backward_train(cache, draws);

  if (!std::isfinite(total_nll) || !nn::grads_finite(opt.params()))
    throw DivergenceError("g_adv_step: non-finite gradient", step_index);

  const double norm = nn::global_grad_norm(opt.params());
  if (norm > 0.0) {
    // Unit-norm rescale: the step size is set entirely by the learning rate.
    nn::scale_grads(opt.params(), 1.0 / norm);
    opt.step(lr);
    metrics.stepped = true;
    metrics.grad_norm = nn::global_grad_norm(opt.params());
  }
  metrics.reward_mean = reward_mean;
  metrics.baseline = used_baseline;
  metrics.mean_nll = total_nll / static_cast<double>(data.total_steps);
  return metrics;
}

}  // namespace

GeneratorStepMetrics g_adv_step(PredictionNet<Scalar>& net,
                                const Discriminator<Scalar>& disc,
                                const FakeBatch& fakes, const TrainConfig& config,
                                nn::Adam<Scalar>& opt, double lr,
                                RewardBaseline& baseline, long step_index) {
  return g_adv_step_impl(net, disc, fakes, config, opt, lr, baseline,
                         step_index);
}

GeneratorStepMetrics g_adv_step(SynthesisNet<Scalar>& net,
                                const Discriminator<Scalar>& disc,
                                const FakeBatch& fakes, const TrainConfig& config,
                                nn::Adam<Scalar>& opt, double lr,
                                RewardBaseline& baseline, long step_index) {
  return g_adv_step_impl(net, disc, fakes, config, opt, lr, baseline,
                         step_index);
}

// --- checkpoint plumbing --------------------------------------------------------

namespace {

constexpr uint64_t kSampleRngSalt = 0x9d2c5680aull;
constexpr uint64_t kDumpRngSalt = 0xefc60000full;

// Bit-exact double round trip for checkpoint state strings.
std::string double_bits(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return std::to_string(bits);
}

double double_from_bits(const std::string& s) {
  const uint64_t bits = std::stoull(s);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

struct TrainerState {
  std::vector<nn::Param<float>*> model_params;
  nn::Adam<float>* opt_g = nullptr;
  nn::Adam<float>* opt_d = nullptr;
  Rng* sample_rng = nullptr;
  Rng* dump_rng = nullptr;
  BatchStream* stream = nullptr;
  RewardBaseline* baseline = nullptr;
};

void append_adam_entries(std::vector<CheckpointEntry>& entries,
                         const char* prefix, nn::Adam<float>& opt) {
  const auto& params = opt.params();
  auto& m = opt.first_moments();
  auto& v = opt.second_moments();
  for (std::size_t k = 0; k < params.size(); ++k) {
    entries.push_back({std::string(prefix) + "/" + params[k]->name + "/m",
                       m[k].rows(), m[k].cols(), m[k].data()});
    entries.push_back({std::string(prefix) + "/" + params[k]->name + "/v",
                       v[k].rows(), v[k].cols(), v[k].data()});
  }
}

void restore_adam(const Checkpoint& ckpt, const char* prefix,
                  nn::Adam<float>& opt, const char* t_key) {
  const auto& params = opt.params();
  auto& m = opt.first_moments();
  auto& v = opt.second_moments();
  for (std::size_t k = 0; k < params.size(); ++k) {
    ckpt.load_into(std::string(prefix) + "/" + params[k]->name + "/m", m[k]);
    ckpt.load_into(std::string(prefix) + "/" + params[k]->name + "/v", v[k]);
  }
  const auto it = ckpt.meta.rng_states.find(t_key);
  if (it == ckpt.meta.rng_states.end())
    throw CheckpointError(std::string("checkpoint missing optimizer state ") +
                          t_key);
  opt.set_step_count(std::stol(it->second));
}

void save_trainer_checkpoint(const std::string& path, const TrainConfig& config,
                             long step, const TrainerState& st) {
  CheckpointMeta meta;
  meta.step = step;
  meta.config = to_json(config);
  meta.rng_states["sample"] = st.sample_rng->serialize();
  if (st.dump_rng) meta.rng_states["dump"] = st.dump_rng->serialize();
  if (st.stream) {
    meta.rng_states["data_epoch"] = std::to_string(st.stream->epoch());
    meta.rng_states["data_cursor"] = std::to_string(st.stream->cursor());
  }
  if (st.opt_g)
    meta.rng_states["opt_g_t"] = std::to_string(st.opt_g->step_count());
  if (st.opt_d)
    meta.rng_states["opt_d_t"] = std::to_string(st.opt_d->step_count());
  if (st.baseline) {
    meta.rng_states["baseline"] = double_bits(st.baseline->value);
    meta.rng_states["baseline_init"] =
        st.baseline->initialized ? "1" : "0";
  }

  auto entries = checkpoint_entries(st.model_params);
  if (st.opt_g) append_adam_entries(entries, "opt_g", *st.opt_g);
  if (st.opt_d) append_adam_entries(entries, "opt_d", *st.opt_d);
  save_checkpoint(path, meta, entries);
}

std::string state_or_throw(const Checkpoint& ckpt, const std::string& key) {
  const auto it = ckpt.meta.rng_states.find(key);
  if (it == ckpt.meta.rng_states.end())
    throw CheckpointError("checkpoint missing state \"" + key + "\"");
  return it->second;
}

void append_jsonl(std::ofstream& out, const nlohmann::json& j) {
  out << j.dump() << '\n';
  out.flush();
}

}  // namespace

// --- training loops -------------------------------------------------------------

namespace {

template <typename Net>
struct NetTraits;

template <>
struct NetTraits<PredictionNet<Scalar>> {
  static PredictionNet<Scalar> make(const TrainConfig& c, Rng& rng) {
    return PredictionNet<Scalar>(c.prediction, rng);
  }
  static bool needs_text() { return false; }
};

template <>
struct NetTraits<SynthesisNet<Scalar>> {
  static SynthesisNet<Scalar> make(const TrainConfig& c, Rng& rng) {
    return SynthesisNet<Scalar>(c.synthesis, rng);
  }
  static bool needs_text() { return true; }
};

template <typename Net>
std::vector<HandwritingSample> usable_samples(
    const std::vector<HandwritingSample>& samples) {
  std::vector<HandwritingSample> out;
  for (const auto& s : samples) {
    if (point_count(s) < 2) continue;
    if (NetTraits<Net>::needs_text() && s.text.empty()) continue;
    out.push_back(s);
  }
  if (out.empty())
    throw InvalidArgumentError("training: no usable samples for this mode");
  return out;
}

template <typename Net>
FakeBatch fake_batch_for(const Net& net, const TrainConfig& config,
                         const Batch& real_batch, Rng& rng) {
  if constexpr (std::is_same_v<Net, SynthesisNet<Scalar>>)
    return make_fake_batch(net, config, real_batch.texts, rng);
  else
    return make_fake_batch(net, config,
                           static_cast<int>(real_batch.offsets.size()), rng);
}

template <typename Net>
void dump_samples(const Net& net, const TrainConfig& config,
                  const std::vector<std::string>& texts, Rng& rng,
                  const std::string& path) {
  std::vector<HandwritingSample> dumped;
  const SamplerConfig scfg = sampler_config(config);
  const Vocabulary vocab;
  for (int i = 0; i < config.sample_dump_count; ++i) {
    if constexpr (std::is_same_v<Net, SynthesisNet<Scalar>>) {
      const auto& text = texts[static_cast<std::size_t>(i) % texts.size()];
      auto r = sample_sequence(net, encode_text(text, vocab), scfg, rng);
      r.sample.text = text;
      dumped.push_back(std::move(r.sample));
    } else {
      dumped.push_back(sample_sequence(net, scfg, rng).sample);
    }
  }
  write_interchange_file(path, dumped);
}

template <typename Net>
GanResult gan_loop_impl(const TrainConfig& config,
                        const std::vector<HandwritingSample>& train_samples,
                        const std::string& out_dir,
                        const std::string& generator_init_checkpoint,
                        const std::string& resume_checkpoint) {
  fs::create_directories(out_dir);
  const auto usable = usable_samples<Net>(train_samples);

  Rng init_rng(config.seed);
  Net net = NetTraits<Net>::make(config, init_rng);
  Discriminator<Scalar> disc(config.discriminator, init_rng);
  nn::Adam<Scalar> opt_g(net.params(), config.adam_beta1, config.adam_beta2,
                         config.adam_eps);
  nn::Adam<Scalar> opt_d(disc.params(), config.adam_beta1, config.adam_beta2,
                         config.adam_eps);
  BatchStream stream(usable, config.batch_size, config.max_len, config.seed);
  Rng sample_rng(config.seed ^ kSampleRngSalt);
  Rng dump_rng(config.seed ^ kDumpRngSalt);
  RewardBaseline baseline;
  long start_step = 0;

  TrainerState st;
  st.model_params = net.params();
  {
    auto d_params = disc.params();
    st.model_params.insert(st.model_params.end(), d_params.begin(),
                           d_params.end());
  }
  st.opt_g = &opt_g;
  st.opt_d = &opt_d;
  st.sample_rng = &sample_rng;
  st.dump_rng = &dump_rng;
  st.stream = &stream;
  st.baseline = &baseline;

  if (!resume_checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(resume_checkpoint);
    restore_params(ckpt, st.model_params);
    restore_adam(ckpt, "opt_g", opt_g, "opt_g_t");
    restore_adam(ckpt, "opt_d", opt_d, "opt_d_t");
    sample_rng = Rng::deserialize(state_or_throw(ckpt, "sample"));
    dump_rng = Rng::deserialize(state_or_throw(ckpt, "dump"));
    stream.restore(std::stoull(state_or_throw(ckpt, "data_epoch")),
                   std::stoull(state_or_throw(ckpt, "data_cursor")));
    baseline.value = double_from_bits(state_or_throw(ckpt, "baseline"));
    baseline.initialized = state_or_throw(ckpt, "baseline_init") == "1";
    start_step = ckpt.meta.step;
  } else {
    if (generator_init_checkpoint.empty())
      throw InvalidArgumentError(
          "gan_loop: a pretrained generator checkpoint is required");
    const Checkpoint ckpt = load_checkpoint(generator_init_checkpoint);
    restore_params(ckpt, net.params());
  }

  std::ofstream metrics(out_dir + "/metrics.jsonl",
                        resume_checkpoint.empty()
                            ? std::ios::trunc
                            : std::ios::app);
  if (!metrics)
    throw InvalidArgumentError("cannot open metrics log in " + out_dir);

  GanResult result;
  const std::string final_path = out_dir + "/ckpt-final.hwgn";
  long step = start_step;
  try {
    for (step = start_step + 1; step <= config.steps; ++step) {
      const Batch real_batch = stream.next();
      std::vector<PsfRaster> real_rasters;
      real_rasters.reserve(real_batch.offsets.size());
      for (const auto& offsets : real_batch.offsets)
        real_rasters.push_back(
            rasterize_for_training(from_offsets(offsets), config));

      const FakeBatch fakes = fake_batch_for(net, config, real_batch,
                                             sample_rng);
      const double lr_d = config.lr_at(config.lr_d, step);
      const double lr_g = config.lr_at(config.lr_g, step);
      const auto dm =
          d_adv_step(disc, real_rasters, fakes.rasters, config, opt_d, lr_d,
                     step);
      const auto gm =
          g_adv_step(net, disc, fakes, config, opt_g, lr_g, baseline, step);

      GanStepRecord record{step,         dm.loss, gm.reward_mean,
                           dm.accuracy_real, dm.accuracy_fake,
                           lr_g,         lr_d,    gm.grad_norm};
      result.history.push_back(record);
      append_jsonl(metrics, {{"step", step},
                             {"d_loss", dm.loss},
                             {"g_reward_mean", gm.reward_mean},
                             {"d_acc_real", dm.accuracy_real},
                             {"d_acc_fake", dm.accuracy_fake},
                             {"lr_g", lr_g},
                             {"lr_d", lr_d}});

      if (config.checkpoint_interval > 0 &&
          step % config.checkpoint_interval == 0 && step != config.steps)
        save_trainer_checkpoint(
            out_dir + "/ckpt-" + std::to_string(step) + ".hwgn", config, step,
            st);
      if (config.sample_interval > 0 && step % config.sample_interval == 0)
        dump_samples(net, config, real_batch.texts, dump_rng,
                     out_dir + "/samples-" + std::to_string(step) + ".jsonl");
    }
  } catch (const Error&) {
    save_trainer_checkpoint(out_dir + "/ckpt-halt.hwgn", config,
                            std::max(step - 1, start_step), st);
    throw;
  }

  save_trainer_checkpoint(final_path, config, config.steps, st);
  result.steps_run = config.steps - start_step;
  result.final_checkpoint = final_path;
  return result;
}

template <typename Net>
PretrainResult pretrain_loop_impl(
    const TrainConfig& config,
    const std::vector<HandwritingSample>& train_samples,
    const std::string& out_dir, const std::string& resume_checkpoint) {
  fs::create_directories(out_dir);
  const auto usable = usable_samples<Net>(train_samples);

  Rng init_rng(config.seed);
  Net net = NetTraits<Net>::make(config, init_rng);
  nn::Adam<Scalar> opt(net.params(), config.adam_beta1, config.adam_beta2,
                       config.adam_eps);
  BatchStream stream(usable, config.batch_size, config.max_len, config.seed);
  Rng sample_rng(config.seed ^ kSampleRngSalt);  // reserved for dumps
  long start_step = 0;

  TrainerState st;
  st.model_params = net.params();
  st.opt_g = &opt;
  st.sample_rng = &sample_rng;
  st.stream = &stream;

  if (!resume_checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(resume_checkpoint);
    restore_params(ckpt, st.model_params);
    restore_adam(ckpt, "opt_g", opt, "opt_g_t");
    sample_rng = Rng::deserialize(state_or_throw(ckpt, "sample"));
    stream.restore(std::stoull(state_or_throw(ckpt, "data_epoch")),
                   std::stoull(state_or_throw(ckpt, "data_cursor")));
    start_step = ckpt.meta.step;
  }

  std::ofstream metrics(out_dir + "/pretrain-metrics.jsonl",
                        resume_checkpoint.empty()
                            ? std::ios::trunc
                            : std::ios::app);
  if (!metrics)
    throw InvalidArgumentError("cannot open metrics log in " + out_dir);

  const Vocabulary vocab;
  PretrainResult result;
  const std::string final_path = out_dir + "/pretrain-final.hwgn";
  long step = start_step;
  try {
    for (step = start_step + 1; step <= config.steps; ++step) {
      const Batch batch = stream.next();
      const double lr = config.lr_at(config.lr_g, step);
      double nll = 0.0;
      if constexpr (std::is_same_v<Net, SynthesisNet<Scalar>>) {
        std::vector<TextEncoding> texts;
        texts.reserve(batch.texts.size());
        for (const auto& t : batch.texts) texts.push_back(encode_text(t, vocab));
        nll = pretrain_step(net, batch.offsets, texts, opt, lr, step);
      } else {
        nll = pretrain_step(net, batch.offsets, opt, lr, step);
      }
      if (step == start_step + 1) result.first_nll = nll;
      result.last_nll = nll;
      append_jsonl(metrics, {{"step", step}, {"nll", nll}, {"lr", lr}});
      if (config.checkpoint_interval > 0 &&
          step % config.checkpoint_interval == 0 && step != config.steps)
        save_trainer_checkpoint(
            out_dir + "/pretrain-" + std::to_string(step) + ".hwgn", config,
            step, st);
    }
  } catch (const Error&) {
    save_trainer_checkpoint(out_dir + "/pretrain-halt.hwgn", config,
                            std::max(step - 1, start_step), st);
    throw;
  }

  save_trainer_checkpoint(final_path, config, config.steps, st);
  result.steps_run = config.steps - start_step;
  result.final_checkpoint = final_path;
  return result;
}

}  // namespace

GanResult gan_loop(const TrainConfig& config,
                   const std::vector<HandwritingSample>& train_samples,
                   const std::string& out_dir,
                   const std::string& generator_init_checkpoint,
                   const std::string& resume_checkpoint) {
  if (config.mode == TrainMode::kSynthesis)
    return gan_loop_impl<SynthesisNet<Scalar>>(config, train_samples, out_dir,
                                               generator_init_checkpoint,
                                               resume_checkpoint);
  return gan_loop_impl<PredictionNet<Scalar>>(config, train_samples, out_dir,
                                              generator_init_checkpoint,
                                              resume_checkpoint);
}

PretrainResult pretrain_loop(const TrainConfig& config,
                             const std::vector<HandwritingSample>& train_samples,
                             const std::string& out_dir,
                             const std::string& resume_checkpoint) {
  if (config.mode == TrainMode::kSynthesis)
    return pretrain_loop_impl<SynthesisNet<Scalar>>(config, train_samples,
                                                    out_dir, resume_checkpoint);
  return pretrain_loop_impl<PredictionNet<Scalar>>(config, train_samples,
                                                   out_dir, resume_checkpoint);
}

}  // namespace hwgan
