// Command line front end: preprocess | pretrain | train-gan | sample | eval.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hwgan/dataset.hpp"
#include "hwgan/error.hpp"
#include "hwgan/eval.hpp"
#include "hwgan/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_cache_path() {
  if (const char* dir = std::getenv("HWGAN_CACHE_DIR"))
    return (fs::path(dir) / "iam-cache.jsonl").string();
  return "iam-cache.jsonl";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw hwgan::InvalidArgumentError("cannot write " + path);
  out << text;
}

// Flags that override the JSON config file when explicitly set.
struct TrainFlags {
  std::string mode = "prediction";
  std::string config_path;
  std::optional<long> steps;
  std::optional<uint64_t> seed;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<long> checkpoint_interval;

  hwgan::TrainConfig resolve() const {
    hwgan::TrainConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in)
        throw hwgan::InvalidArgumentError("cannot read config file: " +
                                          config_path);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw hwgan::ParseError("config file " + config_path + ": " +
                                e.what());
      }
      cfg = hwgan::train_config_from_json(j);
    }
    cfg.mode = hwgan::parse_train_mode(mode);
    if (steps) cfg.steps = *steps;
    if (seed) cfg.seed = *seed;
    if (batch_size) cfg.batch_size = *batch_size;
    if (lr) {
      cfg.lr_g = *lr;
      cfg.lr_d = *lr;
    }
    if (checkpoint_interval) cfg.checkpoint_interval = *checkpoint_interval;
    return cfg;
  }
};

void dump_effective_config(const hwgan::TrainConfig& cfg,
                           const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "effective-config.json").string(),
                  hwgan::to_json(cfg).dump(2) + "\n");
}

std::vector<hwgan::HandwritingSample> load_cache(const std::string& path) {
  auto samples = hwgan::read_interchange_file(path);
  if (samples.empty())
    throw hwgan::InvalidArgumentError("cache is empty: " + path);
  return samples;
}

int cmd_preprocess(const std::string& data_root, const std::string& out,
                   long limit) {
  hwgan::IamStats stats;
  auto samples = hwgan::load_iam_dataset(data_root, &stats);
  if (samples.empty())
    throw hwgan::InvalidArgumentError("no parsable stroke files under " +
                                      data_root);
  if (limit > 0 && static_cast<long>(samples.size()) > limit)
    samples.resize(static_cast<std::size_t>(limit));

  if (const auto parent = fs::path(out).parent_path(); !parent.empty())
    fs::create_directories(parent);
  hwgan::write_interchange_file(out, samples);

  const hwgan::Vocabulary vocab;
  std::size_t known = 0, unknown = 0;
  for (const auto& s : samples)
    for (char c : s.text)
      (vocab.index_of(c) == 0 ? unknown : known) += 1;

  const json report{{"cache", out},
                    {"samples", samples.size()},
                    {"stroke_files", stats.stroke_files},
                    {"parse_failures", stats.parse_failures},
                    {"with_transcription", stats.with_transcription},
                    {"vocab_known_chars", known},
                    {"vocab_unknown_chars", unknown}};
  std::cout << report.dump(2) << std::endl;
  return 0;
}

int cmd_pretrain(const TrainFlags& flags, const std::string& cache,
                 const std::string& out_dir, const std::string& resume) {
  const auto cfg = flags.resolve();
  dump_effective_config(cfg, out_dir);
  const auto samples = load_cache(cache);
  const auto split =
      hwgan::split_dataset(samples, cfg.validation_fraction, cfg.split_seed);
  const auto result = hwgan::pretrain_loop(cfg, split.train, out_dir, resume);
  std::cout << "pretrained " << result.steps_run << " steps, nll "
            << result.first_nll << " -> " << result.last_nll << "\n"
            << "checkpoint: " << result.final_checkpoint << std::endl;
  return 0;
}

int cmd_train_gan(const TrainFlags& flags, const std::string& cache,
                  const std::string& out_dir, const std::string& gen_init,
                  const std::string& resume) {
  const auto cfg = flags.resolve();
  dump_effective_config(cfg, out_dir);
  const auto samples = load_cache(cache);
  const auto split =
      hwgan::split_dataset(samples, cfg.validation_fraction, cfg.split_seed);
  const auto result =
      hwgan::gan_loop(cfg, split.train, out_dir, gen_init, resume);
  double last_reward = 0.0;
  if (!result.history.empty()) last_reward = result.history.back().g_reward_mean;
  std::cout << "ran " << result.steps_run << " adversarial steps, last reward "
            << last_reward << "\n"
            << "checkpoint: " << result.final_checkpoint << std::endl;
  return 0;
}

int cmd_sample(const std::string& checkpoint_path, const std::string& out_dir,
               const std::string& text, double bias, uint64_t seed, int count,
               std::optional<int> max_points, bool dump_psf) {
  const auto ckpt = hwgan::load_checkpoint(checkpoint_path);
  if (ckpt.meta.config.is_null())
    throw hwgan::CheckpointError(
        "checkpoint has no config snapshot; cannot rebuild the model");
  const auto cfg = hwgan::train_config_from_json(ckpt.meta.config);

  hwgan::SamplerConfig sampler;
  sampler.bias = bias;
  sampler.seed = seed;
  sampler.max_points = max_points.value_or(cfg.max_points);
  sampler.points_per_char = cfg.points_per_char;

  fs::create_directories(out_dir);
  {
    json args{{"checkpoint", checkpoint_path}, {"text", text},
              {"bias", bias},                  {"seed", seed},
              {"count", count},                {"max_points", sampler.max_points}};
    write_text_file((fs::path(out_dir) / "sample-config.json").string(),
                    args.dump(2) + "\n");
  }

  hwgan::Rng dummy(0);
  hwgan::Rng rng(seed);
  const hwgan::Vocabulary vocab;
  std::vector<hwgan::SampleResult> results;

  if (!text.empty()) {
    hwgan::SynthesisNet<hwgan::Scalar> net(cfg.synthesis, dummy);
    hwgan::restore_params(ckpt, net.params());
    const auto enc = hwgan::encode_text(text, vocab);
    for (int i = 0; i < count; ++i) {
      auto r = hwgan::sample_sequence(net, enc, sampler, rng);
      r.sample.text = text;
      results.push_back(std::move(r));
    }
  } else {
    hwgan::PredictionNet<hwgan::Scalar> net(cfg.prediction, dummy);
    hwgan::restore_params(ckpt, net.params());
    for (int i = 0; i < count; ++i)
      results.push_back(hwgan::sample_sequence(net, sampler, rng));
  }

  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample-%03d", i);
    const fs::path base = fs::path(out_dir) / name;
    const auto& sample = results[static_cast<std::size_t>(i)].sample;
    write_text_file(base.string() + ".json",
                    hwgan::to_interchange_line(sample) + "\n");
    write_text_file(base.string() + ".svg", hwgan::render_svg(sample));
    hwgan::write_png_gray(base.string() + ".png", hwgan::render_ink(sample));
    if (dump_psf)
      hwgan::dump_psf_png(hwgan::psf_pipeline(sample, cfg.psf()),
                          base.string() + ".psf.png");
  }
  std::cout << "wrote " << count << " samples to " << out_dir << std::endl;
  return 0;
}

int cmd_eval(const std::string& dir, const std::string& out_path) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir))
    throw hwgan::InvalidArgumentError("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".json" || ext == ".jsonl") {
      if (entry.path().filename() == "sample-config.json" ||
          entry.path().filename() == "report.json")
        continue;
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw hwgan::InvalidArgumentError("no sample files in " + dir);

  std::vector<hwgan::HandwritingSample> samples;
  std::vector<std::string> names;
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        samples.push_back(hwgan::from_interchange_line(line));
      } catch (const hwgan::Error& e) {
        throw hwgan::ParseError(file.string() + ":" +
                                std::to_string(line_no) + ": " + e.what());
      }
      names.push_back(file.filename().string());
    }
  }
  if (samples.empty())
    throw hwgan::InvalidArgumentError("no samples found in " + dir);

  const auto report = hwgan::eval_report(samples);
  json j = hwgan::report_to_json(report);
  for (std::size_t i = 0; i < names.size(); ++i)
    j["samples"][i]["file"] = names[i];
  write_text_file(out_path, j.dump(2) + "\n");
  std::cout << "evaluated " << samples.size() << " samples, mean cv "
            << report.cv_mean << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial handwriting generation for digital ink"};
  app.require_subcommand(1);

  // preprocess
  auto* preprocess = app.add_subcommand(
      "preprocess", "Parse an IAM-OnDB tree into the interchange cache");
  std::string data_root;
  std::string cache_out = default_cache_path();
  long limit = 0;
  preprocess->add_option("--data-root", data_root, "IAM root directory")
      ->required();
  preprocess->add_option("--out", cache_out,
                         "Cache file path (default honors HWGAN_CACHE_DIR)");
  preprocess->add_option("--limit", limit, "Keep at most N samples");

  // shared training flags
  TrainFlags flags;
  std::string cache_in = default_cache_path();
  std::string out_dir = "runs";
  std::string resume;
  std::string gen_init;
  long steps_flag = -1;
  long long seed_flag = -1;
  int batch_flag = -1;
  double lr_flag = -1.0;
  long ckpt_interval_flag = -1;

  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--mode", flags.mode, "prediction | synthesis");
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--cache", cache_in, "Interchange cache file");
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--steps", steps_flag, "Training steps");
    cmd->add_option("--seed", seed_flag, "Seed");
    cmd->add_option("--batch-size", batch_flag, "Batch size");
    cmd->add_option("--lr", lr_flag, "Learning rate (generator and discriminator)");
    cmd->add_option("--checkpoint-interval", ckpt_interval_flag,
                    "Steps between checkpoints (0 disables)");
    cmd->add_option("--resume", resume, "Checkpoint to resume from");
  };

  auto* pretrain = app.add_subcommand(
      "pretrain", "Maximum-likelihood generator pretraining");
  add_train_flags(pretrain);

  auto* train_gan =
      app.add_subcommand("train-gan", "Adversarial training loop");
  add_train_flags(train_gan);
  train_gan->add_option("--gen-init", gen_init,
                        "Pretrained generator checkpoint");

  // sample
  auto* sample = app.add_subcommand("sample", "Generate handwriting samples");
  std::string checkpoint_path;
  std::string sample_out = "samples";
  std::string text;
  double bias = 3.0;
  uint64_t sample_seed = 0;
  int count = 1;
  int max_points_flag = -1;
  bool dump_psf = false;
  sample->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  sample->add_option("--out", sample_out, "Output directory");
  sample->add_option("--text", text,
                     "Text to synthesize (omit for random prediction)");
  sample->add_option("--bias", bias, "Sampling bias");
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--count", count, "Number of samples");
  sample->add_option("--max-points", max_points_flag,
                     "Cap on generated points (prediction mode)");
  sample->add_flag("--dump-psf", dump_psf,
                   "Also write the feature raster as a PNG stack");

  // eval
  auto* eval = app.add_subcommand("eval", "Report metrics over sample files");
  std::string eval_dir;
  std::string report_out;
  eval->add_option("--dir", eval_dir, "Directory of sample files")->required();
  eval->add_option("--out", report_out, "Report path (default <dir>/report.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (preprocess->parsed())
      return cmd_preprocess(data_root, cache_out, limit);
    if (pretrain->parsed() || train_gan->parsed()) {
      if (steps_flag >= 0) flags.steps = steps_flag;
      if (seed_flag >= 0) flags.seed = static_cast<uint64_t>(seed_flag);
      if (batch_flag > 0) flags.batch_size = batch_flag;
      if (lr_flag > 0) flags.lr = lr_flag;
      if (ckpt_interval_flag >= 0) flags.checkpoint_interval = ckpt_interval_flag;
      if (pretrain->parsed())
        return cmd_pretrain(flags, cache_in, out_dir, resume);
      return cmd_train_gan(flags, cache_in, out_dir, gen_init, resume);
    }
    if (sample->parsed())
      return cmd_sample(checkpoint_path, sample_out, text, bias, sample_seed,
                        count,
                        max_points_flag > 0 ? std::optional<int>(max_points_flag)
                                            : std::nullopt,
                        dump_psf);
    if (eval->parsed()) {
      if (report_out.empty())
        report_out = (fs::path(eval_dir) / "report.json").string();
      return cmd_eval(eval_dir, report_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
