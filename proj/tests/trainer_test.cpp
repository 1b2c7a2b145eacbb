#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hwgan/trainer.hpp"
#include "test_util.hpp"

using namespace hwgan;
namespace fs = std::filesystem;

namespace {

// Desk-scale configuration: tiny nets, narrow buckets, short sequences.
TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_points = 12;
  cfg.max_len = 24;
  cfg.width_buckets = {16, 32, 48, 64, 80, 96, 112, 128};
  cfg.prediction.hidden1 = 8;
  cfg.prediction.hidden2 = 4;
  cfg.prediction.hidden3 = 8;
  cfg.prediction.mixture_components = 2;
  cfg.synthesis.hidden1 = 8;
  cfg.synthesis.hidden2 = 8;
  cfg.synthesis.window_components = 2;
  cfg.synthesis.mixture_components = 2;
  cfg.discriminator.stack = {nn::ConvSpec::conv(4), nn::ConvSpec::pool(),
                             nn::ConvSpec::conv(8, 1, 2),
                             nn::ConvSpec::conv(8, 1, 2),
                             nn::ConvSpec::pool()};
  cfg.discriminator.lstm_hidden = 8;
  cfg.discriminator.fc1_out = 4;
  cfg.checkpoint_interval = 0;
  return cfg;
}

std::vector<HandwritingSample> fixture_samples(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<HandwritingSample> samples;
  for (int i = 0; i < n; ++i) {
    auto s = hwgan::testing::random_sample(rng, 2, 6, 8.0);
    s.text = i % 2 == 0 ? "ab" : "cd";
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hwgan-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("train config json round trip") {
  TrainConfig cfg = desk_config();
  cfg.mode = TrainMode::kSynthesis;
  cfg.lr_g = 0.002;
  cfg.steps = 77;
  const auto j = to_json(cfg);
  const auto back = train_config_from_json(j);
  CHECK(back.mode == TrainMode::kSynthesis);
  CHECK(back.lr_g == 0.002);
  CHECK(back.steps == 77);
  CHECK(back.width_buckets == cfg.width_buckets);
  CHECK(back.prediction.hidden2 == 4);
  CHECK(back.discriminator.stack.size() == cfg.discriminator.stack.size());
  CHECK(to_json(back) == j);
}

TEST_CASE("train config rejects invalid values") {
  nlohmann::json j = to_json(TrainConfig{});
  j["lr_g"] = 0.0;
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  j = to_json(TrainConfig{});
  j["decay_factor"] = 1.5;
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  j = to_json(TrainConfig{});
  j["width_buckets"] = {30};
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
  j = to_json(TrainConfig{});
  j["mode"] = "other";
  CHECK_THROWS_AS(train_config_from_json(j), ConfigError);
}

TEST_CASE("checkpoint round trip restores bit-identical forward outputs") {
  Rng rng(1);
  TrainConfig cfg = desk_config();
  PredictionNet<Scalar> net(cfg.prediction, rng);
  const auto dir = fresh_dir("ckpt");
  const std::string path = (dir / "net.hwgn").string();

  CheckpointMeta meta;
  meta.step = 42;
  meta.config = to_json(cfg);
  meta.rng_states["sample"] = Rng(3).serialize();
  save_checkpoint(path, meta, checkpoint_entries(net.params()));

  auto state = net.init_state(1);
  nn::Mat<Scalar> x(3, 1);
  x << 0.5f, -0.5f, 1.0f;
  const auto before = net.step(x, state);

  Rng rng2(99);
  PredictionNet<Scalar> restored(cfg.prediction, rng2);
  const auto ckpt = load_checkpoint(path);
  CHECK(ckpt.meta.step == 42);
  CHECK(ckpt.meta.rng_states.at("sample") == Rng(3).serialize());
  restore_params(ckpt, restored.params());
  auto state2 = restored.init_state(1);
  const auto after = restored.step(x, state2);
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0f);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint integrity errors") {
  Rng rng(2);
  TrainConfig cfg = desk_config();
  PredictionNet<Scalar> net(cfg.prediction, rng);
  const auto dir = fresh_dir("ckpt-err");
  const std::string path = (dir / "net.hwgn").string();
  save_checkpoint(path, CheckpointMeta{}, checkpoint_entries(net.params()));

  auto bytes = slurp(path);

  // Truncated payload: no partial load.
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 17));
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

  // Unknown version.
  bytes[4] = 9;
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    load_checkpoint(path);
    CHECK(false);
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  // Bad magic.
  bytes[4] = 1;
  bytes[0] = 'X';
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

  fs::remove_all(dir);
}

TEST_CASE("checkpoint shape mismatch is rejected") {
  Rng rng(3);
  TrainConfig cfg = desk_config();
  PredictionNet<Scalar> net(cfg.prediction, rng);
  const auto dir = fresh_dir("ckpt-shape");
  const std::string path = (dir / "net.hwgn").string();
  save_checkpoint(path, CheckpointMeta{}, checkpoint_entries(net.params()));

  TrainConfig bigger = cfg;
  bigger.prediction.hidden1 = 16;
  Rng rng2(4);
  PredictionNet<Scalar> other(bigger.prediction, rng2);
  const auto ckpt = load_checkpoint(path);
  CHECK_THROWS_AS(restore_params(ckpt, other.params()), CheckpointError);
  CHECK_THROWS_AS(ckpt.require("missing/tensor"), CheckpointError);
  fs::remove_all(dir);
}

TEST_CASE("make_fake_batch is deterministic and bucket-sized") {
  Rng rng(5);
  TrainConfig cfg = desk_config();
  PredictionNet<Scalar> net(cfg.prediction, rng);

  Rng s1(7), s2(7);
  const auto a = make_fake_batch(net, cfg, 4, s1);
  const auto b = make_fake_batch(net, cfg, 4, s2);
  REQUIRE(a.rasters.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.rasters[i].height == 128);
    CHECK(std::find(cfg.width_buckets.begin(), cfg.width_buckets.end(),
                    a.rasters[i].width) != cfg.width_buckets.end());
    CHECK(a.rasters[i].data == b.rasters[i].data);
    CHECK(std::isfinite(a.sequences[i].log_prob));
    CHECK(a.sequences[i].log_prob == b.sequences[i].log_prob);
  }
}

TEST_CASE("rasterize_for_training squeezes over-wide samples into buckets") {
  TrainConfig cfg = desk_config();
  // Aspect ratio so extreme the scaled width would exceed the top bucket.
  const auto wide = make_sample({{{0, 0}, {4000, 0}, {4000, 10}}});
  const auto raster = rasterize_for_training(wide, cfg);
  CHECK(raster.width ==
        *std::max_element(cfg.width_buckets.begin(), cfg.width_buckets.end()));
}

TEST_CASE("d_adv_step enforces bucket membership") {
  Rng rng(6);
  TrainConfig cfg = desk_config();
  Discriminator<Scalar> disc(cfg.discriminator, rng);
  nn::Adam<Scalar> opt(disc.params());

  PsfRaster ok;
  ok.width = 16;
  ok.height = 128;
  ok.data.assign(static_cast<std::size_t>(7) * 128 * 16, 0.0f);
  PsfRaster bad = ok;
  bad.width = 24;
  bad.data.assign(static_cast<std::size_t>(7) * 128 * 24, 0.0f);

  CHECK_THROWS_AS(
      d_adv_step(disc, {ok}, {bad}, cfg, opt, 1e-3), ContractError);
  const auto metrics = d_adv_step(disc, {ok}, {ok}, cfg, opt, 1e-3);
  CHECK(metrics.accuracy_real >= 0.0);
  CHECK(metrics.accuracy_fake >= 0.0);
}

TEST_CASE("g_adv_step takes no step when the rewards equal the baseline") {
  Rng rng(7);
  TrainConfig cfg = desk_config();
  PredictionNet<Scalar> net(cfg.prediction, rng);
  Discriminator<Scalar> disc(cfg.discriminator, rng);
  for (auto* p : disc.params()) p->value.setZero();  // D outputs exactly 0.5

  nn::Adam<Scalar> opt(net.params());
  Rng sampler(8);
  const auto fakes = make_fake_batch(net, cfg, 3, sampler);

  std::vector<float> before;
  for (auto* p : net.params())
    before.insert(before.end(), p->value.data(),
                  p->value.data() + p->value.size());

  RewardBaseline baseline;
  baseline.value = 0.5;
  baseline.initialized = true;
  const auto metrics = g_adv_step(net, disc, fakes, cfg, opt, 1e-3, baseline);
  CHECK(!metrics.stepped);
  CHECK(metrics.reward_mean == doctest::Approx(0.5));

  std::vector<float> after;
  for (auto* p : net.params())
    after.insert(after.end(), p->value.data(),
                 p->value.data() + p->value.size());
  CHECK(before == after);
}

TEST_CASE("g_adv_step rescales gradients to unit norm") {
  Rng rng(9);
  TrainConfig cfg = desk_config();
  PredictionNet<Scalar> net(cfg.prediction, rng);
  Discriminator<Scalar> disc(cfg.discriminator, rng);
  nn::Adam<Scalar> opt(net.params());
  Rng sampler(10);
  RewardBaseline baseline;
  for (int i = 0; i < 3; ++i) {
    const auto fakes = make_fake_batch(net, cfg, 3, sampler);
    const auto metrics = g_adv_step(net, disc, fakes, cfg, opt, 1e-3, baseline);
    if (metrics.stepped)
      CHECK(metrics.grad_norm == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(baseline.value >= 0.0);
    CHECK(baseline.value <= 1.0);
  }
}

TEST_CASE("gan_loop runs, logs, checkpoints and resumes bit-identically") {
  const auto samples = fixture_samples(6, 11);
  TrainConfig cfg = desk_config();
  cfg.mode = TrainMode::kPrediction;
  cfg.steps = 6;
  cfg.seed = 21;

  // Pretrained generator to start from.
  const auto pre_dir = fresh_dir("gan-pre");
  TrainConfig pre_cfg = cfg;
  pre_cfg.steps = 2;
  const auto pre = pretrain_loop(pre_cfg, samples, pre_dir.string());

  const auto dir_a = fresh_dir("gan-a");
  const auto result_a =
      gan_loop(cfg, samples, dir_a.string(), pre.final_checkpoint);
  CHECK(result_a.steps_run == 6);
  REQUIRE(result_a.history.size() == 6);
  for (const auto& rec : result_a.history) {
    CHECK(std::isfinite(rec.d_loss));
    CHECK(std::isfinite(rec.g_reward_mean));
    if (rec.g_grad_norm != 0.0)
      CHECK(rec.g_grad_norm == doctest::Approx(1.0).epsilon(1e-6));
  }

  // Metric log: one line per step with the documented keys.
  {
    std::ifstream metrics((dir_a / "metrics.jsonl").string());
    std::string line;
    int lines = 0;
    while (std::getline(metrics, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.size() == 7);
      for (const char* key : {"step", "d_loss", "g_reward_mean", "d_acc_real",
                              "d_acc_fake", "lr_g", "lr_d"})
        CHECK(j.contains(key));
      ++lines;
    }
    CHECK(lines == 6);
  }

  // Half run + resume reproduces the full run bit for bit.
  const auto dir_b = fresh_dir("gan-b");
  TrainConfig half = cfg;
  half.steps = 3;
  gan_loop(half, samples, dir_b.string(), pre.final_checkpoint);
  const auto result_b = gan_loop(cfg, samples, dir_b.string(), "",
                                 (dir_b / "ckpt-final.hwgn").string());
  CHECK(result_b.steps_run == 3);
  CHECK(slurp((dir_a / "ckpt-final.hwgn").string()) ==
        slurp((dir_b / "ckpt-final.hwgn").string()));
  CHECK(slurp((dir_a / "metrics.jsonl").string()) ==
        slurp((dir_b / "metrics.jsonl").string()));

  fs::remove_all(pre_dir);
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("gan_loop in synthesis mode consumes texts and dumps samples") {
  const auto samples = fixture_samples(6, 13);
  TrainConfig cfg = desk_config();
  cfg.mode = TrainMode::kSynthesis;
  cfg.steps = 3;
  cfg.seed = 5;
  cfg.points_per_char = 6;
  cfg.sample_interval = 2;
  cfg.sample_dump_count = 2;

  const auto pre_dir = fresh_dir("gans-pre");
  TrainConfig pre_cfg = cfg;
  pre_cfg.steps = 2;
  const auto pre = pretrain_loop(pre_cfg, samples, pre_dir.string());
  const auto dir = fresh_dir("gans");
  const auto result = gan_loop(cfg, samples, dir.string(), pre.final_checkpoint);
  CHECK(result.steps_run == 3);
  for (const auto& rec : result.history) CHECK(std::isfinite(rec.d_loss));
  const auto dumped = read_interchange_file((dir / "samples-2.jsonl").string());
  CHECK(dumped.size() == 2);
  for (const auto& s : dumped) CHECK(!s.text.empty());
  fs::remove_all(pre_dir);
  fs::remove_all(dir);
}

TEST_CASE("gan_loop requires a generator checkpoint") {
  const auto samples = fixture_samples(4, 15);
  TrainConfig cfg = desk_config();
  cfg.steps = 1;
  const auto dir = fresh_dir("gan-noinit");
  CHECK_THROWS_AS(gan_loop(cfg, samples, dir.string(), ""),
                  InvalidArgumentError);
  fs::remove_all(dir);
}

TEST_CASE("pretrain_loop logs, reduces NLL and resumes the step counter") {
  const auto samples = fixture_samples(8, 17);
  TrainConfig cfg = desk_config();
  cfg.steps = 30;
  cfg.seed = 3;
  cfg.checkpoint_interval = 10;

  const auto dir = fresh_dir("pretrain");
  const auto result = pretrain_loop(cfg, samples, dir.string());
  CHECK(result.steps_run == 30);
  CHECK(result.last_nll < result.first_nll);
  CHECK(fs::exists(dir / "pretrain-10.hwgn"));
  CHECK(fs::exists(dir / "pretrain-final.hwgn"));

  TrainConfig more = cfg;
  more.steps = 35;
  const auto resumed = pretrain_loop(more, samples, dir.string(),
                                     (dir / "pretrain-final.hwgn").string());
  CHECK(resumed.steps_run == 5);
  const auto ckpt = load_checkpoint((dir / "pretrain-final.hwgn").string());
  CHECK(ckpt.meta.step == 35);
  fs::remove_all(dir);
}

TEST_SUITE_END();
