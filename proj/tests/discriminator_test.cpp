#include <doctest.h>

#include <cmath>

#include "hwgan/discriminator.hpp"
#include "test_util.hpp"

using namespace hwgan;
using nn::Tensor3;

namespace {

// Small raster-like tensor with reproducible contents.
template <typename T>
Tensor3<T> random_input(Rng& rng, int channels, int height, int width) {
  Tensor3<T> t(channels, height, width);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return t;
}

DiscriminatorConfig tiny_config() {
  DiscriminatorConfig cfg;
  cfg.in_channels = 2;
  cfg.in_height = 8;
  cfg.stack = {nn::ConvSpec::conv(3), nn::ConvSpec::pool(),
               nn::ConvSpec::conv(4, 1, 2)};
  cfg.lstm_hidden = 1;
  cfg.fc1_out = 2;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("discriminator");

TEST_CASE("cnn_encode follows the documented shape chain") {
  Rng rng(1);
  Discriminator<float> disc(DiscriminatorConfig{}, rng);
  CHECK(disc.config().width_factor() == 16);
  CHECK(disc.config().feature_dim() == 256);
  for (int width : {16, 32, 128, 144}) {
    const auto input = random_input<float>(rng, 7, 128, width);
    const auto encoded = disc.cnn_encode(input);
    CHECK(encoded.rows() == 256);
    CHECK(encoded.cols() == width / 16);
  }
}

TEST_CASE("cnn_encode rejects widths that are not multiples of 16") {
  Rng rng(2);
  Discriminator<float> disc(DiscriminatorConfig{}, rng);
  const auto input = random_input<float>(rng, 7, 128, 24);
  CHECK_THROWS_AS(disc.cnn_encode(input), ContractError);
}

TEST_CASE("fresh weights with zero biases score 0.5 on a zero raster") {
  Rng rng(3);
  Discriminator<float> disc(DiscriminatorConfig{}, rng);
  Tensor3<float> zero(7, 128, 32);
  CHECK(disc.forward_prob(zero) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("forward probability is strictly inside (0,1) and deterministic") {
  Rng rng(4);
  DiscriminatorConfig cfg = tiny_config();
  Discriminator<float> disc(cfg, rng);
  const auto input = random_input<float>(rng, 2, 8, 8);
  const double p1 = disc.forward_prob(input);
  const double p2 = disc.forward_prob(input);
  CHECK(p1 == p2);
  CHECK(p1 > 0.0);
  CHECK(p1 < 1.0);
}

TEST_CASE("d_loss closed forms") {
  CHECK(d_loss({0.5}, {1}, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // One-sided smoothing: real target 0.9.
  CHECK(d_loss({0.9}, {1}, 0.1) ==
        doctest::Approx(-(0.9 * std::log(0.9) + 0.1 * std::log(0.1)))
            .epsilon(1e-12));
  CHECK(d_loss({0.999999}, {1}, 0.0) < 1e-5);
  CHECK(d_loss({1e-9}, {0}, 0.0) < 1e-6);
}

TEST_CASE("d_loss guards its domain") {
  CHECK_THROWS_AS(d_loss({0.5, 0.5}, {1}, 0.0), InvalidArgumentError);
  CHECK_THROWS_AS(d_loss({1.0}, {1}, 0.0), NumericError);
  CHECK_THROWS_AS(d_loss({0.0}, {0}, 0.0), NumericError);
  CHECK_THROWS_AS(d_loss({0.5}, {1}, 0.5), ConfigError);
  CHECK_THROWS_AS(d_loss({0.5}, {1}, -0.1), ConfigError);
}

TEST_CASE("discriminator gradients match finite differences on a tiny config") {
  Rng rng(5);
  Discriminator<double> disc(tiny_config(), rng);
  std::vector<Tensor3<double>> inputs;
  inputs.push_back(random_input<double>(rng, 2, 8, 8));
  inputs.push_back(random_input<double>(rng, 2, 8, 8));
  const std::vector<int> labels{1, 0};
  const double smoothing = 0.1;

  auto loss_fn = [&]() {
    std::vector<double> probs;
    for (const auto& in : inputs) probs.push_back(disc.forward_prob(in));
    return d_loss(probs, labels, smoothing);
  };

  auto params = disc.params();
  nn::zero_grads(params);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Discriminator<double>::Cache cache;
    const double logit = disc.forward_logit(inputs[i], &cache);
    const double p = 1.0 / (1.0 + std::exp(-logit));
    const double target = labels[i] ? 1.0 - smoothing : 0.0;
    disc.backward(cache, (p - target) / static_cast<double>(inputs.size()));
  }

  CHECK(testing::max_relative_grad_error(params, loss_fn) < 1e-4);
}

TEST_CASE("d_train_step is deterministic and learns a fixed batch") {
  auto make_inputs = [](Rng& rng, double shift) {
    std::vector<Tensor3<float>> batch;
    for (int i = 0; i < 4; ++i) {
      auto t = random_input<float>(rng, 2, 8, 8);
      for (auto& v : t.data) v += static_cast<float>(shift);
      batch.push_back(std::move(t));
    }
    return batch;
  };

  auto run = [&](std::vector<float>* final_weights) {
    Rng rng(6);
    Discriminator<float> disc(tiny_config(), rng);
    nn::Adam<float> opt(disc.params());
    const auto real = make_inputs(rng, 0.5);
    const auto fake = make_inputs(rng, -0.5);
    DiscriminatorMetrics last;
    double first_loss = 0.0;
    for (int step = 0; step < 50; ++step) {
      last = d_train_step(disc, real, fake, opt, 1e-3, 0.0, step);
      if (step == 0) first_loss = last.loss;
      CHECK(last.accuracy >= 0.0);
      CHECK(last.accuracy <= 1.0);
    }
    if (final_weights)
      for (auto* p : disc.params())
        final_weights->insert(final_weights->end(), p->value.data(),
                              p->value.data() + p->value.size());
    return std::make_pair(first_loss, last.loss);
  };

  std::vector<float> w1, w2;
  const auto [first, last] = run(&w1);
  CHECK(last < first);
  run(&w2);
  CHECK(w1 == w2);
}

TEST_CASE("d_train_step rejects empty batches") {
  Rng rng(7);
  Discriminator<float> disc(tiny_config(), rng);
  nn::Adam<float> opt(disc.params());
  std::vector<Tensor3<float>> batch{random_input<float>(rng, 2, 8, 8)};
  CHECK_THROWS_AS(d_train_step(disc, {}, batch, opt, 1e-3, 0.0),
                  InvalidArgumentError);
  CHECK_THROWS_AS(d_train_step(disc, batch, {}, opt, 1e-3, 0.0),
                  InvalidArgumentError);
}

TEST_SUITE_END();
