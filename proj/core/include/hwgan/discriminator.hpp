#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hwgan/conv.hpp"
#include "hwgan/nn.hpp"
#include "hwgan/psf.hpp"

namespace hwgan {

// Feature-raster classifier: conv encoder over the signature planes, LSTM
// across the encoded columns, two fully connected layers to one logit.
struct DiscriminatorConfig {
  int in_channels = PsfRaster::kChannels;
  int in_height = 128;
  std::vector<nn::ConvSpec> stack = default_stack();
  int lstm_hidden = 256;
  int fc1_out = 128;

  // Encoder whose column count is input width / 16 and whose per-column
  // feature size is 256 for a height-128 input.
  static std::vector<nn::ConvSpec> default_stack() {
    using nn::ConvSpec;
    return {
        ConvSpec::conv(32),        ConvSpec::pool(),
        ConvSpec::conv(64),        ConvSpec::pool(),
        ConvSpec::conv(128),       ConvSpec::conv(256, 1, 2),
        ConvSpec::pool(),          ConvSpec::conv(128, 1, 2),
        ConvSpec::conv(256, 1, 2), ConvSpec::pool(),
    };
  }

  int width_factor() const { return nn::conv_stack_width_factor(stack); }

  nn::Shape3 encoded_shape(int width) const {
    return nn::conv_stack_out_shape(stack, {in_channels, in_height, width});
  }

  int feature_dim() const {
    const auto s = encoded_shape(width_factor());
    return s.channels * s.height;
  }
};

// Mean binary cross entropy with one-sided label smoothing: real targets
// become 1 - smoothing, fake targets stay 0. Probabilities must lie strictly
// inside (0, 1).
inline double d_loss(const std::vector<double>& probabilities,
                     const std::vector<int>& labels, double smoothing) {
  if (probabilities.size() != labels.size())
    throw InvalidArgumentError("d_loss: size mismatch");
  if (probabilities.empty()) throw InvalidArgumentError("d_loss: empty batch");
  if (smoothing < 0.0 || smoothing >= 0.5)
    throw ConfigError("d_loss: smoothing must be in [0, 0.5)");
  double sum = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities[i];
    if (!(p > 0.0 && p < 1.0))
      throw NumericError("d_loss: probability outside (0, 1)");
    const double target = labels[i] ? 1.0 - smoothing : 0.0;
    sum += -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(probabilities.size());
}

template <typename T>
nn::Tensor3<T> to_tensor(const PsfRaster& raster) {
  nn::Tensor3<T> t(PsfRaster::kChannels, raster.height, raster.width);
  for (std::size_t i = 0; i < raster.data.size(); ++i)
    t.data[i] = static_cast<T>(raster.data[i]);
  return t;
}

// Inference entry points are const and safe on a frozen weight snapshot;
// training steps mutate parameters and need external serialization.
template <typename T>
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig config, Rng& rng,
                         const std::string& prefix = "D")
      : config_(std::move(config)),
        cnn_(prefix, config_.stack, config_.in_channels, rng),
        lstm_(prefix + "/lstm", config_.feature_dim(), config_.lstm_hidden,
              rng),
        fc1_(prefix + "/fc1", config_.lstm_hidden, config_.fc1_out, rng),
        fc2_(prefix + "/fc2", config_.fc1_out, 1, rng) {}

  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  const DiscriminatorConfig& config() const { return config_; }

  // Column features of the conv encoder: one column per width_factor()-wide
  // input slab, feature_dim() rows each.
  nn::Mat<T> cnn_encode(const nn::Tensor3<T>& input) const {
    check_input(input);
    const auto encoded = cnn_.forward(input);
    return columns_of(encoded);
  }

  struct Cache {
    typename nn::ConvStack<T>::Cache cnn;
    std::vector<typename nn::LstmLayer<T>::StepCache> lstm;
    nn::Mat<T> columns;    // encoder output as column features
    nn::Mat<T> h_last;     // final hidden state
    nn::Mat<T> fc1_out;    // post-ReLU
    T logit = T(0);
  };

  T forward_logit(const nn::Tensor3<T>& input, Cache* cache = nullptr) const {
    check_input(input);
    typename nn::ConvStack<T>::Cache cnn_cache;
    const auto encoded =
        cnn_.forward(input, cache ? &cnn_cache : nullptr);
    nn::Mat<T> columns = columns_of(encoded);

    nn::Mat<T> h = nn::Mat<T>::Zero(config_.lstm_hidden, 1);
    nn::Mat<T> c = nn::Mat<T>::Zero(config_.lstm_hidden, 1);
    std::vector<typename nn::LstmLayer<T>::StepCache> steps;
    if (cache) steps.resize(static_cast<std::size_t>(columns.cols()));
    for (Eigen::Index j = 0; j < columns.cols(); ++j)
      lstm_.step(columns.col(j), h, c,
                 cache ? &steps[static_cast<std::size_t>(j)] : nullptr);

    nn::Mat<T> a1 = fc1_.forward(h).cwiseMax(T(0));
    nn::Mat<T> out = fc2_.forward(a1);
    if (cache) {
      cache->cnn = std::move(cnn_cache);
      cache->lstm = std::move(steps);
      cache->columns = std::move(columns);
      cache->h_last = h;
      cache->fc1_out = a1;
      cache->logit = out(0, 0);
    }
    return out(0, 0);
  }

  double forward_prob(const nn::Tensor3<T>& input) const {
    const double logit = static_cast<double>(forward_logit(input));
    return 1.0 / (1.0 + std::exp(-logit));
  }

  double forward_prob(const PsfRaster& raster) const {
    return forward_prob(to_tensor<T>(raster));
  }

  // Backpropagates d(loss)/d(logit) through the whole model, accumulating
  // parameter gradients.
  void backward(const Cache& cache, T dlogit) {
    nn::Mat<T> dout(1, 1);
    dout(0, 0) = dlogit;
    nn::Mat<T> da1 = fc2_.backward(cache.fc1_out, dout);
    da1 = da1.cwiseProduct(
        (cache.fc1_out.array() > T(0)).template cast<T>().matrix());
    nn::Mat<T> dh = fc1_.backward(cache.h_last, da1);

    const Eigen::Index cols = cache.columns.cols();
    nn::Mat<T> dcolumns = nn::Mat<T>::Zero(cache.columns.rows(), cols);
    nn::Mat<T> dc = nn::Mat<T>::Zero(config_.lstm_hidden, 1);
    for (Eigen::Index j = cols - 1; j >= 0; --j) {
      const auto& sc = cache.lstm[static_cast<std::size_t>(j)];
      const nn::Mat<T> c_prev =
          j == 0 ? nn::Mat<T>::Zero(config_.lstm_hidden, 1)
                 : cache.lstm[static_cast<std::size_t>(j - 1)].c;
      nn::Mat<T> dxh = lstm_.backward_step(sc, c_prev, dh, dc);
      dcolumns.col(j) = dxh.topRows(cache.columns.rows());
      dh = dxh.bottomRows(config_.lstm_hidden);
    }

    // Scatter column gradients back into the conv output tensor.
    const auto& encoded = cache.cnn.activations.back();
    nn::Tensor3<T> dencoded(encoded.channels, encoded.height, encoded.width);
    for (int x = 0; x < encoded.width; ++x)
      for (int c = 0; c < encoded.channels; ++c)
        for (int y = 0; y < encoded.height; ++y)
          dencoded.at(c, y, x) = dcolumns(c * encoded.height + y, x);
    cnn_.backward(cache.cnn, dencoded);
  }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> out;
    cnn_.collect(out);
    lstm_.collect(out);
    fc1_.collect(out);
    fc2_.collect(out);
    return out;
  }

 private:
  void check_input(const nn::Tensor3<T>& input) const {
    if (input.channels != config_.in_channels ||
        input.height != config_.in_height)
      throw ContractError("discriminator: input channel/height mismatch");
    if (input.width <= 0 || input.width % config_.width_factor() != 0)
      throw ContractError(
          "discriminator: input width must be a positive multiple of " +
          std::to_string(config_.width_factor()));
  }

  nn::Mat<T> columns_of(const nn::Tensor3<T>& encoded) const {
    nn::Mat<T> columns(encoded.channels * encoded.height, encoded.width);
    for (int x = 0; x < encoded.width; ++x)
      for (int c = 0; c < encoded.channels; ++c)
        for (int y = 0; y < encoded.height; ++y)
          columns(c * encoded.height + y, x) = encoded.at(c, y, x);
    return columns;
  }

  DiscriminatorConfig config_;
  nn::ConvStack<T> cnn_;
  nn::LstmLayer<T> lstm_;
  nn::Dense<T> fc1_, fc2_;
};

// Supervised discriminator step on already-rasterized batches: one Adam
// update of mean smoothed BCE over reals (label 1) and fakes (label 0).
struct DiscriminatorMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  double accuracy_real = 0.0;
  double accuracy_fake = 0.0;
};

template <typename T>
DiscriminatorMetrics d_train_step(Discriminator<T>& disc,
                                  const std::vector<nn::Tensor3<T>>& real,
                                  const std::vector<nn::Tensor3<T>>& fake,
                                  nn::Adam<T>& opt, double lr,
                                  double smoothing, long step_index = -1) {
  if (real.empty() || fake.empty())
    throw InvalidArgumentError("d_train_step: batches must be non-empty");
  if (smoothing < 0.0 || smoothing >= 0.5)
    throw ConfigError("d_train_step: smoothing must be in [0, 0.5)");

  nn::zero_grads(opt.params());
  const double n = static_cast<double>(real.size() + fake.size());
  DiscriminatorMetrics metrics;
  double correct_real = 0.0, correct_fake = 0.0;

  auto run = [&](const nn::Tensor3<T>& input, bool is_real) {
    typename Discriminator<T>::Cache cache;
    const double logit =
        static_cast<double>(disc.forward_logit(input, &cache));
    const double p = 1.0 / (1.0 + std::exp(-logit));
    const double target = is_real ? 1.0 - smoothing : 0.0;
    // Stable BCE from the logit: -(t*log p + (1-t)*log(1-p)).
    const double loss =
        (1.0 - target) * logit +
        (logit > 0.0 ? std::log1p(std::exp(-logit)) + 0.0
                     : -logit + std::log1p(std::exp(logit)));
    metrics.loss += loss / n;
    if (is_real)
      correct_real += p > 0.5 ? 1.0 : 0.0;
    else
      correct_fake += p <= 0.5 ? 1.0 : 0.0;
    disc.backward(cache, static_cast<T>((p - target) / n));
  };

  for (const auto& r : real) run(r, true);
  for (const auto& f : fake) run(f, false);

  if (!std::isfinite(metrics.loss) || !nn::grads_finite(disc.params()))
    throw DivergenceError("d_train_step: non-finite loss", step_index);

  opt.step(lr);
  metrics.accuracy_real = correct_real / static_cast<double>(real.size());
  metrics.accuracy_fake = correct_fake / static_cast<double>(fake.size());
  metrics.accuracy = (correct_real + correct_fake) / n;
  return metrics;
}

}  // namespace hwgan
