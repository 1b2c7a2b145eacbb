#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hwgan/dataset.hpp"
#include "hwgan/mdn.hpp"
#include "hwgan/nn.hpp"
#include "hwgan/stroke.hpp"

namespace hwgan {

// Text one-hot as an (alphabet x U) matrix; column u is character u.
template <typename T>
nn::Mat<T> text_matrix(const TextEncoding& enc) {
  nn::Mat<T> m = nn::Mat<T>::Zero(Vocabulary::kSize,
                                  static_cast<Eigen::Index>(enc.length()));
  for (std::size_t u = 0; u < enc.length(); ++u)
    m(enc.indices[u], static_cast<Eigen::Index>(u)) = T(1);
  return m;
}

// ---------------------------------------------------------------------------
// Random-stroke generator: three stacked LSTMs with input skip connections
// and a fully connected mixture-density head over all hidden states.

struct PredictionConfig {
  int hidden1 = 512;
  int hidden2 = 256;
  int hidden3 = 512;
  int mixture_components = 20;

  static constexpr int kInputDim = 3;  // (dx, dy, eos)
  int output_dim() const { return mdn_output_dim(mixture_components); }
};

// step() and the sampling helpers are const and safe to call concurrently on
// a frozen weight snapshot (with independent rng streams); training mutates
// parameters and must be serialized per instance.
template <typename T>
class PredictionNet {
 public:
  using Mat = nn::Mat<T>;

  PredictionNet(PredictionConfig cfg, Rng& rng,
                const std::string& prefix = "Gp")
      : cfg_(cfg),
        lstm1_(prefix + "/lstm1", PredictionConfig::kInputDim, cfg.hidden1,
               rng),
        lstm2_(prefix + "/lstm2", cfg.hidden1 + PredictionConfig::kInputDim,
               cfg.hidden2, rng),
        lstm3_(prefix + "/lstm3", cfg.hidden2 + PredictionConfig::kInputDim,
               cfg.hidden3, rng),
        fc_(prefix + "/output_fc", cfg.hidden1 + cfg.hidden2 + cfg.hidden3,
            cfg.output_dim(), rng) {}

  PredictionNet(const PredictionNet&) = delete;
  PredictionNet& operator=(const PredictionNet&) = delete;

  const PredictionConfig& config() const { return cfg_; }

  struct State {
    Mat h1, c1, h2, c2, h3, c3;
  };

  State init_state(int batch) const {
    State s;
    s.h1 = Mat::Zero(cfg_.hidden1, batch);
    s.c1 = Mat::Zero(cfg_.hidden1, batch);
    s.h2 = Mat::Zero(cfg_.hidden2, batch);
    s.c2 = Mat::Zero(cfg_.hidden2, batch);
    s.h3 = Mat::Zero(cfg_.hidden3, batch);
    s.c3 = Mat::Zero(cfg_.hidden3, batch);
    return s;
  }

  struct Cache {
    std::vector<typename nn::LstmLayer<T>::StepCache> l1, l2, l3;
    std::vector<Mat> fc_in;
  };

  // One step for a batch of inputs (3 x B); returns raw outputs
  // (output_dim x B). Records caches when given.
  Mat step(const Mat& x, State& state, Cache* cache = nullptr) const {
    auto* c1 = push_cache(cache ? &cache->l1 : nullptr);
    lstm1_.step(x, state.h1, state.c1, c1);

    Mat in2(cfg_.hidden1 + PredictionConfig::kInputDim, x.cols());
    in2.topRows(cfg_.hidden1) = state.h1;
    in2.bottomRows(PredictionConfig::kInputDim) = x;
    auto* c2 = push_cache(cache ? &cache->l2 : nullptr);
    lstm2_.step(in2, state.h2, state.c2, c2);

    Mat in3(cfg_.hidden2 + PredictionConfig::kInputDim, x.cols());
    in3.topRows(cfg_.hidden2) = state.h2;
    in3.bottomRows(PredictionConfig::kInputDim) = x;
    auto* c3 = push_cache(cache ? &cache->l3 : nullptr);
    lstm3_.step(in3, state.h3, state.c3, c3);

    Mat fc_in(cfg_.hidden1 + cfg_.hidden2 + cfg_.hidden3, x.cols());
    fc_in.topRows(cfg_.hidden1) = state.h1;
    fc_in.middleRows(cfg_.hidden1, cfg_.hidden2) = state.h2;
    fc_in.bottomRows(cfg_.hidden3) = state.h3;
    if (cache) cache->fc_in.push_back(fc_in);
    return fc_.forward(fc_in);
  }

  std::vector<Mat> forward_train(const std::vector<Mat>& xs,
                                 Cache& cache) const {
    State state = init_state(xs.empty() ? 0 : static_cast<int>(xs[0].cols()));
    std::vector<Mat> raws;
    raws.reserve(xs.size());
    for (const auto& x : xs) raws.push_back(step(x, state, &cache));
    return raws;
  }

  // Backpropagation through time given d(loss)/d(raw) per step.
  void backward_train(const Cache& cache, const std::vector<Mat>& draws) {
    const int steps = static_cast<int>(draws.size());
    if (steps == 0) return;
    const int batch = static_cast<int>(draws[0].cols());
    const int h1 = cfg_.hidden1, h2 = cfg_.hidden2, h3 = cfg_.hidden3;

    Mat dh1_rec = Mat::Zero(h1, batch), dc1 = Mat::Zero(h1, batch);
    Mat dh2_rec = Mat::Zero(h2, batch), dc2 = Mat::Zero(h2, batch);
    Mat dh3_rec = Mat::Zero(h3, batch), dc3 = Mat::Zero(h3, batch);

    for (int t = steps - 1; t >= 0; --t) {
      const auto ts = static_cast<std::size_t>(t);
      Mat dcat = fc_.backward(cache.fc_in[ts], draws[ts]);

      Mat dh3 = dcat.bottomRows(h3) + dh3_rec;
      Mat dxh3 = lstm3_.backward_step(cache.l3[ts], prev_c(cache.l3, t, h3, batch),
                                      dh3, dc3);
      dh3_rec = dxh3.bottomRows(h3);

      Mat dh2 = dcat.middleRows(h1, h2) + dxh3.topRows(h2) + dh2_rec;
      Mat dxh2 = lstm2_.backward_step(cache.l2[ts], prev_c(cache.l2, t, h2, batch),
                                      dh2, dc2);
      dh2_rec = dxh2.bottomRows(h2);

      Mat dh1 = dcat.topRows(h1) + dxh2.topRows(h1) + dh1_rec;
      Mat dxh1 = lstm1_.backward_step(cache.l1[ts], prev_c(cache.l1, t, h1, batch),
                                      dh1, dc1);
      dh1_rec = dxh1.bottomRows(h1);
    }
  }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> out;
    lstm1_.collect(out);
    lstm2_.collect(out);
    lstm3_.collect(out);
    fc_.collect(out);
    return out;
  }

 private:
  static typename nn::LstmLayer<T>::StepCache* push_cache(
      std::vector<typename nn::LstmLayer<T>::StepCache>* v) {
    if (!v) return nullptr;
    v->emplace_back();
    return &v->back();
  }

  static Mat prev_c(const std::vector<typename nn::LstmLayer<T>::StepCache>& v,
                    int t, int hidden, int batch) {
    return t == 0 ? Mat::Zero(hidden, batch) : v[static_cast<std::size_t>(t - 1)].c;
  }

  PredictionConfig cfg_;
  nn::LstmLayer<T> lstm1_, lstm2_, lstm3_;
  nn::Dense<T> fc_;
};

// ---------------------------------------------------------------------------
// Text-conditioned generator: two LSTMs around a soft attention window over
// the one-hot text. Window locations only ever move forward.

// Mixture-of-Gaussians window weights over character positions u = 1..U:
// phi(u) = sum_k amp_k * exp(-width_k * (kappa_k - u)^2).
template <typename T>
nn::Vec<T> window_phi(const Eigen::Ref<const nn::Vec<T>>& amp,
                      const Eigen::Ref<const nn::Vec<T>>& width,
                      const Eigen::Ref<const nn::Vec<T>>& kappa,
                      int text_len) {
  nn::Vec<T> phi(text_len);
  for (int u = 0; u < text_len; ++u) {
    const auto d = kappa.array() - T(u + 1);
    phi[u] = (amp.array() * (-width.array() * d * d).exp()).sum();
  }
  return phi;
}

struct SynthesisConfig {
  int hidden1 = 512;
  int hidden2 = 512;
  int window_components = 5;
  int mixture_components = 20;
  int alphabet = Vocabulary::kSize;

  static constexpr int kInputDim = 3;
  int output_dim() const { return mdn_output_dim(mixture_components); }
};

template <typename T>
class SynthesisNet {
 public:
  using Mat = nn::Mat<T>;

  SynthesisNet(SynthesisConfig cfg, Rng& rng, const std::string& prefix = "Gs")
      : cfg_(cfg),
        lstm1_(prefix + "/lstm1", SynthesisConfig::kInputDim + cfg.alphabet,
               cfg.hidden1, rng),
        window_fc_(prefix + "/window_fc", cfg.hidden1,
                   3 * cfg.window_components, rng),
        lstm2_(prefix + "/lstm2",
               SynthesisConfig::kInputDim + cfg.hidden1 + cfg.alphabet,
               cfg.hidden2, rng),
        fc_(prefix + "/output_fc", cfg.hidden2, cfg.output_dim(), rng) {}

  SynthesisNet(const SynthesisNet&) = delete;
  SynthesisNet& operator=(const SynthesisNet&) = delete;

  const SynthesisConfig& config() const { return cfg_; }

  struct State {
    Mat h1, c1, h2, c2;
    Mat kappa;  // window locations, K x B, non-decreasing over steps
    Mat w;      // window vector, alphabet x B
  };

  State init_state(int batch) const {
    State s;
    s.h1 = Mat::Zero(cfg_.hidden1, batch);
    s.c1 = Mat::Zero(cfg_.hidden1, batch);
    s.h2 = Mat::Zero(cfg_.hidden2, batch);
    s.c2 = Mat::Zero(cfg_.hidden2, batch);
    s.kappa = Mat::Zero(cfg_.window_components, batch);
    s.w = Mat::Zero(cfg_.alphabet, batch);
    return s;
  }

  struct Cache {
    std::vector<typename nn::LstmLayer<T>::StepCache> l1, l2;
    std::vector<Mat> window_raw;  // window_fc output per step, 3K x B
    std::vector<Mat> kappa;       // post-update locations per step
    std::vector<Mat> fc_in;       // h2 per step
  };

  // texts: one (alphabet x U_b) one-hot matrix per batch element.
  Mat step(const Mat& x, const std::vector<Mat>& texts, State& state,
           Cache* cache = nullptr) const {
    const int batch = static_cast<int>(x.cols());
    if (static_cast<int>(texts.size()) != batch)
      throw ContractError("synthesis step: one text per batch element");
    for (const auto& c : texts)
      if (c.cols() == 0)
        throw ContractError("synthesis step: text must be non-empty");

    Mat in1(SynthesisConfig::kInputDim + cfg_.alphabet, batch);
    in1.topRows(SynthesisConfig::kInputDim) = x;
    in1.bottomRows(cfg_.alphabet) = state.w;
    auto* c1 = push_cache(cache ? &cache->l1 : nullptr);
    lstm1_.step(in1, state.h1, state.c1, c1);

    const Mat p = window_fc_.forward(state.h1);
    const int K = cfg_.window_components;
    Mat new_kappa(K, batch);
    Mat w = Mat::Zero(cfg_.alphabet, batch);
    for (int b = 0; b < batch; ++b) {
      const nn::Vec<T> amp = p.col(b).segment(0, K).array().exp();
      const nn::Vec<T> width = p.col(b).segment(K, K).array().exp();
      new_kappa.col(b) =
          state.kappa.col(b) + p.col(b).segment(2 * K, K).array().exp().matrix();
      const auto& C = texts[static_cast<std::size_t>(b)];
      const int U = static_cast<int>(C.cols());
      const nn::Vec<T> phi = window_phi<T>(amp, width, new_kappa.col(b), U);
      w.col(b) = C * phi;
    }
    state.kappa = new_kappa;
    state.w = w;
    if (cache) {
      cache->window_raw.push_back(p);
      cache->kappa.push_back(new_kappa);
    }

    Mat in2(SynthesisConfig::kInputDim + cfg_.hidden1 + cfg_.alphabet, batch);
    in2.topRows(SynthesisConfig::kInputDim) = x;
    in2.middleRows(SynthesisConfig::kInputDim, cfg_.hidden1) = state.h1;
    in2.bottomRows(cfg_.alphabet) = w;
    auto* c2 = push_cache(cache ? &cache->l2 : nullptr);
    lstm2_.step(in2, state.h2, state.c2, c2);

    if (cache) cache->fc_in.push_back(state.h2);
    return fc_.forward(state.h2);
  }

  std::vector<Mat> forward_train(const std::vector<Mat>& xs,
                                 const std::vector<Mat>& texts,
                                 Cache& cache) const {
    State state = init_state(xs.empty() ? 0 : static_cast<int>(xs[0].cols()));
    std::vector<Mat> raws;
    raws.reserve(xs.size());
    for (const auto& x : xs) raws.push_back(step(x, texts, state, &cache));
    return raws;
  }

  void backward_train(const Cache& cache, const std::vector<Mat>& texts,
                      const std::vector<Mat>& draws) {
    const int steps = static_cast<int>(draws.size());
    if (steps == 0) return;
    const int batch = static_cast<int>(draws[0].cols());
    const int h1 = cfg_.hidden1, h2 = cfg_.hidden2;
    const int K = cfg_.window_components;
    const int A = cfg_.alphabet;
    constexpr int X = SynthesisConfig::kInputDim;

    Mat dh1_rec = Mat::Zero(h1, batch), dc1 = Mat::Zero(h1, batch);
    Mat dh2_rec = Mat::Zero(h2, batch), dc2 = Mat::Zero(h2, batch);
    Mat dkappa_carry = Mat::Zero(K, batch);
    Mat dw_next = Mat::Zero(A, batch);  // from in1 of step t + 1

    for (int t = steps - 1; t >= 0; --t) {
      const auto ts = static_cast<std::size_t>(t);
      Mat dh2 = fc_.backward(cache.fc_in[ts], draws[ts]) + dh2_rec;
      Mat dxh2 = lstm2_.backward_step(cache.l2[ts],
                                      prev_c(cache.l2, t, h2, batch), dh2, dc2);
      dh2_rec = dxh2.bottomRows(h2);

      Mat dw_total = dxh2.middleRows(X + h1, A) + dw_next;

      // Window backward: through phi into amplitudes, widths and the
      // cumulative locations (whose gradient flows to every earlier step).
      Mat dp = Mat::Zero(3 * K, batch);
      const Mat& p = cache.window_raw[ts];
      for (int b = 0; b < batch; ++b) {
        const auto& C = texts[static_cast<std::size_t>(b)];
        const int U = static_cast<int>(C.cols());
        const nn::Vec<T> dphi = C.transpose() * dw_total.col(b);
        const auto amp = p.col(b).segment(0, K).array().exp().eval();
        const auto width = p.col(b).segment(K, K).array().exp().eval();
        const auto step_exp =
            p.col(b).segment(2 * K, K).array().exp().eval();
        const auto kappa = cache.kappa[ts].col(b);
        nn::Vec<T> damp = nn::Vec<T>::Zero(K);
        nn::Vec<T> dwidth = nn::Vec<T>::Zero(K);
        nn::Vec<T> dkappa = nn::Vec<T>::Zero(K);
        for (int u = 0; u < U; ++u) {
          for (int k = 0; k < K; ++k) {
            const T d = kappa[k] - T(u + 1);
            const T e = std::exp(-width[k] * d * d);
            damp[k] += dphi[u] * e;
            dwidth[k] -= dphi[u] * amp[k] * e * d * d;
            dkappa[k] -= dphi[u] * amp[k] * e * T(2) * width[k] * d;
          }
        }
        dkappa += dkappa_carry.col(b);
        dp.col(b).segment(0, K) = (amp * damp.array()).matrix();
        dp.col(b).segment(K, K) = (width * dwidth.array()).matrix();
        dp.col(b).segment(2 * K, K) = (step_exp * dkappa.array()).matrix();
        dkappa_carry.col(b) = dkappa;
      }

      const Mat h1_t = cache.l2[ts].xh.middleRows(X, h1);
      Mat dh1 = dxh2.middleRows(X, h1) + window_fc_.backward(h1_t, dp) +
                dh1_rec;
      Mat dxh1 = lstm1_.backward_step(cache.l1[ts],
                                      prev_c(cache.l1, t, h1, batch), dh1, dc1);
      dh1_rec = dxh1.bottomRows(h1);
      dw_next = dxh1.middleRows(X, A);
    }
  }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> out;
    lstm1_.collect(out);
    window_fc_.collect(out);
    lstm2_.collect(out);
    fc_.collect(out);
    return out;
  }

 private:
  static typename nn::LstmLayer<T>::StepCache* push_cache(
      std::vector<typename nn::LstmLayer<T>::StepCache>* v) {
    if (!v) return nullptr;
    v->emplace_back();
    return &v->back();
  }

  static Mat prev_c(const std::vector<typename nn::LstmLayer<T>::StepCache>& v,
                    int t, int hidden, int batch) {
    return t == 0 ? Mat::Zero(hidden, batch)
                  : v[static_cast<std::size_t>(t - 1)].c;
  }

  SynthesisConfig cfg_;
  nn::LstmLayer<T> lstm1_;
  nn::Dense<T> window_fc_;
  nn::LstmLayer<T> lstm2_;
  nn::Dense<T> fc_;
};

// ---------------------------------------------------------------------------
// Sampling.

struct SamplerConfig {
  double bias = 0.0;  // >= 0; sharpens the sampling distribution
  uint64_t seed = 0;
  int max_points = 400;
  int points_per_char = 25;
};

struct SampleResult {
  HandwritingSample sample;
  std::vector<OffsetPoint> offsets;
  double log_prob = 0.0;  // sum of log p(point) under the unbiased output
};

namespace detail {

template <typename T>
void append_sampled_point(const nn::Mat<T>& raw, double bias, int components,
                          Rng& rng, SampleResult& result) {
  const Eigen::VectorXd raw_d = raw.col(0).template cast<double>();
  const MdnParams unbiased = mdn_split(raw_d, components);
  const OffsetPoint point =
      bias > 0.0 ? mdn_sample(mdn_split(raw_d, components, bias), rng)
                 : mdn_sample(unbiased, rng);
  if (!std::isfinite(point.dx) || !std::isfinite(point.dy))
    throw NumericError("sample_sequence: non-finite point");
  result.log_prob += -mdn_nll(unbiased, point);
  result.offsets.push_back(point);
}

}  // namespace detail

template <typename T>
SampleResult sample_sequence(const PredictionNet<T>& net,
                             const SamplerConfig& config, Rng& rng) {
  if (config.bias < 0.0) throw ConfigError("sample_sequence: bias must be >= 0");
  SampleResult result;
  auto state = net.init_state(1);
  nn::Mat<T> x(PredictionConfig::kInputDim, 1);
  x << T(0), T(0), T(1);
  for (int t = 0; t < config.max_points; ++t) {
    const auto raw = net.step(x, state);
    detail::append_sampled_point(raw, config.bias,
                                 net.config().mixture_components, rng, result);
    const auto& p = result.offsets.back();
    x << static_cast<T>(p.dx), static_cast<T>(p.dy), static_cast<T>(p.eos);
  }
  result.sample = from_offsets(result.offsets);
  return result;
}

// Stops at points_per_char * U points or once every window location has
// passed one position beyond the final character, whichever happens first.
template <typename T>
SampleResult sample_sequence(const SynthesisNet<T>& net,
                             const TextEncoding& text,
                             const SamplerConfig& config, Rng& rng) {
  if (config.bias < 0.0) throw ConfigError("sample_sequence: bias must be >= 0");
  if (text.length() == 0)
    throw ContractError("sample_sequence: text must be non-empty");

  const int U = static_cast<int>(text.length());
  const int cap = config.points_per_char * U;
  const std::vector<nn::Mat<T>> texts{text_matrix<T>(text)};

  SampleResult result;
  auto state = net.init_state(1);
  nn::Mat<T> x(SynthesisConfig::kInputDim, 1);
  x << T(0), T(0), T(1);
  for (int t = 0; t < cap; ++t) {
    const auto raw = net.step(x, texts, state);
    detail::append_sampled_point(raw, config.bias,
                                 net.config().mixture_components, rng, result);
    const auto& p = result.offsets.back();
    x << static_cast<T>(p.dx), static_cast<T>(p.dy), static_cast<T>(p.eos);
    if (static_cast<double>(state.kappa.col(0).maxCoeff()) >
        static_cast<double>(U + 1))
      break;
  }
  result.sample = from_offsets(result.offsets);
  return result;
}

// ---------------------------------------------------------------------------
// Teacher forcing.

template <typename T>
struct TeacherData {
  std::vector<nn::Mat<T>> inputs;              // per step, 3 x B
  std::vector<std::vector<OffsetPoint>> targets;  // per step, B entries
  std::vector<std::vector<uint8_t>> mask;      // per step, B entries
  std::size_t total_steps = 0;
  int batch = 0;
};

// Inputs are the previous target point, starting from (0, 0, 1).
template <typename T>
TeacherData<T> build_teacher_data(
    const std::vector<std::vector<OffsetPoint>>& sequences) {
  if (sequences.empty())
    throw InvalidArgumentError("teacher forcing: empty batch");
  TeacherData<T> data;
  data.batch = static_cast<int>(sequences.size());
  std::size_t max_len = 0;
  for (const auto& s : sequences) {
    if (s.empty())
      throw InvalidArgumentError("teacher forcing: empty sequence");
    max_len = std::max(max_len, s.size());
    data.total_steps += s.size();
  }
  for (std::size_t t = 0; t < max_len; ++t) {
    nn::Mat<T> x = nn::Mat<T>::Zero(3, data.batch);
    std::vector<OffsetPoint> targets(static_cast<std::size_t>(data.batch));
    std::vector<uint8_t> mask(static_cast<std::size_t>(data.batch), 0);
    for (int b = 0; b < data.batch; ++b) {
      const auto& seq = sequences[static_cast<std::size_t>(b)];
      if (t >= seq.size()) continue;
      mask[static_cast<std::size_t>(b)] = 1;
      targets[static_cast<std::size_t>(b)] = seq[t];
      if (t == 0) {
        x(2, b) = T(1);
      } else {
        x(0, b) = static_cast<T>(seq[t - 1].dx);
        x(1, b) = static_cast<T>(seq[t - 1].dy);
        x(2, b) = static_cast<T>(seq[t - 1].eos);
      }
    }
    data.inputs.push_back(std::move(x));
    data.targets.push_back(std::move(targets));
    data.mask.push_back(std::move(mask));
  }
  return data;
}

// Fills per-step raw-output gradients scaled by seq_weight[b]; returns the
// total unweighted NLL over valid steps.
template <typename T>
double mdn_sequence_draws(const std::vector<nn::Mat<T>>& raws,
                          const TeacherData<T>& data, int components,
                          const std::vector<double>& seq_weight,
                          std::vector<nn::Mat<T>>* draws,
                          std::vector<double>* per_sequence_nll = nullptr) {
  const int dim = mdn_output_dim(components);
  std::vector<double> raw_d(static_cast<std::size_t>(dim));
  std::vector<double> grad_d(static_cast<std::size_t>(dim));
  if (per_sequence_nll)
    per_sequence_nll->assign(static_cast<std::size_t>(data.batch), 0.0);
  double total_nll = 0.0;
  if (draws) draws->clear();
  for (std::size_t t = 0; t < raws.size(); ++t) {
    nn::Mat<T> draw;
    if (draws) draw = nn::Mat<T>::Zero(dim, data.batch);
    for (int b = 0; b < data.batch; ++b) {
      if (!data.mask[t][static_cast<std::size_t>(b)]) continue;
      for (int i = 0; i < dim; ++i)
        raw_d[static_cast<std::size_t>(i)] =
            static_cast<double>(raws[t](i, b));
      const auto& target = data.targets[t][static_cast<std::size_t>(b)];
      const double nll = mdn_nll_grad(raw_d.data(), components, target.dx,
                                      target.dy, target.eos, grad_d.data());
      total_nll += nll;
      if (per_sequence_nll) (*per_sequence_nll)[static_cast<std::size_t>(b)] += nll;
      if (draws) {
        const double w = seq_weight[static_cast<std::size_t>(b)];
        for (int i = 0; i < dim; ++i)
          draw(i, b) = static_cast<T>(grad_d[static_cast<std::size_t>(i)] * w);
      }
    }
    if (draws) draws->push_back(std::move(draw));
  }
  return total_nll;
}

// Mean per-step teacher-forced NLL without touching gradients.
template <typename T>
double teacher_forced_nll(const PredictionNet<T>& net,
                          const std::vector<std::vector<OffsetPoint>>& seqs) {
  const auto data = build_teacher_data<T>(seqs);
  typename PredictionNet<T>::Cache cache;
  const auto raws = net.forward_train(data.inputs, cache);
  const double total = mdn_sequence_draws<T>(
      raws, data, net.config().mixture_components, {}, nullptr);
  return total / static_cast<double>(data.total_steps);
}

template <typename T>
double teacher_forced_nll(const SynthesisNet<T>& net,
                          const std::vector<std::vector<OffsetPoint>>& seqs,
                          const std::vector<TextEncoding>& texts) {
  const auto data = build_teacher_data<T>(seqs);
  std::vector<nn::Mat<T>> text_mats;
  for (const auto& t : texts) text_mats.push_back(text_matrix<T>(t));
  typename SynthesisNet<T>::Cache cache;
  const auto raws = net.forward_train(data.inputs, text_mats, cache);
  const double total = mdn_sequence_draws<T>(
      raws, data, net.config().mixture_components, {}, nullptr);
  return total / static_cast<double>(data.total_steps);
}

// One maximum-likelihood step; returns the mean per-step NLL before the
// update. Throws DivergenceError on a non-finite loss or gradient.
template <typename T>
double pretrain_step(PredictionNet<T>& net,
                     const std::vector<std::vector<OffsetPoint>>& seqs,
                     nn::Adam<T>& opt, double lr, long step_index = -1) {
  const auto data = build_teacher_data<T>(seqs);
  nn::zero_grads(opt.params());
  typename PredictionNet<T>::Cache cache;
  const auto raws = net.forward_train(data.inputs, cache);
  const std::vector<double> weights(
      static_cast<std::size_t>(data.batch),
      1.0 / static_cast<double>(data.total_steps));
  std::vector<nn::Mat<T>> draws;
  const double total = mdn_sequence_draws<T>(
      raws, data, net.config().mixture_components, weights, &draws);
  net.backward_train(cache, draws);
  if (!std::isfinite(total) || !nn::grads_finite(opt.params()))
    throw DivergenceError("pretrain_step: non-finite loss", step_index);
  opt.step(lr);
  return total / static_cast<double>(data.total_steps);
}

template <typename T>
double pretrain_step(SynthesisNet<T>& net,
                     const std::vector<std::vector<OffsetPoint>>& seqs,
                     const std::vector<TextEncoding>& texts, nn::Adam<T>& opt,
                     double lr, long step_index = -1) {
  if (texts.size() != seqs.size())
    throw InvalidArgumentError("pretrain_step: one text per sequence");
  const auto data = build_teacher_data<T>(seqs);
  std::vector<nn::Mat<T>> text_mats;
  for (const auto& t : texts) text_mats.push_back(text_matrix<T>(t));
  nn::zero_grads(opt.params());
  typename SynthesisNet<T>::Cache cache;
  const auto raws = net.forward_train(data.inputs, text_mats, cache);
  const std::vector<double> weights(
      static_cast<std::size_t>(data.batch),
      1.0 / static_cast<double>(data.total_steps));
  std::vector<nn::Mat<T>> draws;
  const double total = mdn_sequence_draws<T>(
      raws, data, net.config().mixture_components, weights, &draws);
  net.backward_train(cache, text_mats, draws);
  if (!std::isfinite(total) || !nn::grads_finite(opt.params()))
    throw DivergenceError("pretrain_step: non-finite loss", step_index);
  opt.step(lr);
  return total / static_cast<double>(data.total_steps);
}

}  // namespace hwgan
