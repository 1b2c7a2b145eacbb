#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hwgan/error.hpp"
#include "hwgan/rng.hpp"

namespace hwgan::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// A (channels, height, width) feature block, plane-major storage.
template <typename T>
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, T(0)) {}

  T& at(int c, int y, int x) {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  T at(int c, int y, int x) const {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  void set_zero() { std::fill(data.begin(), data.end(), T(0)); }
};

// A named trainable tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  Param() = default;
  Param(std::string n, int rows, int cols)
      : name(std::move(n)), value(Mat<T>::Zero(rows, cols)),
        grad(Mat<T>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

template <typename T>
void uniform_init(Mat<T>& m, Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = static_cast<T>(rng.uniform(-scale, scale));
}

template <typename T>
void zero_grads(const std::vector<Param<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

// L2 norm of all gradients, accumulated in double.
template <typename T>
double global_grad_norm(const std::vector<Param<T>*>& params) {
  double sum = 0.0;
  for (const auto* p : params)
    sum += p->grad.template cast<double>().squaredNorm();
  return std::sqrt(sum);
}

template <typename T>
void scale_grads(const std::vector<Param<T>*>& params, double factor) {
  for (auto* p : params) p->grad *= static_cast<T>(factor);
}

template <typename T>
bool grads_finite(const std::vector<Param<T>*>& params) {
  for (const auto* p : params)
    if (!p->grad.allFinite()) return false;
  return true;
}

// Fully connected layer: y = W x + b, optional ReLU handled by callers.
template <typename T>
struct Dense {
  Param<T> W, b;

  Dense() = default;
  Dense(const std::string& prefix, int in, int out, Rng& rng)
      : W(prefix + "/W", out, in), b(prefix + "/b", out, 1) {
    uniform_init(W.value, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  }

  int in_dim() const { return static_cast<int>(W.value.cols()); }
  int out_dim() const { return static_cast<int>(W.value.rows()); }

  Mat<T> forward(const Mat<T>& x) const {
    return (W.value * x).colwise() + b.value.col(0);
  }

  // Accumulates parameter gradients; returns the input gradient.
  Mat<T> backward(const Mat<T>& x, const Mat<T>& dy) {
    W.grad.noalias() += dy * x.transpose();
    b.grad.col(0) += dy.rowwise().sum();
    return W.value.transpose() * dy;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&W);
    out.push_back(&b);
  }
};

// Single LSTM layer. Gates are stored in row blocks [input; forget; cell;
// output] of the combined weight W (4H x (in + H)), applied to [x; h_prev].
template <typename T>
struct LstmLayer {
  int in_dim = 0;
  int hidden = 0;
  Param<T> W, b;

  struct StepCache {
    Mat<T> xh;     // (in + H) x B
    Mat<T> gates;  // 4H x B, post-activation
    Mat<T> c;      // H x B
  };

  LstmLayer() = default;
  LstmLayer(const std::string& prefix, int in, int h, Rng& rng)
      : in_dim(in), hidden(h), W(prefix + "/W", 4 * h, in + h),
        b(prefix + "/b", 4 * h, 1) {
    uniform_init(W.value, rng, 1.0 / std::sqrt(static_cast<double>(in + h)));
  }

  // Advances h and c in place; optionally records the step for backward.
  void step(const Mat<T>& x, Mat<T>& h, Mat<T>& c,
            StepCache* cache = nullptr) const {
    const auto B = x.cols();
    Mat<T> xh(in_dim + hidden, B);
    xh.topRows(in_dim) = x;
    xh.bottomRows(hidden) = h;
    Mat<T> z = (W.value * xh).colwise() + b.value.col(0);
    Mat<T> gates(4 * hidden, B);
    gates.middleRows(0, hidden) =
        (T(1) / (T(1) + (-z.middleRows(0, hidden).array()).exp())).matrix();
    gates.middleRows(hidden, hidden) =
        (T(1) / (T(1) + (-z.middleRows(hidden, hidden).array()).exp()))
            .matrix();
    gates.middleRows(2 * hidden, hidden) =
        z.middleRows(2 * hidden, hidden).array().tanh().matrix();
    gates.middleRows(3 * hidden, hidden) =
        (T(1) / (T(1) + (-z.middleRows(3 * hidden, hidden).array()).exp()))
            .matrix();

    c = gates.middleRows(hidden, hidden).cwiseProduct(c) +
        gates.middleRows(0, hidden).cwiseProduct(
            gates.middleRows(2 * hidden, hidden));
    h = gates.middleRows(3 * hidden, hidden)
            .cwiseProduct(c.array().tanh().matrix());
    if (cache) {
      cache->xh = std::move(xh);
      cache->gates = gates;
      cache->c = c;
    }
  }

  // One step of backpropagation through time. dh_total must already include
  // the recurrent carry; dc_carry is read for step t and rewritten for t-1.
  // Returns d[x; h_prev]; parameter gradients are accumulated.
  Mat<T> backward_step(const StepCache& sc, const Mat<T>& c_prev,
                       const Mat<T>& dh_total, Mat<T>& dc_carry) {
    const auto i = sc.gates.middleRows(0, hidden);
    const auto f = sc.gates.middleRows(hidden, hidden);
    const auto g = sc.gates.middleRows(2 * hidden, hidden);
    const auto o = sc.gates.middleRows(3 * hidden, hidden);

    Mat<T> tc = sc.c.array().tanh().matrix();
    Mat<T> dc = dc_carry + dh_total.cwiseProduct(o).cwiseProduct(
                               (T(1) - tc.array().square()).matrix());
    Mat<T> dz(4 * hidden, dh_total.cols());
    // d pre-activations: sigmoid' = s(1-s), tanh' = 1 - t^2
    dz.middleRows(0, hidden) = dc.cwiseProduct(g).cwiseProduct(i).cwiseProduct(
        (T(1) - i.array()).matrix());
    dz.middleRows(hidden, hidden) =
        dc.cwiseProduct(c_prev).cwiseProduct(f).cwiseProduct(
            (T(1) - f.array()).matrix());
    dz.middleRows(2 * hidden, hidden) =
        dc.cwiseProduct(i).cwiseProduct((T(1) - g.array().square()).matrix());
    dz.middleRows(3 * hidden, hidden) =
        dh_total.cwiseProduct(tc).cwiseProduct(o).cwiseProduct(
            (T(1) - o.array()).matrix());

    W.grad.noalias() += dz * sc.xh.transpose();
    b.grad.col(0) += dz.rowwise().sum();
    dc_carry = dc.cwiseProduct(f);
    return W.value.transpose() * dz;
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&W);
    out.push_back(&b);
  }
};

// Adam with bias correction. Moment buffers are exposed so training
// checkpoints can restore the exact optimizer state.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param<T>*> params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step(double lr) {
    ++t_;
    const double corr1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double corr2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      m_[k] = static_cast<T>(beta1_) * m_[k] +
              static_cast<T>(1.0 - beta1_) * p.grad;
      v_[k] = static_cast<T>(beta2_) * v_[k] +
              static_cast<T>(1.0 - beta2_) *
                  p.grad.cwiseProduct(p.grad);
      p.value.array() -=
          static_cast<T>(lr) * (m_[k].array() / static_cast<T>(corr1)) /
          ((v_[k].array() / static_cast<T>(corr2)).sqrt() +
           static_cast<T>(eps_));
    }
  }

  const std::vector<Param<T>*>& params() const { return params_; }
  std::vector<Mat<T>>& first_moments() { return m_; }
  std::vector<Mat<T>>& second_moments() { return v_; }
  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Mat<T>> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace hwgan::nn
