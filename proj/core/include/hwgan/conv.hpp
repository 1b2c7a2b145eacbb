#pragma once

#include <string>
#include <vector>

#include "hwgan/nn.hpp"

namespace hwgan::nn {

// One layer of the feature encoder: a 3x3 same-padded convolution with ReLU,
// or a 2x2/stride-2 average pool. Conv strides are (width, height).
struct ConvSpec {
  enum class Op { kConv, kPool };
  Op op = Op::kConv;
  int out_channels = 0;
  int stride_w = 1;
  int stride_h = 1;

  static ConvSpec conv(int out_channels, int stride_w = 1, int stride_h = 1) {
    return {Op::kConv, out_channels, stride_w, stride_h};
  }
  static ConvSpec pool() { return {Op::kPool, 0, 2, 2}; }
};

struct Shape3 {
  int channels = 0, height = 0, width = 0;
};

inline Shape3 conv_layer_out_shape(const ConvSpec& spec, Shape3 in) {
  if (spec.op == ConvSpec::Op::kPool)
    return {in.channels, in.height / 2, in.width / 2};
  // 3x3 kernel, pad 1: out = floor((n + 2 - 3) / stride) + 1
  return {spec.out_channels, (in.height - 1) / spec.stride_h + 1,
          (in.width - 1) / spec.stride_w + 1};
}

inline Shape3 conv_stack_out_shape(const std::vector<ConvSpec>& stack,
                                   Shape3 in) {
  for (const auto& spec : stack) in = conv_layer_out_shape(spec, in);
  return in;
}

// Total width downsampling across the stack.
inline int conv_stack_width_factor(const std::vector<ConvSpec>& stack) {
  int factor = 1;
  for (const auto& spec : stack) factor *= spec.stride_w;
  return factor;
}

// 3x3 convolutions via im2col + GEMM.
template <typename T>
class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(const std::string& prefix, std::vector<ConvSpec> stack,
            int in_channels, Rng& rng)
      : stack_(std::move(stack)), in_channels_(in_channels) {
    int channels = in_channels;
    int conv_index = 0;
    for (const auto& spec : stack_) {
      if (spec.op != ConvSpec::Op::kConv) continue;
      ++conv_index;
      const std::string name = prefix + "/conv" + std::to_string(conv_index);
      const int fan_in = channels * 9;
      weights_.emplace_back(name + "/W", spec.out_channels, fan_in);
      uniform_init(weights_.back().value, rng,
                   1.0 / std::sqrt(static_cast<double>(fan_in)));
      biases_.emplace_back(name + "/b", spec.out_channels, 1);
      channels = spec.out_channels;
    }
  }

  struct Cache {
    std::vector<Tensor3<T>> activations;  // input + every layer output
    std::vector<Mat<T>> cols;             // im2col matrix per conv layer
  };

  Tensor3<T> forward(const Tensor3<T>& input, Cache* cache = nullptr) const {
    if (input.channels != in_channels_)
      throw ContractError("conv stack: input channel mismatch");
    Tensor3<T> x = input;
    if (cache) cache->activations.push_back(x);
    int conv_index = 0;
    for (const auto& spec : stack_) {
      if (spec.op == ConvSpec::Op::kPool) {
        x = pool_forward(x);
      } else {
        Mat<T> cols = im2col(x, spec.stride_w, spec.stride_h);
        const Shape3 out = conv_layer_out_shape(
            spec, {x.channels, x.height, x.width});
        x = conv_apply(weights_[conv_index], biases_[conv_index], cols, out);
        if (cache) cache->cols.push_back(std::move(cols));
        ++conv_index;
      }
      if (cache) cache->activations.push_back(x);
    }
    return x;
  }

  // Accumulates parameter gradients, returns nothing useful for the input.
  void backward(const Cache& cache, const Tensor3<T>& dout_last) {
    Tensor3<T> dout = dout_last;
    int conv_index = static_cast<int>(weights_.size());
    for (int layer = static_cast<int>(stack_.size()) - 1; layer >= 0;
         --layer) {
      const auto& spec = stack_[static_cast<std::size_t>(layer)];
      const auto& x = cache.activations[static_cast<std::size_t>(layer)];
      if (spec.op == ConvSpec::Op::kPool) {
        dout = pool_backward(x, dout);
      } else {
        --conv_index;
        dout = conv_backward(conv_index,
                             cache.cols[static_cast<std::size_t>(conv_index)],
                             cache.activations[static_cast<std::size_t>(layer + 1)],
                             dout, x, spec, layer > 0);
      }
    }
  }

  void collect(std::vector<Param<T>*>& out) {
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      out.push_back(&weights_[i]);
      out.push_back(&biases_[i]);
    }
  }

  const std::vector<ConvSpec>& stack() const { return stack_; }
  int in_channels() const { return in_channels_; }

 private:
  // Patch matrix: rows are (channel, ky, kx) in row-major order, one column
  // per output pixel (row-major over (oy, ox)). 3x3 kernel, zero pad 1.
  static Mat<T> im2col(const Tensor3<T>& x, int stride_w, int stride_h) {
    const int out_h = (x.height - 1) / stride_h + 1;
    const int out_w = (x.width - 1) / stride_w + 1;
    Mat<T> cols = Mat<T>::Zero(x.channels * 9, out_h * out_w);
    for (int c = 0; c < x.channels; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int row = (c * 3 + ky) * 3 + kx;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride_h + ky - 1;
            if (iy < 0 || iy >= x.height) continue;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride_w + kx - 1;
              if (ix < 0 || ix >= x.width) continue;
              cols(row, oy * out_w + ox) = x.at(c, iy, ix);
            }
          }
        }
      }
    }
    return cols;
  }

  static void col2im_add(const Mat<T>& dcols, Tensor3<T>& dx, int stride_w,
                         int stride_h) {
    const int out_h = (dx.height - 1) / stride_h + 1;
    const int out_w = (dx.width - 1) / stride_w + 1;
    for (int c = 0; c < dx.channels; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int row = (c * 3 + ky) * 3 + kx;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride_h + ky - 1;
            if (iy < 0 || iy >= dx.height) continue;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride_w + kx - 1;
              if (ix < 0 || ix >= dx.width) continue;
              dx.at(c, iy, ix) += dcols(row, oy * out_w + ox);
            }
          }
        }
      }
    }
  }

  static Tensor3<T> conv_apply(const Param<T>& W, const Param<T>& b,
                               const Mat<T>& cols, const Shape3& out_shape) {
    Mat<T> y = (W.value * cols).colwise() + b.value.col(0);
    y = y.cwiseMax(T(0));  // ReLU
    Tensor3<T> out(out_shape.channels, out_shape.height, out_shape.width);
    for (int c = 0; c < out.channels; ++c)
      for (int oy = 0; oy < out.height; ++oy)
        for (int ox = 0; ox < out.width; ++ox)
          out.at(c, oy, ox) = y(c, oy * out.width + ox);
    return out;
  }

  Tensor3<T> conv_backward(int conv_index, const Mat<T>& cols,
                           const Tensor3<T>& y, const Tensor3<T>& dout,
                           const Tensor3<T>& x, const ConvSpec& spec,
                           bool need_dx) {
    // ReLU gate, then flatten dout to GEMM layout.
    Mat<T> dy(y.channels, y.height * y.width);
    for (int c = 0; c < y.channels; ++c)
      for (int oy = 0; oy < y.height; ++oy)
        for (int ox = 0; ox < y.width; ++ox)
          dy(c, oy * y.width + ox) =
              y.at(c, oy, ox) > T(0) ? dout.at(c, oy, ox) : T(0);

    weights_[static_cast<std::size_t>(conv_index)].grad.noalias() +=
        dy * cols.transpose();
    biases_[static_cast<std::size_t>(conv_index)].grad.col(0) +=
        dy.rowwise().sum();

    Tensor3<T> dx(x.channels, x.height, x.width);
    if (need_dx) {
      Mat<T> dcols =
          weights_[static_cast<std::size_t>(conv_index)].value.transpose() *
          dy;
      col2im_add(dcols, dx, spec.stride_w, spec.stride_h);
    }
    return dx;
  }

  static Tensor3<T> pool_forward(const Tensor3<T>& x) {
    Tensor3<T> out(x.channels, x.height / 2, x.width / 2);
    for (int c = 0; c < out.channels; ++c)
      for (int oy = 0; oy < out.height; ++oy)
        for (int ox = 0; ox < out.width; ++ox)
          out.at(c, oy, ox) =
              (x.at(c, 2 * oy, 2 * ox) + x.at(c, 2 * oy, 2 * ox + 1) +
               x.at(c, 2 * oy + 1, 2 * ox) + x.at(c, 2 * oy + 1, 2 * ox + 1)) /
              T(4);
    return out;
  }

  static Tensor3<T> pool_backward(const Tensor3<T>& x, const Tensor3<T>& dout) {
    Tensor3<T> dx(x.channels, x.height, x.width);
    for (int c = 0; c < dout.channels; ++c)
      for (int oy = 0; oy < dout.height; ++oy)
        for (int ox = 0; ox < dout.width; ++ox) {
          const T v = dout.at(c, oy, ox) / T(4);
          dx.at(c, 2 * oy, 2 * ox) += v;
          dx.at(c, 2 * oy, 2 * ox + 1) += v;
          dx.at(c, 2 * oy + 1, 2 * ox) += v;
          dx.at(c, 2 * oy + 1, 2 * ox + 1) += v;
        }
    return dx;
  }

  std::vector<ConvSpec> stack_;
  int in_channels_ = 0;
  std::vector<Param<T>> weights_;
  std::vector<Param<T>> biases_;
};

}  // namespace hwgan::nn
