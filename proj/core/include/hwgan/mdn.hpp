#pragma once

#include <Eigen/Core>

#include "hwgan/rng.hpp"
#include "hwgan/stroke.hpp"

namespace hwgan {

// Mixture-density output for the next offset point: a Bernoulli end-of-stroke
// probability plus a mixture of bivariate Gaussians.
struct MdnParams {
  double eos = 0.5;          // pen-lift probability
  Eigen::VectorXd weight;    // mixture weights, sum to 1
  Eigen::VectorXd mean_x, mean_y;
  Eigen::VectorXd std_x, std_y;  // positive
  Eigen::VectorXd corr;          // in (-1, 1)

  int components() const { return static_cast<int>(weight.size()); }
};

// Raw output layout: [eos_hat | weight_hat(M) | mean_x(M) | mean_y(M) |
// log_std_x(M) | log_std_y(M) | corr_hat(M)]; dimension 1 + 6M.
constexpr int mdn_output_dim(int components) { return 1 + 6 * components; }

namespace mdn_layout {
constexpr int eos_hat(int) { return 0; }
constexpr int weight_hat(int) { return 1; }
constexpr int mean_x(int m) { return 1 + m; }
constexpr int mean_y(int m) { return 1 + 2 * m; }
constexpr int log_std_x(int m) { return 1 + 3 * m; }
constexpr int log_std_y(int m) { return 1 + 4 * m; }
constexpr int corr_hat(int m) { return 1 + 5 * m; }
}  // namespace mdn_layout

// Squashes a raw output vector into distribution parameters. A positive bias
// sharpens sampling: std = exp(log_std - bias) and the weight logits are
// scaled by (1 + bias). Throws ContractError on a wrong-size vector and
// ConfigError on a negative bias.
MdnParams mdn_split(const Eigen::VectorXd& raw, int components,
                    double bias = 0.0);

// Biased re-squash of the same raw vector (identity at bias = 0).
inline MdnParams apply_bias(const Eigen::VectorXd& raw, int components,
                            double bias) {
  return mdn_split(raw, components, bias);
}

// Negative log likelihood of one offset target under the mixture, computed
// in log space.
double mdn_nll(const MdnParams& params, double dx, double dy, int eos);

inline double mdn_nll(const MdnParams& params, const OffsetPoint& target) {
  return mdn_nll(params, target.dx, target.dy, target.eos);
}

// NLL and its gradient with respect to the raw (pre-squash) output vector.
// grad must point at mdn_output_dim(components) doubles; it is overwritten.
double mdn_nll_grad(const double* raw, int components, double dx, double dy,
                    int eos, double* grad);

// Draws the next offset point: component ~ Categorical(weight), (dx, dy)
// from the chosen bivariate Gaussian, eos ~ Bernoulli(eos probability).
// Consumes exactly four uniform draws.
OffsetPoint mdn_sample(const MdnParams& params, Rng& rng);

}  // namespace hwgan
