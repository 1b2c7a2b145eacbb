#include "hwgan/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hwgan/error.hpp"

namespace hwgan {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kCorrLimit = 1.0 - 1e-6;
}  // namespace

MdnParams mdn_split(const Eigen::VectorXd& raw, int components, double bias) {
  if (components < 1) throw ConfigError("mdn_split: components must be >= 1");
  if (raw.size() != mdn_output_dim(components))
    throw ContractError("mdn_split: raw vector must have dimension " +
                        std::to_string(mdn_output_dim(components)));
  if (bias < 0.0) throw ConfigError("mdn_split: bias must be >= 0");

  const int m = components;
  MdnParams params;
  params.eos = 1.0 / (1.0 + std::exp(-raw[mdn_layout::eos_hat(m)]));

  Eigen::VectorXd logits =
      raw.segment(mdn_layout::weight_hat(m), m) * (1.0 + bias);
  const double max_logit = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - max_logit).exp();
  params.weight = w / w.sum();

  params.mean_x = raw.segment(mdn_layout::mean_x(m), m);
  params.mean_y = raw.segment(mdn_layout::mean_y(m), m);
  params.std_x =
      (raw.segment(mdn_layout::log_std_x(m), m).array() - bias).exp();
  params.std_y =
      (raw.segment(mdn_layout::log_std_y(m), m).array() - bias).exp();
  params.corr = raw.segment(mdn_layout::corr_hat(m), m)
                    .array()
                    .tanh()
                    .max(-kCorrLimit)
                    .min(kCorrLimit);
  return params;
}

double mdn_nll(const MdnParams& params, double dx, double dy, int eos) {
  const int m = params.components();
  if (m < 1) throw InvalidArgumentError("mdn_nll: no mixture components");

  double max_term = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd terms(m);
  for (int j = 0; j < m; ++j) {
    const double sx = params.std_x[j];
    const double sy = params.std_y[j];
    const double rho = params.corr[j];
    const double zx = (dx - params.mean_x[j]) / sx;
    const double zy = (dy - params.mean_y[j]) / sy;
    const double one_minus_r2 = 1.0 - rho * rho;
    const double z = zx * zx + zy * zy - 2.0 * rho * zx * zy;
    const double log_n = -std::log(kTwoPi) - std::log(sx) - std::log(sy) -
                         0.5 * std::log(one_minus_r2) -
                         z / (2.0 * one_minus_r2);
    terms[j] = std::log(std::max(params.weight[j], 1e-300)) + log_n;
    max_term = std::max(max_term, terms[j]);
  }
  const double lse =
      max_term + std::log((terms.array() - max_term).exp().sum());

  const double e = std::clamp(params.eos, 1e-12, 1.0 - 1e-12);
  const double bernoulli = eos ? std::log(e) : std::log(1.0 - e);
  return -lse - bernoulli;
}

double mdn_nll_grad(const double* raw, int components, double dx, double dy,
                    int eos, double* grad) {
  const int m = components;
  const Eigen::Map<const Eigen::VectorXd> raw_vec(raw, mdn_output_dim(m));

  // Squash (unbiased).
  const double e = 1.0 / (1.0 + std::exp(-raw[mdn_layout::eos_hat(m)]));
  Eigen::VectorXd logits = raw_vec.segment(mdn_layout::weight_hat(m), m);
  const double max_logit = logits.maxCoeff();
  Eigen::VectorXd weight = (logits.array() - max_logit).exp();
  weight /= weight.sum();

  // Per-component log density and responsibilities.
  Eigen::VectorXd log_terms(m), zx_v(m), zy_v(m), rho_v(m), z_v(m);
  double max_term = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j) {
    const double sx = std::exp(raw[mdn_layout::log_std_x(m) + j]);
    const double sy = std::exp(raw[mdn_layout::log_std_y(m) + j]);
    double rho = std::tanh(raw[mdn_layout::corr_hat(m) + j]);
    rho = std::clamp(rho, -kCorrLimit, kCorrLimit);
    const double zx = (dx - raw[mdn_layout::mean_x(m) + j]) / sx;
    const double zy = (dy - raw[mdn_layout::mean_y(m) + j]) / sy;
    const double one_minus_r2 = 1.0 - rho * rho;
    const double z = zx * zx + zy * zy - 2.0 * rho * zx * zy;
    log_terms[j] = std::log(std::max(weight[j], 1e-300)) - std::log(kTwoPi) -
                   std::log(sx) - std::log(sy) -
                   0.5 * std::log(one_minus_r2) - z / (2.0 * one_minus_r2);
    zx_v[j] = zx;
    zy_v[j] = zy;
    rho_v[j] = rho;
    z_v[j] = z;
    max_term = std::max(max_term, log_terms[j]);
  }
  const double lse =
      max_term + std::log((log_terms.array() - max_term).exp().sum());
  const Eigen::VectorXd resp = (log_terms.array() - lse).exp();

  grad[mdn_layout::eos_hat(m)] = e - static_cast<double>(eos);
  for (int j = 0; j < m; ++j) {
    const double g = resp[j];
    const double sx = std::exp(raw[mdn_layout::log_std_x(m) + j]);
    const double sy = std::exp(raw[mdn_layout::log_std_y(m) + j]);
    const double rho = rho_v[j];
    const double zx = zx_v[j];
    const double zy = zy_v[j];
    const double c = 1.0 / (1.0 - rho * rho);

    grad[mdn_layout::weight_hat(m) + j] = weight[j] - g;
    grad[mdn_layout::mean_x(m) + j] = -g * c * (zx - rho * zy) / sx;
    grad[mdn_layout::mean_y(m) + j] = -g * c * (zy - rho * zx) / sy;
    grad[mdn_layout::log_std_x(m) + j] = -g * (c * zx * (zx - rho * zy) - 1.0);
    grad[mdn_layout::log_std_y(m) + j] = -g * (c * zy * (zy - rho * zx) - 1.0);
    grad[mdn_layout::corr_hat(m) + j] =
        -g * (zx * zy + rho * (1.0 - c * z_v[j]));
  }

  const double e_clamped = std::clamp(e, 1e-12, 1.0 - 1e-12);
  const double bernoulli =
      eos ? std::log(e_clamped) : std::log(1.0 - e_clamped);
  return -lse - bernoulli;
}

OffsetPoint mdn_sample(const MdnParams& params, Rng& rng) {
  const int m = params.components();
  const double u = rng.uniform();
  int j = m - 1;
  double cdf = 0.0;
  for (int k = 0; k < m; ++k) {
    cdf += params.weight[k];
    if (u < cdf) {
      j = k;
      break;
    }
  }

  const auto [z1, z2] = rng.normal_pair();
  const double rho = params.corr[j];
  OffsetPoint point;
  point.dx = params.mean_x[j] + params.std_x[j] * z1;
  point.dy = params.mean_y[j] +
             params.std_y[j] * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
  point.eos = rng.uniform() < params.eos ? 1 : 0;
  return point;
}

}  // namespace hwgan
