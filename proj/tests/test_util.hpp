#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hwgan/nn.hpp"
#include "hwgan/rng.hpp"
#include "hwgan/stroke.hpp"

namespace hwgan::testing {

// Random multi-stroke sample with a guaranteed non-degenerate bounding box.
inline HandwritingSample random_sample(Rng& rng, int strokes = 3,
                                       int points_per_stroke = 8,
                                       double scale = 10.0) {
  std::vector<std::vector<std::pair<double, double>>> coords;
  double x = 0.0, y = 0.0;
  for (int s = 0; s < strokes; ++s) {
    std::vector<std::pair<double, double>> stroke;
    for (int p = 0; p < points_per_stroke; ++p) {
      x += rng.uniform(0.2, 1.0) * scale;
      y += rng.uniform(-1.0, 1.0) * scale;
      stroke.emplace_back(x, y);
    }
    coords.push_back(std::move(stroke));
  }
  // Pin the vertical extent so the box never collapses.
  coords.front().front().second = 0.0;
  coords.back().back().second = 4.0 * scale;
  return make_sample(coords);
}

inline std::vector<OffsetPoint> random_offsets(Rng& rng, int n,
                                               double scale = 1.0) {
  std::vector<OffsetPoint> offsets;
  for (int i = 0; i < n; ++i)
    offsets.push_back({rng.uniform(-scale, scale), rng.uniform(-scale, scale),
                       rng.uniform() < 0.15 ? 1 : 0});
  offsets.back().eos = 1;
  return offsets;
}

// Central finite differences against already-accumulated analytic gradients.
// loss_fn must re-run the forward pass from the (perturbed) parameter values.
inline double max_relative_grad_error(
    const std::vector<nn::Param<double>*>& params,
    const std::function<double()>& loss_fn, double h = 1e-5) {
  double max_err = 0.0;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double original = p->value.data()[i];
      p->value.data()[i] = original + h;
      const double up = loss_fn();
      p->value.data()[i] = original - h;
      const double down = loss_fn();
      p->value.data()[i] = original;
      const double fd = (up - down) / (2.0 * h);
      const double an = p->grad.data()[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      max_err = std::max(max_err, std::abs(fd - an) / denom);
    }
  }
  return max_err;
}

}  // namespace hwgan::testing
