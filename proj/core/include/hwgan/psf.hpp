#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "hwgan/error.hpp"
#include "hwgan/stroke.hpp"

namespace hwgan {

// Signature of a two-point path segment, truncated at level 2. Level 0 is the
// constant 1, level 1 the increment, level 2 the Kronecker square of the
// increment in row-major order; 7 values total.
struct PsfVector {
  std::array<double, 7> v{};

  double level0() const { return v[0]; }
  std::array<double, 2> level1() const { return {v[1], v[2]}; }
  std::array<double, 4> level2() const { return {v[3], v[4], v[5], v[6]}; }
};

inline PsfVector psf_pair(double ax, double ay, double bx, double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  return PsfVector{{1.0, dx, dy, dx * dx, dx * dy, dy * dx, dy * dy}};
}

inline PsfVector psf_pair(const StrokePoint& a, const StrokePoint& b) {
  return psf_pair(a.x, a.y, b.x, b.y);
}

// Seven feature planes over a fixed-height canvas. Channel 0 is the ink mask
// ({0,1} before normalization); values are stored plane by plane, row-major
// within a plane.
struct PsfRaster {
  static constexpr int kChannels = 7;

  int width = 0;
  int height = 128;
  std::vector<float> data;  // kChannels * height * width

  float& at(int c, int y, int x) {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  float at(int c, int y, int x) const {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
};

struct PsfConfig {
  int height = 128;
  double resample_step = 2.0;
  int pad_multiple = 16;
  int min_width = 16;
  // Divisors for channels 1..6; the defaults bound each channel by the
  // resample step (level 1) or its square (level 2).
  std::array<double, 6> norm_scale{2.0, 2.0, 4.0, 4.0, 4.0, 4.0};
  // When non-empty, raster widths snap up to the smallest bucket that fits,
  // so rasters from different sources share sizes.
  std::vector<int> width_buckets;

  static PsfConfig with_step(double step) {
    PsfConfig cfg;
    cfg.resample_step = step;
    cfg.norm_scale = {step, step, step * step, step * step, step * step,
                      step * step};
    return cfg;
  }
};

// Visits every pixel of the discrete segment between two integer points
// (classic midpoint traversal, all octants).
template <typename F>
void for_each_line_pixel(int x0, int y0, int x1, int y1, F&& visit) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  int x = x0, y = y0;
  while (true) {
    visit(x, y);
    if (x == x1 && y == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

// Paints every pen-down segment's signature onto the feature planes. The
// sample must fit the canvas vertically (it is not rescaled here); x is
// shifted so the leftmost point lands in column 0. Width is the padded
// bounding-box width (multiple of pad_multiple, optionally bucket-snapped).
// Later segments overwrite earlier ones where they cross.
PsfRaster rasterize_psf(const HandwritingSample& sample,
                        const PsfConfig& config = PsfConfig());

// Channel 0: {0,1} -> {-1,1}. Channels 1..6: divide by the per-channel
// constant, clip to [-1,1]. Throws ConfigError on a nonpositive constant.
PsfRaster normalize_psf(const PsfRaster& raster,
                        const std::array<double, 6>& scale);

// scale_to_height -> resample_uniform -> rasterize_psf -> normalize_psf.
// Deterministic; note that re-running the pipeline on strokes recovered from
// its own raster is not idempotent (rasterization discards sub-pixel detail).
PsfRaster psf_pipeline(const HandwritingSample& sample,
                       const PsfConfig& config = PsfConfig());

// Writes the raster as a vertical stack of its grayscale channel planes
// (values mapped from [-1,1] to [0,255]) for visual inspection.
void dump_psf_png(const PsfRaster& raster, const std::string& path);

}  // namespace hwgan
