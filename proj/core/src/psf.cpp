#include "hwgan/psf.hpp"

#include <algorithm>
#include <cmath>

#include "hwgan/image.hpp"

namespace hwgan {

namespace {

int snap_width(int natural, const PsfConfig& cfg) {
  int w = std::max(natural, cfg.min_width);
  if (cfg.pad_multiple > 1) {
    const int rem = w % cfg.pad_multiple;
    if (rem != 0) w += cfg.pad_multiple - rem;
  }
  if (!cfg.width_buckets.empty()) {
    int snapped = -1;
    for (int bucket : cfg.width_buckets)
      if (bucket >= w && (snapped < 0 || bucket < snapped)) snapped = bucket;
    // Wider than every bucket: keep the padded width so the raster still
    // holds all ink; callers that require bucket membership will reject it.
    if (snapped > 0) w = snapped;
  }
  return w;
}

int clamp_int(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

PsfRaster rasterize_psf(const HandwritingSample& sample,
                        const PsfConfig& config) {
  PsfRaster raster;
  raster.height = config.height;

  if (point_count(sample) == 0) {
    raster.width = snap_width(0, config);
    raster.data.assign(static_cast<std::size_t>(PsfRaster::kChannels) *
                           raster.height * raster.width,
                       0.0f);
    return raster;
  }

  const auto box = bounding_box(sample);
  const double slack = 0.5;
  if (box.min_y < -slack ||
      box.max_y > static_cast<double>(config.height) + slack)
    throw ContractError(
        "rasterize_psf: sample does not fit the canvas height; scale it to "
        "the raster height first");

  raster.width = snap_width(static_cast<int>(std::ceil(box.width())), config);
  raster.data.assign(static_cast<std::size_t>(PsfRaster::kChannels) *
                         raster.height * raster.width,
                     0.0f);

  const double shift_x = box.min_x;
  for (const auto& stroke : sample.strokes) {
    for (std::size_t i = 0; i + 1 < stroke.points.size(); ++i) {
      const auto& a = stroke.points[i];
      const auto& b = stroke.points[i + 1];
      const PsfVector sig = psf_pair(a, b);
      const int x0 = clamp_int(static_cast<int>(std::lround(a.x - shift_x)), 0,
                               raster.width - 1);
      const int y0 = clamp_int(static_cast<int>(std::lround(a.y)), 0,
                               raster.height - 1);
      const int x1 = clamp_int(static_cast<int>(std::lround(b.x - shift_x)), 0,
                               raster.width - 1);
      const int y1 = clamp_int(static_cast<int>(std::lround(b.y)), 0,
                               raster.height - 1);
      for_each_line_pixel(x0, y0, x1, y1, [&](int x, int y) {
        for (int c = 0; c < PsfRaster::kChannels; ++c)
          raster.at(c, y, x) = static_cast<float>(sig.v[static_cast<size_t>(c)]);
      });
    }
  }
  return raster;
}

PsfRaster normalize_psf(const PsfRaster& raster,
                        const std::array<double, 6>& scale) {
  for (double s : scale)
    if (!(s > 0.0))
      throw ConfigError("normalize_psf: scale constants must be positive");

  PsfRaster out = raster;
  const std::size_t plane = static_cast<std::size_t>(raster.height) *
                            static_cast<std::size_t>(raster.width);
  for (std::size_t i = 0; i < plane; ++i)
    out.data[i] = out.data[i] != 0.0f ? 1.0f : -1.0f;
  for (int c = 1; c < PsfRaster::kChannels; ++c) {
    const float inv = static_cast<float>(1.0 / scale[static_cast<size_t>(c - 1)]);
    float* p = out.data.data() + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i)
      p[i] = std::clamp(p[i] * inv, -1.0f, 1.0f);
  }
  return out;
}

PsfRaster psf_pipeline(const HandwritingSample& sample,
                       const PsfConfig& config) {
  const auto scaled =
      scale_to_height(sample, static_cast<double>(config.height));
  const auto resampled = resample_uniform(scaled, config.resample_step);
  const auto raster = rasterize_psf(resampled, config);
  return normalize_psf(raster, config.norm_scale);
}

void dump_psf_png(const PsfRaster& raster, const std::string& path) {
  GrayImage image;
  image.width = raster.width;
  image.height = raster.height * PsfRaster::kChannels;
  image.pixels.assign(static_cast<std::size_t>(image.width) *
                          static_cast<std::size_t>(image.height),
                      0);
  for (int c = 0; c < PsfRaster::kChannels; ++c)
    for (int y = 0; y < raster.height; ++y)
      for (int x = 0; x < raster.width; ++x) {
        const float v = std::clamp(raster.at(c, y, x), -1.0f, 1.0f);
        image.at(c * raster.height + y, x) =
            static_cast<uint8_t>(std::lround((v + 1.0f) * 127.5f));
      }
  write_png_gray(path, image);
}

}  // namespace hwgan
