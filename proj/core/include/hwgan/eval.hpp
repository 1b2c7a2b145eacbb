#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hwgan/image.hpp"
#include "hwgan/stroke.hpp"

namespace hwgan {

// SVG with one path element per stroke; viewBox is the bounding box plus a 5%
// margin per axis. Output formatting is fixed, so identical samples render to
// identical bytes.
std::string render_svg(const HandwritingSample& sample,
                       double stroke_width = 2.0);

// Grayscale render (white background, black ink) using the same discrete line
// traversal as the feature rasterizer; the sample is scaled to the given
// height when its bounding box allows it.
GrayImage render_ink(const HandwritingSample& sample, int height = 128);

// Coefficient of variation (population stddev / mean) of consecutive pen-down
// spacings; lower means more uniform. Throws MetricError for samples with
// fewer than 3 points or zero mean spacing.
double uniformity_cv(const HandwritingSample& sample);

struct EvalReport {
  struct Entry {
    double cv = 0.0;
    std::size_t points = 0;
    std::size_t strokes = 0;
  };
  std::vector<Entry> per_sample;
  double cv_mean = 0.0;
  double cv_stddev = 0.0;  // population
};

EvalReport eval_report(const std::vector<HandwritingSample>& samples);

nlohmann::json report_to_json(const EvalReport& report);

}  // namespace hwgan
