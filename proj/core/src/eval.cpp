#include "hwgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hwgan/error.hpp"
#include "hwgan/psf.hpp"

namespace hwgan {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string render_svg(const HandwritingSample& sample, double stroke_width) {
  if (point_count(sample) == 0)
    throw InvalidArgumentError("render_svg: empty sample");
  const auto box = bounding_box(sample);
  const double mx = 0.05 * (box.width() > 0.0 ? box.width() : 1.0);
  const double my = 0.05 * (box.height() > 0.0 ? box.height() : 1.0);

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\""
      << fmt(box.min_x - mx) << " " << fmt(box.min_y - my) << " "
      << fmt(box.width() + 2 * mx) << " " << fmt(box.height() + 2 * my)
      << "\">\n";
  for (const auto& stroke : sample.strokes) {
    out << "  <path d=\"";
    for (std::size_t i = 0; i < stroke.points.size(); ++i) {
      const auto& p = stroke.points[i];
      out << (i == 0 ? "M" : " L") << fmt(p.x) << "," << fmt(p.y);
    }
    if (stroke.points.size() == 1) {
      const auto& p = stroke.points[0];
      out << " L" << fmt(p.x) << "," << fmt(p.y);
    }
    out << "\" fill=\"none\" stroke=\"black\" stroke-width=\""
        << fmt(stroke_width)
        << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

GrayImage render_ink(const HandwritingSample& sample, int height) {
  if (point_count(sample) == 0)
    throw InvalidArgumentError("render_ink: empty sample");
  const auto box = bounding_box(sample);
  HandwritingSample scaled =
      box.height() > 0.0 ? scale_to_height(sample, height) : sample;
  if (box.height() <= 0.0) {
    // Horizontal ink: translate to the canvas instead of scaling.
    for (auto& s : scaled.strokes)
      for (auto& p : s.points) {
        p.x -= box.min_x;
        p.y = height / 2.0;
      }
  }
  const auto sbox = bounding_box(scaled);
  const int margin = 4;
  GrayImage image;
  image.height = height + 2 * margin;
  image.width = static_cast<int>(std::ceil(sbox.width())) + 2 * margin + 1;
  image.pixels.assign(static_cast<std::size_t>(image.width) *
                          static_cast<std::size_t>(image.height),
                      255);
  auto clamp = [](int v, int lo, int hi) {
    return std::min(std::max(v, lo), hi);
  };
  for (const auto& stroke : scaled.strokes) {
    for (std::size_t i = 0; i + 1 < stroke.points.size(); ++i) {
      const auto& a = stroke.points[i];
      const auto& b = stroke.points[i + 1];
      for_each_line_pixel(
          clamp(static_cast<int>(std::lround(a.x)) + margin, 0,
                image.width - 1),
          clamp(static_cast<int>(std::lround(a.y)) + margin, 0,
                image.height - 1),
          clamp(static_cast<int>(std::lround(b.x)) + margin, 0,
                image.width - 1),
          clamp(static_cast<int>(std::lround(b.y)) + margin, 0,
                image.height - 1),
          [&](int x, int y) { image.at(y, x) = 0; });
    }
    if (stroke.points.size() == 1) {
      const auto& p = stroke.points[0];
      image.at(clamp(static_cast<int>(std::lround(p.y)) + margin, 0,
                     image.height - 1),
               clamp(static_cast<int>(std::lround(p.x)) + margin, 0,
                     image.width - 1)) = 0;
    }
  }
  return image;
}

double uniformity_cv(const HandwritingSample& sample) {
  if (point_count(sample) < 3)
    throw MetricError("uniformity_cv: need at least 3 points");
  std::vector<double> spacings;
  for (const auto& stroke : sample.strokes)
    for (std::size_t i = 0; i + 1 < stroke.points.size(); ++i)
      spacings.push_back(std::hypot(
          stroke.points[i + 1].x - stroke.points[i].x,
          stroke.points[i + 1].y - stroke.points[i].y));
  if (spacings.empty())
    throw MetricError("uniformity_cv: no pen-down segments");
  double mean = 0.0;
  for (double s : spacings) mean += s;
  mean /= static_cast<double>(spacings.size());
  if (mean <= 0.0) throw MetricError("uniformity_cv: zero mean spacing");
  double var = 0.0;
  for (double s : spacings) var += (s - mean) * (s - mean);
  var /= static_cast<double>(spacings.size());
  return std::sqrt(var) / mean;
}

EvalReport eval_report(const std::vector<HandwritingSample>& samples) {
  if (samples.empty()) throw InvalidArgumentError("eval_report: empty list");
  EvalReport report;
  report.per_sample.reserve(samples.size());
  double sum = 0.0;
  for (const auto& s : samples) {
    EvalReport::Entry entry;
    entry.cv = uniformity_cv(s);
    entry.points = point_count(s);
    entry.strokes = s.strokes.size();
    sum += entry.cv;
    report.per_sample.push_back(entry);
  }
  report.cv_mean = sum / static_cast<double>(samples.size());
  double var = 0.0;
  for (const auto& e : report.per_sample)
    var += (e.cv - report.cv_mean) * (e.cv - report.cv_mean);
  report.cv_stddev =
      std::sqrt(var / static_cast<double>(report.per_sample.size()));
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& e : report.per_sample)
    samples.push_back({{"uniformity_cv", e.cv},
                       {"points", e.points},
                       {"strokes", e.strokes}});
  return nlohmann::json{{"samples", std::move(samples)},
                        {"cv_mean", report.cv_mean},
                        {"cv_stddev", report.cv_stddev}};
}

}  // namespace hwgan
