#include "hwgan/stroke.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hwgan/error.hpp"

namespace hwgan {

std::size_t point_count(const HandwritingSample& sample) {
  std::size_t n = 0;
  for (const auto& s : sample.strokes) n += s.points.size();
  return n;
}

std::vector<StrokePoint> flatten(const HandwritingSample& sample) {
  std::vector<StrokePoint> out;
  out.reserve(point_count(sample));
  for (const auto& s : sample.strokes)
    out.insert(out.end(), s.points.begin(), s.points.end());
  return out;
}

BoundingBox bounding_box(const HandwritingSample& sample) {
  if (point_count(sample) == 0)
    throw InvalidArgumentError("bounding_box: empty sample");
  BoundingBox box{std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  for (const auto& s : sample.strokes) {
    for (const auto& p : s.points) {
      box.min_x = std::min(box.min_x, p.x);
      box.min_y = std::min(box.min_y, p.y);
      box.max_x = std::max(box.max_x, p.x);
      box.max_y = std::max(box.max_y, p.y);
    }
  }
  return box;
}

bool is_well_formed(const HandwritingSample& sample) {
  if (sample.strokes.empty()) return false;
  for (const auto& s : sample.strokes) {
    if (s.points.empty()) return false;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const int expected = i + 1 == s.points.size() ? 1 : 0;
      if (s.points[i].pen != expected) return false;
    }
  }
  return true;
}

HandwritingSample make_sample(
    const std::vector<std::vector<std::pair<double, double>>>& strokes,
    std::string text) {
  HandwritingSample sample;
  sample.text = std::move(text);
  for (const auto& coords : strokes) {
    if (coords.empty())
      throw InvalidArgumentError("make_sample: empty stroke");
    Stroke stroke;
    stroke.points.reserve(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i)
      stroke.points.push_back({coords[i].first, coords[i].second,
                               i + 1 == coords.size() ? 1 : 0});
    sample.strokes.push_back(std::move(stroke));
  }
  return sample;
}

std::vector<OffsetPoint> to_offsets(const HandwritingSample& sample) {
  const auto points = flatten(sample);
  if (points.empty()) throw InvalidArgumentError("to_offsets: empty sample");
  std::vector<OffsetPoint> out;
  out.reserve(points.size());
  out.push_back({0.0, 0.0, points[0].pen});
  for (std::size_t i = 1; i < points.size(); ++i)
    out.push_back({points[i].x - points[i - 1].x,
                   points[i].y - points[i - 1].y, points[i].pen});
  return out;
}

HandwritingSample from_offsets(const std::vector<OffsetPoint>& offsets,
                               double origin_x, double origin_y) {
  if (offsets.empty())
    throw InvalidArgumentError("from_offsets: empty sequence");
  HandwritingSample sample;
  Stroke current;
  double x = origin_x;
  double y = origin_y;
  for (const auto& o : offsets) {
    x += o.dx;
    y += o.dy;
    current.points.push_back({x, y, o.eos ? 1 : 0});
    if (o.eos) {
      sample.strokes.push_back(std::move(current));
      current = Stroke{};
    }
  }
  if (!current.points.empty()) {
    current.points.back().pen = 1;
    sample.strokes.push_back(std::move(current));
  }
  return sample;
}

HandwritingSample scale_to_height(const HandwritingSample& sample,
                                  double target_height) {
  const auto box = bounding_box(sample);
  if (box.height() <= 0.0)
    throw DegenerateGeometryError("scale_to_height: zero-height sample");
  const double scale = target_height / box.height();
  HandwritingSample out = sample;
  for (auto& s : out.strokes)
    for (auto& p : s.points) {
      p.x = (p.x - box.min_x) * scale;
      p.y = (p.y - box.min_y) * scale;
    }
  return out;
}

double arc_length(const Stroke& stroke) {
  double total = 0.0;
  for (std::size_t i = 1; i < stroke.points.size(); ++i)
    total += std::hypot(stroke.points[i].x - stroke.points[i - 1].x,
                        stroke.points[i].y - stroke.points[i - 1].y);
  return total;
}

Stroke resample_uniform(const Stroke& stroke, double step) {
  if (step <= 0.0)
    throw InvalidArgumentError("resample_uniform: step must be positive");
  if (stroke.points.size() < 2) return stroke;

  // Original vertices are always kept so the polyline (and its arc length)
  // is unchanged; interior samples are inserted at arc-length multiples of
  // step, so consecutive output points are at most step apart along the path.
  Stroke out;
  out.points.push_back({stroke.points[0].x, stroke.points[0].y, 0});
  double walked = 0.0;  // arc length up to the start of the current segment
  double next = step;   // arc position of the next interior sample
  for (std::size_t i = 1; i < stroke.points.size(); ++i) {
    const auto& a = stroke.points[i - 1];
    const auto& b = stroke.points[i];
    const double seg = std::hypot(b.x - a.x, b.y - a.y);
    const double eps = 1e-9 * std::max(1.0, seg);
    while (seg > 0.0 && next < walked + seg - eps) {
      const double t = (next - walked) / seg;
      out.points.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), 0});
      next += step;
    }
    out.points.push_back({b.x, b.y, 0});
    walked += seg;
    if (next <= walked + eps) next = walked + step;  // vertex absorbed a sample
  }
  out.points.back().pen = 1;
  return out;
}

HandwritingSample resample_uniform(const HandwritingSample& sample,
                                   double step) {
  HandwritingSample out;
  out.text = sample.text;
  out.strokes.reserve(sample.strokes.size());
  for (const auto& s : sample.strokes)
    out.strokes.push_back(resample_uniform(s, step));
  return out;
}

// --- interchange format ----------------------------------------------------

std::string to_interchange_line(const HandwritingSample& sample) {
  nlohmann::json strokes = nlohmann::json::array();
  for (const auto& s : sample.strokes) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : s.points) pts.push_back({p.x, p.y});
    strokes.push_back(std::move(pts));
  }
  nlohmann::json record{{"strokes", std::move(strokes)},
                        {"text", sample.text}};
  return record.dump();
}

HandwritingSample from_interchange_line(std::string_view line) {
  nlohmann::json record;
  try {
    record = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("interchange record: ") + e.what());
  }
  if (!record.is_object() || !record.contains("strokes") ||
      !record["strokes"].is_array())
    throw ParseError("interchange record: missing \"strokes\" array");

  HandwritingSample sample;
  sample.text = record.value("text", std::string());
  for (const auto& pts : record["strokes"]) {
    if (!pts.is_array() || pts.empty())
      throw ParseError("interchange record: stroke must be a non-empty array");
    Stroke stroke;
    for (const auto& p : pts) {
      if (!p.is_array() || p.size() != 2)
        throw ParseError("interchange record: point must be [x, y]");
      stroke.points.push_back({p[0].get<double>(), p[1].get<double>(), 0});
    }
    stroke.points.back().pen = 1;
    sample.strokes.push_back(std::move(stroke));
  }
  if (sample.strokes.empty())
    throw ParseError("interchange record: no strokes");
  return sample;
}

void write_interchange(std::ostream& out,
                       const std::vector<HandwritingSample>& samples) {
  for (const auto& s : samples) out << to_interchange_line(s) << '\n';
}

std::vector<HandwritingSample> read_interchange(std::istream& in) {
  std::vector<HandwritingSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    samples.push_back(from_interchange_line(line));
  }
  return samples;
}

void write_interchange_file(const std::string& path,
                            const std::vector<HandwritingSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgumentError("cannot open for writing: " + path);
  write_interchange(out, samples);
}

std::vector<HandwritingSample> read_interchange_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgumentError("cannot open for reading: " + path);
  return read_interchange(in);
}

}  // namespace hwgan
