#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

// All types here are plain values and every operation is a pure function, so
// samples can be shared across threads freely.

namespace hwgan {

// One digitizer point. pen = 1 marks the last point of its stroke (the pen
// lifts after it); every other point carries pen = 0. Coordinates are real
// valued in abstract ink units, y growing downward.
struct StrokePoint {
  double x = 0.0;
  double y = 0.0;
  int pen = 0;
};

// A pen-down segment: at least one point, pen flags 0..0,1.
struct Stroke {
  std::vector<StrokePoint> points;
};

// Ordered strokes plus an optional transcription.
struct HandwritingSample {
  std::vector<Stroke> strokes;
  std::string text;
};

// Model-facing increment form: deltas from the previous point plus an
// end-of-stroke flag.
struct OffsetPoint {
  double dx = 0.0;
  double dy = 0.0;
  int eos = 0;
};

struct BoundingBox {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
};

std::size_t point_count(const HandwritingSample& sample);
std::vector<StrokePoint> flatten(const HandwritingSample& sample);
BoundingBox bounding_box(const HandwritingSample& sample);

// True when every stroke is non-empty and pen flags follow the
// last-point-of-stroke convention.
bool is_well_formed(const HandwritingSample& sample);

// Convenience builder: one coordinate list per stroke; pen flags are set to
// the convention automatically.
HandwritingSample make_sample(
    const std::vector<std::vector<std::pair<double, double>>>& strokes,
    std::string text = "");

// Differences of consecutive points over the flattened sequence; element 0 is
// (0, 0, pen_0). Throws InvalidArgumentError on an empty sample.
std::vector<OffsetPoint> to_offsets(const HandwritingSample& sample);

// Cumulative sums from `origin`; a new stroke begins after each eos = 1. The
// final stroke is closed (its last point gets pen = 1) even when the sequence
// does not end on an eos. Throws InvalidArgumentError on an empty sequence.
HandwritingSample from_offsets(const std::vector<OffsetPoint>& offsets,
                               double origin_x = 0.0, double origin_y = 0.0);

// Uniform scale so the bounding-box height equals target_height, aspect ratio
// preserved, min corner translated to (0, 0). Throws DegenerateGeometryError
// when the bounding-box height is zero.
HandwritingSample scale_to_height(const HandwritingSample& sample,
                                  double target_height = 128.0);

// Resample one stroke at arc-length multiples of `step`, keeping both
// endpoints. Throws InvalidArgumentError when step <= 0.
Stroke resample_uniform(const Stroke& stroke, double step);

// Stroke-wise resampling of a whole sample.
HandwritingSample resample_uniform(const HandwritingSample& sample,
                                   double step);

double arc_length(const Stroke& stroke);

// --- interchange format ----------------------------------------------------
// One JSON object per line: {"strokes": [[[x,y],...],...], "text": "..."}.
// Pen flags are implied by stroke boundaries.

std::string to_interchange_line(const HandwritingSample& sample);
HandwritingSample from_interchange_line(std::string_view line);

void write_interchange(std::ostream& out,
                       const std::vector<HandwritingSample>& samples);
std::vector<HandwritingSample> read_interchange(std::istream& in);

void write_interchange_file(const std::string& path,
                            const std::vector<HandwritingSample>& samples);
std::vector<HandwritingSample> read_interchange_file(const std::string& path);

}  // namespace hwgan
