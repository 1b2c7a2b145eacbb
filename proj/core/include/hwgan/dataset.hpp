#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hwgan/stroke.hpp"

namespace hwgan {

// 54 characters: an unknown placeholder, space, capitals, lower case. Any
// character outside the set maps to index 0.
class Vocabulary {
 public:
  static constexpr int kSize = 54;

  int index_of(char c) const {
    if (c == ' ') return 1;
    if (c >= 'A' && c <= 'Z') return 2 + (c - 'A');
    if (c >= 'a' && c <= 'z') return 2 + 26 + (c - 'a');
    return 0;
  }

  char char_at(int index) const {
    if (index == 1) return ' ';
    if (index >= 2 && index < 28) return static_cast<char>('A' + index - 2);
    if (index >= 28 && index < 54) return static_cast<char>('a' + index - 28);
    return '?';
  }

  int size() const { return kSize; }
};

// One-hot rows for a string; row u is the one-hot of character u.
struct TextEncoding {
  std::vector<int> indices;  // one vocabulary index per character

  std::size_t length() const { return indices.size(); }

  // Dense U x 54 matrix form.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd m =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(indices.size()),
                              Vocabulary::kSize);
    for (std::size_t u = 0; u < indices.size(); ++u)
      m(static_cast<Eigen::Index>(u), indices[u]) = 1.0;
    return m;
  }
};

TextEncoding encode_text(const std::string& text, const Vocabulary& vocab);

// --- IAM-OnDB ingestion ------------------------------------------------------

// Parses one lineStrokes XML document (WhiteboardCaptureSession/StrokeSet/
// Stroke/Point). Throws ParseError on malformed XML (with the offending
// element path) and InvalidArgumentError on an empty StrokeSet.
HandwritingSample parse_iam_linestrokes(const std::string& xml_document);

struct IamStats {
  std::size_t stroke_files = 0;
  std::size_t parsed = 0;
  std::size_t with_transcription = 0;
  std::size_t parse_failures = 0;
};

// Walks root/lineStrokes-all for stroke XMLs (sorted for determinism) and
// pairs them with lines from root/ascii-all transcription files. Throws when
// the expected directories are missing, naming them.
std::vector<HandwritingSample> load_iam_dataset(const std::string& root,
                                                IamStats* stats = nullptr);

// --- splits and batching -----------------------------------------------------

struct DatasetSplit {
  std::vector<HandwritingSample> train;
  std::vector<HandwritingSample> validation;
  uint64_t seed = 0;
};

// Deterministic shuffle + split; membership depends only on the seed.
DatasetSplit split_dataset(const std::vector<HandwritingSample>& samples,
                           double validation_fraction, uint64_t seed);

struct Batch {
  std::vector<std::vector<OffsetPoint>> offsets;  // per element, <= max_len
  std::vector<std::string> texts;                 // aligned with offsets
};

// Endless deterministic batch source: each epoch is a seeded shuffle of the
// usable samples (>= 2 points), sequences truncated to max_len offsets.
class BatchStream {
 public:
  BatchStream(const std::vector<HandwritingSample>& samples, int batch_size,
              int max_len, uint64_t seed);

  Batch next();

  std::size_t usable_samples() const { return order_.size(); }

  // Position accessors for exact resumption.
  uint64_t epoch() const { return epoch_; }
  std::size_t cursor() const { return cursor_; }
  void restore(uint64_t epoch, std::size_t cursor);

 private:
  void start_epoch();

  const std::vector<HandwritingSample>* samples_;
  std::vector<std::size_t> usable_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  uint64_t epoch_ = 0;
  int batch_size_;
  int max_len_;
  uint64_t seed_;
};

// One full epoch as a list of batches (last one may be smaller).
std::vector<Batch> make_batches(const std::vector<HandwritingSample>& samples,
                                int batch_size, int max_len, uint64_t seed);

}  // namespace hwgan
