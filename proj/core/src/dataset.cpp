#include "hwgan/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "hwgan/error.hpp"
#include "hwgan/rng.hpp"

namespace fs = std::filesystem;

namespace hwgan {

TextEncoding encode_text(const std::string& text, const Vocabulary& vocab) {
  TextEncoding enc;
  enc.indices.reserve(text.size());
  for (char c : text) enc.indices.push_back(vocab.index_of(c));
  return enc;
}

HandwritingSample parse_iam_linestrokes(const std::string& xml_document) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(xml_document);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("lineStrokes XML: ") + e.what());
  }

  const pt::ptree* stroke_set = nullptr;
  try {
    stroke_set = &tree.get_child("WhiteboardCaptureSession.StrokeSet");
  } catch (const pt::ptree_bad_path&) {
    throw ParseError(
        "lineStrokes XML: missing WhiteboardCaptureSession/StrokeSet");
  }

  HandwritingSample sample;
  for (const auto& [name, node] : *stroke_set) {
    if (name != "Stroke") continue;
    Stroke stroke;
    for (const auto& [pname, pnode] : node) {
      if (pname != "Point") continue;
      StrokePoint point;
      try {
        point.x = pnode.get<double>("<xmlattr>.x");
        point.y = pnode.get<double>("<xmlattr>.y");
      } catch (const pt::ptree_error&) {
        throw ParseError(
            "lineStrokes XML: WhiteboardCaptureSession/StrokeSet/Stroke/Point "
            "needs numeric x and y attributes");
      }
      stroke.points.push_back(point);
    }
    if (stroke.points.empty())
      throw ParseError(
          "lineStrokes XML: WhiteboardCaptureSession/StrokeSet/Stroke has no "
          "points");
    stroke.points.back().pen = 1;
    sample.strokes.push_back(std::move(stroke));
  }
  if (sample.strokes.empty())
    throw InvalidArgumentError("lineStrokes XML: StrokeSet has no strokes");
  return sample;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgumentError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Transcription lines of one form: text after the "CSR:" marker, one line per
// stroke file, in order.
std::vector<std::string> csr_lines(const std::string& ascii_text) {
  std::vector<std::string> lines;
  std::istringstream in(ascii_text);
  std::string line;
  bool in_csr = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!in_csr) {
      if (line.rfind("CSR:", 0) == 0) in_csr = true;
      continue;
    }
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// "a01-000u-01" -> form "a01-000u", line 1.
bool split_stroke_id(const std::string& stem, std::string* form, int* line) {
  const auto pos = stem.rfind('-');
  if (pos == std::string::npos || pos + 1 >= stem.size()) return false;
  const std::string tail = stem.substr(pos + 1);
  for (char c : tail)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  *form = stem.substr(0, pos);
  *line = std::stoi(tail);
  return *line >= 1;
}

// "a01-000u" -> ascii-all/a01/a01-000/a01-000u.txt
fs::path ascii_path_for_form(const fs::path& ascii_root,
                             const std::string& form) {
  const auto dash = form.find('-');
  const std::string dir1 =
      dash == std::string::npos ? form : form.substr(0, dash);
  std::string dir2 = form;
  while (!dir2.empty() &&
         std::isalpha(static_cast<unsigned char>(dir2.back())))
    dir2.pop_back();
  return ascii_root / dir1 / dir2 / (form + ".txt");
}

}  // namespace

std::vector<HandwritingSample> load_iam_dataset(const std::string& root,
                                                IamStats* stats) {
  const fs::path strokes_root = fs::path(root) / "lineStrokes-all";
  const fs::path ascii_root = fs::path(root) / "ascii-all";
  std::string missing;
  if (!fs::is_directory(strokes_root)) missing = strokes_root.string();
  if (!fs::is_directory(ascii_root)) {
    if (!missing.empty()) missing += ", ";
    missing += ascii_root.string();
  }
  if (!missing.empty())
    throw InvalidArgumentError("IAM layout not found, missing: " + missing);

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(strokes_root))
    if (entry.is_regular_file() && entry.path().extension() == ".xml")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  IamStats local;
  local.stroke_files = files.size();
  std::map<std::string, std::vector<std::string>> transcript_cache;

  std::vector<HandwritingSample> samples;
  samples.reserve(files.size());
  for (const auto& file : files) {
    HandwritingSample sample;
    try {
      sample = parse_iam_linestrokes(read_file(file));
    } catch (const Error&) {
      ++local.parse_failures;
      continue;
    }
    ++local.parsed;

    std::string form;
    int line = 0;
    if (split_stroke_id(file.stem().string(), &form, &line)) {
      auto it = transcript_cache.find(form);
      if (it == transcript_cache.end()) {
        std::vector<std::string> lines;
        const fs::path ascii = ascii_path_for_form(ascii_root, form);
        if (fs::is_regular_file(ascii)) lines = csr_lines(read_file(ascii));
        it = transcript_cache.emplace(form, std::move(lines)).first;
      }
      if (line >= 1 && static_cast<std::size_t>(line) <= it->second.size()) {
        sample.text = it->second[static_cast<std::size_t>(line - 1)];
        ++local.with_transcription;
      }
    }
    samples.push_back(std::move(sample));
  }
  if (stats) *stats = local;
  return samples;
}

DatasetSplit split_dataset(const std::vector<HandwritingSample>& samples,
                           double validation_fraction, uint64_t seed) {
  if (validation_fraction < 0.0 || validation_fraction >= 1.0)
    throw ConfigError("validation fraction must be in [0, 1)");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto n_val = static_cast<std::size_t>(
      validation_fraction * static_cast<double>(samples.size()));
  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = samples[order[i]];
    if (i < order.size() - n_val)
      split.train.push_back(s);
    else
      split.validation.push_back(s);
  }
  return split;
}

BatchStream::BatchStream(const std::vector<HandwritingSample>& samples,
                         int batch_size, int max_len, uint64_t seed)
    : samples_(&samples),
      batch_size_(batch_size),
      max_len_(max_len),
      seed_(seed) {
  if (batch_size < 1) throw InvalidArgumentError("batch_size must be >= 1");
  if (max_len < 2) throw InvalidArgumentError("max_len must be >= 2");
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (point_count(samples[i]) >= 2) usable_.push_back(i);
  if (usable_.empty())
    throw InvalidArgumentError("batch stream: no usable samples");
  order_ = usable_;
  start_epoch();
}

namespace {

// Shuffled index order for one epoch; the epoch counter is mixed into the
// seed so every epoch is fresh but reproducible.
std::vector<std::size_t> epoch_order(const std::vector<std::size_t>& usable,
                                     uint64_t seed, uint64_t epoch) {
  Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
  std::vector<std::size_t> order = usable;
  rng.shuffle(order);
  return order;
}

std::vector<OffsetPoint> truncated_offsets(const HandwritingSample& sample,
                                           int max_len) {
  auto offsets = to_offsets(sample);
  if (offsets.size() > static_cast<std::size_t>(max_len))
    offsets.resize(static_cast<std::size_t>(max_len));
  return offsets;
}

}  // namespace

void BatchStream::start_epoch() {
  order_ = epoch_order(usable_, seed_, epoch_);
  cursor_ = 0;
}

void BatchStream::restore(uint64_t epoch, std::size_t cursor) {
  epoch_ = epoch;
  start_epoch();
  cursor_ = std::min(cursor, order_.size());
}

Batch BatchStream::next() {
  Batch batch;
  for (int k = 0; k < batch_size_; ++k) {
    if (cursor_ >= order_.size()) {
      ++epoch_;
      start_epoch();
    }
    const auto& sample = (*samples_)[order_[cursor_++]];
    batch.offsets.push_back(truncated_offsets(sample, max_len_));
    batch.texts.push_back(sample.text);
  }
  return batch;
}

std::vector<Batch> make_batches(const std::vector<HandwritingSample>& samples,
                                int batch_size, int max_len, uint64_t seed) {
  if (batch_size < 1) throw InvalidArgumentError("batch_size must be >= 1");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (point_count(samples[i]) >= 2) usable.push_back(i);
  if (usable.empty()) throw InvalidArgumentError("make_batches: empty split");

  const auto order = epoch_order(usable, seed, 0);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(batch_size)) {
    Batch batch;
    const std::size_t end =
        std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    for (std::size_t i = start; i < end; ++i) {
      const auto& sample = samples[order[i]];
      batch.offsets.push_back(truncated_offsets(sample, max_len));
      batch.texts.push_back(sample.text);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace hwgan
