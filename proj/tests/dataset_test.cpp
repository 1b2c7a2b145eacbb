#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hwgan/dataset.hpp"
#include "hwgan/error.hpp"
#include "test_util.hpp"

using namespace hwgan;
namespace fs = std::filesystem;

namespace {

const char* kTwoStrokeXml = R"(<?xml version="1.0" encoding="ISO-8859-1"?>
<WhiteboardCaptureSession>
  <WhiteboardDescription>
    <SensorLocation corner="top_left"/>
  </WhiteboardDescription>
  <StrokeSet>
    <Stroke colour="black" start_time="1.0" end_time="2.0">
      <Point x="100" y="200" time="1.0"/>
      <Point x="110" y="210" time="1.1"/>
      <Point x="120" y="205" time="1.2"/>
    </Stroke>
    <Stroke colour="black" start_time="3.0" end_time="4.0">
      <Point x="130" y="220" time="3.0"/>
      <Point x="140" y="230" time="3.1"/>
    </Stroke>
  </StrokeSet>
</WhiteboardCaptureSession>
)";

// Minimal IAM-style tree with two line files and a transcription.
fs::path write_iam_tree() {
  const fs::path root =
      fs::temp_directory_path() / "hwgan-test-iam";
  fs::remove_all(root);
  fs::create_directories(root / "lineStrokes-all" / "a01" / "a01-000");
  fs::create_directories(root / "ascii-all" / "a01" / "a01-000");

  auto write_line = [&](const std::string& name, int x0) {
    std::ofstream out(root / "lineStrokes-all" / "a01" / "a01-000" / name);
    out << "<WhiteboardCaptureSession><StrokeSet><Stroke>";
    for (int i = 0; i < 4; ++i)
      out << "<Point x=\"" << x0 + i * 10 << "\" y=\"" << 100 + i * 7
          << "\"/>";
    out << "</Stroke></StrokeSet></WhiteboardCaptureSession>";
  };
  write_line("a01-000u-01.xml", 0);
  write_line("a01-000u-02.xml", 500);

  std::ofstream ascii(root / "ascii-all" / "a01" / "a01-000" / "a01-000u.txt");
  ascii << "OCR:\nwrong line\n\nCSR:\n\nA MOVE to stop\nMr Gaitskell\n";
  return root;
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("vocabulary has 54 entries in the documented order") {
  const Vocabulary vocab;
  CHECK(vocab.size() == 54);
  CHECK(vocab.index_of('?') == 0);
  CHECK(vocab.index_of(' ') == 1);
  CHECK(vocab.index_of('A') == 2);
  CHECK(vocab.index_of('Z') == 27);
  CHECK(vocab.index_of('a') == 28);
  CHECK(vocab.index_of('z') == 53);
  CHECK(vocab.index_of('3') == 0);
  CHECK(vocab.char_at(28) == 'a');
}

TEST_CASE("encode_text produces one-hot rows") {
  const Vocabulary vocab;
  const auto enc = encode_text("a", vocab);
  REQUIRE(enc.length() == 1);
  const auto m = enc.matrix();
  CHECK(m.rows() == 1);
  CHECK(m.cols() == 54);
  CHECK(m(0, 28) == 1.0);
  CHECK(m.row(0).sum() == 1.0);

  CHECK(encode_text("", vocab).length() == 0);
  CHECK(encode_text("?", vocab).indices[0] == 0);

  const auto longer = encode_text("Hello there!", vocab);
  CHECK(longer.length() == 12);
  const auto lm = longer.matrix();
  for (Eigen::Index r = 0; r < lm.rows(); ++r)
    CHECK(lm.row(r).sum() == 1.0);
  CHECK(longer.indices.back() == 0);  // '!' is unknown
}

TEST_CASE("parse_iam_linestrokes reads strokes, points and pen flags") {
  const auto sample = parse_iam_linestrokes(kTwoStrokeXml);
  REQUIRE(sample.strokes.size() == 2);
  REQUIRE(sample.strokes[0].points.size() == 3);
  REQUIRE(sample.strokes[1].points.size() == 2);
  CHECK(sample.strokes[0].points[0].x == 100.0);
  CHECK(sample.strokes[0].points[0].y == 200.0);
  CHECK(sample.strokes[0].points[0].pen == 0);
  CHECK(sample.strokes[0].points[2].pen == 1);
  CHECK(sample.strokes[1].points[0].pen == 0);
  CHECK(sample.strokes[1].points[1].pen == 1);
}

TEST_CASE("parse_iam_linestrokes error paths") {
  CHECK_THROWS_AS(parse_iam_linestrokes("<WhiteboardCaptureSession>"
                                        "<StrokeSet></StrokeSet>"
                                        "</WhiteboardCaptureSession>"),
                  InvalidArgumentError);
  CHECK_THROWS_AS(parse_iam_linestrokes("not xml at all <"), ParseError);
  CHECK_THROWS_AS(parse_iam_linestrokes("<Wrong><Root/></Wrong>"), ParseError);
  try {
    parse_iam_linestrokes("<Wrong><Root/></Wrong>");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("StrokeSet") != std::string::npos);
  }
}

TEST_CASE("load_iam_dataset pairs strokes with transcription lines") {
  const auto root = write_iam_tree();
  IamStats stats;
  const auto samples = load_iam_dataset(root.string(), &stats);
  REQUIRE(samples.size() == 2);
  CHECK(stats.stroke_files == 2);
  CHECK(stats.parsed == 2);
  CHECK(stats.with_transcription == 2);
  CHECK(samples[0].text == "A MOVE to stop");
  CHECK(samples[1].text == "Mr Gaitskell");
  CHECK(point_count(samples[0]) == 4);
  fs::remove_all(root);
}

TEST_CASE("parsed samples round trip through the interchange format") {
  const auto sample = parse_iam_linestrokes(kTwoStrokeXml);
  const auto back = from_interchange_line(to_interchange_line(sample));
  const auto a = flatten(sample);
  const auto b = flatten(back);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
    CHECK(a[i].pen == b[i].pen);
  }
}

TEST_CASE("load_iam_dataset names missing directories") {
  try {
    load_iam_dataset("/nonexistent/iam-root");
    CHECK(false);
  } catch (const InvalidArgumentError& e) {
    CHECK(std::string(e.what()).find("lineStrokes-all") != std::string::npos);
  }
}

TEST_CASE("split_dataset is deterministic and disjoint") {
  Rng rng(1);
  std::vector<HandwritingSample> samples;
  for (int i = 0; i < 40; ++i) {
    auto s = testing::random_sample(rng, 1, 3);
    s.text = std::to_string(i);
    samples.push_back(std::move(s));
  }
  const auto a = split_dataset(samples, 0.25, 7);
  const auto b = split_dataset(samples, 0.25, 7);
  CHECK(a.train.size() == 30);
  CHECK(a.validation.size() == 10);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i)
    CHECK(a.train[i].text == b.train[i].text);

  const auto c = split_dataset(samples, 0.25, 8);
  bool any_different = false;
  for (std::size_t i = 0; i < a.train.size(); ++i)
    any_different = any_different || a.train[i].text != c.train[i].text;
  CHECK(any_different);
}

TEST_CASE("make_batches chunks one epoch with a deterministic shuffle") {
  Rng rng(2);
  std::vector<HandwritingSample> samples;
  for (int i = 0; i < 10; ++i)
    samples.push_back(testing::random_sample(rng, 1, 4));
  const auto batches = make_batches(samples, 4, 800, 3);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].offsets.size() == 4);
  CHECK(batches[1].offsets.size() == 4);
  CHECK(batches[2].offsets.size() == 2);

  const auto again = make_batches(samples, 4, 800, 3);
  for (std::size_t i = 0; i < batches.size(); ++i)
    for (std::size_t j = 0; j < batches[i].offsets.size(); ++j)
      CHECK(batches[i].offsets[j].size() == again[i].offsets[j].size());
}

TEST_CASE("make_batches truncates long sequences to max_len") {
  std::vector<std::vector<std::pair<double, double>>> big(1);
  for (int i = 0; i < 2000; ++i)
    big[0].emplace_back(i, (i % 5) * 3.0);
  std::vector<HandwritingSample> samples{make_sample(big)};
  const auto batches = make_batches(samples, 1, 800, 0);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].offsets[0].size() == 800);
}

TEST_CASE("batch elements carry one eos per stroke") {
  Rng rng(4);
  std::vector<HandwritingSample> samples;
  for (int i = 0; i < 6; ++i)
    samples.push_back(testing::random_sample(rng, 2 + i % 3, 5));
  const auto batches = make_batches(samples, 3, 800, 1);
  std::size_t element = 0;
  for (const auto& batch : batches)
    for (const auto& offsets : batch.offsets) {
      std::size_t eos = 0;
      for (const auto& o : offsets) eos += static_cast<std::size_t>(o.eos);
      // Untruncated elements: eos count equals the stroke count.
      bool matched = false;
      for (const auto& s : samples)
        if (point_count(s) == offsets.size() && s.strokes.size() == eos)
          matched = true;
      CHECK(matched);
      ++element;
    }
  CHECK(element == 6);
}

TEST_CASE("BatchStream is deterministic and resumable") {
  Rng rng(6);
  std::vector<HandwritingSample> samples;
  for (int i = 0; i < 7; ++i)
    samples.push_back(testing::random_sample(rng, 1, 4));

  BatchStream a(samples, 2, 800, 42);
  BatchStream b(samples, 2, 800, 42);
  for (int i = 0; i < 10; ++i) {
    const auto ba = a.next();
    const auto bb = b.next();
    REQUIRE(ba.offsets.size() == bb.offsets.size());
    for (std::size_t j = 0; j < ba.offsets.size(); ++j)
      CHECK(ba.offsets[j].size() == bb.offsets[j].size());
  }

  // Restoring the position replays the same batches.
  const auto epoch = a.epoch();
  const auto cursor = a.cursor();
  const auto next_a = a.next();
  BatchStream c(samples, 2, 800, 42);
  c.restore(epoch, cursor);
  const auto next_c = c.next();
  REQUIRE(next_a.offsets.size() == next_c.offsets.size());
  for (std::size_t j = 0; j < next_a.offsets.size(); ++j)
    CHECK(next_a.offsets[j].size() == next_c.offsets[j].size());
}

TEST_CASE("empty splits are rejected") {
  std::vector<HandwritingSample> none;
  CHECK_THROWS_AS(make_batches(none, 4, 800, 0), InvalidArgumentError);
}

TEST_SUITE_END();
