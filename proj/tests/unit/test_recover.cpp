#include <doctest.h>

#include <clx/error.hpp>
#include <clx/recover.hpp>
#include <clx/stream.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <vector>

#include "helpers.hpp"

using namespace clx;

namespace {

// Degenerate bb-length classifier whose score is a known monotone
// function of the window's ones fraction: sigmoid(4*mean - 2).
ClassifierParams density_model() {
  EncoderConfig cfg;
  cfg.T = 80;
  cfg.C = 1;
  cfg.L = 1;
  cfg.K = 1;
  cfg.D = 1;
  cfg.finalize();
  EncoderParams trunk = init_encoder(cfg, 0);
  std::fill(trunk.p.begin(), trunk.p.end(), 0.0);
  trunk.w_in()[0] = 1.0;
  ClassifierParams model = init_classifier(std::move(trunk), 1, 0);
  model.head = {1.0, 0.0, 4.0, -2.0};
  return model;
}

double density_score(double mean) {
  return 1.0 / (1.0 + std::exp(-(4.0 * mean - 2.0)));
}

// Two all-ones plateaus: offsets 0..9 and 20..29 of a 40-byte buffer.
Bytes two_peak_data() {
  Bytes data(40, 0x00);
  for (std::size_t i = 0; i < 10; ++i) data[i] = 0xFF;
  for (std::size_t i = 20; i < 30; ++i) data[i] = 0xFF;
  return data;
}

std::vector<std::uint64_t> offsets(const std::vector<HeaderDetection>& d) {
  std::vector<std::uint64_t> out;
  for (const HeaderDetection& h : d) out.push_back(h.offset_bytes);
  return out;
}

}  // namespace

TEST_CASE("scan config and region validation") {
  CHECK_THROWS_AS((ScanConfig{0, 0.5, {}}).validate(), ConfigError);
  CHECK_THROWS_AS((ScanConfig{1, 0.0, {}}).validate(), ConfigError);
  CHECK_THROWS_AS((ScanConfig{1, 1.0, {}}).validate(), ConfigError);

  const ClassifierParams model = density_model();
  const Bytes data = two_peak_data();
  CHECK_THROWS_AS(scan_layer(model, Layer::gse, data, 0, data.size(), {}),
                  ConfigError);
  CHECK_THROWS_AS(scan_layer(model, Layer::bb, data, 0, data.size() + 1, {}),
                  InputSizeError);
  CHECK_THROWS_AS(scan_layer(model, Layer::bb, data, 30, 20, {}),
                  InputSizeError);
}

TEST_CASE("scan_layer thresholds, suppresses, and orders detections") {
  const ClassifierParams model = density_model();
  const Bytes data = two_peak_data();

  ScanConfig cfg;
  cfg.threshold = 0.75;
  const auto dets = scan_layer(model, Layer::bb, data, 0, data.size(), cfg);
  // Above 0.75 only offsets 0..2 and 18..22 qualify; the default radius
  // of one header length keeps the two plateau maxima, earliest first on
  // the score tie.
  const std::vector<std::uint64_t> want_peaks{0, 20};
  REQUIRE_EQ(offsets(dets), want_peaks);
  for (const HeaderDetection& d : dets) {
    CHECK_EQ(d.layer, Layer::bb);
    CHECK(d.corrected.empty());
    CHECK_EQ(d.score, doctest::Approx(density_score(1.0)).epsilon(1e-12));
  }

  // Detections exactly radius apart coexist; closer ones are suppressed.
  cfg.suppress_radius = 2;
  const auto tight = scan_layer(model, Layer::bb, data, 0, data.size(), cfg);
  const std::vector<std::uint64_t> want_tight{0, 2, 18, 20, 22};
  CHECK_EQ(offsets(tight), want_tight);

  // Stride limits the candidate grid before anything else.
  cfg.suppress_radius.reset();
  cfg.stride = 3;
  const auto strided = scan_layer(model, Layer::bb, data, 0, data.size(), cfg);
  const std::vector<std::uint64_t> want_strided{0, 21};
  CHECK_EQ(offsets(strided), want_strided);

  // Region bounds clip the candidate set.
  cfg.stride = 1;
  const auto tail = scan_layer(model, Layer::bb, data, 12, data.size(), cfg);
  const std::vector<std::uint64_t> want_tail{20};
  CHECK_EQ(offsets(tail), want_tail);
}

TEST_CASE("segment_bb_frames carves data fields") {
  std::vector<HeaderDetection> dets;
  const auto whole = segment_bb_frames(dets, 300);
  REQUIRE_EQ(whole.size(), 1);
  CHECK_EQ(whole[0].begin, 0);
  CHECK_EQ(whole[0].end, 300);

  dets.push_back({0, Layer::bb, 0.9, {}});
  dets.push_back({138, Layer::bb, 0.9, {}});
  const auto regions = segment_bb_frames(dets, 300);
  REQUIRE_EQ(regions.size(), 2);
  CHECK_EQ(regions[0].begin, 10);
  CHECK_EQ(regions[0].end, 138);
  CHECK_EQ(regions[1].begin, 148);
  CHECK_EQ(regions[1].end, 300);

  // Back-to-back detections clamp to an empty field, never invert.
  std::vector<HeaderDetection> tight{{0, Layer::bb, 0.9, {}},
                                     {4, Layer::bb, 0.9, {}}};
  const auto clamped = segment_bb_frames(tight, 300);
  CHECK_EQ(clamped[0].begin, 4);
  CHECK_EQ(clamped[0].end, 4);
}

TEST_CASE("correct_protocol_field picks the nearest valid code") {
  const std::vector<std::uint8_t> codes{proto_icmp, proto_tcp, proto_udp};
  CHECK_EQ(correct_protocol_field(0x06, codes).code, 0x06);
  CHECK_EQ(correct_protocol_field(0x06, codes).distance, 0);
  CHECK_EQ(correct_protocol_field(0x07, codes).code, 0x06);
  CHECK_EQ(correct_protocol_field(0x07, codes).distance, 1);
  CHECK_EQ(correct_protocol_field(0x00, {0x01, 0x06}).code, 0x01);

  // Hamming ties resolve to the smaller code.
  CHECK_EQ(correct_protocol_field(0x07, {0x05, 0x06}).code, 0x05);

  CHECK_THROWS_AS(correct_protocol_field(0x07, {}), ConfigError);

  // Correction is idempotent over the whole byte range.
  for (int b = 0; b < 256; ++b) {
    const auto once = correct_protocol_field(std::uint8_t(b), codes);
    const auto twice = correct_protocol_field(once.code, codes);
    CHECK_EQ(twice.code, once.code);
    CHECK_EQ(twice.distance, 0);
  }
}

namespace {

struct PerfectDetections {
  std::vector<HeaderDetection> bb, gse, ip;
};

PerfectDetections from_annotations(const AnnotatedStream& stream) {
  PerfectDetections d;
  for (const Annotation& a : stream.annotations) {
    HeaderDetection det{a.offset_bytes, a.layer, 1.0, {}};
    if (a.layer == Layer::bb) d.bb.push_back(det);
    if (a.layer == Layer::gse) d.gse.push_back(det);
    if (a.layer == Layer::ip) d.ip.push_back(det);
  }
  return d;
}

}  // namespace

TEST_CASE("extract_pdus reproduces clean pdus from perfect detections") {
  TrafficSpec spec;
  spec.n_pdus = 60;
  spec.seed = 19;
  const AnnotatedStream stream = build_stream(spec);
  const auto pdus = generate_pdus(spec);
  const PerfectDetections d = from_annotations(stream);
  const std::vector<std::uint8_t> codes{proto_icmp, proto_tcp, proto_udp};

  const auto extracted =
      extract_pdus(d.gse, d.ip, d.bb, stream.bytes, codes);
  REQUIRE_EQ(extracted.size(), spec.n_pdus);

  std::map<std::uint64_t, std::uint64_t> id_at;
  for (const Annotation& a : annotations_of(stream.annotations, Layer::ip))
    id_at[a.offset_bytes] = *a.pdu_id;
  for (const ExtractedPdu& p : extracted) {
    REQUIRE(id_at.count(p.offset_bytes));
    CHECK(p.bytes == pdus[id_at[p.offset_bytes]].bytes);
    CHECK_FALSE(p.truncated);
    CHECK(p.corrected.empty());
  }
}

TEST_CASE("extract_pdus repairs a corrupted protocol byte") {
  TrafficSpec spec;
  spec.n_pdus = 10;
  spec.seed = 20;
  const AnnotatedStream stream = build_stream(spec);
  const PerfectDetections d = from_annotations(stream);

  Bytes data = stream.bytes;
  const auto ip_anns = annotations_of(stream.annotations, Layer::ip);
  const std::uint64_t victim = ip_anns[4].offset_bytes;
  data[victim + 9] = 0x07;

  const auto extracted = extract_pdus(d.gse, d.ip, d.bb, data,
                                      {proto_icmp, proto_tcp, proto_udp});
  bool found = false;
  for (const ExtractedPdu& p : extracted) {
    if (p.offset_bytes != victim) continue;
    found = true;
    CHECK_EQ(p.bytes[9], proto_tcp);
    REQUIRE_EQ(p.corrected.size(), 1);
    CHECK_EQ(p.corrected[0], "protocol");
  }
  CHECK(found);
}

TEST_CASE("detections round-trip and pdus use length-prefixed framing") {
  clxtest::TempDir dir;
  std::vector<HeaderDetection> dets{{5, Layer::gse, 0.75, {"protocol"}},
                                    {29, Layer::ip, 0.5, {}}};
  save_detections(dir.file("d.jsonl"), dets);
  const auto loaded = load_detections(dir.file("d.jsonl"));
  REQUIRE_EQ(loaded.size(), 2);
  CHECK_EQ(loaded[0].offset_bytes, 5);
  CHECK_EQ(loaded[0].layer, Layer::gse);
  CHECK_EQ(loaded[0].score, 0.75);
  CHECK_EQ(loaded[0].corrected, std::vector<std::string>{"protocol"});
  CHECK_EQ(loaded[1].offset_bytes, 29);
  CHECK(loaded[1].corrected.empty());
  CHECK_THROWS_AS(load_detections(dir.file("nope.jsonl")), IoError);

  std::vector<ExtractedPdu> pdus(2);
  pdus[0].bytes = {0xAA, 0xBB, 0xCC};
  pdus[1].bytes = {0x01};
  save_pdus(dir.file("p.bin"), pdus);
  std::ifstream f(dir.file("p.bin"), std::ios::binary);
  std::vector<char> raw((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
  const std::vector<char> want{3, 0, 0, 0, char(0xAA), char(0xBB), char(0xCC),
                               1, 0, 0, 0, 0x01};
  CHECK(raw == want);
}
