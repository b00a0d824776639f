#include <doctest.h>

#include <clx/fsm_decode.hpp>
#include <clx/stream.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "helpers.hpp"

using namespace clx;

namespace {

TrafficSpec spec_of(std::uint64_t n, std::uint64_t seed) {
  TrafficSpec spec;
  spec.n_pdus = n;
  spec.seed = seed;
  return spec;
}

std::vector<std::uint64_t> offsets_of(const std::vector<Annotation>& anns,
                                      Layer layer) {
  std::vector<std::uint64_t> out;
  for (const Annotation& a : annotations_of(anns, layer))
    out.push_back(a.offset_bytes);
  return out;
}

}  // namespace

TEST_CASE("fsm decodes a clean stream completely") {
  const TrafficSpec spec = spec_of(100, 21);
  const AnnotatedStream stream = build_stream(spec);
  const auto pdus = generate_pdus(spec);
  const DecodeReport report = fsm_decode(stream.bytes);

  CHECK_EQ(report.bytes_scanned, stream.bytes.size());
  CHECK_EQ(report.crc_failures, 0);
  CHECK(report.bb_offsets == offsets_of(stream.annotations, Layer::bb));
  CHECK(report.gse_offsets == offsets_of(stream.annotations, Layer::gse));
  CHECK(report.ip_offsets == offsets_of(stream.annotations, Layer::ip));

  // Every PDU comes back byte-exact at its annotated first-fragment offset.
  std::map<std::uint64_t, std::uint64_t> id_at;
  for (const Annotation& a : annotations_of(stream.annotations, Layer::ip))
    id_at[a.offset_bytes] = *a.pdu_id;
  REQUIRE_EQ(report.pdus.size(), spec.n_pdus);
  std::set<std::uint64_t> seen;
  for (const RecoveredPdu& r : report.pdus) {
    REQUIRE(id_at.count(r.offset_bytes));
    const std::uint64_t id = id_at[r.offset_bytes];
    CHECK(r.bytes == pdus[id].bytes);
    seen.insert(id);
  }
  CHECK_EQ(seen.size(), spec.n_pdus);
}

TEST_CASE("resync_scan lands on a verifiable header") {
  const AnnotatedStream stream = build_stream(spec_of(10, 4));
  Bytes data(37, 0xFF);
  data.insert(data.end(), stream.bytes.begin(), stream.bytes.end());

  const auto at = resync_scan(data, 0);
  REQUIRE(at.has_value());
  CHECK_LE(*at, 37);
  const BbParse p = parse_bb_header(std::span(data).subspan(*at));
  CHECK(p.crc_ok);
  CHECK_LE(p.header.dfl, bb_max_dfl_bits);

  // From past the junk, the first true frame header is found exactly.
  CHECK_EQ(resync_scan(data, 37), 37);
  const Bytes blank(64, 0x00);
  CHECK_FALSE(resync_scan(blank, 0).has_value());
}

TEST_CASE("fsm resynchronizes after a mid-frame cut") {
  const TrafficSpec spec = spec_of(60, 33);
  const AnnotatedStream stream = build_stream(spec);
  const auto pdus = generate_pdus(spec);
  const std::size_t frame_bytes =
      bb_header_bytes + spec.frame_capacity_bits / 8;
  const std::uint64_t cut = 2 * frame_bytes + 51;
  const AnnotatedStream tail = truncate_stream(stream, cut);

  const DecodeReport report = fsm_decode(tail.bytes);
  const std::uint64_t first_frame = 3 * frame_bytes - cut;
  REQUIRE_FALSE(report.bb_offsets.empty());
  CHECK_EQ(report.bb_offsets.front(), first_frame);

  // PDUs whose first fragment starts after resync are recovered exactly.
  std::map<std::uint64_t, std::uint64_t> id_at;
  std::size_t expected = 0;
  for (const Annotation& a : annotations_of(tail.annotations, Layer::ip)) {
    id_at[a.offset_bytes] = *a.pdu_id;
    if (a.offset_bytes >= first_frame) ++expected;
  }
  std::set<std::uint64_t> seen;
  for (const RecoveredPdu& r : report.pdus) {
    REQUIRE(id_at.count(r.offset_bytes));
    CHECK(r.bytes == pdus[id_at[r.offset_bytes]].bytes);
    seen.insert(id_at[r.offset_bytes]);
  }
  CHECK_EQ(seen.size(), expected);
}

TEST_CASE("save_report is canonical on demand") {
  clxtest::TempDir dir;
  DecodeReport r;
  r.bb_offsets = {0, 138};
  r.pdus.push_back({10, {1, 2, 3}});
  r.crc_failures = 2;
  r.bytes_scanned = 276;
  r.elapsed_s = 1.25;

  save_report(dir.file("a.txt"), r, true);
  save_report(dir.file("b.txt"), r, true);
  std::ifstream fa(dir.file("a.txt")), fb(dir.file("b.txt"));
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK_EQ(sa.str(), sb.str());
  CHECK(sa.str().find("1.25") == std::string::npos);
  CHECK(sa.str().find("276") != std::string::npos);
}
