#include <doctest.h>

#include <clx/crc.hpp>
#include <clx/error.hpp>
#include <clx/protocol.hpp>
#include <clx/rng.hpp>

#include <cstdint>
#include <vector>

using namespace clx;

TEST_CASE("crc8_bb accepts exactly nine bytes") {
  const std::vector<std::uint8_t> nine(9, 0x55);
  CHECK_EQ(crc8_bb(nine), crc8(nine));
  const std::vector<std::uint8_t> eight(8, 0);
  CHECK_THROWS_AS(crc8_bb(eight), InputSizeError);
  const std::vector<std::uint8_t> ten(10, 0);
  CHECK_THROWS_AS(crc8_bb(ten), InputSizeError);
}

TEST_CASE("crc32_pdu rejects empty input") {
  CHECK_THROWS_AS(crc32_pdu({}), InputSizeError);
  const std::vector<std::uint8_t> msg{'1', '2', '3', '4', '5',
                                      '6', '7', '8', '9'};
  CHECK_EQ(crc32_pdu(msg), 0xCBF43926u);
}

TEST_CASE("bb frame round-trips and the checksum covers nine bytes") {
  const BbHeader h = make_bb_header(0x7000, 1024, 64, 0xB8, 3);
  std::vector<std::uint8_t> payload(8, 0xAB);
  const Bytes frame = encode_bb_frame(h, payload);
  REQUIRE_EQ(frame.size(), bb_header_bytes + payload.size());
  CHECK_EQ(frame[9], crc8_bb(std::span(frame).first(9)));

  const BbParse p = parse_bb_header(frame);
  CHECK(p.crc_ok);
  CHECK_EQ(p.header, h);
  CHECK_EQ(p.header.matype, 0x7000);
  CHECK_EQ(p.header.upl, 1024);
  CHECK_EQ(p.header.dfl, 64);
  CHECK_EQ(p.header.sync, 0xB8);
  CHECK_EQ(p.header.syncd, 3);

  Bytes bad = frame;
  bad[2] ^= 0x01;
  CHECK_FALSE(parse_bb_header(bad).crc_ok);
}

TEST_CASE("bb encode enforces dfl") {
  const BbHeader h = make_bb_header(0, 0, 16);
  const std::vector<std::uint8_t> wrong(3, 0);
  CHECK_THROWS_AS(encode_bb_frame(h, wrong), ConsistencyError);

  BbHeader over = h;
  over.dfl = bb_max_dfl_bits + 8;
  const std::vector<std::uint8_t> big((bb_max_dfl_bits + 8) / 8, 0);
  CHECK_THROWS_AS(encode_bb_frame(over, big), ConsistencyError);

  const std::vector<std::uint8_t> nine(9, 0);
  CHECK_THROWS_AS(parse_bb_header(nine), InputSizeError);
}

TEST_CASE("gse header length covers all sixteen flag combinations") {
  for (int s = 0; s < 2; ++s) {
    for (int e = 0; e < 2; ++e) {
      for (std::uint8_t lt = 0; lt < 4; ++lt) {
        std::size_t want = 2;
        if (!(s && e)) want += 1;
        if (s && !e) want += 2;
        if (s) want += 2 + gse_label_bytes(lt);
        const auto got = gse_header_bytes_for(s, e, lt);
        if (want > gse_max_header_bytes) {
          CHECK_FALSE(got.has_value());
        } else {
          REQUIRE(got.has_value());
          CHECK_EQ(*got, want);
        }
      }
    }
  }
  CHECK_EQ(gse_label_bytes(0), 6);
  CHECK_EQ(gse_label_bytes(1), 3);
  CHECK_EQ(gse_label_bytes(2), 0);
  CHECK_EQ(gse_label_bytes(3), 0);
  CHECK_FALSE(gse_header_bytes_for(true, false, 0).has_value());
}

namespace {

GseHeader single_header(std::uint16_t payload_len) {
  GseHeader h;
  h.s = true;
  h.e = true;
  h.lt = 2;
  h.protocol_type = 0x0800;
  h.gse_length = std::uint16_t(2 + payload_len);
  return h;
}

}  // namespace

TEST_CASE("gse packets round-trip for the generator shapes") {
  rng::Sequence seq(7);
  std::vector<std::uint8_t> payload(20);
  for (auto& b : payload) b = std::uint8_t(seq.below(256));

  SUBCASE("single, s=1 e=1 lt=2") {
    const GseHeader h = single_header(20);
    const Bytes pkt = encode_gse_packet(h, payload, std::nullopt);
    REQUIRE_EQ(pkt.size(), 4 + payload.size());
    const GseParse p = parse_gse_header(pkt);
    REQUIRE_EQ(p.status, GseStatus::ok);
    CHECK_EQ(p.consumed, 4);
    CHECK_EQ(p.header, h);
  }

  SUBCASE("first fragment, s=1 e=0 lt=2, carries total_length") {
    GseHeader h;
    h.s = true;
    h.e = false;
    h.lt = 2;
    h.frag_id = 0x21;
    h.total_length = 300;
    h.protocol_type = 0x0800;
    h.gse_length = std::uint16_t(5 + payload.size());
    const Bytes pkt = encode_gse_packet(h, payload, std::nullopt);
    REQUIRE_EQ(pkt.size(), 7 + payload.size());
    const GseParse p = parse_gse_header(pkt);
    REQUIRE_EQ(p.status, GseStatus::ok);
    CHECK_EQ(p.consumed, 7);
    CHECK_EQ(p.header, h);
  }

  SUBCASE("end fragment, s=0 e=1, trailer required") {
    GseHeader h;
    h.s = false;
    h.e = true;
    h.lt = 3;
    h.frag_id = 0x21;
    h.gse_length = std::uint16_t(1 + payload.size() + 4);
    const std::uint32_t crc = crc32_pdu(payload);
    const Bytes pkt = encode_gse_packet(h, payload, crc);
    REQUIRE_EQ(pkt.size(), 3 + payload.size() + 4);
    CHECK_EQ(read_u32(pkt, pkt.size() - 4), crc);
    const GseParse p = parse_gse_header(pkt);
    REQUIRE_EQ(p.status, GseStatus::ok);
    CHECK_EQ(p.consumed, 3);
    CHECK_EQ(p.header, h);

    CHECK_THROWS_AS(encode_gse_packet(h, payload, std::nullopt),
                    ConsistencyError);
  }

  SUBCASE("continuation, s=0 e=0, no trailer allowed") {
    GseHeader h;
    h.s = false;
    h.e = false;
    h.lt = 3;
    h.frag_id = 0x21;
    h.gse_length = std::uint16_t(1 + payload.size());
    const Bytes pkt = encode_gse_packet(h, payload, std::nullopt);
    REQUIRE_EQ(pkt.size(), 3 + payload.size());
    CHECK_THROWS_AS(encode_gse_packet(h, payload, 0u), ConsistencyError);
  }
}

TEST_CASE("gse encode rejects inconsistent headers") {
  GseHeader h = single_header(20);
  const std::vector<std::uint8_t> payload(20, 0);

  SUBCASE("length imbalance") {
    h.gse_length = 99;
    CHECK_THROWS_AS(encode_gse_packet(h, payload, std::nullopt),
                    ConsistencyError);
  }
  SUBCASE("frag_id present though s=1 e=1") {
    h.frag_id = 1;
    CHECK_THROWS_AS(encode_gse_packet(h, payload, std::nullopt),
                    ConsistencyError);
  }
  SUBCASE("missing protocol_type") {
    h.protocol_type.reset();
    CHECK_THROWS_AS(encode_gse_packet(h, payload, std::nullopt),
                    ConsistencyError);
  }
  SUBCASE("label length mismatch") {
    h.lt = 0;
    h.gse_length = std::uint16_t(2 + 6 + 20);
    CHECK_THROWS_AS(encode_gse_packet(h, payload, std::nullopt),
                    ConsistencyError);
  }
  SUBCASE("thirteen-byte combination") {
    GseHeader bad;
    bad.s = true;
    bad.e = false;
    bad.lt = 0;
    bad.frag_id = 1;
    bad.total_length = 40;
    bad.protocol_type = 0x0800;
    bad.label.assign(6, 0);
    bad.gse_length = std::uint16_t(11 + 20);
    CHECK_THROWS_AS(encode_gse_packet(bad, payload, std::nullopt),
                    ConsistencyError);
  }
}

TEST_CASE("gse parse reports padding and malformed input") {
  const std::vector<std::uint8_t> pad{0x00, 0x00, 0x55};
  CHECK_EQ(parse_gse_header(pad).status, GseStatus::padding);
  CHECK_EQ(parse_gse_header(pad).consumed, 0);

  const std::vector<std::uint8_t> one{0xFF};
  CHECK_THROWS_AS(parse_gse_header(one), InputSizeError);

  // s=1 e=0 lt=0 would need 13 header bytes.
  std::vector<std::uint8_t> bad(16, 0);
  bad[0] = 0x80;
  bad[1] = 14;
  CHECK_EQ(parse_gse_header(bad).status, GseStatus::malformed);

  // gse_length too small to hold the header's own optional fields.
  std::vector<std::uint8_t> tiny(16, 0);
  tiny[0] = 0xE0;
  tiny[1] = 1;
  CHECK_EQ(parse_gse_header(tiny).status, GseStatus::malformed);
}

TEST_CASE("ipv4 checksum matches the canonical example") {
  const std::vector<std::uint8_t> header{0x45, 0x00, 0x00, 0x73, 0x00, 0x00,
                                         0x40, 0x00, 0x40, 0x11, 0x00, 0x00,
                                         0xC0, 0xA8, 0x00, 0x01, 0xC0, 0xA8,
                                         0x00, 0xC7};
  CHECK_EQ(ipv4_checksum(header), 0xB861);
  const std::vector<std::uint8_t> odd(3, 0);
  CHECK_THROWS_AS(ipv4_checksum(odd), InputSizeError);
}

TEST_CASE("ip header round-trips with a valid checksum") {
  IpHeader h;
  h.tos = 0x10;
  h.total_length = 84;
  h.identification = 0x4242;
  h.flags_fragment = 0x4000;
  h.ttl = 63;
  h.protocol = proto_udp;
  h.src = 0xC0A80001;
  h.dst = 0x08080808;
  const Bytes wire = encode_ip_header(h);
  REQUIRE_EQ(wire.size(), ip_header_bytes);
  CHECK_EQ(ipv4_checksum(wire), 0);

  const IpParse p = parse_ip_header(wire);
  CHECK(p.checksum_ok);
  CHECK_EQ(p.header.version, 4);
  CHECK_EQ(p.header.ihl, 5);
  CHECK_EQ(p.header.total_length, 84);
  CHECK_EQ(p.header.protocol, proto_udp);
  CHECK_EQ(p.header.src, 0xC0A80001);
  CHECK_EQ(p.header.dst, 0x08080808);

  Bytes bad = wire;
  bad[16] ^= 0x80;
  CHECK_FALSE(parse_ip_header(bad).checksum_ok);

  IpHeader v6 = h;
  v6.version = 6;
  CHECK_THROWS_AS(encode_ip_header(v6), ConsistencyError);
  const std::vector<std::uint8_t> shorty(19, 0);
  CHECK_THROWS_AS(parse_ip_header(shorty), InputSizeError);
}
