#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "clx/bits.hpp"

namespace clx {

// Wire constants shared by every layer of the stack.
inline constexpr std::size_t bb_header_bytes = 10;
inline constexpr std::uint32_t bb_max_dfl_bits = 58112;
inline constexpr std::size_t gse_min_header_bytes = 2;
inline constexpr std::size_t gse_max_header_bytes = 12;
inline constexpr std::uint16_t gse_max_length = 4095;
inline constexpr std::size_t ip_header_bytes = 20;

inline constexpr std::uint8_t proto_icmp = 0x01;
inline constexpr std::uint8_t proto_tcp = 0x06;
inline constexpr std::uint8_t proto_udp = 0x11;

// CRC-8 over the first nine bytes of a base-band header.
// Exactly nine bytes; anything else is an input-size error.
std::uint8_t crc8_bb(std::span<const std::uint8_t> data);

// CRC-32 over a reassembled PDU. Empty input is an input-size error.
std::uint32_t crc32_pdu(std::span<const std::uint8_t> data);

// Base-band frame header, 10 bytes on the wire:
//   matype(2) upl(2) dfl(2) sync(1) syncd(2) crc8(1), all big-endian.
// upl and dfl count bits. dfl never exceeds bb_max_dfl_bits.
struct BbHeader {
  std::uint16_t matype = 0;
  std::uint16_t upl = 0;
  std::uint16_t dfl = 0;
  std::uint8_t sync = 0;
  std::uint16_t syncd = 0;
  std::uint8_t crc8 = 0;

  bool operator==(const BbHeader&) const = default;
};

// Fills the checksum byte so the header round-trips through encode/parse.
BbHeader make_bb_header(std::uint16_t matype, std::uint16_t upl,
                        std::uint16_t dfl, std::uint8_t sync = 0,
                        std::uint16_t syncd = 0);

struct BbParse {
  BbHeader header;
  bool crc_ok = false;
};

// payload bit length must equal header.dfl; the checksum byte is always
// recomputed from the first nine serialized bytes.
Bytes encode_bb_frame(const BbHeader& header,
                      std::span<const std::uint8_t> payload);

// Parses the first 10 bytes. Total over arbitrary bytes: corruption is
// reported through crc_ok, never an exception.
BbParse parse_bb_header(std::span<const std::uint8_t> data);

// Encapsulation packet header, 2 to 12 bytes on the wire.
//   byte 0: s(bit 7) e(bit 6) lt(bits 5..4) length[11:8](bits 3..0)
//   byte 1: length[7:0]
// Optional fields follow in order: frag_id (absent only for s=1,e=1),
// total_length (s=1,e=0), protocol_type (s=1), label (s=1; 6/3/0/0 bytes
// for lt 0..3). gse_length counts every byte after the first two, payload
// and CRC-32 trailer included; the trailer exists only on an end fragment
// of a fragmented PDU (s=0, e=1).
struct GseHeader {
  bool s = false;
  bool e = false;
  std::uint8_t lt = 0;
  std::uint16_t gse_length = 0;
  std::optional<std::uint8_t> frag_id;
  std::optional<std::uint16_t> total_length;
  std::optional<std::uint16_t> protocol_type;
  Bytes label;

  bool operator==(const GseHeader&) const = default;
};

// Label bytes implied by a label-type code: 6, 3, 0, 0.
std::size_t gse_label_bytes(std::uint8_t lt);

// Serialized header length for a flag combination, or nullopt when the
// combination cannot fit the 12-byte bound (s=1, e=0, lt=0 needs 13).
std::optional<std::size_t> gse_header_bytes_for(bool s, bool e,
                                                std::uint8_t lt);

enum class GseStatus { ok, padding, malformed };

struct GseParse {
  GseStatus status = GseStatus::malformed;
  GseHeader header;
  std::size_t consumed = 0;
};

// Serializes header + fragment (+ big-endian CRC-32 trailer when given).
// The trailer must be present exactly for s=0, e=1; field presence must
// match the flags and gse_length must balance, else a consistency error.
Bytes encode_gse_packet(const GseHeader& header,
                        std::span<const std::uint8_t> fragment,
                        std::optional<std::uint32_t> crc_trailer);

// Needs at least 2 bytes. A 0x0000 first word is the padding sentinel.
// Impossible flag combinations and lengths that cannot hold the header's
// own optional fields come back malformed; consumed is 0 unless ok.
GseParse parse_gse_header(std::span<const std::uint8_t> data);

// IPv4 header; the generator always emits ihl=5 (20 bytes).
struct IpHeader {
  std::uint8_t version = 4;
  std::uint8_t ihl = 5;
  std::uint8_t tos = 0;
  std::uint16_t total_length = 0;
  std::uint16_t identification = 0;
  std::uint16_t flags_fragment = 0;
  std::uint8_t ttl = 64;
  std::uint8_t protocol = 0;
  std::uint16_t header_checksum = 0;
  std::uint32_t src = 0;
  std::uint32_t dst = 0;

  bool operator==(const IpHeader&) const = default;
};

struct IpParse {
  IpHeader header;
  bool checksum_ok = false;
};

// Ones-complement sum of 16-bit words; input length must be even.
std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header_bytes);

// version must be 4 and ihl must be 5; the checksum field is recomputed.
Bytes encode_ip_header(const IpHeader& header);

// Parses the fixed 20-byte prefix. checksum_ok verifies the full ihl*4
// bytes and is false whenever ihl is structurally impossible for the span.
IpParse parse_ip_header(std::span<const std::uint8_t> data);

// A complete IP packet with its ground-truth identity.
struct Pdu {
  Bytes bytes;
  std::uint64_t id = 0;

  bool operator==(const Pdu&) const = default;
};

}  // namespace clx
