#include "clx/protocol.hpp"

#include <array>

#include "clx/crc.hpp"
#include "clx/error.hpp"

namespace clx {

std::uint8_t crc8_bb(std::span<const std::uint8_t> data) {
  if (data.size() != 9)
    throw InputSizeError("crc8_bb expects exactly 9 bytes, got " +
                         std::to_string(data.size()));
  return crc8(data);
}

std::uint32_t crc32_pdu(std::span<const std::uint8_t> data) {
  if (data.empty()) throw InputSizeError("crc32_pdu expects non-empty input");
  return crc32(data);
}

namespace {

std::array<std::uint8_t, 9> bb_first_nine(const BbHeader& h) {
  std::array<std::uint8_t, 9> b{};
  std::span<std::uint8_t> s(b);
  write_u16(s, 0, h.matype);
  write_u16(s, 2, h.upl);
  write_u16(s, 4, h.dfl);
  b[6] = h.sync;
  write_u16(s, 7, h.syncd);
  return b;
}

}  // namespace

BbHeader make_bb_header(std::uint16_t matype, std::uint16_t upl,
                        std::uint16_t dfl, std::uint8_t sync,
                        std::uint16_t syncd) {
  BbHeader h{matype, upl, dfl, sync, syncd, 0};
  h.crc8 = crc8(bb_first_nine(h));
  return h;
}

Bytes encode_bb_frame(const BbHeader& header,
                      std::span<const std::uint8_t> payload) {
  if (header.dfl > bb_max_dfl_bits)
    throw ConsistencyError("bb dfl " + std::to_string(header.dfl) +
                           " exceeds " + std::to_string(bb_max_dfl_bits));
  if (std::size_t(header.dfl) != payload.size() * 8)
    throw ConsistencyError("bb dfl " + std::to_string(header.dfl) +
                           " does not match payload of " +
                           std::to_string(payload.size()) + " bytes");
  const auto nine = bb_first_nine(header);
  Bytes out(nine.begin(), nine.end());
  out.push_back(crc8(nine));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

BbParse parse_bb_header(std::span<const std::uint8_t> data) {
  if (data.size() < bb_header_bytes)
    throw InputSizeError("bb header needs 10 bytes, got " +
                         std::to_string(data.size()));
  BbParse r;
  r.header.matype = read_u16(data, 0);
  r.header.upl = read_u16(data, 2);
  r.header.dfl = read_u16(data, 4);
  r.header.sync = data[6];
  r.header.syncd = read_u16(data, 7);
  r.header.crc8 = data[9];
  r.crc_ok = crc8(data.first(9)) == r.header.crc8;
  return r;
}

std::size_t gse_label_bytes(std::uint8_t lt) {
  switch (lt & 3) {
    case 0: return 6;
    case 1: return 3;
    default: return 0;
  }
}

std::optional<std::size_t> gse_header_bytes_for(bool s, bool e,
                                                std::uint8_t lt) {
  std::size_t n = 2;
  if (!(s && e)) n += 1;                       // frag_id
  if (s && !e) n += 2;                         // total_length
  if (s) n += 2 + gse_label_bytes(lt);         // protocol_type + label
  if (n > gse_max_header_bytes) return std::nullopt;
  return n;
}

Bytes encode_gse_packet(const GseHeader& header,
                        std::span<const std::uint8_t> fragment,
                        std::optional<std::uint32_t> crc_trailer) {
  const bool s = header.s, e = header.e;
  const auto header_len = gse_header_bytes_for(s, e, header.lt);
  if (!header_len)
    throw ConsistencyError("gse flag combination does not fit 12 bytes");
  if (header.frag_id.has_value() == (s && e))
    throw ConsistencyError("gse frag_id presence does not match flags");
  if (header.total_length.has_value() != (s && !e))
    throw ConsistencyError("gse total_length presence does not match flags");
  if (header.protocol_type.has_value() != s)
    throw ConsistencyError("gse protocol_type presence does not match flags");
  if (header.label.size() != (s ? gse_label_bytes(header.lt) : 0))
    throw ConsistencyError("gse label length does not match lt");
  if (crc_trailer.has_value() != (!s && e))
    throw ConsistencyError("gse trailer presence does not match flags");

  const std::size_t after_two = *header_len - 2;
  const std::size_t expected =
      after_two + fragment.size() + (crc_trailer ? 4 : 0);
  if (header.gse_length != expected || header.gse_length > gse_max_length)
    throw ConsistencyError("gse_length " + std::to_string(header.gse_length) +
                           " does not balance, expected " +
                           std::to_string(expected));

  Bytes out;
  out.reserve(2 + header.gse_length);
  out.push_back(std::uint8_t((s ? 0x80 : 0) | (e ? 0x40 : 0) |
                             ((header.lt & 3) << 4) |
                             ((header.gse_length >> 8) & 0x0F)));
  out.push_back(std::uint8_t(header.gse_length & 0xFF));
  if (header.frag_id) out.push_back(*header.frag_id);
  if (header.total_length) append_u16(out, *header.total_length);
  if (header.protocol_type) append_u16(out, *header.protocol_type);
  out.insert(out.end(), header.label.begin(), header.label.end());
  out.insert(out.end(), fragment.begin(), fragment.end());
  if (crc_trailer) append_u32(out, *crc_trailer);
  return out;
}

GseParse parse_gse_header(std::span<const std::uint8_t> data) {
  if (data.size() < gse_min_header_bytes)
    throw InputSizeError("gse header needs 2 bytes, got " +
                         std::to_string(data.size()));
  GseParse r;
  if (data[0] == 0x00 && data[1] == 0x00) {
    r.status = GseStatus::padding;
    return r;
  }
  const bool s = (data[0] & 0x80) != 0;
  const bool e = (data[0] & 0x40) != 0;
  const std::uint8_t lt = (data[0] >> 4) & 3;
  const std::uint16_t length =
      std::uint16_t(((data[0] & 0x0F) << 8) | data[1]);

  const auto header_len = gse_header_bytes_for(s, e, lt);
  if (!header_len) return r;
  const std::size_t after_two = *header_len - 2;
  const std::size_t trailer = (!s && e) ? 4 : 0;
  if (length < after_two + trailer) return r;
  if (data.size() < *header_len) return r;

  r.header.s = s;
  r.header.e = e;
  r.header.lt = lt;
  r.header.gse_length = length;
  std::size_t at = 2;
  if (!(s && e)) r.header.frag_id = data[at++];
  if (s && !e) {
    r.header.total_length = read_u16(data, at);
    at += 2;
  }
  if (s) {
    r.header.protocol_type = read_u16(data, at);
    at += 2;
    const std::size_t lab = gse_label_bytes(lt);
    r.header.label.assign(data.begin() + long(at), data.begin() + long(at + lab));
    at += lab;
  }
  r.status = GseStatus::ok;
  r.consumed = at;
  return r;
}

std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header_bytes) {
  if (header_bytes.size() % 2 != 0)
    throw InputSizeError("ipv4 checksum input must have even length");
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i < header_bytes.size(); i += 2)
    sum += read_u16(header_bytes, i);
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return std::uint16_t(~sum & 0xFFFF);
}

Bytes encode_ip_header(const IpHeader& header) {
  if (header.version != 4 || header.ihl != 5)
    throw ConsistencyError("ip encoder emits version 4, ihl 5 only");
  Bytes out(ip_header_bytes, 0);
  std::span<std::uint8_t> s(out);
  out[0] = std::uint8_t((header.version << 4) | header.ihl);
  out[1] = header.tos;
  write_u16(s, 2, header.total_length);
  write_u16(s, 4, header.identification);
  write_u16(s, 6, header.flags_fragment);
  out[8] = header.ttl;
  out[9] = header.protocol;
  write_u16(s, 10, 0);
  write_u32(s, 12, header.src);
  write_u32(s, 16, header.dst);
  write_u16(s, 10, ipv4_checksum(out));
  return out;
}

IpParse parse_ip_header(std::span<const std::uint8_t> data) {
  if (data.size() < ip_header_bytes)
    throw InputSizeError("ip header needs 20 bytes, got " +
                         std::to_string(data.size()));
  IpParse r;
  r.header.version = data[0] >> 4;
  r.header.ihl = data[0] & 0x0F;
  r.header.tos = data[1];
  r.header.total_length = read_u16(data, 2);
  r.header.identification = read_u16(data, 4);
  r.header.flags_fragment = read_u16(data, 6);
  r.header.ttl = data[8];
  r.header.protocol = data[9];
  r.header.header_checksum = read_u16(data, 10);
  r.header.src = read_u32(data, 12);
  r.header.dst = read_u32(data, 16);
  const std::size_t hl = std::size_t(r.header.ihl) * 4;
  r.checksum_ok = r.header.ihl >= 5 && hl <= data.size() &&
                  ipv4_checksum(data.first(hl)) == 0;
  return r;
}

}  // namespace clx
