#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clx/protocol.hpp"

namespace clx {

enum class Layer { bb, gse, ip };

const char* layer_name(Layer layer);
std::optional<Layer> layer_from_name(const std::string& name);

// Generator knobs. Lengths are bytes, frame capacity is bits; capacity must
// be byte-aligned. Every frame occupies header + capacity bytes on the
// wire: dfl counts the packed content bits and zero padding fills the rest.
struct TrafficSpec {
  std::uint64_t n_pdus = 1000;
  std::pair<std::size_t, std::size_t> pdu_len_range{40, 120};
  std::vector<std::pair<std::uint8_t, double>> protocol_mix{
      {proto_tcp, 1.0}, {proto_udp, 1.0}, {proto_icmp, 1.0}};
  std::size_t max_fragment = 64;
  std::uint32_t frame_capacity_bits = 1024;
  std::uint64_t seed = 0;

  bool operator==(const TrafficSpec&) const = default;
};

// Throws a configuration error when any invariant fails: positive finite
// weights, pdu lengths in [20, 65535], capacity byte-aligned and at most
// bb_max_dfl_bits, max_fragment in [1, 4090] so gse_length fits 12 bits.
void validate(const TrafficSpec& spec);

struct Annotation {
  std::uint64_t offset_bytes = 0;
  Layer layer = Layer::bb;
  std::uint32_t length_bytes = 0;
  std::optional<std::uint64_t> pdu_id;

  bool operator==(const Annotation&) const = default;
};

struct AnnotatedStream {
  Bytes bytes;
  std::vector<Annotation> annotations;
  TrafficSpec meta;
};

// One encapsulation packet of a fragmented PDU, ready for encoding.
struct GseFragment {
  GseHeader header;
  Bytes payload;
  std::optional<std::uint32_t> crc_trailer;
};

// Deterministic PDU synthesis: IPv4 header (ihl=5) with protocol drawn
// from the weighted mix, uniform random payload, sequential ids from 0.
std::vector<Pdu> generate_pdus(const TrafficSpec& spec);

// Splits a PDU into payload slots of at most max_fragment bytes. A single
// slot yields s=1,e=1 and no trailer; otherwise the start packet carries
// total_length and the end packet a CRC-32 over the whole PDU.
std::vector<GseFragment> fragment_pdu(const Pdu& pdu, std::size_t max_fragment,
                                      std::uint8_t frag_id);

// Packs encoded packets first-fit in order into fixed-capacity BB frames;
// a packet never straddles frames. Every BB, GSE, and IP header offset is
// annotated in stream order.
AnnotatedStream build_stream(const TrafficSpec& spec);

// Models eavesdropping that begins mid-stream: drops the first
// start_offset bytes and every annotation whose header starts before it.
AnnotatedStream truncate_stream(const AnnotatedStream& stream,
                                std::uint64_t start_offset);

// Filters one layer's annotations, preserving order.
std::vector<Annotation> annotations_of(const std::vector<Annotation>& all,
                                       Layer layer);

// Raw stream bytes on disk; annotations as line-delimited JSON records
// with fields offset_bytes, layer, length_bytes, pdu_id (nullable).
void save_bytes(const std::string& path, const Bytes& bytes);
Bytes load_bytes(const std::string& path);
void save_annotations(const std::string& path,
                      const std::vector<Annotation>& annotations);
std::vector<Annotation> load_annotations(const std::string& path);

}  // namespace clx
