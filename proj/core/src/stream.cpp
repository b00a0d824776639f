#include "clx/stream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "clx/error.hpp"
#include "clx/rng.hpp"

namespace clx {

const char* layer_name(Layer layer) {
  switch (layer) {
    case Layer::bb: return "BB";
    case Layer::gse: return "GSE";
    default: return "IP";
  }
}

std::optional<Layer> layer_from_name(const std::string& name) {
  if (name == "BB" || name == "bb") return Layer::bb;
  if (name == "GSE" || name == "gse") return Layer::gse;
  if (name == "IP" || name == "ip") return Layer::ip;
  return std::nullopt;
}

void validate(const TrafficSpec& spec) {
  if (spec.pdu_len_range.first < ip_header_bytes)
    throw ConfigError("pdu length minimum must be at least 20 bytes");
  if (spec.pdu_len_range.second < spec.pdu_len_range.first)
    throw ConfigError("pdu length range inverted");
  if (spec.pdu_len_range.second > 65535)
    throw ConfigError("pdu length maximum must stay below 65536");
  if (spec.protocol_mix.empty())
    throw ConfigError("protocol mix must not be empty");
  for (const auto& [code, weight] : spec.protocol_mix)
    if (!(weight > 0.0) || !std::isfinite(weight))
      throw ConfigError("protocol weight for code " + std::to_string(code) +
                        " must be positive and finite");
  if (spec.max_fragment < 1 || spec.max_fragment > 4090)
    throw ConfigError("max_fragment must lie in [1, 4090]");
  if (spec.frame_capacity_bits == 0 || spec.frame_capacity_bits % 8 != 0)
    throw ConfigError("frame capacity must be a positive multiple of 8 bits");
  if (spec.frame_capacity_bits > bb_max_dfl_bits)
    throw ConfigError("frame capacity exceeds the 58112-bit data field limit");
}

std::vector<Pdu> generate_pdus(const TrafficSpec& spec) {
  validate(spec);
  const std::uint64_t base = rng::derive(spec.seed, "pdus");
  double total_weight = 0.0;
  for (const auto& [code, weight] : spec.protocol_mix) total_weight += weight;

  std::vector<Pdu> pdus;
  pdus.reserve(spec.n_pdus);
  const auto [len_min, len_max] = spec.pdu_len_range;
  for (std::uint64_t id = 0; id < spec.n_pdus; ++id) {
    const std::uint64_t pseed = rng::mix(base, id);
    rng::Sequence seq(pseed);
    const std::size_t len = len_min + std::size_t(seq.below(len_max - len_min + 1));

    double pick = seq.uniform() * total_weight;
    std::uint8_t protocol = spec.protocol_mix.back().first;
    for (const auto& [code, weight] : spec.protocol_mix) {
      if (pick < weight) {
        protocol = code;
        break;
      }
      pick -= weight;
    }

    IpHeader h;
    h.total_length = std::uint16_t(len);
    h.identification = std::uint16_t(id & 0xFFFF);
    h.ttl = 64;
    h.protocol = protocol;
    h.src = std::uint32_t(seq.bits());
    h.dst = std::uint32_t(seq.bits());

    Pdu pdu;
    pdu.id = id;
    pdu.bytes = encode_ip_header(h);
    pdu.bytes.reserve(len);
    for (std::size_t i = ip_header_bytes; i < len; ++i)
      pdu.bytes.push_back(std::uint8_t(seq.bits() & 0xFF));
    pdus.push_back(std::move(pdu));
  }
  return pdus;
}

std::vector<GseFragment> fragment_pdu(const Pdu& pdu, std::size_t max_fragment,
                                      std::uint8_t frag_id) {
  if (max_fragment < 1) throw ConfigError("max_fragment must be positive");
  const std::size_t total = pdu.bytes.size();
  std::vector<GseFragment> out;

  if (total <= max_fragment) {
    GseFragment f;
    f.header.s = true;
    f.header.e = true;
    f.header.lt = 2;
    f.header.protocol_type = 0x0800;
    f.header.gse_length = std::uint16_t(2 + total);
    f.payload = pdu.bytes;
    out.push_back(std::move(f));
    return out;
  }

  const std::uint32_t crc = crc32_pdu(pdu.bytes);
  std::size_t at = 0;
  while (at < total) {
    const std::size_t take = std::min(max_fragment, total - at);
    GseFragment f;
    f.header.s = at == 0;
    f.header.e = at + take == total;
    f.header.lt = f.header.s ? 2 : 3;
    f.header.frag_id = frag_id;
    if (f.header.s) {
      f.header.total_length = std::uint16_t(total);
      f.header.protocol_type = 0x0800;
      f.header.gse_length = std::uint16_t(5 + take);
    } else if (f.header.e) {
      f.header.gse_length = std::uint16_t(1 + take + 4);
      f.crc_trailer = crc;
    } else {
      f.header.gse_length = std::uint16_t(1 + take);
    }
    f.payload.assign(pdu.bytes.begin() + long(at),
                     pdu.bytes.begin() + long(at + take));
    out.push_back(std::move(f));
    at += take;
  }
  return out;
}

AnnotatedStream build_stream(const TrafficSpec& spec) {
  validate(spec);
  const std::size_t capacity = spec.frame_capacity_bits / 8;

  AnnotatedStream stream;
  stream.meta = spec;

  Bytes field;            // data field of the frame being packed
  std::vector<Annotation> field_ann;  // offsets relative to the field
  std::uint16_t syncd = 0xFFFF;       // bit offset of first PDU start, 0xFFFF if none

  auto flush_frame = [&]() {
    const auto header =
        make_bb_header(0x7000, 0, std::uint16_t(8 * field.size()), 0x00, syncd);
    const std::uint64_t frame_at = stream.bytes.size();
    const Bytes frame = encode_bb_frame(header, field);
    stream.bytes.insert(stream.bytes.end(), frame.begin(), frame.end());
    stream.bytes.resize(stream.bytes.size() + (capacity - field.size()), 0x00);
    stream.annotations.push_back(
        {frame_at, Layer::bb, std::uint32_t(bb_header_bytes), std::nullopt});
    for (Annotation a : field_ann) {
      a.offset_bytes += frame_at + bb_header_bytes;
      stream.annotations.push_back(a);
    }
    field.clear();
    field_ann.clear();
    syncd = 0xFFFF;
  };

  for (const Pdu& pdu : generate_pdus(spec)) {
    for (const GseFragment& f : fragment_pdu(pdu, spec.max_fragment,
                                             std::uint8_t(pdu.id & 0xFF))) {
      const Bytes packet = encode_gse_packet(f.header, f.payload, f.crc_trailer);
      if (packet.size() > capacity)
        throw ConfigError("gse packet of " + std::to_string(packet.size()) +
                          " bytes exceeds frame capacity of " +
                          std::to_string(capacity));
      if (field.size() + packet.size() > capacity) flush_frame();

      const std::uint64_t at = field.size();
      const std::size_t header_len = packet.size() - f.payload.size() -
                                     (f.crc_trailer ? 4 : 0);
      field_ann.push_back(
          {at, Layer::gse, std::uint32_t(header_len), pdu.id});
      if (f.header.s) {
        field_ann.push_back({at + header_len, Layer::ip,
                             std::uint32_t(ip_header_bytes), pdu.id});
        if (syncd == 0xFFFF) syncd = std::uint16_t(8 * at);
      }
      field.insert(field.end(), packet.begin(), packet.end());
    }
  }
  if (!field.empty()) flush_frame();
  return stream;
}

AnnotatedStream truncate_stream(const AnnotatedStream& stream,
                                std::uint64_t start_offset) {
  if (start_offset >= stream.bytes.size())
    throw ConfigError("truncate offset " + std::to_string(start_offset) +
                      " out of range for " +
                      std::to_string(stream.bytes.size()) + " bytes");
  AnnotatedStream out;
  out.meta = stream.meta;
  out.bytes.assign(stream.bytes.begin() + long(start_offset),
                   stream.bytes.end());
  for (Annotation a : stream.annotations) {
    if (a.offset_bytes < start_offset) continue;
    a.offset_bytes -= start_offset;
    out.annotations.push_back(a);
  }
  return out;
}

std::vector<Annotation> annotations_of(const std::vector<Annotation>& all,
                                       Layer layer) {
  std::vector<Annotation> out;
  for (const Annotation& a : all)
    if (a.layer == layer) out.push_back(a);
  return out;
}

void save_bytes(const std::string& path, const Bytes& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          std::streamsize(bytes.size()));
  if (!f) throw IoError("short write to " + path);
}

Bytes load_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  Bytes bytes((std::istreambuf_iterator<char>(f)),
              std::istreambuf_iterator<char>());
  return bytes;
}

void save_annotations(const std::string& path,
                      const std::vector<Annotation>& annotations) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  for (const Annotation& a : annotations) {
    nlohmann::json j;
    j["offset_bytes"] = a.offset_bytes;
    j["layer"] = layer_name(a.layer);
    j["length_bytes"] = a.length_bytes;
    if (a.pdu_id)
      j["pdu_id"] = *a.pdu_id;
    else
      j["pdu_id"] = nullptr;
    f << j.dump() << '\n';
  }
  if (!f) throw IoError("short write to " + path);
}

std::vector<Annotation> load_annotations(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::vector<Annotation> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Annotation a;
    a.offset_bytes = j.at("offset_bytes").get<std::uint64_t>();
    const auto layer = layer_from_name(j.at("layer").get<std::string>());
    if (!layer) throw IoError("unknown layer in " + path + ": " + line);
    a.layer = *layer;
    a.length_bytes = j.at("length_bytes").get<std::uint32_t>();
    if (!j.at("pdu_id").is_null())
      a.pdu_id = j.at("pdu_id").get<std::uint64_t>();
    out.push_back(a);
  }
  return out;
}

}  // namespace clx
