#include "clx/recover.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <set>

#include <json.hpp>

#include "clx/error.hpp"
#include "clx/protocol.hpp"

namespace clx {

void ScanConfig::validate() const {
  if (stride < 1) throw ConfigError("scan stride must be at least 1");
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw ConfigError("scan threshold must lie in (0,1)");
}

namespace {

// Default suppression radius: the minimum on-wire spacing between two
// valid same-layer headers. Two GSE headers can sit four bytes apart (a
// three-byte continuation header plus one payload byte), so the radius
// must not reach that far.
std::size_t default_radius_for(Layer layer) {
  switch (layer) {
    case Layer::bb: return bb_header_bytes;
    case Layer::gse: return 4;
    case Layer::ip: return ip_header_bytes;
  }
  return bb_header_bytes;
}

}  // namespace

std::vector<HeaderDetection> scan_layer(const ClassifierParams& model,
                                        Layer layer,
                                        std::span<const std::uint8_t> data,
                                        std::uint64_t region_begin,
                                        std::uint64_t region_end,
                                        const ScanConfig& cfg) {
  cfg.validate();
  const std::size_t t_bits = window_bits_for(layer);
  if (model.trunk.cfg.T != t_bits)
    throw ConfigError("checkpoint window length " +
                      std::to_string(model.trunk.cfg.T) + " does not match " +
                      layer_name(layer) + " window length " +
                      std::to_string(t_bits));
  if (region_begin > region_end || region_end > data.size())
    throw InputSizeError("scan region outside the data");

  const std::size_t t_bytes = t_bits / 8;
  std::vector<std::uint64_t> candidates;
  for (std::uint64_t off = region_begin; off < region_end; off += cfg.stride) {
    if (off + t_bytes > data.size()) break;
    candidates.push_back(off);
  }

  std::vector<double> scores(candidates.size());
#pragma omp parallel
  {
    Window w;
    w.bits.resize(t_bits);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(candidates.size()); ++i) {
      const std::uint64_t base = candidates[std::size_t(i)] * 8;
      for (std::size_t b = 0; b < t_bits; ++b)
        w.bits[b] = std::uint8_t(get_bit(data, base + b));
      scores[std::size_t(i)] = classifier_forward(model, w);
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (scores[i] >= cfg.threshold) kept.push_back(i);

  // Greedy non-maximum suppression, best score first; equal scores keep
  // the earlier offset.
  const std::uint64_t radius = cfg.suppress_radius.value_or(
      default_radius_for(layer));
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  std::set<std::uint64_t> accepted;
  for (std::size_t i : kept) {
    const std::uint64_t off = candidates[i];
    auto it = accepted.lower_bound(off);
    const bool blocked =
        (it != accepted.end() && *it - off < radius) ||
        (it != accepted.begin() && off - *std::prev(it) < radius);
    if (!blocked) accepted.insert(off);
  }

  std::vector<std::pair<std::uint64_t, double>> by_offset;
  for (std::size_t i : kept)
    if (accepted.count(candidates[i]))
      by_offset.emplace_back(candidates[i], scores[i]);
  std::sort(by_offset.begin(), by_offset.end());

  std::vector<HeaderDetection> result;
  result.reserve(by_offset.size());
  for (const auto& [off, score] : by_offset)
    result.push_back({off, layer, score, {}});
  return result;
}

std::vector<FrameRegion> segment_bb_frames(
    const std::vector<HeaderDetection>& bb_detections,
    std::uint64_t data_size) {
  std::vector<FrameRegion> regions;
  if (bb_detections.empty()) {
    regions.push_back({0, data_size});
    return regions;
  }
  for (std::size_t i = 0; i < bb_detections.size(); ++i) {
    const std::uint64_t end = i + 1 < bb_detections.size()
                                  ? bb_detections[i + 1].offset_bytes
                                  : data_size;
    const std::uint64_t begin =
        std::min<std::uint64_t>(bb_detections[i].offset_bytes + bb_header_bytes,
                                end);
    regions.push_back({std::min(begin, data_size), std::min(end, data_size)});
  }
  return regions;
}

ProtocolCorrection correct_protocol_field(
    std::uint8_t observed, const std::vector<std::uint8_t>& valid_codes) {
  if (valid_codes.empty())
    throw ConfigError("protocol correction needs a non-empty code set");
  ProtocolCorrection best{0, 9};
  for (std::uint8_t code : valid_codes) {
    const unsigned d = unsigned(std::popcount(std::uint8_t(observed ^ code)));
    if (d < best.distance || (d == best.distance && code < best.code))
      best = {code, d};
  }
  return best;
}

std::vector<ExtractedPdu> extract_pdus(
    const std::vector<HeaderDetection>& gse_detections,
    const std::vector<HeaderDetection>& ip_detections,
    const std::vector<HeaderDetection>& bb_detections,
    std::span<const std::uint8_t> data,
    const std::vector<std::uint8_t>& valid_codes) {
  std::vector<std::uint64_t> gse_offsets;
  for (const HeaderDetection& d : gse_detections)
    gse_offsets.push_back(d.offset_bytes);
  std::vector<std::uint64_t> ip_offsets;
  for (const HeaderDetection& d : ip_detections)
    ip_offsets.push_back(d.offset_bytes);

  // Segment boundaries: every detected GSE or BB header start, plus the
  // stream end.
  std::vector<std::uint64_t> boundaries = gse_offsets;
  for (const HeaderDetection& d : bb_detections)
    boundaries.push_back(d.offset_bytes);
  boundaries.push_back(data.size());
  std::sort(boundaries.begin(), boundaries.end());
  auto next_boundary = [&](std::uint64_t after) {
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), after);
    return it == boundaries.end() ? std::uint64_t(data.size()) : *it;
  };
  auto has_ip_in = [&](std::uint64_t begin, std::uint64_t end) {
    auto it = std::lower_bound(ip_offsets.begin(), ip_offsets.end(), begin);
    return it != ip_offsets.end() && *it < end;
  };
  // The GSE length field refines a segment end when it lands inside the
  // detection-boundary extent; outside that range it is treated as
  // corrupt and the boundary rules alone.
  auto claimed_end_at = [&](std::uint64_t g, std::uint64_t floor_off,
                            std::uint64_t cap) -> std::uint64_t {
    if (g + 2 > data.size()) return cap;
    const std::uint64_t end = g + 2 + (read_u16(data, g) & 0x0FFF);
    return end >= floor_off && end <= cap ? end : cap;
  };

  std::vector<ExtractedPdu> pdus;
  for (std::size_t ii = 0; ii < ip_detections.size(); ++ii) {
    const std::uint64_t ip_off = ip_detections[ii].offset_bytes;
    if (ip_off >= data.size()) continue;
    ExtractedPdu pdu;
    pdu.offset_bytes = ip_off;

    // First segment: from the IP header to the next boundary, tightened by
    // the containing GSE packet's stated length when one is detected.
    std::uint64_t seg_end = next_boundary(ip_off);
    {
      auto it = std::upper_bound(gse_offsets.begin(), gse_offsets.end(),
                                 ip_off);
      if (it != gse_offsets.begin()) {
        const std::uint64_t g = *std::prev(it);
        if (next_boundary(g) > ip_off)
          seg_end = claimed_end_at(g, ip_off, seg_end);
      }
    }
    pdu.bytes.assign(data.begin() + std::ptrdiff_t(ip_off),
                     data.begin() + std::ptrdiff_t(seg_end));

    const std::uint64_t claimed_total =
        pdu.bytes.size() >= 4 ? read_u16(pdu.bytes, 2) : 0;
    const std::uint64_t target = std::max<std::uint64_t>(claimed_total, 20);

    // Continuation fragments: subsequent GSE detections that contain no IP
    // detection contribute their payload (past the 3-byte fragment header)
    // until a new PDU starts or the stated length is satisfied.
    auto git = std::upper_bound(gse_offsets.begin(), gse_offsets.end(),
                                ip_off);
    while (pdu.bytes.size() < target && git != gse_offsets.end()) {
      const std::uint64_t g = *git++;
      const std::uint64_t bnext = next_boundary(g);
      if (has_ip_in(g, bnext)) break;
      const std::uint64_t cend = claimed_end_at(g, g + 3, bnext);
      if (g + 3 >= cend) continue;
      pdu.bytes.insert(pdu.bytes.end(), data.begin() + std::ptrdiff_t(g + 3),
                       data.begin() + std::ptrdiff_t(cend));
    }

    pdu.truncated = claimed_total > pdu.bytes.size() || pdu.bytes.size() < 20;
    const std::size_t final_len = std::min<std::uint64_t>(
        pdu.bytes.size(), std::max<std::uint64_t>(claimed_total, 20));
    pdu.bytes.resize(final_len);

    if (pdu.bytes.size() > 9) {
      const ProtocolCorrection fix =
          correct_protocol_field(pdu.bytes[9], valid_codes);
      if (fix.distance > 0) {
        pdu.bytes[9] = fix.code;
        pdu.corrected.push_back("protocol");
      }
    }
    pdus.push_back(std::move(pdu));
  }
  return pdus;
}

void save_detections(const std::string& path,
                     const std::vector<HeaderDetection>& detections) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  for (const HeaderDetection& d : detections) {
    nlohmann::json j;
    j["offset_bytes"] = d.offset_bytes;
    j["layer"] = layer_name(d.layer);
    j["score"] = d.score;
    j["corrected"] = d.corrected;
    f << j.dump() << '\n';
  }
  if (!f) throw IoError("short write to " + path);
}

std::vector<HeaderDetection> load_detections(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::vector<HeaderDetection> detections;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    HeaderDetection d;
    d.offset_bytes = j.at("offset_bytes").get<std::uint64_t>();
    const auto layer = layer_from_name(j.at("layer").get<std::string>());
    if (!layer) throw IoError("unknown layer name in " + path);
    d.layer = *layer;
    d.score = j.at("score").get<double>();
    d.corrected = j.at("corrected").get<std::vector<std::string>>();
    detections.push_back(std::move(d));
  }
  return detections;
}

void save_pdus(const std::string& path,
               const std::vector<ExtractedPdu>& pdus) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  for (const ExtractedPdu& p : pdus) {
    const std::uint32_t n = std::uint32_t(p.bytes.size());
    const std::uint8_t len[4] = {std::uint8_t(n & 0xFF),
                                 std::uint8_t((n >> 8) & 0xFF),
                                 std::uint8_t((n >> 16) & 0xFF),
                                 std::uint8_t(n >> 24)};
    f.write(reinterpret_cast<const char*>(len), 4);
    f.write(reinterpret_cast<const char*>(p.bytes.data()),
            std::streamsize(p.bytes.size()));
  }
  if (!f) throw IoError("short write to " + path);
}

}  // namespace clx
