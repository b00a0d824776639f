#include "clx/fsm_decode.hpp"

#include <chrono>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "clx/crc.hpp"
#include "clx/error.hpp"

namespace clx {

std::optional<std::uint64_t> resync_scan(std::span<const std::uint8_t> data,
                                         std::uint64_t from) {
  if (from > data.size())
    throw InputSizeError("resync offset past end of data");
  if (data.size() < bb_header_bytes) return std::nullopt;
  for (std::uint64_t off = from; off + bb_header_bytes <= data.size(); ++off) {
    const auto w = data.subspan(off, bb_header_bytes);
    if (crc8(w.first(9)) != w[9]) continue;
    const std::uint16_t dfl = read_u16(w, 4);
    if (dfl == 0 || dfl > bb_max_dfl_bits) continue;
    return off;
  }
  return std::nullopt;
}

namespace {

// Open reassembly buffer for one fragmented PDU.
struct Assembly {
  Bytes bytes;
  std::uint64_t start_offset = 0;
  std::uint16_t total_length = 0;
};

}  // namespace

DecodeReport fsm_decode(std::span<const std::uint8_t> data) {
  const auto t0 = std::chrono::steady_clock::now();
  DecodeReport report;
  report.bytes_scanned = data.size();
  std::unordered_map<std::uint8_t, Assembly> open;

  // Structural gate for PDUs that carry no CRC trailer.
  auto ip_plausible = [](std::span<const std::uint8_t> p) {
    return p.size() >= ip_header_bytes && (p[0] >> 4) == 4 &&
           (p[0] & 0x0F) == 5;
  };

  std::uint64_t pos = 0;
  for (;;) {
    // Padding is all-zero and no header in this profile starts with 0x00,
    // so zero bytes ahead of the cursor can never open a frame.
    while (pos < data.size() && data[pos] == 0x00) ++pos;
    const auto found = resync_scan(data, pos);
    if (!found) break;
    const std::uint64_t frame_at = *found;
    const auto bb = parse_bb_header(data.subspan(frame_at, bb_header_bytes));
    const std::uint64_t df_bytes = (std::uint64_t(bb.header.dfl) + 7) / 8;
    const std::uint64_t df_at = frame_at + bb_header_bytes;
    if (df_at + df_bytes > data.size()) {
      pos = frame_at + 1;  // truncated frame
      continue;
    }
    report.bb_offsets.push_back(frame_at);

    // Chain gse_length through the data field; stop cleanly at padding.
    std::uint64_t at = df_at;
    const std::uint64_t df_end = df_at + df_bytes;
    bool failed = false;
    while (at < df_end) {
      if (df_end - at == 1) {
        if (data[at] == 0x00) break;
        failed = true;
        break;
      }
      const auto parsed = parse_gse_header(data.subspan(at, df_end - at));
      if (parsed.status == GseStatus::padding) break;
      if (parsed.status == GseStatus::malformed) {
        failed = true;
        break;
      }
      const GseHeader& h = parsed.header;
      const std::uint64_t packet_end = at + 2 + h.gse_length;
      if (packet_end > df_end) {
        failed = true;
        break;
      }
      report.gse_offsets.push_back(at);

      const std::uint64_t payload_at = at + parsed.consumed;
      const bool has_trailer = !h.s && h.e;
      const std::uint64_t payload_end = packet_end - (has_trailer ? 4 : 0);
      const auto payload = data.subspan(payload_at, payload_end - payload_at);

      if (h.s && h.e) {
        if (ip_plausible(payload) &&
            read_u16(payload, 2) == payload.size()) {
          report.ip_offsets.push_back(payload_at);
          report.pdus.push_back({payload_at, Bytes(payload.begin(), payload.end())});
        }
      } else if (h.s) {
        Assembly a;
        a.bytes.assign(payload.begin(), payload.end());
        a.start_offset = payload_at;
        a.total_length = *h.total_length;
        if (ip_plausible(payload) && read_u16(payload, 2) == a.total_length)
          report.ip_offsets.push_back(payload_at);
        open[*h.frag_id] = std::move(a);
      } else {
        auto it = open.find(*h.frag_id);
        if (it != open.end()) {
          it->second.bytes.insert(it->second.bytes.end(), payload.begin(),
                                  payload.end());
          if (h.e) {
            const std::uint32_t want = read_u32(data, payload_end);
            if (crc32(it->second.bytes) == want) {
              report.pdus.push_back(
                  {it->second.start_offset, std::move(it->second.bytes)});
            } else {
              ++report.crc_failures;
            }
            open.erase(it);
          }
        }
      }
      at = packet_end;
    }

    pos = failed ? at + 1 : df_end;
  }

  report.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

void save_report(const std::string& path, const DecodeReport& report,
                 bool canonical) {
  nlohmann::json j;
  j["bb_found"] = report.bb_offsets.size();
  j["gse_found"] = report.gse_offsets.size();
  j["ip_found"] = report.ip_offsets.size();
  j["bb_offsets"] = report.bb_offsets;
  j["gse_offsets"] = report.gse_offsets;
  j["ip_offsets"] = report.ip_offsets;
  j["pdus_recovered"] = report.pdus.size();
  nlohmann::json pdus = nlohmann::json::array();
  for (const RecoveredPdu& p : report.pdus)
    pdus.push_back({{"offset_bytes", p.offset_bytes}, {"length", p.bytes.size()}});
  j["pdus"] = pdus;
  j["crc_failures"] = report.crc_failures;
  j["bytes_scanned"] = report.bytes_scanned;
  j["elapsed_s"] = canonical ? 0.0 : report.elapsed_s;

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw IoError("short write to " + path);
}

}  // namespace clx
