#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clx/protocol.hpp"

namespace clx {

// What one decoder pass reports. Counts are the lengths of the offset
// lists; pdus carry the reassembled bytes at the offset where each PDU's
// first byte was read.
struct RecoveredPdu {
  std::uint64_t offset_bytes = 0;
  Bytes bytes;
};

struct DecodeReport {
  std::vector<std::uint64_t> bb_offsets;
  std::vector<std::uint64_t> gse_offsets;
  std::vector<std::uint64_t> ip_offsets;
  std::vector<RecoveredPdu> pdus;
  std::uint64_t crc_failures = 0;
  std::uint64_t bytes_scanned = 0;
  double elapsed_s = 0.0;
};

// Finds the smallest offset at or after `from` whose 10-byte window passes
// the CRC-8 check and carries a plausible dfl (≤ 58112 bits). Empty when
// no window qualifies.
std::optional<std::uint64_t> resync_scan(std::span<const std::uint8_t> data,
                                         std::uint64_t from);

// Length-field-driven layer-by-layer decoding: locate a verified BB
// header, chain gse_length through the data field, reassemble fragments
// by frag_id, accept multi-fragment PDUs on a matching CRC-32 trailer and
// single-fragment PDUs on IP structural validity. Any inconsistency
// abandons the frame and resynchronizes at the failure offset plus one.
// Always returns a report; never throws on content.
DecodeReport fsm_decode(std::span<const std::uint8_t> data);

// Report as a structured plain-text document. canonical=true writes the
// elapsed field as zero so identical inputs produce identical files.
void save_report(const std::string& path, const DecodeReport& report,
                 bool canonical = false);

}  // namespace clx
