#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clx/bits.hpp"
#include "clx/nn.hpp"
#include "clx/stream.hpp"

namespace clx {

// Classifier-driven recovery: slide the per-layer models over a corrupted
// stream, segment BB frames, locate GSE and IP headers, assemble PDUs by
// adjacency, and repair the IP protocol field by Hamming distance.

struct ScanConfig {
  std::size_t stride = 1;     // bytes between candidate offsets
  double threshold = 0.5;     // decision probability
  // Non-maximum suppression radius in bytes; empty means the minimum
  // on-wire spacing of two same-layer headers (BB 10, GSE 4, IP 20).
  std::optional<std::size_t> suppress_radius;

  void validate() const;
};

struct HeaderDetection {
  std::uint64_t offset_bytes = 0;
  Layer layer = Layer::bb;
  double score = 0.0;                  // >= threshold by construction
  std::vector<std::string> corrected;  // names of repaired fields
};

// Scores every stride-spaced offset in [region_begin, region_end) whose
// window fits in `data`, keeps scores >= threshold, and suppresses all but
// the best detection within the radius. Result is sorted by offset and
// strictly increasing. Throws on a checkpoint/layer window-length mismatch
// or a region outside the data.
std::vector<HeaderDetection> scan_layer(const ClassifierParams& model,
                                        Layer layer,
                                        std::span<const std::uint8_t> data,
                                        std::uint64_t region_begin,
                                        std::uint64_t region_end,
                                        const ScanConfig& cfg = {});

struct FrameRegion {
  std::uint64_t begin = 0;  // first data-field byte
  std::uint64_t end = 0;    // one past the last
};

// Region i spans (detection_i offset + 10, detection_{i+1} offset); the
// trailing region runs to the stream end. No detections yields one region
// covering the whole stream so the GSE scan is still attempted.
std::vector<FrameRegion> segment_bb_frames(
    const std::vector<HeaderDetection>& bb_detections,
    std::uint64_t data_size);

// argmin over valid_codes of bit-level Hamming distance to the observed
// protocol byte; ties break toward the smallest code. Throws ConfigError
// on an empty code set.
struct ProtocolCorrection {
  std::uint8_t code = 0;
  unsigned distance = 0;
};
ProtocolCorrection correct_protocol_field(
    std::uint8_t observed, const std::vector<std::uint8_t>& valid_codes);

struct ExtractedPdu {
  std::uint64_t offset_bytes = 0;      // stream offset of the IP header
  Bytes bytes;
  bool truncated = false;              // stated length ran past the data
  std::vector<std::string> corrected;  // e.g. "protocol"
};

// One PDU per IP detection: its extent runs from the IP offset to the next
// GSE or BB detection boundary, concatenating the payloads of subsequent
// GSE detections that contain no IP detection (reassembly by adjacency;
// fragment ids are untrusted under corruption). The assembled bytes are
// trimmed to the IP total-length field when that is plausible, and the
// protocol byte is repaired against valid_codes. Best effort, never throws
// on stream content.
std::vector<ExtractedPdu> extract_pdus(
    const std::vector<HeaderDetection>& gse_detections,
    const std::vector<HeaderDetection>& ip_detections,
    const std::vector<HeaderDetection>& bb_detections,
    std::span<const std::uint8_t> data,
    const std::vector<std::uint8_t>& valid_codes);

// Line-delimited JSON records: offset_bytes, layer, score, corrected.
void save_detections(const std::string& path,
                     const std::vector<HeaderDetection>& detections);
std::vector<HeaderDetection> load_detections(const std::string& path);

// Concatenated length-prefixed records (u32 LE length, then the bytes).
void save_pdus(const std::string& path,
               const std::vector<ExtractedPdu>& pdus);

}  // namespace clx
