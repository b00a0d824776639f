#pragma once

#include <string>

#include "clx/nn.hpp"

namespace clx {

// Checkpoint wire format, little-endian throughout:
//   magic "CLXT", format version u32,
//   config: T, C, L, K, D as u32, dilation count u32, dilations u32 each,
//   then one record per tensor: rank u32, dims u32[rank], row-major
//   IEEE-754 binary32 values.
// An encoder file holds w_in{C,1}, b_in{C}, per layer w{K,C,C}, b{C},
// w_out{D,C}, b_out{D}. A classifier file holds the trunk tensors (the
// output affine is not part of the classifier) followed by w1{H,C},
// b1{H}, w2{1,H}, b2{1}. The kind is recovered from the tensor count.
inline constexpr std::uint32_t checkpoint_version = 1;

enum class CheckpointKind { encoder, classifier };

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::encoder;
  EncoderParams encoder;        // valid when kind == encoder
  ClassifierParams classifier;  // valid when kind == classifier
};

void save_encoder(const std::string& path, const EncoderParams& params);
void save_classifier(const std::string& path, const ClassifierParams& params);
Checkpoint load_checkpoint(const std::string& path);

// Loads and requires a classifier (scan needs the head).
ClassifierParams load_classifier(const std::string& path);

}  // namespace clx
