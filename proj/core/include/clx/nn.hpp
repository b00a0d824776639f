#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "clx/stream.hpp"

namespace clx {

// Header window lengths in bits: the maximum header size of each layer.
std::size_t window_bits_for(Layer layer);

// Shape of the encoder: per-position lift 1→C, L dilated convolution
// layers (kernel K, residual add, ReLU), per-position affine C→D, mean
// pool over the T positions.
struct EncoderConfig {
  std::size_t T = 80;
  std::size_t C = 64;
  std::size_t L = 10;
  std::size_t K = 3;
  std::size_t D = 64;
  std::vector<std::size_t> dilations;  // empty means 2^l for l = 0..L-1

  static EncoderConfig for_layer(Layer layer);

  // Fills default dilations and checks all dimensions; K must be odd so
  // "same" zero padding is symmetric, T a positive multiple of 8 so
  // windows are byte-aligned in the stream.
  void finalize();
  bool operator==(const EncoderConfig&) const = default;
};

// All encoder parameters in one flat buffer, sliced by the accessors.
// Memory layout per tensor, in order:
//   w_in[C], b_in[C],
//   for each layer l: w_conv[l][K][C_out][C_in], b_conv[l][C],
//   w_out[D][C], b_out[D].
struct EncoderParams {
  EncoderConfig cfg;
  std::vector<double> p;

  std::span<double> w_in();
  std::span<double> b_in();
  std::span<double> w_conv(std::size_t l);
  std::span<double> b_conv(std::size_t l);
  std::span<double> w_out();
  std::span<double> b_out();
  std::span<const double> w_in() const;
  std::span<const double> b_in() const;
  std::span<const double> w_conv(std::size_t l) const;
  std::span<const double> b_conv(std::size_t l) const;
  std::span<const double> w_out() const;
  std::span<const double> b_out() const;
};

std::size_t encoder_param_count(const EncoderConfig& cfg);

// He-style uniform fan-in initialization, fully seeded. Conv tensors are
// scaled down by 1/sqrt(2L) for residual depth; b_out is set so the mean
// embedding of seeded probe windows starts at the origin (fresh pooled
// features share a large offset that otherwise swamps the contrastive
// signal). All other biases start at zero.
EncoderParams init_encoder(EncoderConfig cfg, std::uint64_t seed);

// A fixed-length bit window with optional provenance.
struct Window {
  std::vector<std::uint8_t> bits;  // values in {0,1}, length T
  std::optional<std::pair<std::uint64_t, Layer>> origin;
};

// Raw T bits starting at a byte offset of the stream.
Window window_from_stream(std::span<const std::uint8_t> bytes,
                          std::uint64_t offset_bytes, std::size_t t_bits);

// A header shorter than T bits, zero-padded up to T: the canonical
// embedding of an isolated header.
Window window_from_header(std::span<const std::uint8_t> header_bytes,
                          std::size_t t_bits);

// Intermediate activations kept for the backward pass: L+1 slabs of
// [T][C], slab 0 after the input lift, slab l after conv layer l.
struct EncoderTrace {
  std::vector<double> h;
};

// Input lift + conv stack. hbar receives the C-dim mean over positions of
// the last slab; trace may be null when no backward pass will follow.
void trunk_forward(const EncoderParams& params, const std::uint8_t* bits,
                   EncoderTrace* trace, double* hbar);

// Accumulates d(loss)/d(trunk params) into grad given d(loss)/d(hbar).
void trunk_backward(const EncoderParams& params, const std::uint8_t* bits,
                    const EncoderTrace& trace, const double* g_hbar,
                    std::span<double> grad);

// Full encoder: z = w_out · hbar + b_out, the D-dim representation.
std::vector<double> encoder_forward(const EncoderParams& params,
                                    const Window& w);

// Mean-pooled conv-stack features (C dims): the classifier head's input.
std::vector<double> trunk_pooled(const EncoderParams& params, const Window& w);

// a·b / (|a||b|); defined as 0 for a zero-norm operand (warned once).
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Normalized temperature-scaled cross entropy over 2N vectors where
// (2i, 2i+1) are the positive pairs: mean over both orders of every pair
// of -s(i,j)/tau + logsumexp_{k != i} s(i,k)/tau.
double ntxent_loss(const std::vector<std::vector<double>>& z, double tau);

struct GradResult {
  std::vector<double> grad;
  double loss = 0.0;
};

// Loss and exact gradient over every encoder parameter for a 2N-view
// batch. Batch evaluation is chunk-parallel with a fixed reduction order,
// so results do not depend on the worker count.
GradResult ntxent_gradients(const EncoderParams& params,
                            const std::vector<Window>& views, double tau);

// Frozen trunk plus a two-layer head: pooled C → hidden → 1 logit.
// Head memory layout: w1[H][C], b1[H], w2[H], b2[1].
struct ClassifierParams {
  EncoderParams trunk;
  std::size_t hidden = 64;
  std::vector<double> head;

  std::span<double> w1();
  std::span<double> b1();
  std::span<double> w2();
  std::span<double> b2();
  std::span<const double> w1() const;
  std::span<const double> b1() const;
  std::span<const double> w2() const;
  std::span<const double> b2() const;
};

std::size_t head_param_count(const ClassifierParams& c);

ClassifierParams init_classifier(EncoderParams trunk, std::size_t hidden,
                                 std::uint64_t seed);

// Probability that the window starts a header of the trunk's layer.
double classifier_forward(const ClassifierParams& params, const Window& w);

// Binary cross entropy over the batch; the returned gradient spans the
// whole parameter set (trunk ‖ head) with the frozen trunk portion
// identically zero, honoring the fine-tune freeze contract.
GradResult bce_gradients(const ClassifierParams& params,
                         const std::vector<Window>& windows,
                         const std::vector<int>& labels);

// Adam with beta1=0.9, beta2=0.999, eps=1e-8. Rejects non-finite
// gradients with a training error.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr);

}  // namespace clx
