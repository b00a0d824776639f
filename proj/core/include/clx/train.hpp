#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "clx/corruption.hpp"
#include "clx/nn.hpp"
#include "clx/stream.hpp"

namespace clx {

// Training knobs. batch_n is N, the number of instances per contrastive
// step (2N corrupted views) and the fine-tune minibatch size. The
// aug_gamma pair is the training-time corruption; zero disables
// augmentation entirely (the ablation arm).
struct TrainConfig {
  std::size_t batch_n = 256;
  double tau = 0.5;
  std::size_t pretrain_epochs = 100;
  std::size_t finetune_epochs = 20;
  double pretrain_lr = 1e-3;
  double finetune_lr = 1e-3;
  double aug_gamma1 = 0.10;
  double aug_gamma2 = 0.10;
  std::uint64_t seed = 0;

  // Architecture knobs forwarded to EncoderConfig (T comes from the data).
  std::size_t channels = 64;
  std::size_t conv_layers = 10;
  std::size_t kernel = 3;
  std::size_t out_dim = 64;
  std::size_t hidden = 64;

  void validate() const;
};

// Labeled windows of one layer; labels are implied by the container.
// Window origins carry the source byte offset so split disjointness by
// origin can be checked.
struct LabeledSet {
  std::vector<Window> positives;
  std::vector<Window> negatives;
};

struct LayerSets {
  LabeledSet train;
  LabeledSet test;
};

// Window datasets per layer, indexed by Layer enum order (bb, gse, ip).
// Positives are the raw T-bit stream windows at annotated header offsets
// (what the deployed scan sees); negatives are equal-count windows at
// sampled non-header offsets. Both classes are split 2/3 train, 1/3 test
// by origin offset. Fewer than 10 positives in a layer is an error.
std::array<LayerSets, 3> build_training_sets(
    const std::vector<AnnotatedStream>& streams, std::uint64_t split_seed);

// Two independently corrupted views of one window (distinct derived
// seeds), the 2N-view construction of contrastive pre-training.
std::pair<Window, Window> augment_pair(const Window& w, double gamma1,
                                       double gamma2, std::uint64_t seed);

struct LossEntry {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
};

struct PretrainResult {
  EncoderParams encoder;
  std::vector<LossEntry> log;
};

// Contrastive pre-training over positives only. Deterministic given
// (positives, cfg); epochs=0 returns the seeded initialization.
PretrainResult pretrain(const std::vector<Window>& positives,
                        const TrainConfig& cfg);

struct FinetuneResult {
  ClassifierParams classifier;
  std::vector<LossEntry> log;
};

// Freezes the trunk and trains the two-layer head with binary cross
// entropy. With augmentation on, each drawn window is presented clean or
// freshly corrupted (deterministic 50/50 per draw); with aug gammas at
// zero every window is clean. Requires both classes non-empty.
FinetuneResult finetune(const EncoderParams& encoder, const LabeledSet& data,
                        const TrainConfig& cfg);

// Accuracy and F1 of a trained classifier on a labeled set at 0.5.
struct EvalSummary {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

EvalSummary evaluate_classifier(const ClassifierParams& params,
                                const LabeledSet& data);

struct TrainAllResult {
  std::array<ClassifierParams, 3> models;  // bb, gse, ip
  std::array<EvalSummary, 3> held_out;
  std::array<std::string, 3> paths;
};

// Full per-layer pipeline: build sets, pretrain, finetune, evaluate on
// the held-out third, write bb.clxt / gse.clxt / ip.clxt into out_dir.
TrainAllResult train_all_layers(const std::vector<AnnotatedStream>& streams,
                                const TrainConfig& cfg,
                                const std::string& out_dir);

// Dataset files: magic "CLXD", version u32, T u32, positive and negative
// counts u64, then per window: origin offset u64, label u8, packed bits.
void save_labeled_set(const std::string& path, const LabeledSet& set,
                      std::size_t t_bits);
std::pair<LabeledSet, std::size_t> load_labeled_set(const std::string& path);

void append_loss_log(const std::string& path,
                     const std::vector<LossEntry>& log);

}  // namespace clx
