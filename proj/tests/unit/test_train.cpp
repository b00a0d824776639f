#include <doctest.h>

#include <clx/checkpoint.hpp>
#include <clx/error.hpp>
#include <clx/rng.hpp>
#include <clx/train.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <vector>

#include "helpers.hpp"

using namespace clx;

namespace {

TrainConfig toy_train_config() {
  TrainConfig cfg;
  cfg.batch_n = 16;
  cfg.pretrain_epochs = 8;
  cfg.finetune_epochs = 30;
  cfg.channels = 4;
  cfg.conv_layers = 2;
  cfg.kernel = 3;
  cfg.out_dim = 4;
  cfg.hidden = 4;
  cfg.seed = 61;
  return cfg;
}

std::vector<Window> random_windows(std::size_t n, std::size_t t_bits,
                                   std::uint64_t seed) {
  rng::Sequence seq(seed);
  std::vector<Window> out(n);
  for (Window& w : out) {
    w.bits.resize(t_bits);
    for (auto& b : w.bits) b = std::uint8_t(seq.below(2));
  }
  return out;
}

AnnotatedStream training_stream(std::uint64_t n_pdus, std::uint64_t seed) {
  TrafficSpec spec;
  spec.n_pdus = n_pdus;
  spec.seed = seed;
  return build_stream(spec);
}

}  // namespace

TEST_CASE("train config validation") {
  CHECK_NOTHROW(toy_train_config().validate());
  TrainConfig cfg = toy_train_config();
  cfg.batch_n = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = toy_train_config();
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = toy_train_config();
  cfg.kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = toy_train_config();
  cfg.aug_gamma1 = 0.8;
  cfg.aug_gamma2 = 0.3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("augment_pair corrupts two fresh views deterministically") {
  Window w;
  w.bits = random_windows(1, 96, 5)[0].bits;

  const auto id_views = augment_pair(w, 0.0, 0.0, 3);
  CHECK(id_views.first.bits == w.bits);
  CHECK(id_views.second.bits == w.bits);

  const auto views = augment_pair(w, 0.25, 0.25, 3);
  CHECK_EQ(views.first.bits.size(), w.bits.size());
  CHECK(views.first.bits != w.bits);
  CHECK(views.second.bits != w.bits);
  CHECK(views.first.bits != views.second.bits);

  const auto replay = augment_pair(w, 0.25, 0.25, 3);
  CHECK(replay.first.bits == views.first.bits);
  CHECK(replay.second.bits == views.second.bits);
  const auto other = augment_pair(w, 0.25, 0.25, 4);
  CHECK(other.first.bits != views.first.bits);
}

TEST_CASE("build_training_sets splits per layer with hard negatives") {
  const AnnotatedStream stream = training_stream(120, 9);
  const auto sets = build_training_sets({stream}, 44);

  for (std::size_t li = 0; li < 3; ++li) {
    const Layer layer = Layer(li);
    const LayerSets& ls = sets[li];
    const std::size_t t_bytes = window_bits_for(layer) / 8;

    std::set<std::uint64_t> header_offsets;
    for (const Annotation& a : annotations_of(stream.annotations, layer))
      if (a.offset_bytes + t_bytes <= stream.bytes.size())
        header_offsets.insert(a.offset_bytes);

    const std::size_t n_pos =
        ls.train.positives.size() + ls.test.positives.size();
    const std::size_t n_neg =
        ls.train.negatives.size() + ls.test.negatives.size();
    CHECK_EQ(n_pos, header_offsets.size());
    CHECK_EQ(n_neg, n_pos);
    CHECK_EQ(ls.train.positives.size(), (n_pos * 2 + 2) / 3);
    CHECK_EQ(ls.train.negatives.size(), (n_neg * 2 + 2) / 3);

    std::set<std::uint64_t> pos_seen, neg_seen;
    std::size_t near = 0;
    for (const LabeledSet* half : {&ls.train, &ls.test}) {
      for (const Window& w : half->positives) {
        REQUIRE(w.origin.has_value());
        CHECK_EQ(w.origin->second, layer);
        CHECK(header_offsets.count(w.origin->first));
        CHECK_EQ(w.bits.size(), t_bytes * 8);
        pos_seen.insert(w.origin->first);
      }
      for (const Window& w : half->negatives) {
        REQUIRE(w.origin.has_value());
        const std::uint64_t off = w.origin->first;
        CHECK_FALSE(header_offsets.count(off));
        neg_seen.insert(off);
        for (std::uint64_t h : header_offsets)
          if (off > h ? off - h < t_bytes : h - off < t_bytes) {
            ++near;
            break;
          }
      }
    }
    // Negative offsets are distinct, so train and test cannot share one.
    CHECK_EQ(pos_seen.size(), n_pos);
    CHECK_EQ(neg_seen.size(), n_neg);
    // Half the draws target the neighborhood of a real header.
    CHECK_GT(near, n_neg / 4);
  }

  // Too few annotated headers to learn from.
  const AnnotatedStream tiny = training_stream(1, 10);
  CHECK_THROWS_AS(build_training_sets({tiny}, 44), ConfigError);
}

TEST_CASE("labeled sets round-trip through disk") {
  clxtest::TempDir dir;
  const AnnotatedStream stream = training_stream(40, 12);
  const auto sets = build_training_sets({stream}, 7);
  const LabeledSet& set = sets[0].train;
  const std::size_t t_bits = window_bits_for(Layer::bb);

  save_labeled_set(dir.file("bb.clxd"), set, t_bits);
  const auto [loaded, loaded_bits] = load_labeled_set(dir.file("bb.clxd"));
  CHECK_EQ(loaded_bits, t_bits);
  REQUIRE_EQ(loaded.positives.size(), set.positives.size());
  REQUIRE_EQ(loaded.negatives.size(), set.negatives.size());
  for (std::size_t i = 0; i < set.positives.size(); ++i) {
    CHECK(loaded.positives[i].bits == set.positives[i].bits);
    REQUIRE(loaded.positives[i].origin.has_value());
    CHECK_EQ(loaded.positives[i].origin->first, set.positives[i].origin->first);
  }
  for (std::size_t i = 0; i < set.negatives.size(); ++i)
    CHECK(loaded.negatives[i].bits == set.negatives[i].bits);

  CHECK_THROWS_AS(load_labeled_set(dir.file("missing.clxd")), IoError);
}

TEST_CASE("pretrain with zero epochs returns the seeded initialization") {
  TrainConfig cfg = toy_train_config();
  cfg.pretrain_epochs = 0;
  const auto positives = random_windows(40, 32, 71);
  const PretrainResult r = pretrain(positives, cfg);
  CHECK(r.log.empty());

  EncoderConfig ec;
  ec.T = 32;
  ec.C = cfg.channels;
  ec.L = cfg.conv_layers;
  ec.K = cfg.kernel;
  ec.D = cfg.out_dim;
  ec.finalize();
  const EncoderParams want =
      init_encoder(ec, rng::derive(cfg.seed, "pretrain-init"));
  CHECK(r.encoder.p == want.p);
}

TEST_CASE("pretrain is deterministic and reduces the loss on diverse data") {
  TrainConfig cfg = toy_train_config();
  cfg.pretrain_epochs = 10;
  const auto positives = random_windows(64, 32, 72);

  const PretrainResult a = pretrain(positives, cfg);
  const PretrainResult b = pretrain(positives, cfg);
  CHECK(a.encoder.p == b.encoder.p);
  REQUIRE_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i)
    CHECK_EQ(a.log[i].loss, b.log[i].loss);

  REQUIRE_FALSE(a.log.empty());
  double first = 0, last = 0;
  std::size_t nf = 0, nl = 0;
  for (const LossEntry& e : a.log) {
    if (e.epoch == 0) first += e.loss, ++nf;
    if (e.epoch == cfg.pretrain_epochs - 1) last += e.loss, ++nl;
  }
  REQUIRE_GT(nf, 0);
  REQUIRE_GT(nl, 0);
  CHECK_LT(last / double(nl), first / double(nf));
}

TEST_CASE("finetune freezes the trunk and fits a separable toy set") {
  TrainConfig cfg = toy_train_config();
  cfg.pretrain_epochs = 4;
  cfg.aug_gamma1 = 0.02;
  cfg.aug_gamma2 = 0.02;

  // Positives start 0xFF 0xFF, negatives 0x00 0x00; the rest is noise.
  LabeledSet data;
  auto noise = random_windows(60, 32, 81);
  for (std::size_t i = 0; i < noise.size(); ++i) {
    Window w = noise[i];
    const bool pos = i % 2 == 0;
    for (std::size_t b = 0; b < 16; ++b) w.bits[b] = pos ? 1 : 0;
    (pos ? data.positives : data.negatives).push_back(std::move(w));
  }

  const PretrainResult pre = pretrain(data.positives, cfg);
  const FinetuneResult fit = finetune(pre.encoder, data, cfg);
  CHECK(fit.classifier.trunk.p == pre.encoder.p);
  CHECK_FALSE(fit.log.empty());

  const EvalSummary on_train = evaluate_classifier(fit.classifier, data);
  CHECK_EQ(on_train.total, 60);
  CHECK_GT(on_train.accuracy, 0.95);
  CHECK_GT(on_train.f1, 0.95);

  LabeledSet one_class;
  one_class.positives = data.positives;
  CHECK_THROWS_AS(finetune(pre.encoder, one_class, cfg), ConfigError);
}

TEST_CASE("train_all_layers writes three working checkpoints") {
  clxtest::TempDir dir;
  TrainConfig cfg = toy_train_config();
  cfg.pretrain_epochs = 2;
  cfg.finetune_epochs = 4;
  const AnnotatedStream stream = training_stream(80, 14);

  const TrainAllResult r =
      train_all_layers({stream}, cfg, dir.file("models"));
  for (std::size_t li = 0; li < 3; ++li) {
    CHECK_EQ(r.models[li].trunk.cfg.T, window_bits_for(Layer(li)));
    CHECK_EQ(r.models[li].trunk.cfg.C, cfg.channels);
    CHECK_GT(r.held_out[li].total, 0);
    CHECK(std::filesystem::exists(r.paths[li]));
    const Checkpoint ck = load_checkpoint(r.paths[li]);
    CHECK_EQ(ck.kind, CheckpointKind::classifier);
    CHECK(ck.classifier.head == r.models[li].head);
  }
}
