#include "clx/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "clx/checkpoint.hpp"
#include "clx/error.hpp"
#include "clx/rng.hpp"

namespace clx {

void TrainConfig::validate() const {
  if (batch_n < 2) throw ConfigError("batch N must be at least 2");
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  if (!(pretrain_lr > 0.0) || !(finetune_lr > 0.0))
    throw ConfigError("learning rates must be positive");
  if (aug_gamma1 < 0.0 || aug_gamma2 < 0.0 ||
      aug_gamma1 + aug_gamma2 > 1.0)
    throw ConfigError("augmentation gammas must be non-negative, sum <= 1");
  if (channels == 0 || conv_layers == 0 || out_dim == 0 || hidden == 0)
    throw ConfigError("architecture dimensions must be positive");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("kernel must be odd");
}

namespace {

// Deterministic Fisher-Yates with the counter generator.
void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  rng::Sequence seq(seed);
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[std::size_t(seq.below(i))]);
}

std::vector<std::size_t> shuffled_range(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle_indices(idx, seed);
  return idx;
}

EncoderConfig encoder_config_from(const TrainConfig& cfg, std::size_t t_bits) {
  EncoderConfig ec;
  ec.T = t_bits;
  ec.C = cfg.channels;
  ec.L = cfg.conv_layers;
  ec.K = cfg.kernel;
  ec.D = cfg.out_dim;
  ec.finalize();
  return ec;
}

}  // namespace

std::array<LayerSets, 3> build_training_sets(
    const std::vector<AnnotatedStream>& streams, std::uint64_t split_seed) {
  std::array<LayerSets, 3> out;
  const std::array<Layer, 3> layers{Layer::bb, Layer::gse, Layer::ip};

  for (std::size_t li = 0; li < 3; ++li) {
    const Layer layer = layers[li];
    const std::size_t t_bits = window_bits_for(layer);
    const std::size_t t_bytes = t_bits / 8;

    std::vector<Window> positives;
    std::vector<Window> negatives;
    for (std::size_t si = 0; si < streams.size(); ++si) {
      const AnnotatedStream& stream = streams[si];
      if (stream.bytes.size() < t_bytes) continue;
      const std::uint64_t max_offset = stream.bytes.size() - t_bytes;

      std::unordered_set<std::uint64_t> header_offsets;
      for (const Annotation& a : annotations_of(stream.annotations, layer)) {
        header_offsets.insert(a.offset_bytes);
        if (a.offset_bytes > max_offset) continue;
        Window w = window_from_stream(stream.bytes, a.offset_bytes, t_bits);
        w.origin = {a.offset_bytes, layer};
        positives.push_back(std::move(w));
      }

      // Equal-count negatives at non-header offsets, drawn once. Half are
      // uniform, half sit within a window length of a real header; the
      // shifted copies are the hard cases for a pooled classifier.
      const std::uint64_t claimed =
          std::uint64_t(positives.size() - negatives.size());
      std::vector<std::uint64_t> header_list(header_offsets.begin(),
                                             header_offsets.end());
      std::sort(header_list.begin(), header_list.end());
      rng::Sequence seq(rng::mix(rng::derive(split_seed, "negatives"),
                                 (std::uint64_t(li) << 32) | si));
      std::unordered_set<std::uint64_t> used;
      std::uint64_t made = 0;
      std::uint64_t guard = 0;
      while (made < claimed && guard < claimed * 1000 + 1000) {
        ++guard;
        std::uint64_t off;
        if (made % 2 == 0 && !header_list.empty()) {
          const std::uint64_t h = header_list[seq.below(header_list.size())];
          const std::uint64_t span = std::uint64_t(t_bytes) - 1;
          const bool close = seq.below(2) == 0;
          const std::uint64_t m_close = 1 + seq.below(std::min<std::uint64_t>(4, span));
          const std::uint64_t m_any = 1 + seq.below(span);
          const std::uint64_t m = close ? m_close : m_any;
          const bool left = seq.below(2) == 0;
          if (!left) {
            off = h + m;
          } else if (h >= m) {
            off = h - m;
          } else {
            continue;
          }
          if (off > max_offset) continue;
        } else {
          off = seq.below(max_offset + 1);
        }
        if (header_offsets.count(off) || used.count(off)) continue;
        used.insert(off);
        Window w = window_from_stream(stream.bytes, off, t_bits);
        w.origin = {off, layer};
        negatives.push_back(std::move(w));
        ++made;
      }
    }

    if (positives.size() < 10)
      throw ConfigError(std::string("insufficient data: layer ") +
                        layer_name(layer) + " has only " +
                        std::to_string(positives.size()) + " positives");

    // 2/3 train, 1/3 test, decided per class by shuffled origin order.
    auto split = [&](std::vector<Window>& all, const char* tag,
                     std::vector<Window>& train, std::vector<Window>& test) {
      const auto idx = shuffled_range(
          all.size(),
          rng::mix(rng::derive(split_seed, tag), std::uint64_t(li)));
      const std::size_t n_train = (all.size() * 2 + 2) / 3;
      for (std::size_t j = 0; j < all.size(); ++j) {
        auto& dst = j < n_train ? train : test;
        dst.push_back(std::move(all[idx[j]]));
      }
    };
    split(positives, "split-pos", out[li].train.positives,
          out[li].test.positives);
    split(negatives, "split-neg", out[li].train.negatives,
          out[li].test.negatives);
  }
  return out;
}

std::pair<Window, Window> augment_pair(const Window& w, double gamma1,
                                       double gamma2, std::uint64_t seed) {
  std::pair<Window, Window> views{w, w};
  corrupt_unit_bits(views.first.bits,
                    {gamma1, gamma2, rng::derive(seed, "view-a")});
  corrupt_unit_bits(views.second.bits,
                    {gamma1, gamma2, rng::derive(seed, "view-b")});
  return views;
}

PretrainResult pretrain(const std::vector<Window>& positives,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (positives.size() < 2)
    throw ConfigError("pretrain needs at least 2 positive windows");
  const std::size_t t_bits = positives.front().bits.size();

  PretrainResult result;
  result.encoder = init_encoder(encoder_config_from(cfg, t_bits),
                                rng::derive(cfg.seed, "pretrain-init"));
  AdamState adam;
  const std::uint64_t order_seed = rng::derive(cfg.seed, "pretrain-order");
  const std::uint64_t aug_seed = rng::derive(cfg.seed, "pretrain-aug");

  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    const auto order =
        shuffled_range(positives.size(), rng::mix(order_seed, epoch));
    std::size_t batch_index = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_n) {
      const std::size_t n = std::min(cfg.batch_n, order.size() - at);
      if (n < 2) break;  // a single instance has no negatives
      std::vector<Window> views;
      views.reserve(2 * n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::uint64_t s =
            rng::mix(rng::mix(rng::mix(aug_seed, epoch), batch_index), j);
        auto [a, b] = augment_pair(positives[order[at + j]], cfg.aug_gamma1,
                                   cfg.aug_gamma2, s);
        views.push_back(std::move(a));
        views.push_back(std::move(b));
      }
      GradResult g = ntxent_gradients(result.encoder, views, cfg.tau);
      if (!std::isfinite(g.loss))
        throw TrainingError("non-finite contrastive loss at epoch " +
                            std::to_string(epoch) + " batch " +
                            std::to_string(batch_index));
      adam_step(adam, result.encoder.p, g.grad, cfg.pretrain_lr);
      result.log.push_back({epoch, batch_index, g.loss});
      ++batch_index;
    }
  }
  return result;
}

FinetuneResult finetune(const EncoderParams& encoder, const LabeledSet& data,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (data.positives.empty() || data.negatives.empty())
    throw ConfigError("finetune needs both classes non-empty");

  FinetuneResult result;
  result.classifier = init_classifier(
      encoder, cfg.hidden, rng::derive(cfg.seed, "finetune-init"));
  const std::size_t trunk_p = result.classifier.trunk.p.size();
  const std::size_t head_p = head_param_count(result.classifier);
  AdamState adam;

  const std::size_t n_total = data.positives.size() + data.negatives.size();
  const bool augment = cfg.aug_gamma1 + cfg.aug_gamma2 > 0.0;
  const std::uint64_t order_seed = rng::derive(cfg.seed, "finetune-order");
  const std::uint64_t aug_seed = rng::derive(cfg.seed, "finetune-aug");

  auto window_at = [&](std::size_t i) -> const Window& {
    return i < data.positives.size()
               ? data.positives[i]
               : data.negatives[i - data.positives.size()];
  };

  for (std::size_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    const auto order = shuffled_range(n_total, rng::mix(order_seed, epoch));
    std::size_t batch_index = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_n) {
      const std::size_t n = std::min(cfg.batch_n, order.size() - at);
      std::vector<Window> windows;
      std::vector<int> labels;
      windows.reserve(n);
      labels.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = order[at + j];
        Window w = window_at(i);
        if (augment) {
          const std::uint64_t s =
              rng::mix(rng::mix(rng::mix(aug_seed, epoch), batch_index), j);
          // Half the draws stay clean so the clean channel remains
          // in-distribution; the rest carry fresh corruption.
          if (rng::u01(s, 0) >= 0.5)
            corrupt_unit_bits(w.bits, {cfg.aug_gamma1, cfg.aug_gamma2,
                                       rng::mix(s, 1)});
        }
        windows.push_back(std::move(w));
        labels.push_back(i < data.positives.size() ? 1 : 0);
      }
      GradResult g = bce_gradients(result.classifier, windows, labels);
      if (!std::isfinite(g.loss))
        throw TrainingError("non-finite bce loss at epoch " +
                            std::to_string(epoch) + " batch " +
                            std::to_string(batch_index));
      adam_step(adam, result.classifier.head,
                std::span<const double>(g.grad).subspan(trunk_p, head_p),
                cfg.finetune_lr);
      result.log.push_back({epoch, batch_index, g.loss});
      ++batch_index;
    }
  }
  return result;
}

EvalSummary evaluate_classifier(const ClassifierParams& params,
                                const LabeledSet& data) {
  EvalSummary s;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const Window& w : data.positives) {
    const bool hit = classifier_forward(params, w) >= 0.5;
    tp += hit;
    fn += !hit;
    s.correct += hit;
  }
  for (const Window& w : data.negatives) {
    const bool hit = classifier_forward(params, w) >= 0.5;
    fp += hit;
    s.correct += !hit;
  }
  s.total = data.positives.size() + data.negatives.size();
  s.accuracy = s.total ? double(s.correct) / double(s.total) : 0.0;
  const double denom = 2.0 * double(tp) + double(fp) + double(fn);
  s.f1 = denom > 0.0 ? 2.0 * double(tp) / denom : 0.0;
  return s;
}

TrainAllResult train_all_layers(const std::vector<AnnotatedStream>& streams,
                                const TrainConfig& cfg,
                                const std::string& out_dir) {
  cfg.validate();
  auto sets = build_training_sets(streams, rng::derive(cfg.seed, "split"));
  const std::array<Layer, 3> layers{Layer::bb, Layer::gse, Layer::ip};
  const std::array<const char*, 3> stems{"bb", "gse", "ip"};

  TrainAllResult result;
  for (std::size_t li = 0; li < 3; ++li) {
    TrainConfig layer_cfg = cfg;
    layer_cfg.seed = rng::derive(cfg.seed, layer_name(layers[li]));
    PretrainResult pre = pretrain(sets[li].train.positives, layer_cfg);
    FinetuneResult fine = finetune(pre.encoder, sets[li].train, layer_cfg);
    result.held_out[li] = evaluate_classifier(fine.classifier, sets[li].test);
    result.paths[li] = out_dir + "/" + stems[li] + ".clxt";
    save_classifier(result.paths[li], fine.classifier);
    result.models[li] = std::move(fine.classifier);
  }
  return result;
}

void save_labeled_set(const std::string& path, const LabeledSet& set,
                      std::size_t t_bits) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  auto put_u32 = [&](std::uint32_t v) {
    f.write(reinterpret_cast<const char*>(&v), 4);
  };
  auto put_u64 = [&](std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), 8);
  };
  f.write("CLXD", 4);
  put_u32(1);
  put_u32(std::uint32_t(t_bits));
  put_u64(set.positives.size());
  put_u64(set.negatives.size());
  auto put_window = [&](const Window& w, std::uint8_t label) {
    if (w.bits.size() != t_bits)
      throw ConsistencyError("window length mismatch in dataset save");
    put_u64(w.origin ? w.origin->first : 0);
    f.put(char(label));
    Bytes packed((t_bits + 7) / 8, 0);
    for (std::size_t i = 0; i < t_bits; ++i)
      if (w.bits[i]) set_bit(packed, i, 1);
    f.write(reinterpret_cast<const char*>(packed.data()),
            std::streamsize(packed.size()));
  };
  for (const Window& w : set.positives) put_window(w, 1);
  for (const Window& w : set.negatives) put_window(w, 0);
  if (!f) throw IoError("short write to " + path);
}

std::pair<LabeledSet, std::size_t> load_labeled_set(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[4] = {};
  if (!f.read(magic, 4) || std::memcmp(magic, "CLXD", 4) != 0)
    throw IoError("bad dataset magic in " + path);
  auto get_u32 = [&]() {
    std::uint32_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), 4))
      throw IoError("truncated dataset " + path);
    return v;
  };
  auto get_u64 = [&]() {
    std::uint64_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), 8))
      throw IoError("truncated dataset " + path);
    return v;
  };
  if (get_u32() != 1) throw IoError("unsupported dataset version in " + path);
  const std::size_t t_bits = get_u32();
  if (t_bits == 0 || t_bits % 8 != 0 || t_bits > 1 << 20)
    throw IoError("implausible window length in " + path);
  const std::uint64_t n_pos = get_u64();
  const std::uint64_t n_neg = get_u64();
  Layer origin_layer = Layer::bb;
  for (Layer l : {Layer::gse, Layer::ip})
    if (window_bits_for(l) == t_bits) origin_layer = l;

  LabeledSet set;
  Bytes packed(t_bits / 8);
  for (std::uint64_t i = 0; i < n_pos + n_neg; ++i) {
    const std::uint64_t origin = get_u64();
    const int label = f.get();
    if (label != 0 && label != 1)
      throw IoError("bad label in dataset " + path);
    if (!f.read(reinterpret_cast<char*>(packed.data()),
                std::streamsize(packed.size())))
      throw IoError("truncated window in " + path);
    Window w;
    w.bits.resize(t_bits);
    for (std::size_t b = 0; b < t_bits; ++b)
      w.bits[b] = std::uint8_t(get_bit(packed, b));
    w.origin = {origin, origin_layer};
    if ((i < n_pos) != (label == 1))
      throw IoError("label order mismatch in dataset " + path);
    (label ? set.positives : set.negatives).push_back(std::move(w));
  }
  return {std::move(set), t_bits};
}

void append_loss_log(const std::string& path,
                     const std::vector<LossEntry>& log) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot open " + path + " for appending");
  for (const LossEntry& e : log)
    f << e.epoch << ' ' << e.batch << ' ' << e.loss << '\n';
  if (!f) throw IoError("short write to " + path);
}

}  // namespace clx
