#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "clx/checkpoint.hpp"
#include "clx/corruption.hpp"
#include "clx/error.hpp"
#include "clx/eval.hpp"
#include "clx/fsm_decode.hpp"
#include "clx/recover.hpp"
#include "clx/stream.hpp"
#include "clx/train.hpp"
#include "clx/version.hpp"

namespace {

using nlohmann::json;

// Values from --config fill options the command line left untouched, so
// flags always win.
struct Overlay {
  json cfg = json::object();
  CLI::App* app = nullptr;

  void load(const std::string& path) {
    if (path.empty()) return;
    std::ifstream f(path);
    if (!f) throw clx::IoError("cannot open config " + path);
    cfg = json::parse(f);
  }

  template <class T>
  void merge(const std::string& key, const std::string& flag, T& value) {
    if (!cfg.contains(key) || app->count(flag) > 0) return;
    value = cfg.at(key).get<T>();
  }
};

std::string iso_now() {
  char buf[32];
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// One manifest next to every run's primary output. The wall-clock stamp
// is the only field allowed to differ between identical runs.
void write_manifest(const std::string& primary_out,
                    const std::string& subcommand, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["subcommand"] = subcommand;
  m["config"] = config;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["version"] = clx::version_string;
  m["wall_clock"] = iso_now();
  const std::string path = primary_out + ".manifest.json";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw clx::IoError("cannot open " + path + " for writing");
  f << m.dump(2) << '\n';
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(item);
      item.clear();
    } else {
      item.push_back(c);
    }
  }
  parts.push_back(item);
  return parts;
}

std::vector<double> parse_degrees(const std::string& text) {
  std::vector<double> out;
  for (const std::string& s : split(text, ','))
    if (!s.empty()) out.push_back(std::stod(s));
  return out;
}

std::vector<std::pair<unsigned, unsigned>> parse_ratios(
    const std::string& text) {
  std::vector<std::pair<unsigned, unsigned>> out;
  for (const std::string& s : split(text, ',')) {
    if (s.empty()) continue;
    const auto parts = split(s, ':');
    if (parts.size() != 2)
      throw clx::ConfigError("ratio must look like 1:3, got '" + s + "'");
    out.emplace_back(unsigned(std::stoul(parts[0])),
                     unsigned(std::stoul(parts[1])));
  }
  return out;
}

std::vector<std::uint8_t> parse_codes(const std::string& text) {
  std::vector<std::uint8_t> out;
  for (const std::string& s : split(text, ',')) {
    if (s.empty()) continue;
    const unsigned long v = std::stoul(s, nullptr, 0);
    if (v > 0xFF) throw clx::ConfigError("protocol code out of range: " + s);
    out.push_back(std::uint8_t(v));
  }
  return out;
}

clx::Layer parse_layer(std::string name) {
  for (char& c : name) c = char(std::toupper(static_cast<unsigned char>(c)));
  const auto layer = clx::layer_from_name(name);
  if (!layer) throw clx::ConfigError("unknown layer '" + name + "'");
  return *layer;
}

clx::AnnotatedStream load_stream(const std::string& bytes_path,
                                 const std::string& ann_path) {
  clx::AnnotatedStream s;
  s.bytes = clx::load_bytes(bytes_path);
  if (!ann_path.empty()) s.annotations = clx::load_annotations(ann_path);
  return s;
}

std::vector<clx::AnnotatedStream> load_streams(
    const std::vector<std::string>& ins, const std::vector<std::string>& anns) {
  if (ins.empty()) throw clx::ConfigError("at least one --in is required");
  if (ins.size() != anns.size())
    throw clx::ConfigError("--in and --ann counts must match");
  std::vector<clx::AnnotatedStream> streams;
  for (std::size_t i = 0; i < ins.size(); ++i)
    streams.push_back(load_stream(ins[i], anns[i]));
  return streams;
}

std::array<clx::ClassifierParams, 3> load_models(const std::string& dir) {
  return {clx::load_classifier(dir + "/bb.clxt"),
          clx::load_classifier(dir + "/gse.clxt"),
          clx::load_classifier(dir + "/ip.clxt")};
}

void write_length_prefixed(const std::string& path,
                           const std::vector<clx::RecoveredPdu>& pdus) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw clx::IoError("cannot open " + path + " for writing");
  for (const clx::RecoveredPdu& p : pdus) {
    const std::uint32_t n = std::uint32_t(p.bytes.size());
    const std::uint8_t len[4] = {std::uint8_t(n & 0xFF),
                                 std::uint8_t((n >> 8) & 0xFF),
                                 std::uint8_t((n >> 16) & 0xFF),
                                 std::uint8_t(n >> 24)};
    f.write(reinterpret_cast<const char*>(len), 4);
    f.write(reinterpret_cast<const char*>(p.bytes.data()),
            std::streamsize(p.bytes.size()));
  }
  if (!f) throw clx::IoError("short write to " + path);
}

struct TrainFlags {
  clx::TrainConfig cfg;

  void add_to(CLI::App* sub) {
    sub->add_option("--batch-n", cfg.batch_n, "instances per batch");
    sub->add_option("--tau", cfg.tau, "contrastive temperature");
    sub->add_option("--pretrain-epochs", cfg.pretrain_epochs, "");
    sub->add_option("--finetune-epochs", cfg.finetune_epochs, "");
    sub->add_option("--pretrain-lr", cfg.pretrain_lr, "");
    sub->add_option("--finetune-lr", cfg.finetune_lr, "");
    sub->add_option("--aug-gamma1", cfg.aug_gamma1,
                    "training-time flip probability");
    sub->add_option("--aug-gamma2", cfg.aug_gamma2,
                    "training-time loss probability");
    sub->add_option("--seed", cfg.seed, "training seed");
    sub->add_option("--channels", cfg.channels, "conv channels C");
    sub->add_option("--conv-layers", cfg.conv_layers, "conv depth L");
    sub->add_option("--kernel", cfg.kernel, "conv kernel K (odd)");
    sub->add_option("--out-dim", cfg.out_dim, "contrastive dimension D");
    sub->add_option("--hidden", cfg.hidden, "classifier hidden width");
  }

  void merge_from(Overlay& o) {
    o.merge("batch_n", "--batch-n", cfg.batch_n);
    o.merge("tau", "--tau", cfg.tau);
    o.merge("pretrain_epochs", "--pretrain-epochs", cfg.pretrain_epochs);
    o.merge("finetune_epochs", "--finetune-epochs", cfg.finetune_epochs);
    o.merge("pretrain_lr", "--pretrain-lr", cfg.pretrain_lr);
    o.merge("finetune_lr", "--finetune-lr", cfg.finetune_lr);
    o.merge("aug_gamma1", "--aug-gamma1", cfg.aug_gamma1);
    o.merge("aug_gamma2", "--aug-gamma2", cfg.aug_gamma2);
    o.merge("seed", "--seed", cfg.seed);
    o.merge("channels", "--channels", cfg.channels);
    o.merge("conv_layers", "--conv-layers", cfg.conv_layers);
    o.merge("kernel", "--kernel", cfg.kernel);
    o.merge("out_dim", "--out-dim", cfg.out_dim);
    o.merge("hidden", "--hidden", cfg.hidden);
  }

  json to_json() const {
    return {{"batch_n", cfg.batch_n},
            {"tau", cfg.tau},
            {"pretrain_epochs", cfg.pretrain_epochs},
            {"finetune_epochs", cfg.finetune_epochs},
            {"pretrain_lr", cfg.pretrain_lr},
            {"finetune_lr", cfg.finetune_lr},
            {"aug_gamma1", cfg.aug_gamma1},
            {"aug_gamma2", cfg.aug_gamma2},
            {"seed", cfg.seed},
            {"channels", cfg.channels},
            {"conv_layers", cfg.conv_layers},
            {"kernel", cfg.kernel},
            {"out_dim", cfg.out_dim},
            {"hidden", cfg.hidden}};
  }
};

struct ScanFlags {
  std::size_t stride = 1;
  double threshold = 0.5;
  std::int64_t radius = -1;  // negative keeps the per-layer default

  void add_to(CLI::App* sub) {
    sub->add_option("--stride", stride, "bytes between candidates");
    sub->add_option("--threshold", threshold, "decision probability");
    sub->add_option("--radius", radius,
                    "suppression radius in bytes (default: per-layer minimum spacing)");
  }

  void merge_from(Overlay& o) {
    o.merge("stride", "--stride", stride);
    o.merge("threshold", "--threshold", threshold);
    o.merge("suppress_radius", "--radius", radius);
  }

  clx::ScanConfig to_config() const {
    clx::ScanConfig cfg;
    cfg.stride = stride;
    cfg.threshold = threshold;
    if (radius >= 0) cfg.suppress_radius = std::size_t(radius);
    return cfg;
  }

  json to_json() const {
    json j = {{"stride", stride}, {"threshold", threshold}};
    if (radius >= 0) j["suppress_radius"] = radius;
    return j;
  }
};

int dispatch(CLI::App& app, int argc, char** argv);

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("CLX_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) {
#ifdef _OPENMP
      omp_set_num_threads(n);
#endif
    }
  }

  CLI::App app{"DVB-S2/GSE stream synthesis, corruption, and recovery"};
  app.set_version_flag("--version", std::string(clx::version_string));
  app.require_subcommand(1);

  try {
    return dispatch(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "clx: error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

int dispatch(CLI::App& app, int argc, char** argv) {
  // gen
  auto* gen = app.add_subcommand("gen", "synthesize an annotated stream");
  clx::TrafficSpec traffic;
  double tcp_w = 1.0, udp_w = 1.0, icmp_w = 1.0;
  std::string gen_out, gen_ann, gen_config;
  gen->add_option("--pdus", traffic.n_pdus, "number of PDUs");
  gen->add_option("--min-len", traffic.pdu_len_range.first, "bytes");
  gen->add_option("--max-len", traffic.pdu_len_range.second, "bytes");
  gen->add_option("--max-fragment", traffic.max_fragment,
                  "max payload bytes per GSE fragment");
  gen->add_option("--capacity-bits", traffic.frame_capacity_bits,
                  "BB frame data-field capacity");
  gen->add_option("--seed", traffic.seed, "generator seed");
  gen->add_option("--tcp-weight", tcp_w, "");
  gen->add_option("--udp-weight", udp_w, "");
  gen->add_option("--icmp-weight", icmp_w, "");
  gen->add_option("--out", gen_out, "stream bytes path")->required();
  gen->add_option("--ann", gen_ann, "annotations path")->required();
  gen->add_option("--config", gen_config, "JSON config; flags win");

  // truncate
  auto* trunc = app.add_subcommand(
      "truncate", "drop a stream prefix, as an eavesdropper would");
  std::string tr_in, tr_ann, tr_out, tr_ann_out;
  std::uint64_t tr_offset = 0;
  trunc->add_option("--in", tr_in, "stream bytes")->required();
  trunc->add_option("--ann", tr_ann, "annotations")->required();
  trunc->add_option("--offset", tr_offset, "bytes to drop")->required();
  trunc->add_option("--out", tr_out, "")->required();
  trunc->add_option("--ann-out", tr_ann_out, "")->required();

  // corrupt
  auto* corr = app.add_subcommand("corrupt", "apply the bit-level channel");
  std::string co_in, co_out, co_ann_in, co_ann_out;
  clx::CorruptionSpec channel;
  corr->add_option("--in", co_in, "stream bytes")->required();
  corr->add_option("--gamma1", channel.gamma1, "flip probability");
  corr->add_option("--gamma2", channel.gamma2, "loss probability");
  corr->add_option("--seed", channel.seed, "channel seed");
  corr->add_option("--out", co_out, "")->required();
  corr->add_option("--ann", co_ann_in, "annotations to pass through");
  corr->add_option("--ann-out", co_ann_out, "");

  // fsm-decode
  auto* fsm = app.add_subcommand("fsm-decode",
                                 "length-field finite-state baseline");
  std::string fd_in, fd_report, fd_pdus;
  bool fd_canonical = false;
  fsm->add_option("--in", fd_in, "stream bytes")->required();
  fsm->add_option("--report", fd_report, "JSON report path")->required();
  fsm->add_option("--pdus", fd_pdus, "recovered PDUs (length-prefixed)");
  fsm->add_flag("--canonical", fd_canonical,
                "zero timing fields for byte-identical reruns");

  // build-dataset
  auto* bd = app.add_subcommand("build-dataset",
                                "window datasets from annotated streams");
  std::vector<std::string> bd_in, bd_ann;
  std::string bd_dir;
  std::uint64_t bd_seed = 0;
  bd->add_option("--in", bd_in, "stream bytes (repeatable)")->required();
  bd->add_option("--ann", bd_ann, "annotations (repeatable)")->required();
  bd->add_option("--split-seed", bd_seed, "");
  bd->add_option("--out-dir", bd_dir, "")->required();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "contrastive encoder training");
  std::string pr_data, pr_out, pr_log, pr_config;
  TrainFlags pr_train;
  pre->add_option("--data", pr_data, "training dataset (.clxd)")->required();
  pre->add_option("--out", pr_out, "encoder checkpoint")->required();
  pre->add_option("--loss-log", pr_log, "append per-batch losses here");
  pr_train.add_to(pre);
  pre->add_option("--config", pr_config, "JSON config; flags win");

  // finetune
  auto* fin = app.add_subcommand("finetune",
                                 "train the head on a frozen encoder");
  std::string fi_data, fi_encoder, fi_out, fi_log, fi_config;
  TrainFlags fi_train;
  fin->add_option("--data", fi_data, "training dataset (.clxd)")->required();
  fin->add_option("--encoder", fi_encoder, "encoder checkpoint")->required();
  fin->add_option("--out", fi_out, "classifier checkpoint")->required();
  fin->add_option("--loss-log", fi_log, "append per-batch losses here");
  fi_train.add_to(fin);
  fin->add_option("--config", fi_config, "JSON config; flags win");

  // train-all
  auto* ta = app.add_subcommand("train-all",
                                "datasets, pretrain, finetune for all layers");
  std::vector<std::string> ta_in, ta_ann;
  std::string ta_dir, ta_config;
  TrainFlags ta_train;
  ta->add_option("--in", ta_in, "stream bytes (repeatable)")->required();
  ta->add_option("--ann", ta_ann, "annotations (repeatable)")->required();
  ta->add_option("--out-dir", ta_dir, "")->required();
  ta_train.add_to(ta);
  ta->add_option("--config", ta_config, "JSON config; flags win");

  // scan
  auto* scan = app.add_subcommand("scan", "slide one classifier over a region");
  std::string sc_in, sc_model, sc_layer = "BB", sc_out, sc_config;
  std::uint64_t sc_begin = 0, sc_end = 0;
  ScanFlags sc_flags;
  scan->add_option("--in", sc_in, "stream bytes")->required();
  scan->add_option("--model", sc_model, "classifier checkpoint")->required();
  scan->add_option("--layer", sc_layer, "BB, GSE, or IP")->required();
  scan->add_option("--begin", sc_begin, "region start");
  scan->add_option("--end", sc_end, "region end (0 = stream end)");
  sc_flags.add_to(scan);
  scan->add_option("--out", sc_out, "detections (JSON lines)")->required();
  scan->add_option("--config", sc_config, "JSON config; flags win");

  // extract
  auto* ex = app.add_subcommand("extract",
                                "assemble PDUs from detection files");
  std::string ex_in, ex_bb, ex_gse, ex_ip, ex_out, ex_meta;
  std::string ex_codes = "0x01,0x06,0x11";
  ex->add_option("--in", ex_in, "stream bytes")->required();
  ex->add_option("--gse", ex_gse, "GSE detections")->required();
  ex->add_option("--ip", ex_ip, "IP detections")->required();
  ex->add_option("--bb", ex_bb, "BB detections (optional boundaries)");
  ex->add_option("--codes", ex_codes, "valid protocol codes");
  ex->add_option("--out", ex_out, "PDUs (length-prefixed)")->required();
  ex->add_option("--meta", ex_meta, "per-PDU metadata (JSON lines)");

  // sweep
  auto* sw = app.add_subcommand("sweep",
                                "corruption grid over both systems");
  std::vector<std::string> sw_in, sw_ann;
  std::string sw_models, sw_out, sw_table, sw_config;
  std::string sw_degrees, sw_ratios;
  clx::SweepSpec sweep_spec;
  ScanFlags sw_scan;
  bool sw_canonical = false;
  sw->add_option("--in", sw_in, "stream bytes (repeatable)")->required();
  sw->add_option("--ann", sw_ann, "annotations (repeatable)")->required();
  sw->add_option("--models", sw_models, "directory with bb/gse/ip.clxt")
      ->required();
  sw->add_option("--degrees", sw_degrees, "comma list, e.g. 0.02,0.04");
  sw->add_option("--ratios", sw_ratios, "comma list, e.g. 1:3,1:1,3:1");
  sw->add_option("--rounds", sweep_spec.rounds, "");
  sw->add_option("--seed", sweep_spec.seed, "");
  sw->add_option("--scan-limit", sweep_spec.scan_limit_bytes,
                 "bytes scanned per round (0 = all)");
  sw_scan.add_to(sw);
  sw->add_option("--out", sw_out, "CSV path")->required();
  sw->add_option("--table-out", sw_table, "plain-text summary path");
  sw->add_flag("--canonical", sw_canonical,
               "zero timing fields for byte-identical reruns");
  sw->add_option("--config", sw_config, "JSON config; flags win");

  // throughput
  auto* tp = app.add_subcommand("throughput",
                                "headers-per-second, both systems");
  std::string tp_in, tp_models, tp_out;
  std::uint64_t tp_limit = 0;
  bool tp_canonical = false;
  ScanFlags tp_scan;
  tp->add_option("--in", tp_in, "stream bytes")->required();
  tp->add_option("--models", tp_models, "directory with bb/gse/ip.clxt")
      ->required();
  tp->add_option("--limit", tp_limit, "bytes scanned (0 = all)");
  tp_scan.add_to(tp);
  tp->add_option("--out", tp_out, "report path")->required();
  tp->add_flag("--canonical", tp_canonical,
               "zero rate fields for byte-identical reruns");

  app.parse(argc, argv);

  if (*gen) {
    Overlay o{json::object(), gen};
    o.load(gen_config);
    o.merge("n_pdus", "--pdus", traffic.n_pdus);
    o.merge("min_len", "--min-len", traffic.pdu_len_range.first);
    o.merge("max_len", "--max-len", traffic.pdu_len_range.second);
    o.merge("max_fragment", "--max-fragment", traffic.max_fragment);
    o.merge("frame_capacity_bits", "--capacity-bits",
            traffic.frame_capacity_bits);
    o.merge("seed", "--seed", traffic.seed);
    o.merge("tcp_weight", "--tcp-weight", tcp_w);
    o.merge("udp_weight", "--udp-weight", udp_w);
    o.merge("icmp_weight", "--icmp-weight", icmp_w);
    traffic.protocol_mix.clear();
    if (tcp_w > 0) traffic.protocol_mix.push_back({clx::proto_tcp, tcp_w});
    if (udp_w > 0) traffic.protocol_mix.push_back({clx::proto_udp, udp_w});
    if (icmp_w > 0) traffic.protocol_mix.push_back({clx::proto_icmp, icmp_w});
    clx::validate(traffic);
    const clx::AnnotatedStream stream = clx::build_stream(traffic);
    clx::save_bytes(gen_out, stream.bytes);
    clx::save_annotations(gen_ann, stream.annotations);
    const json cfg = {{"n_pdus", traffic.n_pdus},
                      {"min_len", traffic.pdu_len_range.first},
                      {"max_len", traffic.pdu_len_range.second},
                      {"max_fragment", traffic.max_fragment},
                      {"frame_capacity_bits", traffic.frame_capacity_bits},
                      {"seed", traffic.seed},
                      {"tcp_weight", tcp_w},
                      {"udp_weight", udp_w},
                      {"icmp_weight", icmp_w}};
    write_manifest(gen_out, "gen", cfg, {}, {gen_out, gen_ann});
    std::cout << "wrote " << stream.bytes.size() << " bytes, "
              << stream.annotations.size() << " annotations\n";
    return 0;
  }

  if (*trunc) {
    const clx::AnnotatedStream in = load_stream(tr_in, tr_ann);
    const clx::AnnotatedStream out = clx::truncate_stream(in, tr_offset);
    clx::save_bytes(tr_out, out.bytes);
    clx::save_annotations(tr_ann_out, out.annotations);
    write_manifest(tr_out, "truncate", {{"offset", tr_offset}},
                   {tr_in, tr_ann}, {tr_out, tr_ann_out});
    std::cout << "kept " << out.bytes.size() << " bytes, "
              << out.annotations.size() << " annotations\n";
    return 0;
  }

  if (*corr) {
    clx::validate(channel);
    const clx::Bytes in = clx::load_bytes(co_in);
    clx::save_bytes(co_out, clx::corrupt_bits(in, channel));
    std::vector<std::string> inputs{co_in}, outputs{co_out};
    if (!co_ann_in.empty()) {
      if (co_ann_out.empty())
        throw clx::ConfigError("--ann requires --ann-out");
      clx::save_annotations(co_ann_out, clx::load_annotations(co_ann_in));
      inputs.push_back(co_ann_in);
      outputs.push_back(co_ann_out);
    }
    write_manifest(co_out, "corrupt",
                   {{"gamma1", channel.gamma1},
                    {"gamma2", channel.gamma2},
                    {"seed", channel.seed}},
                   inputs, outputs);
    return 0;
  }

  if (*fsm) {
    const clx::Bytes in = clx::load_bytes(fd_in);
    const clx::DecodeReport report = clx::fsm_decode(in);
    clx::save_report(fd_report, report, fd_canonical);
    std::vector<std::string> outputs{fd_report};
    if (!fd_pdus.empty()) {
      write_length_prefixed(fd_pdus, report.pdus);
      outputs.push_back(fd_pdus);
    }
    write_manifest(fd_report, "fsm-decode", {{"canonical", fd_canonical}},
                   {fd_in}, outputs);
    std::cout << "bb " << report.bb_offsets.size() << ", gse "
              << report.gse_offsets.size() << ", ip "
              << report.ip_offsets.size() << ", pdus " << report.pdus.size()
              << ", crc failures " << report.crc_failures << "\n";
    return 0;
  }

  if (*bd) {
    const auto streams = load_streams(bd_in, bd_ann);
    const auto sets = clx::build_training_sets(streams, bd_seed);
    const std::array<const char*, 3> stems{"bb", "gse", "ip"};
    const std::array<clx::Layer, 3> layers{clx::Layer::bb, clx::Layer::gse,
                                           clx::Layer::ip};
    std::vector<std::string> outputs;
    for (std::size_t li = 0; li < 3; ++li) {
      const std::size_t t_bits = clx::window_bits_for(layers[li]);
      const std::string train_path =
          bd_dir + "/" + stems[li] + "-train.clxd";
      const std::string test_path = bd_dir + "/" + stems[li] + "-test.clxd";
      clx::save_labeled_set(train_path, sets[li].train, t_bits);
      clx::save_labeled_set(test_path, sets[li].test, t_bits);
      outputs.push_back(train_path);
      outputs.push_back(test_path);
      std::cout << stems[li] << ": train " << sets[li].train.positives.size()
                << "+/" << sets[li].train.negatives.size() << "-, test "
                << sets[li].test.positives.size() << "+/"
                << sets[li].test.negatives.size() << "-\n";
    }
    std::vector<std::string> inputs = bd_in;
    inputs.insert(inputs.end(), bd_ann.begin(), bd_ann.end());
    write_manifest(bd_dir + "/build-dataset", "build-dataset",
                   {{"split_seed", bd_seed}}, inputs, outputs);
    return 0;
  }

  if (*pre) {
    Overlay o{json::object(), pre};
    o.load(pr_config);
    pr_train.merge_from(o);
    auto [set, t_bits] = clx::load_labeled_set(pr_data);
    (void)t_bits;
    const clx::PretrainResult result =
        clx::pretrain(set.positives, pr_train.cfg);
    clx::save_encoder(pr_out, result.encoder);
    std::vector<std::string> outputs{pr_out};
    if (!pr_log.empty()) {
      clx::append_loss_log(pr_log, result.log);
      outputs.push_back(pr_log);
    }
    write_manifest(pr_out, "pretrain", pr_train.to_json(), {pr_data},
                   outputs);
    if (!result.log.empty())
      std::cout << "final loss " << result.log.back().loss << " after "
                << result.log.size() << " batches\n";
    return 0;
  }

  if (*fin) {
    Overlay o{json::object(), fin};
    o.load(fi_config);
    fi_train.merge_from(o);
    const clx::Checkpoint ck = clx::load_checkpoint(fi_encoder);
    if (ck.kind != clx::CheckpointKind::encoder)
      throw clx::ConfigError(fi_encoder + " is not an encoder checkpoint");
    auto [set, t_bits] = clx::load_labeled_set(fi_data);
    (void)t_bits;
    const clx::FinetuneResult result =
        clx::finetune(ck.encoder, set, fi_train.cfg);
    clx::save_classifier(fi_out, result.classifier);
    std::vector<std::string> outputs{fi_out};
    if (!fi_log.empty()) {
      clx::append_loss_log(fi_log, result.log);
      outputs.push_back(fi_log);
    }
    write_manifest(fi_out, "finetune", fi_train.to_json(),
                   {fi_data, fi_encoder}, outputs);
    const clx::EvalSummary on_train =
        clx::evaluate_classifier(result.classifier, set);
    std::cout << "train accuracy " << on_train.accuracy << ", f1 "
              << on_train.f1 << "\n";
    return 0;
  }

  if (*ta) {
    Overlay o{json::object(), ta};
    o.load(ta_config);
    ta_train.merge_from(o);
    const auto streams = load_streams(ta_in, ta_ann);
    const clx::TrainAllResult result =
        clx::train_all_layers(streams, ta_train.cfg, ta_dir);
    const std::array<const char*, 3> names{"BB", "GSE", "IP"};
    for (std::size_t li = 0; li < 3; ++li)
      std::cout << names[li] << ": held-out accuracy "
                << result.held_out[li].accuracy << ", f1 "
                << result.held_out[li].f1 << " -> " << result.paths[li]
                << "\n";
    std::vector<std::string> inputs = ta_in;
    inputs.insert(inputs.end(), ta_ann.begin(), ta_ann.end());
    write_manifest(ta_dir + "/train-all", "train-all", ta_train.to_json(),
                   inputs,
                   {result.paths.begin(), result.paths.end()});
    return 0;
  }

  if (*scan) {
    Overlay o{json::object(), scan};
    o.load(sc_config);
    sc_flags.merge_from(o);
    const clx::Bytes data = clx::load_bytes(sc_in);
    const clx::Layer layer = parse_layer(sc_layer);
    const clx::ClassifierParams model = clx::load_classifier(sc_model);
    const std::uint64_t end = sc_end == 0 ? data.size() : sc_end;
    const auto detections = clx::scan_layer(model, layer, data, sc_begin,
                                            end, sc_flags.to_config());
    clx::save_detections(sc_out, detections);
    json cfg = sc_flags.to_json();
    cfg["layer"] = clx::layer_name(layer);
    cfg["begin"] = sc_begin;
    cfg["end"] = end;
    write_manifest(sc_out, "scan", cfg, {sc_in, sc_model}, {sc_out});
    std::cout << detections.size() << " detections\n";
    return 0;
  }

  if (*ex) {
    const clx::Bytes data = clx::load_bytes(ex_in);
    const auto gse_dets = clx::load_detections(ex_gse);
    const auto ip_dets = clx::load_detections(ex_ip);
    const auto bb_dets = ex_bb.empty() ? std::vector<clx::HeaderDetection>{}
                                       : clx::load_detections(ex_bb);
    const auto codes = parse_codes(ex_codes);
    const auto pdus =
        clx::extract_pdus(gse_dets, ip_dets, bb_dets, data, codes);
    clx::save_pdus(ex_out, pdus);
    std::vector<std::string> inputs{ex_in, ex_gse, ex_ip};
    if (!ex_bb.empty()) inputs.push_back(ex_bb);
    std::vector<std::string> outputs{ex_out};
    if (!ex_meta.empty()) {
      std::ofstream mf(ex_meta, std::ios::trunc);
      if (!mf) throw clx::IoError("cannot open " + ex_meta + " for writing");
      for (const clx::ExtractedPdu& p : pdus) {
        json j;
        j["offset_bytes"] = p.offset_bytes;
        j["length"] = p.bytes.size();
        j["truncated"] = p.truncated;
        j["corrected"] = p.corrected;
        mf << j.dump() << '\n';
      }
      outputs.push_back(ex_meta);
    }
    write_manifest(ex_out, "extract", {{"codes", ex_codes}}, inputs,
                   outputs);
    std::cout << pdus.size() << " pdus\n";
    return 0;
  }

  if (*sw) {
    Overlay o{json::object(), sw};
    o.load(sw_config);
    sw_scan.merge_from(o);
    o.merge("rounds", "--rounds", sweep_spec.rounds);
    o.merge("seed", "--seed", sweep_spec.seed);
    o.merge("scan_limit_bytes", "--scan-limit", sweep_spec.scan_limit_bytes);
    if (!sw_degrees.empty()) sweep_spec.degrees = parse_degrees(sw_degrees);
    else if (o.cfg.contains("degrees"))
      sweep_spec.degrees = o.cfg.at("degrees").get<std::vector<double>>();
    if (!sw_ratios.empty()) sweep_spec.ratios = parse_ratios(sw_ratios);
    else if (o.cfg.contains("ratios")) {
      sweep_spec.ratios.clear();
      for (const auto& r : o.cfg.at("ratios"))
        sweep_spec.ratios.push_back(
            parse_ratios(r.get<std::string>()).at(0));
    }
    const auto streams = load_streams(sw_in, sw_ann);
    const auto models = load_models(sw_models);
    const auto rows = clx::corruption_sweep(streams, models, sweep_spec,
                                            sw_scan.to_config());
    clx::write_sweep_csv(sw_out, rows, sw_canonical);
    const std::string table = clx::render_sweep_table(rows);
    std::cout << table;
    std::vector<std::string> outputs{sw_out};
    if (!sw_table.empty()) {
      std::ofstream tf(sw_table, std::ios::trunc);
      if (!tf) throw clx::IoError("cannot open " + sw_table + " for writing");
      tf << table;
      outputs.push_back(sw_table);
    }
    json cfg = sw_scan.to_json();
    cfg["degrees"] = sweep_spec.degrees;
    json ratios = json::array();
    for (const auto& [a, b] : sweep_spec.ratios)
      ratios.push_back(std::to_string(a) + ":" + std::to_string(b));
    cfg["ratios"] = ratios;
    cfg["rounds"] = sweep_spec.rounds;
    cfg["seed"] = sweep_spec.seed;
    cfg["scan_limit_bytes"] = sweep_spec.scan_limit_bytes;
    cfg["canonical"] = sw_canonical;
    std::vector<std::string> inputs = sw_in;
    inputs.insert(inputs.end(), sw_ann.begin(), sw_ann.end());
    inputs.push_back(sw_models);
    write_manifest(sw_out, "sweep", cfg, inputs, outputs);
    return 0;
  }

  if (*tp) {
    clx::AnnotatedStream stream;
    stream.bytes = clx::load_bytes(tp_in);
    const auto models = load_models(tp_models);
    const clx::ThroughputReport report = clx::throughput_report(
        stream, models, tp_scan.to_config(), tp_limit);
    const std::string text = clx::render_throughput(report, tp_canonical);
    std::ofstream f(tp_out, std::ios::trunc);
    if (!f) throw clx::IoError("cannot open " + tp_out + " for writing");
    f << text;
    f.close();
    std::cout << text;
    json cfg = tp_scan.to_json();
    cfg["limit"] = tp_limit;
    cfg["canonical"] = tp_canonical;
    write_manifest(tp_out, "throughput", cfg, {tp_in, tp_models}, {tp_out});
    return 0;
  }

  return 0;
}

}  // namespace
