// Microbenchmarks for the hot paths: checksums, the bit channel, FSM
// decoding, encoder inference, and the sliding scan.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include <clx/corruption.hpp>
#include <clx/crc.hpp>
#include <clx/fsm_decode.hpp>
#include <clx/nn.hpp>
#include <clx/recover.hpp>
#include <clx/rng.hpp>
#include <clx/stream.hpp>
#include <clx/train.hpp>

namespace {

clx::Bytes random_buffer(std::size_t n, std::uint64_t seed) {
  clx::rng::Sequence seq(seed);
  clx::Bytes out(n);
  for (auto& b : out) b = std::uint8_t(seq.below(256));
  return out;
}

clx::AnnotatedStream bench_stream(std::uint64_t n_pdus) {
  clx::TrafficSpec spec;
  spec.n_pdus = n_pdus;
  spec.seed = 99;
  return clx::build_stream(spec);
}

clx::ClassifierParams bench_classifier(clx::Layer layer, std::size_t channels) {
  clx::EncoderConfig ec = clx::EncoderConfig::for_layer(layer);
  ec.C = channels;
  ec.D = 16;
  const auto trunk = clx::init_encoder(ec, 7);
  return clx::init_classifier(trunk, 64, 8);
}

void bm_crc32(benchmark::State& state) {
  const clx::Bytes data = random_buffer(std::size_t(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(clx::crc32(data));
  state.SetBytesProcessed(std::int64_t(state.iterations()) * state.range(0));
}
BENCHMARK(bm_crc32)->Arg(1 << 10)->Arg(1 << 16);

void bm_crc8_header(benchmark::State& state) {
  const clx::Bytes data = random_buffer(9, 2);
  for (auto _ : state) benchmark::DoNotOptimize(clx::crc8(data));
}
BENCHMARK(bm_crc8_header);

void bm_channel(benchmark::State& state) {
  const clx::Bytes data = random_buffer(std::size_t(state.range(0)), 3);
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(clx::corrupt_bits(data, {0.1, 0.1, seed++}));
  state.SetBytesProcessed(std::int64_t(state.iterations()) * state.range(0));
}
BENCHMARK(bm_channel)->Arg(1 << 16)->Arg(1 << 20);

void bm_fsm_decode(benchmark::State& state) {
  const auto stream = bench_stream(std::uint64_t(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(clx::fsm_decode(stream.bytes));
  state.SetBytesProcessed(std::int64_t(state.iterations()) *
                          std::int64_t(stream.bytes.size()));
}
BENCHMARK(bm_fsm_decode)->Arg(200)->Arg(1000);

void bm_trunk_forward(benchmark::State& state) {
  const auto model =
      bench_classifier(clx::Layer::gse, std::size_t(state.range(0)));
  const clx::Bytes data = random_buffer(64, 4);
  const auto w = clx::window_from_stream(data, 0, model.trunk.cfg.T);
  for (auto _ : state)
    benchmark::DoNotOptimize(clx::classifier_forward(model, w));
}
BENCHMARK(bm_trunk_forward)->Arg(24)->Arg(64);

void bm_scan_layer(benchmark::State& state) {
  const auto stream = bench_stream(50);
  const auto model = bench_classifier(clx::Layer::bb, 24);
  const std::uint64_t limit = std::min<std::uint64_t>(2048, stream.bytes.size());
  for (auto _ : state)
    benchmark::DoNotOptimize(clx::scan_layer(model, clx::Layer::bb,
                                             stream.bytes, 0, limit, {}));
  state.SetItemsProcessed(std::int64_t(state.iterations()) *
                          std::int64_t(limit));
}
BENCHMARK(bm_scan_layer);

void bm_ntxent_batch(benchmark::State& state) {
  clx::EncoderConfig ec{80, 16, 4, 3, 16};
  const auto params = clx::init_encoder(ec, 5);
  clx::rng::Sequence seq(6);
  std::vector<clx::Window> views;
  for (int i = 0; i < 32; ++i) {
    clx::Window w;
    w.bits.resize(ec.T);
    for (auto& b : w.bits) b = std::uint8_t(seq.below(2));
    views.push_back(std::move(w));
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(clx::ntxent_gradients(params, views, 0.5));
}
BENCHMARK(bm_ntxent_batch);

}  // namespace

BENCHMARK_MAIN();
