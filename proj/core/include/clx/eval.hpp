#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clx/fsm_decode.hpp"
#include "clx/recover.hpp"
#include "clx/stream.hpp"

namespace clx {

// Metrics, corruption sweeps over both recovery systems, and efficiency
// reporting.

struct MetricCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;
};

// A metric with a zero denominator is reported as an empty optional, never
// as a NaN.
struct Metrics {
  std::optional<double> acc;
  std::optional<double> precision;
  std::optional<double> recall;  // tp / (tp + fn)
  std::optional<double> f1;
};

Metrics metrics(const MetricCounts& c);

// Exact-offset matching: a detection is a TP iff its offset is annotated
// for the layer. n_candidates is the number of scanned offsets, so
// tp + fp + tn + fn = n_candidates whenever detections and annotations
// both lie inside the candidate set.
MetricCounts confusion_from_detections(
    const std::vector<HeaderDetection>& detections,
    const std::vector<Annotation>& annotations, Layer layer,
    std::uint64_t n_candidates);

struct SweepSpec {
  std::vector<double> degrees = {0.02, 0.04, 0.06, 0.08, 0.10,
                                 0.12, 0.14, 0.16, 0.18, 0.20};
  // gamma1 : gamma2 weightings of the corruption degree.
  std::vector<std::pair<unsigned, unsigned>> ratios = {{1, 3}, {1, 1}, {3, 1}};
  std::size_t rounds = 10;
  std::uint64_t seed = 0;
  // 0 scans whole streams; otherwise each scan stops at this many bytes.
  std::uint64_t scan_limit_bytes = 0;

  void validate() const;
};

struct SweepRow {
  double degree = 0.0;
  std::pair<unsigned, unsigned> ratio{1, 1};
  std::size_t round = 0;
  Layer layer = Layer::bb;
  std::string system;  // "cl" or "fsm"
  MetricCounts counts;
  std::uint64_t headers_found = 0;
  double elapsed_s = 0.0;
};

// For every (degree, ratio, round): corrupt each stream with a derived
// seed, decode with the FSM baseline, scan each layer with its
// classifier, and score both against the annotations. Counts are summed
// over streams; one row per (cell, layer, system).
std::vector<SweepRow> corruption_sweep(
    const std::vector<AnnotatedStream>& streams,
    const std::array<ClassifierParams, 3>& models, const SweepSpec& spec,
    const ScanConfig& scan = {});

// Columns: degree, ratio, round, layer, system, tp, fp, tn, fn, acc,
// precision, recall, f1, headers_found, elapsed_s. Undefined metrics are
// empty fields; canonical zeroes elapsed_s for byte-identical reruns.
void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows,
                     bool canonical = false);

// Mean-over-rounds summary grouped by ratio, one line per
// (degree, layer, system).
std::string render_sweep_table(const std::vector<SweepRow>& rows);

struct ThroughputReport {
  std::array<std::uint64_t, 3> cl_headers{};   // BB, GSE, IP
  std::array<double, 3> cl_elapsed_s{};
  std::array<std::uint64_t, 3> fsm_headers{};
  double fsm_elapsed_s = 0.0;
  std::uint64_t bytes_scanned = 0;
  std::string hardware;
};

// Runs both systems over the same stream prefix and reports wall-clock
// header rates. The comparison carries no pass/fail judgment: rates are
// hardware-dependent.
ThroughputReport throughput_report(
    const AnnotatedStream& stream,
    const std::array<ClassifierParams, 3>& models,
    const ScanConfig& scan = {}, std::uint64_t limit_bytes = 0);

std::string render_throughput(const ThroughputReport& report,
                              bool canonical = false);

}  // namespace clx
