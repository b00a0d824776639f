#include "clx/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "clx/corruption.hpp"
#include "clx/error.hpp"
#include "clx/rng.hpp"

namespace clx {

Metrics metrics(const MetricCounts& c) {
  Metrics m;
  const std::uint64_t total = c.tp + c.fp + c.tn + c.fn;
  if (total > 0) m.acc = double(c.tp + c.tn) / double(total);
  if (c.tp + c.fp > 0) m.precision = double(c.tp) / double(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = double(c.tp) / double(c.tp + c.fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0)
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  return m;
}

namespace {

MetricCounts confusion_from_offsets(
    const std::vector<std::uint64_t>& detected,
    const std::unordered_set<std::uint64_t>& annotated,
    std::uint64_t n_candidates) {
  MetricCounts c;
  std::unordered_set<std::uint64_t> hit;
  for (std::uint64_t off : detected) {
    if (annotated.count(off)) {
      ++c.tp;
      hit.insert(off);
    } else {
      ++c.fp;
    }
  }
  c.fn = annotated.size() - hit.size();
  const std::uint64_t used = c.tp + c.fp + c.fn;
  c.tn = n_candidates > used ? n_candidates - used : 0;
  return c;
}

std::unordered_set<std::uint64_t> annotated_offsets_in(
    const std::vector<Annotation>& annotations, Layer layer,
    std::uint64_t region_end, std::size_t t_bytes, std::uint64_t data_size) {
  std::unordered_set<std::uint64_t> set;
  for (const Annotation& a : annotations)
    if (a.layer == layer && a.offset_bytes < region_end &&
        a.offset_bytes + t_bytes <= data_size)
      set.insert(a.offset_bytes);
  return set;
}

std::uint64_t candidate_count(std::uint64_t region_end, std::size_t stride,
                              std::size_t t_bytes, std::uint64_t data_size) {
  std::uint64_t n = 0;
  for (std::uint64_t off = 0; off < region_end; off += stride) {
    if (off + t_bytes > data_size) break;
    ++n;
  }
  return n;
}

}  // namespace

MetricCounts confusion_from_detections(
    const std::vector<HeaderDetection>& detections,
    const std::vector<Annotation>& annotations, Layer layer,
    std::uint64_t n_candidates) {
  std::unordered_set<std::uint64_t> annotated;
  for (const Annotation& a : annotations)
    if (a.layer == layer) annotated.insert(a.offset_bytes);
  std::vector<std::uint64_t> offsets;
  offsets.reserve(detections.size());
  for (const HeaderDetection& d : detections)
    offsets.push_back(d.offset_bytes);
  return confusion_from_offsets(offsets, annotated, n_candidates);
}

void SweepSpec::validate() const {
  if (degrees.empty()) throw ConfigError("sweep needs at least one degree");
  for (double d : degrees)
    if (!(d >= 0.0) || !(d <= 1.0))
      throw ConfigError("corruption degree must lie in [0,1]");
  for (const auto& [a, b] : ratios)
    if (a + b == 0) throw ConfigError("ratio weights must not both be zero");
  if (rounds < 1) throw ConfigError("sweep needs at least one round");
}

std::vector<SweepRow> corruption_sweep(
    const std::vector<AnnotatedStream>& streams,
    const std::array<ClassifierParams, 3>& models, const SweepSpec& spec,
    const ScanConfig& scan) {
  spec.validate();
  scan.validate();
  const std::uint64_t base = rng::derive(spec.seed, "sweep");
  const std::array<Layer, 3> layers{Layer::bb, Layer::gse, Layer::ip};

  std::vector<SweepRow> rows;
  for (std::size_t di = 0; di < spec.degrees.size(); ++di) {
    const double degree = spec.degrees[di];
    for (std::size_t ri = 0; ri < spec.ratios.size(); ++ri) {
      const auto [wa, wb] = spec.ratios[ri];
      const double gamma1 = degree * wa / double(wa + wb);
      const double gamma2 = degree * wb / double(wa + wb);
      for (std::size_t round = 0; round < spec.rounds; ++round) {
        std::array<SweepRow, 3> cl_rows, fsm_rows;
        for (std::size_t li = 0; li < 3; ++li) {
          for (SweepRow* r : {&cl_rows[li], &fsm_rows[li]}) {
            r->degree = degree;
            r->ratio = spec.ratios[ri];
            r->round = round;
            r->layer = layers[li];
          }
          cl_rows[li].system = "cl";
          fsm_rows[li].system = "fsm";
        }

        for (std::size_t si = 0; si < streams.size(); ++si) {
          const std::uint64_t seed = rng::mix(
              rng::mix(rng::mix(rng::mix(base, di), ri), round), si);
          const Bytes data =
              corrupt_bits(streams[si].bytes, {gamma1, gamma2, seed});
          const std::uint64_t limit =
              spec.scan_limit_bytes == 0
                  ? data.size()
                  : std::min<std::uint64_t>(spec.scan_limit_bytes,
                                            data.size());

          const DecodeReport fsm = fsm_decode(data);

          for (std::size_t li = 0; li < 3; ++li) {
            const Layer layer = layers[li];
            const std::size_t t_bytes = window_bits_for(layer) / 8;
            const std::uint64_t n_cand =
                candidate_count(limit, scan.stride, t_bytes, data.size());
            const auto annotated = annotated_offsets_in(
                streams[si].annotations, layer, limit, t_bytes, data.size());

            const auto t0 = std::chrono::steady_clock::now();
            const auto detections =
                scan_layer(models[li], layer, data, 0, limit, scan);
            const auto t1 = std::chrono::steady_clock::now();

            std::vector<std::uint64_t> cl_offsets;
            for (const HeaderDetection& d : detections)
              cl_offsets.push_back(d.offset_bytes);
            const MetricCounts cl_c =
                confusion_from_offsets(cl_offsets, annotated, n_cand);
            cl_rows[li].counts.tp += cl_c.tp;
            cl_rows[li].counts.fp += cl_c.fp;
            cl_rows[li].counts.tn += cl_c.tn;
            cl_rows[li].counts.fn += cl_c.fn;
            cl_rows[li].headers_found += cl_offsets.size();
            cl_rows[li].elapsed_s +=
                std::chrono::duration<double>(t1 - t0).count();

            const std::vector<std::uint64_t>* fsm_all =
                layer == Layer::bb    ? &fsm.bb_offsets
                : layer == Layer::gse ? &fsm.gse_offsets
                                      : &fsm.ip_offsets;
            std::vector<std::uint64_t> fsm_offsets;
            for (std::uint64_t off : *fsm_all)
              if (off < limit && off + t_bytes <= data.size())
                fsm_offsets.push_back(off);
            const MetricCounts fsm_c =
                confusion_from_offsets(fsm_offsets, annotated, n_cand);
            fsm_rows[li].counts.tp += fsm_c.tp;
            fsm_rows[li].counts.fp += fsm_c.fp;
            fsm_rows[li].counts.tn += fsm_c.tn;
            fsm_rows[li].counts.fn += fsm_c.fn;
            fsm_rows[li].headers_found += fsm_offsets.size();
            fsm_rows[li].elapsed_s += fsm.elapsed_s;
          }
        }
        for (std::size_t li = 0; li < 3; ++li) {
          rows.push_back(std::move(cl_rows[li]));
          rows.push_back(std::move(fsm_rows[li]));
        }
      }
    }
  }
  return rows;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

std::string ratio_text(std::pair<unsigned, unsigned> r) {
  return std::to_string(r.first) + ":" + std::to_string(r.second);
}

}  // namespace

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows, bool canonical) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "degree,ratio,round,layer,system,tp,fp,tn,fn,acc,precision,recall,"
       "f1,headers_found,elapsed_s\n";
  for (const SweepRow& r : rows) {
    const Metrics m = metrics(r.counts);
    f << fmt_double(r.degree) << ',' << ratio_text(r.ratio) << ',' << r.round
      << ',' << layer_name(r.layer) << ',' << r.system << ',' << r.counts.tp
      << ',' << r.counts.fp << ',' << r.counts.tn << ',' << r.counts.fn
      << ',' << fmt_opt(m.acc) << ',' << fmt_opt(m.precision) << ','
      << fmt_opt(m.recall) << ',' << fmt_opt(m.f1) << ',' << r.headers_found
      << ',' << fmt_double(canonical ? 0.0 : r.elapsed_s) << '\n';
  }
  if (!f) throw IoError("short write to " + path);
}

std::string render_sweep_table(const std::vector<SweepRow>& rows) {
  // Cell key: (ratio, degree, layer, system), averaged over rounds.
  struct Cell {
    double acc = 0, prec = 0, rec = 0, f1 = 0, headers = 0;
    std::size_t n_acc = 0, n_prec = 0, n_rec = 0, n_f1 = 0, n = 0;
  };
  std::vector<std::pair<std::tuple<unsigned, unsigned, double, int, int>,
                        Cell>>
      cells;
  auto cell_for = [&](const SweepRow& r) -> Cell& {
    const std::tuple<unsigned, unsigned, double, int, int> key{
        r.ratio.first, r.ratio.second, r.degree, int(r.layer),
        r.system == "fsm"};
    for (auto& [k, c] : cells)
      if (k == key) return c;
    cells.emplace_back(key, Cell{});
    return cells.back().second;
  };
  for (const SweepRow& r : rows) {
    Cell& c = cell_for(r);
    const Metrics m = metrics(r.counts);
    if (m.acc) c.acc += *m.acc, ++c.n_acc;
    if (m.precision) c.prec += *m.precision, ++c.n_prec;
    if (m.recall) c.rec += *m.recall, ++c.n_rec;
    if (m.f1) c.f1 += *m.f1, ++c.n_f1;
    c.headers += double(r.headers_found);
    ++c.n;
  }

  std::ostringstream out;
  auto avg = [](double sum, std::size_t n) {
    return n ? sum / double(n) : 0.0;
  };
  std::pair<unsigned, unsigned> last_ratio{~0u, ~0u};
  for (const auto& [key, c] : cells) {
    const auto& [ra, rb, degree, layer_i, is_fsm] = key;
    if (std::pair{ra, rb} != last_ratio) {
      last_ratio = {ra, rb};
      out << "ratio " << ra << ":" << rb << "\n";
      char head[160];
      std::snprintf(head, sizeof(head),
                    "  %-7s %-5s %-6s %8s %8s %8s %8s %10s\n", "degree",
                    "layer", "system", "acc", "prec", "recall", "f1",
                    "headers");
      out << head;
    }
    char line[200];
    std::snprintf(line, sizeof(line),
                  "  %-7.3f %-5s %-6s %8.4f %8.4f %8.4f %8.4f %10.1f\n",
                  degree, layer_name(Layer(layer_i)), is_fsm ? "fsm" : "cl",
                  avg(c.acc, c.n_acc), avg(c.prec, c.n_prec),
                  avg(c.rec, c.n_rec), avg(c.f1, c.n_f1),
                  avg(c.headers, c.n));
    out << line;
  }
  return out.str();
}

namespace {

std::string hardware_description() {
  std::string model = "unknown cpu";
  std::ifstream f("/proc/cpuinfo");
  std::string line;
  while (std::getline(f, line)) {
    const auto pos = line.find("model name");
    if (pos == std::string::npos) continue;
    const auto colon = line.find(':');
    if (colon != std::string::npos && colon + 2 <= line.size()) {
      model = line.substr(colon + 1);
      while (!model.empty() && model.front() == ' ') model.erase(0, 1);
    }
    break;
  }
  return model + ", " +
         std::to_string(std::thread::hardware_concurrency()) +
         " hardware threads";
}

}  // namespace

ThroughputReport throughput_report(
    const AnnotatedStream& stream,
    const std::array<ClassifierParams, 3>& models, const ScanConfig& scan,
    std::uint64_t limit_bytes) {
  const std::uint64_t limit =
      limit_bytes == 0 ? stream.bytes.size()
                       : std::min<std::uint64_t>(limit_bytes,
                                                 stream.bytes.size());
  ThroughputReport report;
  report.bytes_scanned = limit;
  report.hardware = hardware_description();
  const std::array<Layer, 3> layers{Layer::bb, Layer::gse, Layer::ip};
  for (std::size_t li = 0; li < 3; ++li) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto detections =
        scan_layer(models[li], layers[li], stream.bytes, 0, limit, scan);
    const auto t1 = std::chrono::steady_clock::now();
    report.cl_headers[li] = detections.size();
    report.cl_elapsed_s[li] = std::chrono::duration<double>(t1 - t0).count();
  }
  const DecodeReport fsm = fsm_decode(
      std::span<const std::uint8_t>(stream.bytes).subspan(0, limit));
  report.fsm_headers = {fsm.bb_offsets.size(), fsm.gse_offsets.size(),
                        fsm.ip_offsets.size()};
  report.fsm_elapsed_s = fsm.elapsed_s;
  return report;
}

std::string render_throughput(const ThroughputReport& report,
                              bool canonical) {
  const std::array<const char*, 3> names{"BB", "GSE", "IP"};
  std::ostringstream out;
  out << "hardware: " << report.hardware << "\n";
  out << "bytes scanned: " << report.bytes_scanned << "\n";
  char head[160];
  std::snprintf(head, sizeof(head), "%-5s %12s %14s %12s %14s %10s\n",
                "layer", "cl headers", "cl headers/s", "fsm headers",
                "fsm headers/s", "cl/fsm");
  out << head;
  for (std::size_t li = 0; li < 3; ++li) {
    const double cl_rate =
        canonical || report.cl_elapsed_s[li] <= 0.0
            ? 0.0
            : double(report.cl_headers[li]) / report.cl_elapsed_s[li];
    const double fsm_rate =
        canonical || report.fsm_elapsed_s <= 0.0
            ? 0.0
            : double(report.fsm_headers[li]) / report.fsm_elapsed_s;
    const double ratio = fsm_rate > 0.0 ? cl_rate / fsm_rate : 0.0;
    char line[200];
    std::snprintf(line, sizeof(line), "%-5s %12llu %14.2f %12llu %14.2f %10.2f\n",
                  names[li],
                  static_cast<unsigned long long>(report.cl_headers[li]),
                  cl_rate,
                  static_cast<unsigned long long>(report.fsm_headers[li]),
                  fsm_rate, ratio);
    out << line;
  }
  return out.str();
}

}  // namespace clx
