#include "clx/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <iostream>

#include "clx/bits.hpp"
#include "clx/error.hpp"
#include "clx/rng.hpp"

namespace clx {

std::size_t window_bits_for(Layer layer) {
  switch (layer) {
    case Layer::bb: return 80;
    case Layer::gse: return 96;
    default: return 160;
  }
}

EncoderConfig EncoderConfig::for_layer(Layer layer) {
  EncoderConfig cfg;
  cfg.T = window_bits_for(layer);
  cfg.finalize();
  return cfg;
}

void EncoderConfig::finalize() {
  if (T == 0 || T % 8 != 0)
    throw ConfigError("T must be a positive multiple of 8 bits");
  if (C == 0 || D == 0) throw ConfigError("C and D must be positive");
  if (L == 0 || L > 32) throw ConfigError("L must lie in [1, 32]");
  if (K == 0 || K % 2 == 0) throw ConfigError("K must be odd");
  if (dilations.empty()) {
    dilations.resize(L);
    for (std::size_t l = 0; l < L; ++l)
      dilations[l] = std::size_t(1) << std::min<std::size_t>(l, 30);
  }
  if (dilations.size() != L)
    throw ConfigError("dilations must have exactly L entries");
  for (std::size_t d : dilations)
    if (d == 0) throw ConfigError("dilation factors must be positive");
}

namespace {

struct Offsets {
  std::size_t w_in, b_in, conv, conv_stride, w_out, b_out, total;
};

Offsets offsets_of(const EncoderConfig& cfg) {
  Offsets o{};
  const std::size_t kcc = cfg.K * cfg.C * cfg.C;
  o.w_in = 0;
  o.b_in = cfg.C;
  o.conv = 2 * cfg.C;
  o.conv_stride = kcc + cfg.C;
  o.w_out = o.conv + cfg.L * o.conv_stride;
  o.b_out = o.w_out + cfg.D * cfg.C;
  o.total = o.b_out + cfg.D;
  return o;
}

}  // namespace

std::size_t encoder_param_count(const EncoderConfig& cfg) {
  return offsets_of(cfg).total;
}

std::span<double> EncoderParams::w_in() {
  return {p.data() + offsets_of(cfg).w_in, cfg.C};
}
std::span<double> EncoderParams::b_in() {
  return {p.data() + offsets_of(cfg).b_in, cfg.C};
}
std::span<double> EncoderParams::w_conv(std::size_t l) {
  const auto o = offsets_of(cfg);
  return {p.data() + o.conv + l * o.conv_stride, cfg.K * cfg.C * cfg.C};
}
std::span<double> EncoderParams::b_conv(std::size_t l) {
  const auto o = offsets_of(cfg);
  return {p.data() + o.conv + l * o.conv_stride + cfg.K * cfg.C * cfg.C,
          cfg.C};
}
std::span<double> EncoderParams::w_out() {
  return {p.data() + offsets_of(cfg).w_out, cfg.D * cfg.C};
}
std::span<double> EncoderParams::b_out() {
  return {p.data() + offsets_of(cfg).b_out, cfg.D};
}
std::span<const double> EncoderParams::w_in() const {
  return {p.data() + offsets_of(cfg).w_in, cfg.C};
}
std::span<const double> EncoderParams::b_in() const {
  return {p.data() + offsets_of(cfg).b_in, cfg.C};
}
std::span<const double> EncoderParams::w_conv(std::size_t l) const {
  const auto o = offsets_of(cfg);
  return {p.data() + o.conv + l * o.conv_stride, cfg.K * cfg.C * cfg.C};
}
std::span<const double> EncoderParams::b_conv(std::size_t l) const {
  const auto o = offsets_of(cfg);
  return {p.data() + o.conv + l * o.conv_stride + cfg.K * cfg.C * cfg.C,
          cfg.C};
}
std::span<const double> EncoderParams::w_out() const {
  return {p.data() + offsets_of(cfg).w_out, cfg.D * cfg.C};
}
std::span<const double> EncoderParams::b_out() const {
  return {p.data() + offsets_of(cfg).b_out, cfg.D};
}

namespace {

/// Uniform He-style fan-in fill: w ~ U(-g*sqrt(6/fan_in), +g*sqrt(6/fan_in)).
void fill_uniform(std::span<double> w, std::size_t fan_in, double gain,
                  std::uint64_t seed, std::uint64_t& index) {
  const double limit = gain * std::sqrt(6.0 / double(fan_in));
  for (double& v : w)
    v = (rng::u01(seed, index++) * 2.0 - 1.0) * limit;
}

}  // namespace

EncoderParams init_encoder(EncoderConfig cfg, std::uint64_t seed) {
  cfg.finalize();
  EncoderParams params;
  params.cfg = cfg;
  params.p.assign(encoder_param_count(cfg), 0.0);
  std::uint64_t index = 0;
  const std::uint64_t s = rng::derive(seed, "encoder-init");
  // Residual branches start at 1/sqrt(2L) of the He limit; a norm-free
  // stack of L rectified residual adds otherwise amplifies activations
  // with depth.
  const double branch_gain = 1.0 / std::sqrt(2.0 * double(cfg.L));
  fill_uniform(params.w_in(), 1, 1.0, s, index);
  for (std::size_t l = 0; l < cfg.L; ++l)
    fill_uniform(params.w_conv(l), cfg.C * cfg.K, branch_gain, s, index);
  fill_uniform(params.w_out(), cfg.C, 1.0, s, index);

  // Pooled ReLU activations share a large positive offset, so fresh
  // embeddings start near-parallel and the contrastive gradient is noise.
  // Center b_out on the mean projection of seeded probe windows to cancel
  // the shared component.
  {
    const std::size_t n_probe = 16;
    rng::Sequence probe(rng::derive(seed, "init-center"));
    std::vector<std::uint8_t> bits(cfg.T);
    std::vector<double> hbar(cfg.C), mean(cfg.C, 0.0);
    for (std::size_t i = 0; i < n_probe; ++i) {
      for (auto& b : bits) b = std::uint8_t(probe.below(2));
      trunk_forward(params, bits.data(), nullptr, hbar.data());
      for (std::size_t c = 0; c < cfg.C; ++c) mean[c] += hbar[c];
    }
    for (std::size_t c = 0; c < cfg.C; ++c) mean[c] /= double(n_probe);
    const auto w = params.w_out();
    const auto b = params.b_out();
    for (std::size_t d = 0; d < cfg.D; ++d) {
      double z = 0.0;
      for (std::size_t c = 0; c < cfg.C; ++c) z += w[d * cfg.C + c] * mean[c];
      b[d] = -z;
    }
  }
  return params;
}

Window window_from_stream(std::span<const std::uint8_t> bytes,
                          std::uint64_t offset_bytes, std::size_t t_bits) {
  if (t_bits % 8 != 0)
    throw ConfigError("window length must be a multiple of 8 bits");
  if (offset_bytes + t_bits / 8 > bytes.size())
    throw InputSizeError("window of " + std::to_string(t_bits) +
                         " bits at offset " + std::to_string(offset_bytes) +
                         " exceeds stream of " +
                         std::to_string(bytes.size()) + " bytes");
  Window w;
  w.bits.resize(t_bits);
  for (std::size_t i = 0; i < t_bits; ++i)
    w.bits[i] = std::uint8_t(get_bit(bytes, offset_bytes * 8 + i));
  return w;
}

Window window_from_header(std::span<const std::uint8_t> header_bytes,
                          std::size_t t_bits) {
  if (header_bytes.size() * 8 > t_bits)
    throw InputSizeError("header of " +
                         std::to_string(header_bytes.size() * 8) +
                         " bits does not fit a " + std::to_string(t_bits) +
                         "-bit window");
  Window w;
  w.bits.assign(t_bits, 0);
  for (std::size_t i = 0; i < header_bytes.size() * 8; ++i)
    w.bits[i] = std::uint8_t(get_bit(header_bytes, i));
  return w;
}

void trunk_forward(const EncoderParams& params, const std::uint8_t* bits,
                   EncoderTrace* trace, double* hbar) {
  const auto& cfg = params.cfg;
  const std::size_t T = cfg.T, C = cfg.C, L = cfg.L, K = cfg.K;
  const std::size_t slab = T * C;

  std::vector<double> local;
  double* h;
  if (trace) {
    trace->h.assign((L + 1) * slab, 0.0);
    h = trace->h.data();
  } else {
    local.assign(2 * slab, 0.0);
    h = local.data();
  }

  // Input lift, one affine per position.
  {
    const auto w = params.w_in();
    const auto b = params.b_in();
    double* h0 = h;
    for (std::size_t t = 0; t < T; ++t) {
      const double x = double(bits[t]);
      for (std::size_t c = 0; c < C; ++c) h0[t * C + c] = w[c] * x + b[c];
    }
  }

  std::vector<double> acc(C);
  const std::ptrdiff_t half = std::ptrdiff_t(K / 2);
  for (std::size_t l = 0; l < L; ++l) {
    const double* in = trace ? h + l * slab : h + (l % 2) * slab;
    double* out = trace ? h + (l + 1) * slab : h + ((l + 1) % 2) * slab;
    const auto w = params.w_conv(l);
    const auto b = params.b_conv(l);
    const std::ptrdiff_t d = std::ptrdiff_t(cfg.dilations[l]);
    for (std::size_t t = 0; t < T; ++t) {
      std::copy(b.begin(), b.end(), acc.begin());
      for (std::size_t k = 0; k < K; ++k) {
        const std::ptrdiff_t tau =
            std::ptrdiff_t(t) + (std::ptrdiff_t(k) - half) * d;
        if (tau < 0 || tau >= std::ptrdiff_t(T)) continue;
        const double* x = in + std::size_t(tau) * C;
        const double* wk = w.data() + k * C * C;
        for (std::size_t o = 0; o < C; ++o) {
          const double* row = wk + o * C;
          double s = 0.0;
          for (std::size_t i = 0; i < C; ++i) s += row[i] * x[i];
          acc[o] += s;
        }
      }
      for (std::size_t o = 0; o < C; ++o) {
        const double pre = in[t * C + o] + acc[o];
        out[t * C + o] = pre > 0.0 ? pre : 0.0;
      }
    }
  }

  const double* last = trace ? h + L * slab : h + (L % 2) * slab;
  for (std::size_t c = 0; c < C; ++c) hbar[c] = 0.0;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) hbar[c] += last[t * C + c];
  const double inv = 1.0 / double(T);
  for (std::size_t c = 0; c < C; ++c) hbar[c] *= inv;
}

void trunk_backward(const EncoderParams& params, const std::uint8_t* bits,
                    const EncoderTrace& trace, const double* g_hbar,
                    std::span<double> grad) {
  const auto& cfg = params.cfg;
  const std::size_t T = cfg.T, C = cfg.C, L = cfg.L, K = cfg.K;
  const std::size_t slab = T * C;
  const auto off = offsets_of(cfg);

  // Mean pool spreads the gradient uniformly over positions.
  std::vector<double> g_out(slab), g_in(slab);
  const double inv = 1.0 / double(T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) g_out[t * C + c] = g_hbar[c] * inv;

  const std::ptrdiff_t half = std::ptrdiff_t(K / 2);
  for (std::size_t l = L; l-- > 0;) {
    const double* in = trace.h.data() + l * slab;
    const double* out = trace.h.data() + (l + 1) * slab;
    const auto w = params.w_conv(l);
    double* g_w = grad.data() + off.conv + l * off.conv_stride;
    double* g_b = g_w + K * C * C;
    const std::ptrdiff_t d = std::ptrdiff_t(cfg.dilations[l]);

    // ReLU mask in place, then residual passthrough.
    for (std::size_t i = 0; i < slab; ++i)
      if (out[i] <= 0.0) g_out[i] = 0.0;
    std::copy(g_out.begin(), g_out.end(), g_in.begin());

    for (std::size_t t = 0; t < T; ++t) {
      const double* gp = g_out.data() + t * C;
      for (std::size_t k = 0; k < K; ++k) {
        const std::ptrdiff_t tau =
            std::ptrdiff_t(t) + (std::ptrdiff_t(k) - half) * d;
        if (tau < 0 || tau >= std::ptrdiff_t(T)) continue;
        const double* x = in + std::size_t(tau) * C;
        double* gx = g_in.data() + std::size_t(tau) * C;
        const double* wk = w.data() + k * C * C;
        double* gwk = g_w + k * C * C;
        for (std::size_t o = 0; o < C; ++o) {
          const double g = gp[o];
          if (g == 0.0) continue;
          const double* row = wk + o * C;
          double* grow = gwk + o * C;
          for (std::size_t i = 0; i < C; ++i) {
            grow[i] += g * x[i];
            gx[i] += g * row[i];
          }
        }
      }
      for (std::size_t o = 0; o < C; ++o) g_b[o] += gp[o];
    }
    std::swap(g_out, g_in);
  }

  double* g_w_in = grad.data() + off.w_in;
  double* g_b_in = grad.data() + off.b_in;
  for (std::size_t t = 0; t < T; ++t) {
    const double x = double(bits[t]);
    const double* g0 = g_out.data() + t * C;
    for (std::size_t c = 0; c < C; ++c) {
      g_w_in[c] += g0[c] * x;
      g_b_in[c] += g0[c];
    }
  }
}

namespace {

void check_window(const EncoderConfig& cfg, const Window& w) {
  if (w.bits.size() != cfg.T)
    throw ConfigError("window of " + std::to_string(w.bits.size()) +
                      " bits does not match T=" + std::to_string(cfg.T));
}

// z = w_out · hbar + b_out.
void encoder_head_forward(const EncoderParams& params, const double* hbar,
                          double* z) {
  const std::size_t C = params.cfg.C, D = params.cfg.D;
  const auto w = params.w_out();
  const auto b = params.b_out();
  for (std::size_t d = 0; d < D; ++d) {
    double s = b[d];
    const double* row = w.data() + d * C;
    for (std::size_t c = 0; c < C; ++c) s += row[c] * hbar[c];
    z[d] = s;
  }
}

}  // namespace

std::vector<double> encoder_forward(const EncoderParams& params,
                                    const Window& w) {
  check_window(params.cfg, w);
  std::vector<double> hbar(params.cfg.C);
  trunk_forward(params, w.bits.data(), nullptr, hbar.data());
  std::vector<double> z(params.cfg.D);
  encoder_head_forward(params, hbar.data(), z.data());
  return z;
}

std::vector<double> trunk_pooled(const EncoderParams& params, const Window& w) {
  check_window(params.cfg, w);
  std::vector<double> hbar(params.cfg.C);
  trunk_forward(params, w.bits.data(), nullptr, hbar.data());
  return hbar;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ConfigError("cosine similarity needs equal dimensions");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true))
      std::cerr << "clx: cosine similarity of a zero vector, defining 0\n";
    return 0.0;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

// Pairwise cosine table and per-row softmax statistics shared by the loss
// and its gradient. Row a holds p[a][k] = exp(s_ak/tau) normalized over
// k != a.
struct NtxentTables {
  std::size_t n = 0;
  std::vector<double> s;  // n*n cosine, diagonal unused
  std::vector<double> p;  // n*n softmax weights, diagonal zero
  double loss = 0.0;
};

NtxentTables ntxent_tables(const std::vector<std::vector<double>>& z,
                           double tau) {
  if (tau <= 0.0) throw ConfigError("temperature must be positive");
  const std::size_t n = z.size();
  if (n < 2 || n % 2 != 0)
    throw ConfigError("ntxent needs an even batch of at least 2 views");

  NtxentTables tb;
  tb.n = n;
  tb.s.assign(n * n, 0.0);
  tb.p.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double s = cosine_similarity(z[a], z[b]);
      tb.s[a * n + b] = s;
      tb.s[b * n + a] = s;
    }

  double loss = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t partner = a ^ 1;
    double mx = -1e300;
    for (std::size_t k = 0; k < n; ++k)
      if (k != a) mx = std::max(mx, tb.s[a * n + k] / tau);
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == a) continue;
      const double e = std::exp(tb.s[a * n + k] / tau - mx);
      tb.p[a * n + k] = e;
      denom += e;
    }
    for (std::size_t k = 0; k < n; ++k) tb.p[a * n + k] /= denom;
    const double lse = mx + std::log(denom);
    loss += -tb.s[a * n + partner] / tau + lse;
  }
  tb.loss = loss / double(n);
  return tb;
}

}  // namespace

double ntxent_loss(const std::vector<std::vector<double>>& z, double tau) {
  return ntxent_tables(z, tau).loss;
}

GradResult ntxent_gradients(const EncoderParams& params,
                            const std::vector<Window>& views, double tau) {
  const std::size_t n = views.size();
  if (n < 2 || n % 2 != 0)
    throw ConfigError("ntxent needs an even batch of at least 2 views");
  for (const Window& w : views) check_window(params.cfg, w);
  const std::size_t C = params.cfg.C, D = params.cfg.D;

  // Pass 1: representations only.
  std::vector<std::vector<double>> hbar(n, std::vector<double>(C));
  std::vector<std::vector<double>> z(n, std::vector<double>(D));
  for (std::size_t a = 0; a < n; ++a) {
    trunk_forward(params, views[a].bits.data(), nullptr, hbar[a].data());
    encoder_head_forward(params, hbar[a].data(), z[a].data());
  }

  const NtxentTables tb = ntxent_tables(z, tau);

  // d(loss)/d(s_ab) as a symmetric coefficient table. Ordered slot (a,b)
  // carries (p[a][b] - [b = partner(a)]) / (n * tau); both orders then
  // feed the cosine backward of the unordered pair.
  std::vector<double> coeff(n * n, 0.0);
  const double scale = 1.0 / (double(n) * tau);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      double g = tb.p[a * n + b];
      if (b == (a ^ 1)) g -= 1.0;
      coeff[a * n + b] = g * scale;
    }

  // d(loss)/d(z_a) through cosine: sum over partners of
  // (coeff[a][b] + coeff[b][a]) * (zhat_b - s_ab zhat_a) / |z_a|.
  std::vector<double> norms(n);
  std::vector<std::vector<double>> zhat(n, std::vector<double>(D));
  for (std::size_t a = 0; a < n; ++a) {
    double nn = 0.0;
    for (double v : z[a]) nn += v * v;
    norms[a] = std::sqrt(nn);
    if (norms[a] > 0.0)
      for (std::size_t d = 0; d < D; ++d) zhat[a][d] = z[a][d] / norms[a];
  }
  std::vector<std::vector<double>> g_z(n, std::vector<double>(D, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    if (norms[a] == 0.0) continue;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      const double m = coeff[a * n + b] + coeff[b * n + a];
      if (m == 0.0 || norms[b] == 0.0) continue;
      const double s = tb.s[a * n + b];
      for (std::size_t d = 0; d < D; ++d)
        g_z[a][d] += m * (zhat[b][d] - s * zhat[a][d]) / norms[a];
    }
  }

  // Pass 2: re-forward per view with a trace and accumulate parameter
  // gradients. Chunked with a fixed reduction order so the result is
  // independent of the worker count.
  const std::size_t P = encoder_param_count(params.cfg);
  const auto off = offsets_of(params.cfg);
  constexpr std::size_t n_chunks = 16;
  std::vector<std::vector<double>> partial(n_chunks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < std::ptrdiff_t(n_chunks); ++ci) {
    const std::size_t c = std::size_t(ci);
    const std::size_t lo = c * n / n_chunks;
    const std::size_t hi = (c + 1) * n / n_chunks;
    if (lo == hi) continue;
    partial[c].assign(P, 0.0);
    EncoderTrace trace;
    std::vector<double> hb(C), g_hbar(C);
    for (std::size_t a = lo; a < hi; ++a) {
      trunk_forward(params, views[a].bits.data(), &trace, hb.data());
      // Head backward: g_hbar = w_out^T g_z; weight grads direct.
      double* g_w_out = partial[c].data() + off.w_out;
      double* g_b_out = partial[c].data() + off.b_out;
      std::fill(g_hbar.begin(), g_hbar.end(), 0.0);
      const auto w_out = params.w_out();
      for (std::size_t d = 0; d < D; ++d) {
        const double g = g_z[a][d];
        if (g == 0.0) continue;
        g_b_out[d] += g;
        const double* row = w_out.data() + d * C;
        double* grow = g_w_out + d * C;
        for (std::size_t cc = 0; cc < C; ++cc) {
          grow[cc] += g * hb[cc];
          g_hbar[cc] += g * row[cc];
        }
      }
      trunk_backward(params, views[a].bits.data(), trace, g_hbar.data(),
                     partial[c]);
    }
  }

  GradResult r;
  r.loss = tb.loss;
  r.grad.assign(P, 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    if (partial[c].empty()) continue;
    for (std::size_t j = 0; j < P; ++j) r.grad[j] += partial[c][j];
  }
  return r;
}

std::span<double> ClassifierParams::w1() {
  return {head.data(), hidden * trunk.cfg.C};
}
std::span<double> ClassifierParams::b1() {
  return {head.data() + hidden * trunk.cfg.C, hidden};
}
std::span<double> ClassifierParams::w2() {
  return {head.data() + hidden * trunk.cfg.C + hidden, hidden};
}
std::span<double> ClassifierParams::b2() {
  return {head.data() + hidden * trunk.cfg.C + 2 * hidden, 1};
}
std::span<const double> ClassifierParams::w1() const {
  return {head.data(), hidden * trunk.cfg.C};
}
std::span<const double> ClassifierParams::b1() const {
  return {head.data() + hidden * trunk.cfg.C, hidden};
}
std::span<const double> ClassifierParams::w2() const {
  return {head.data() + hidden * trunk.cfg.C + hidden, hidden};
}
std::span<const double> ClassifierParams::b2() const {
  return {head.data() + hidden * trunk.cfg.C + 2 * hidden, 1};
}

std::size_t head_param_count(const ClassifierParams& c) {
  return c.hidden * c.trunk.cfg.C + 2 * c.hidden + 1;
}

ClassifierParams init_classifier(EncoderParams trunk, std::size_t hidden,
                                 std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("hidden width must be positive");
  ClassifierParams c;
  c.trunk = std::move(trunk);
  c.hidden = hidden;
  c.head.assign(hidden * c.trunk.cfg.C + 2 * hidden + 1, 0.0);
  std::uint64_t index = 0;
  const std::uint64_t s = rng::derive(seed, "classifier-init");
  fill_uniform(c.w1(), c.trunk.cfg.C, 1.0, s, index);
  fill_uniform(c.w2(), hidden, 1.0, s, index);

  // Pooled trunk features share a large offset (see init_encoder); center
  // b1 on the mean pooled probe response so the head starts on the
  // informative part of its input.
  {
    const auto& cfg = c.trunk.cfg;
    const std::size_t n_probe = 16;
    rng::Sequence probe(rng::derive(seed, "init-center"));
    std::vector<std::uint8_t> bits(cfg.T);
    std::vector<double> hbar(cfg.C), mean(cfg.C, 0.0);
    for (std::size_t i = 0; i < n_probe; ++i) {
      for (auto& b : bits) b = std::uint8_t(probe.below(2));
      trunk_forward(c.trunk, bits.data(), nullptr, hbar.data());
      for (std::size_t ch = 0; ch < cfg.C; ++ch) mean[ch] += hbar[ch];
    }
    for (std::size_t ch = 0; ch < cfg.C; ++ch) mean[ch] /= double(n_probe);
    const auto w1 = c.w1();
    const auto b1 = c.b1();
    for (std::size_t h = 0; h < hidden; ++h) {
      double z = 0.0;
      for (std::size_t ch = 0; ch < cfg.C; ++ch)
        z += w1[h * cfg.C + ch] * mean[ch];
      b1[h] = -z;
    }
  }
  return c;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Numerically stable per-sample bce: softplus(logit) - y*logit.
double bce_from_logit(double logit, int y) {
  const double sp =
      std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return sp - double(y) * logit;
}

double head_logit(const ClassifierParams& params, const double* hbar,
                  std::vector<double>& a1) {
  const std::size_t C = params.trunk.cfg.C, H = params.hidden;
  const auto w1 = params.w1();
  const auto b1 = params.b1();
  const auto w2 = params.w2();
  const auto b2 = params.b2();
  a1.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    double s = b1[h];
    const double* row = w1.data() + h * C;
    for (std::size_t c = 0; c < C; ++c) s += row[c] * hbar[c];
    a1[h] = s > 0.0 ? s : 0.0;
  }
  double logit = b2[0];
  for (std::size_t h = 0; h < H; ++h) logit += w2[h] * a1[h];
  return logit;
}

}  // namespace

double classifier_forward(const ClassifierParams& params, const Window& w) {
  check_window(params.trunk.cfg, w);
  std::vector<double> hbar(params.trunk.cfg.C);
  trunk_forward(params.trunk, w.bits.data(), nullptr, hbar.data());
  std::vector<double> a1;
  return sigmoid(head_logit(params, hbar.data(), a1));
}

GradResult bce_gradients(const ClassifierParams& params,
                         const std::vector<Window>& windows,
                         const std::vector<int>& labels) {
  if (windows.empty()) throw ConfigError("bce needs a non-empty batch");
  if (windows.size() != labels.size())
    throw ConfigError("bce windows and labels differ in length");
  for (const Window& w : windows) check_window(params.trunk.cfg, w);

  const std::size_t C = params.trunk.cfg.C, H = params.hidden;
  const std::size_t trunk_p = params.trunk.p.size();
  const std::size_t head_p = head_param_count(params);
  const std::size_t B = windows.size();

  constexpr std::size_t n_chunks = 16;
  std::vector<std::vector<double>> partial(n_chunks);
  std::vector<double> losses(n_chunks, 0.0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < std::ptrdiff_t(n_chunks); ++ci) {
    const std::size_t c = std::size_t(ci);
    const std::size_t lo = c * B / n_chunks;
    const std::size_t hi = (c + 1) * B / n_chunks;
    if (lo == hi) continue;
    partial[c].assign(head_p, 0.0);
    double* g_w1 = partial[c].data();
    double* g_b1 = g_w1 + H * C;
    double* g_w2 = g_b1 + H;
    double* g_b2 = g_w2 + H;
    std::vector<double> hbar(C), a1;
    const auto w2 = params.w2();
    for (std::size_t i = lo; i < hi; ++i) {
      trunk_forward(params.trunk, windows[i].bits.data(), nullptr,
                    hbar.data());
      const double logit = head_logit(params, hbar.data(), a1);
      losses[c] += bce_from_logit(logit, labels[i]);
      const double dlogit =
          (sigmoid(logit) - double(labels[i])) / double(B);
      g_b2[0] += dlogit;
      for (std::size_t h = 0; h < H; ++h) {
        g_w2[h] += dlogit * a1[h];
        if (a1[h] <= 0.0) continue;  // ReLU gate
        const double gh = dlogit * w2[h];
        g_b1[h] += gh;
        double* grow = g_w1 + h * C;
        for (std::size_t cc = 0; cc < C; ++cc) grow[cc] += gh * hbar[cc];
      }
    }
  }

  GradResult r;
  r.grad.assign(trunk_p + head_p, 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    r.loss += losses[c];
    if (partial[c].empty()) continue;
    for (std::size_t j = 0; j < head_p; ++j)
      r.grad[trunk_p + j] += partial[c][j];
  }
  r.loss /= double(B);
  return r;
}

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr) {
  if (params.size() != grads.size())
    throw ConfigError("adam parameter/gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size())
    throw ConfigError("adam state does not match parameter count");
  for (double g : grads)
    if (!std::isfinite(g))
      throw TrainingError("non-finite gradient in optimizer step");

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(beta2, double(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace clx
