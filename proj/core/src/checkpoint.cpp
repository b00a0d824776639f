#include "clx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "clx/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace clx {
namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
  std::uint32_t v = 0;
  if (!f.read(reinterpret_cast<char*>(&v), 4))
    throw IoError("truncated checkpoint " + path);
  return v;
}

void put_tensor(std::ofstream& f, std::span<const double> values,
                std::initializer_list<std::uint32_t> dims) {
  put_u32(f, std::uint32_t(dims.size()));
  std::size_t count = 1;
  for (std::uint32_t d : dims) {
    put_u32(f, d);
    count *= d;
  }
  if (count != values.size())
    throw ConsistencyError("tensor dims do not cover its values");
  for (double v : values) {
    const float x = float(v);
    f.write(reinterpret_cast<const char*>(&x), 4);
  }
}

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

bool get_tensor(std::ifstream& f, const std::string& path, RawTensor& out) {
  std::uint32_t rank = 0;
  if (!f.read(reinterpret_cast<char*>(&rank), 4)) return false;  // clean EOF
  if (rank == 0 || rank > 4)
    throw IoError("implausible tensor rank in " + path);
  out.dims.resize(rank);
  std::size_t count = 1;
  for (std::uint32_t& d : out.dims) {
    d = get_u32(f, path);
    count *= d;
  }
  if (count == 0 || count > (std::size_t(1) << 28))
    throw IoError("implausible tensor size in " + path);
  out.values.resize(count);
  for (double& v : out.values) {
    float x = 0.0f;
    if (!f.read(reinterpret_cast<char*>(&x), 4))
      throw IoError("truncated tensor payload in " + path);
    v = double(x);
  }
  return true;
}

void expect_dims(const RawTensor& t, std::initializer_list<std::uint32_t> dims,
                 const std::string& path, const char* what) {
  if (!std::equal(t.dims.begin(), t.dims.end(), dims.begin(), dims.end()))
    throw IoError("unexpected " + std::string(what) + " shape in " + path);
}

void write_header(std::ofstream& f, const EncoderConfig& cfg) {
  f.write("CLXT", 4);
  put_u32(f, checkpoint_version);
  put_u32(f, std::uint32_t(cfg.T));
  put_u32(f, std::uint32_t(cfg.C));
  put_u32(f, std::uint32_t(cfg.L));
  put_u32(f, std::uint32_t(cfg.K));
  put_u32(f, std::uint32_t(cfg.D));
  put_u32(f, std::uint32_t(cfg.dilations.size()));
  for (std::size_t d : cfg.dilations) put_u32(f, std::uint32_t(d));
}

void write_trunk(std::ofstream& f, const EncoderParams& p) {
  const auto C = std::uint32_t(p.cfg.C);
  const auto K = std::uint32_t(p.cfg.K);
  put_tensor(f, p.w_in(), {C, 1});
  put_tensor(f, p.b_in(), {C});
  for (std::size_t l = 0; l < p.cfg.L; ++l) {
    put_tensor(f, p.w_conv(l), {K, C, C});
    put_tensor(f, p.b_conv(l), {C});
  }
}

}  // namespace

void save_encoder(const std::string& path, const EncoderParams& params) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_header(f, params.cfg);
  write_trunk(f, params);
  put_tensor(f, params.w_out(),
             {std::uint32_t(params.cfg.D), std::uint32_t(params.cfg.C)});
  put_tensor(f, params.b_out(), {std::uint32_t(params.cfg.D)});
  if (!f) throw IoError("short write to " + path);
}

void save_classifier(const std::string& path, const ClassifierParams& params) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_header(f, params.trunk.cfg);
  write_trunk(f, params.trunk);
  const auto H = std::uint32_t(params.hidden);
  const auto C = std::uint32_t(params.trunk.cfg.C);
  put_tensor(f, params.w1(), {H, C});
  put_tensor(f, params.b1(), {H});
  put_tensor(f, params.w2(), {1, H});
  put_tensor(f, params.b2(), {1});
  if (!f) throw IoError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[4] = {};
  if (!f.read(magic, 4) || std::memcmp(magic, "CLXT", 4) != 0)
    throw IoError("bad checkpoint magic in " + path);
  if (get_u32(f, path) != checkpoint_version)
    throw IoError("unsupported checkpoint version in " + path);

  EncoderConfig cfg;
  cfg.T = get_u32(f, path);
  cfg.C = get_u32(f, path);
  cfg.L = get_u32(f, path);
  cfg.K = get_u32(f, path);
  cfg.D = get_u32(f, path);
  cfg.dilations.resize(get_u32(f, path));
  for (std::size_t& d : cfg.dilations) d = get_u32(f, path);
  cfg.finalize();

  std::vector<RawTensor> tensors;
  RawTensor t;
  while (get_tensor(f, path, t)) tensors.push_back(std::move(t));

  const std::size_t trunk_n = 2 + 2 * cfg.L;
  const auto C = std::uint32_t(cfg.C);
  const auto K = std::uint32_t(cfg.K);
  Checkpoint ck;

  auto load_trunk = [&](EncoderParams& p) {
    p.cfg = cfg;
    p.p.assign(encoder_param_count(cfg), 0.0);
    expect_dims(tensors[0], {C, 1}, path, "input weight");
    expect_dims(tensors[1], {C}, path, "input bias");
    std::copy(tensors[0].values.begin(), tensors[0].values.end(),
              p.w_in().begin());
    std::copy(tensors[1].values.begin(), tensors[1].values.end(),
              p.b_in().begin());
    for (std::size_t l = 0; l < cfg.L; ++l) {
      expect_dims(tensors[2 + 2 * l], {K, C, C}, path, "conv weight");
      expect_dims(tensors[3 + 2 * l], {C}, path, "conv bias");
      std::copy(tensors[2 + 2 * l].values.begin(),
                tensors[2 + 2 * l].values.end(), p.w_conv(l).begin());
      std::copy(tensors[3 + 2 * l].values.begin(),
                tensors[3 + 2 * l].values.end(), p.b_conv(l).begin());
    }
  };

  if (tensors.size() == trunk_n + 2) {
    ck.kind = CheckpointKind::encoder;
    load_trunk(ck.encoder);
    expect_dims(tensors[trunk_n], {std::uint32_t(cfg.D), C}, path,
                "output weight");
    expect_dims(tensors[trunk_n + 1], {std::uint32_t(cfg.D)}, path,
                "output bias");
    std::copy(tensors[trunk_n].values.begin(), tensors[trunk_n].values.end(),
              ck.encoder.w_out().begin());
    std::copy(tensors[trunk_n + 1].values.begin(),
              tensors[trunk_n + 1].values.end(), ck.encoder.b_out().begin());
  } else if (tensors.size() == trunk_n + 4) {
    ck.kind = CheckpointKind::classifier;
    load_trunk(ck.classifier.trunk);
    const RawTensor& w1 = tensors[trunk_n];
    if (w1.dims.size() != 2 || w1.dims[1] != C)
      throw IoError("unexpected head shape in " + path);
    const std::uint32_t H = w1.dims[0];
    ck.classifier.hidden = H;
    ck.classifier.head.assign(head_param_count(ck.classifier), 0.0);
    expect_dims(tensors[trunk_n + 1], {H}, path, "head bias");
    expect_dims(tensors[trunk_n + 2], {1, H}, path, "head output weight");
    expect_dims(tensors[trunk_n + 3], {1}, path, "head output bias");
    std::copy(w1.values.begin(), w1.values.end(),
              ck.classifier.w1().begin());
    std::copy(tensors[trunk_n + 1].values.begin(),
              tensors[trunk_n + 1].values.end(), ck.classifier.b1().begin());
    std::copy(tensors[trunk_n + 2].values.begin(),
              tensors[trunk_n + 2].values.end(), ck.classifier.w2().begin());
    std::copy(tensors[trunk_n + 3].values.begin(),
              tensors[trunk_n + 3].values.end(), ck.classifier.b2().begin());
  } else {
    throw IoError("unexpected tensor count in " + path);
  }
  return ck;
}

ClassifierParams load_classifier(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != CheckpointKind::classifier)
    throw IoError(path + " is an encoder checkpoint, expected a classifier");
  return std::move(ck.classifier);
}

}  // namespace clx
