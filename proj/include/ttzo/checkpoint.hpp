#pragma once

// Versioned binary checkpoints for a Network: per-layer structure (dense
// matrices, TT shapes with cores in row-major order) plus biases. Numbers are
// stored little-endian native; the file is self-describing down to each layer.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttzo/network.hpp"

namespace ttzo {

namespace detail {

constexpr char kCkptMagic[8] = {'T', 'T', 'Z', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_f64s(std::ostream& out, const double* p, long n) {
  out.write(reinterpret_cast<const char*>(p), n * static_cast<long>(sizeof(double)));
}

inline std::uint32_t take_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return v;
}
inline std::uint64_t take_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return v;
}
inline void take_f64s(std::istream& in, double* p, long n, const std::string& path) {
  in.read(reinterpret_cast<char*>(p), n * static_cast<long>(sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
}

}  // namespace detail

inline void save_checkpoint(const Network& net, const std::string& path) {
  net.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(detail::kCkptMagic, sizeof detail::kCkptMagic);
  detail::put_u32(out, detail::kCkptVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    detail::put_u32(out, static_cast<std::uint32_t>(layer.act));
    if (const auto* d = std::get_if<DenseLinear>(&layer.op)) {
      detail::put_u32(out, 0);
      detail::put_u64(out, static_cast<std::uint64_t>(d->W.rows()));
      detail::put_u64(out, static_cast<std::uint64_t>(d->W.cols()));
      // row-major so the on-disk order matches the packed parameter order
      for (long i = 0; i < d->W.rows(); ++i)
        for (long j = 0; j < d->W.cols(); ++j) {
          const double v = d->W(i, j);
          detail::put_f64s(out, &v, 1);
        }
      detail::put_f64s(out, d->bias.data(), d->bias.size());
    } else {
      const TTLinear& tt = std::get<TTLinear>(layer.op);
      detail::put_u32(out, 1);
      const int L = tt.shape.order();
      detail::put_u32(out, static_cast<std::uint32_t>(L));
      for (int k = 0; k < L; ++k)
        detail::put_u32(out, static_cast<std::uint32_t>(tt.shape.in_factors[k]));
      for (int k = 0; k < L; ++k)
        detail::put_u32(out, static_cast<std::uint32_t>(tt.shape.out_factors[k]));
      for (int k = 0; k <= L; ++k)
        detail::put_u32(out, static_cast<std::uint32_t>(tt.shape.ranks[k]));
      for (const auto& core : tt.cores) detail::put_f64s(out, core.data(), core.size());
      detail::put_u64(out, static_cast<std::uint64_t>(tt.bias.size()));
      detail::put_f64s(out, tt.bias.data(), tt.bias.size());
    }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kCkptMagic, sizeof magic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t version = detail::take_u32(in, path);
  if (version != detail::kCkptVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  const std::uint32_t n_layers = detail::take_u32(in, path);
  Network net;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    Layer layer;
    const std::uint32_t act = detail::take_u32(in, path);
    if (act > static_cast<std::uint32_t>(Act::sine))
      throw std::runtime_error("checkpoint: bad activation code in " + path);
    layer.act = static_cast<Act>(act);
    const std::uint32_t kind = detail::take_u32(in, path);
    if (kind == 0) {
      DenseLinear d;
      const auto rows = static_cast<long>(detail::take_u64(in, path));
      const auto cols = static_cast<long>(detail::take_u64(in, path));
      if (rows < 1 || cols < 1)
        throw std::runtime_error("checkpoint: bad dense shape in " + path);
      d.W.resize(rows, cols);
      for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) detail::take_f64s(in, &d.W(i, j), 1, path);
      d.bias.resize(cols);
      detail::take_f64s(in, d.bias.data(), cols, path);
      layer.op = std::move(d);
    } else if (kind == 1) {
      TTLinear tt;
      const auto L = static_cast<int>(detail::take_u32(in, path));
      if (L < 1 || L > 64) throw std::runtime_error("checkpoint: bad TT order in " + path);
      tt.shape.in_factors.resize(L);
      tt.shape.out_factors.resize(L);
      tt.shape.ranks.resize(L + 1);
      for (int k = 0; k < L; ++k)
        tt.shape.in_factors[k] = static_cast<int>(detail::take_u32(in, path));
      for (int k = 0; k < L; ++k)
        tt.shape.out_factors[k] = static_cast<int>(detail::take_u32(in, path));
      for (int k = 0; k <= L; ++k)
        tt.shape.ranks[k] = static_cast<int>(detail::take_u32(in, path));
      tt.cores.resize(L);
      for (int k = 0; k < L; ++k) {
        tt.cores[k].resize(tt.shape.core_size(k));
        detail::take_f64s(in, tt.cores[k].data(), tt.cores[k].size(), path);
      }
      const auto blen = static_cast<long>(detail::take_u64(in, path));
      tt.bias.resize(blen);
      detail::take_f64s(in, tt.bias.data(), blen, path);
      layer.op = std::move(tt);
    } else {
      throw std::runtime_error("checkpoint: bad layer kind in " + path);
    }
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

}  // namespace ttzo
