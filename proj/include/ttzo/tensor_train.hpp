#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ttzo/rng.hpp"

namespace ttzo {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Shape of a tensor-train factorized weight matrix W (M x N):
// M = prod(in_factors), N = prod(out_factors), chained by ranks
// r_0..r_L with r_0 = r_L = 1.
struct TTShape {
  std::vector<int> in_factors;   // m_1..m_L
  std::vector<int> out_factors;  // n_1..n_L
  std::vector<int> ranks;        // r_0..r_L

  int order() const { return static_cast<int>(in_factors.size()); }

  long rows() const {
    return std::accumulate(in_factors.begin(), in_factors.end(), 1L,
                           std::multiplies<long>());
  }
  long cols() const {
    return std::accumulate(out_factors.begin(), out_factors.end(), 1L,
                           std::multiplies<long>());
  }

  // Entries of core k, laid out row-major over (r_{k-1}, m_k, n_k, r_k).
  long core_size(int k) const {
    return static_cast<long>(ranks[k]) * in_factors[k] * out_factors[k] * ranks[k + 1];
  }

  long weight_param_count() const {
    long total = 0;
    for (int k = 0; k < order(); ++k) total += core_size(k);
    return total;
  }

  void validate() const {
    const int L = order();
    if (L < 1) throw std::invalid_argument("TTShape: empty factorization");
    if (out_factors.size() != static_cast<size_t>(L))
      throw std::invalid_argument("TTShape: in/out factor count mismatch");
    if (ranks.size() != static_cast<size_t>(L) + 1)
      throw std::invalid_argument("TTShape: ranks must have length L+1");
    if (ranks.front() != 1 || ranks.back() != 1)
      throw std::invalid_argument("TTShape: boundary ranks must be 1");
    for (int m : in_factors)
      if (m < 1) throw std::invalid_argument("TTShape: nonpositive in factor");
    for (int n : out_factors)
      if (n < 1) throw std::invalid_argument("TTShape: nonpositive out factor");
    for (int r : ranks)
      if (r < 1) throw std::invalid_argument("TTShape: nonpositive rank");
  }
};

// Linear layer y = W^T x + bias with W stored as a chain of TT-cores.
// Core k is a 4-way array (r_{k-1}, m_k, n_k, r_k) stored flat in row-major
// order; entry W(i, j) with i decomposed as (i_1..i_L) over in_factors and
// j as (j_1..j_L) over out_factors (both row-major mixed radix, i_1 slowest)
// equals the chain product of the (i_k, j_k) core slices.
struct TTLinear {
  TTShape shape;
  std::vector<Eigen::VectorXd> cores;  // cores[k] flat, (a, i, j, b) row-major
  Eigen::VectorXd bias;                // length N, size 0 = no bias

  bool has_bias() const { return bias.size() > 0; }

  double core_entry(int k, int a, int i, int j, int b) const {
    const int n = shape.out_factors[k], rk = shape.ranks[k + 1];
    return cores[k][((static_cast<long>(a) * shape.in_factors[k] + i) * n + j) * rk + b];
  }

  void validate() const {
    shape.validate();
    if (cores.size() != static_cast<size_t>(shape.order()))
      throw std::invalid_argument("TTLinear: core count mismatch");
    for (int k = 0; k < shape.order(); ++k)
      if (cores[k].size() != shape.core_size(k))
        throw std::invalid_argument("TTLinear: core " + std::to_string(k) +
                                    " has wrong size");
    if (bias.size() != 0 && bias.size() != shape.cols())
      throw std::invalid_argument("TTLinear: bias length mismatch");
  }
};

inline long parameter_count(const TTLinear& layer) {
  return layer.shape.weight_param_count() + layer.bias.size();
}

// Core k slice G_k(i_k, j_k) rearranged as the (n_k r_k) x (r_{k-1} m_k)
// matrix used by the contraction sweep.
inline RowMat core_sweep_matrix(const TTShape& shape, const Eigen::VectorXd& core,
                                int k) {
  const int rp = shape.ranks[k], m = shape.in_factors[k];
  const int n = shape.out_factors[k], r = shape.ranks[k + 1];
  RowMat g(n * r, rp * m);
  for (int a = 0; a < rp; ++a)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        for (int b = 0; b < r; ++b)
          g(j * r + b, a * m + i) = core[((static_cast<long>(a) * m + i) * n + j) * r + b];
  return g;
}

inline RowMat core_sweep_matrix(const TTLinear& layer, int k) {
  return core_sweep_matrix(layer.shape, layer.cores[k], k);
}

// Saved per-stage state of one sweep, so a later call can redo only the
// stages from a changed core onward. stage_in[k] is the buffer consumed by
// stage k: J[k] blocks of (r_k m_k) x (mrest[k] B) in row-major order; g[k]
// is the rearranged core matrix used at stage k. The scratch areas let
// resumptions run without allocating.
struct TTSweepCache {
  std::vector<std::vector<double>> stage_in;
  std::vector<long> J;
  std::vector<long> mrest;  // product of in_factors after stage k
  long B = 0;
  mutable std::vector<RowMat> g;
  mutable std::vector<double> scratch_a, scratch_b;
};

namespace detail {

inline Eigen::MatrixXd tt_sweep(const TTLinear& layer, const Eigen::MatrixXd& X,
                                TTSweepCache* cache) {
  const TTShape& s = layer.shape;
  const int L = s.order();
  const long M = s.rows(), N = s.cols();
  const long B = X.rows();
  if (X.cols() != M) throw std::invalid_argument("tt_matvec: input width mismatch");

  // Work buffer sizes: J_{k-1} * max(r_{k-1} m_k, n_k r_k) * Mrest_k * B.
  long max_elems = M * B;
  {
    long J = 1, mrest = M;
    for (int k = 0; k < L; ++k) {
      mrest /= s.in_factors[k];
      const long out_elems = J * static_cast<long>(s.out_factors[k]) * s.ranks[k + 1] * mrest * B;
      max_elems = std::max(max_elems, out_elems);
      J *= s.out_factors[k];
    }
  }
  std::vector<double> buf_a(static_cast<size_t>(max_elems));
  std::vector<double> buf_b(static_cast<size_t>(max_elems));
  if (cache) {
    cache->stage_in.assign(L, {});
    cache->J.assign(L, 0);
    cache->mrest.assign(L, 0);
    cache->B = B;
    cache->g.assign(L, {});
    cache->scratch_a.resize(static_cast<size_t>(max_elems));
    cache->scratch_b.resize(static_cast<size_t>(max_elems));
  }

  // C_0 = X^T laid out (m_1..m_L, B).
  Eigen::Map<RowMat>(buf_a.data(), M, B) = X.transpose();

  double* cur = buf_a.data();
  double* nxt = buf_b.data();
  long J = 1, mrest = M;
  for (int k = 0; k < L; ++k) {
    const int rp = s.ranks[k], m = s.in_factors[k];
    const int n = s.out_factors[k], r = s.ranks[k + 1];
    mrest /= m;
    const long in_rows = static_cast<long>(rp) * m;
    const long out_rows = static_cast<long>(n) * r;
    const long width = mrest * B;
    if (cache) {
      cache->J[k] = J;
      cache->mrest[k] = mrest;
      cache->stage_in[k].assign(cur, cur + J * in_rows * width);
    }
    RowMat g_local;
    const RowMat* g = &g_local;
    if (cache) {
      cache->g[k] = core_sweep_matrix(layer, k);
      g = &cache->g[k];
    } else {
      g_local = core_sweep_matrix(layer, k);
    }
    for (long jj = 0; jj < J; ++jj) {
      Eigen::Map<const RowMat> in(cur + jj * in_rows * width, in_rows, width);
      Eigen::Map<RowMat> out(nxt + jj * out_rows * width, out_rows, width);
      out.noalias() = (*g) * in;
    }
    std::swap(cur, nxt);
    J *= n;
  }

  Eigen::MatrixXd Y = Eigen::Map<RowMat>(cur, N, B).transpose();
  if (layer.has_bias()) Y.rowwise() += layer.bias.transpose();
  return Y;
}

}  // namespace detail

// Batched contraction: X has one sample per row (B x M); returns B x N.
// Sweeps the cores left to right; after step k the work buffer holds a
// (n_1..n_k, r_k, m_{k+1}..m_L, B) tensor, so each step is a block-wise
// GEMM with the rearranged core.
inline Eigen::MatrixXd tt_matvec_batch(const TTLinear& layer, const Eigen::MatrixXd& X) {
  return detail::tt_sweep(layer, X, nullptr);
}

// Same contraction, but records every stage's input for later resumption.
inline Eigen::MatrixXd tt_matvec_batch_cached(const TTLinear& layer,
                                              const Eigen::MatrixXd& X,
                                              TTSweepCache& cache) {
  return detail::tt_sweep(layer, X, &cache);
}

// Redo the sweep from the stage of core k0, with entry `entry` of that core
// (flat (r, m, n, r) index) shifted by `delta`. Reuses the cached stage
// input, rearranged cores, and scratch, so nothing is allocated; the result
// matches a full sweep of the modified layer to round-off.
inline Eigen::MatrixXd tt_matvec_resume(const TTLinear& layer, const TTSweepCache& cache,
                                        int k0, long entry, double delta) {
  const TTShape& s = layer.shape;
  const int L = s.order();
  if (static_cast<int>(cache.stage_in.size()) != L || cache.B <= 0 ||
      static_cast<int>(cache.g.size()) != L)
    throw std::invalid_argument("tt_matvec_resume: cache not populated");
  if (k0 < 0 || k0 >= L) throw std::invalid_argument("tt_matvec_resume: bad stage");
  if (entry < 0 || entry >= s.core_size(k0))
    throw std::invalid_argument("tt_matvec_resume: core entry out of range");
  const long B = cache.B;
  const long N = s.cols();

  // Core entry ((a m + i) n + j) r + b sits at g(j r + b, a m + i).
  RowMat& g0 = cache.g[k0];
  const long gr = [&] {
    const int n = s.out_factors[k0], r = s.ranks[k0 + 1];
    return ((entry / r) % n) * r + entry % r;
  }();
  const long gc = entry / (static_cast<long>(s.ranks[k0 + 1]) * s.out_factors[k0]);
  const double saved_entry = g0(gr, gc);
  g0(gr, gc) = saved_entry + delta;

  const double* cur = cache.stage_in[k0].data();
  double* nxt = cache.scratch_a.data();
  double* spare = cache.scratch_b.data();
  long J = cache.J[k0], mrest = cache.mrest[k0];
  for (int k = k0; k < L; ++k) {
    const int rp = s.ranks[k], m = s.in_factors[k];
    const int n = s.out_factors[k], r = s.ranks[k + 1];
    if (k > k0) mrest /= m;
    const RowMat& g = cache.g[k];
    const long in_rows = static_cast<long>(rp) * m;
    const long out_rows = static_cast<long>(n) * r;
    const long width = mrest * B;
    for (long jj = 0; jj < J; ++jj) {
      Eigen::Map<const RowMat> in(cur + jj * in_rows * width, in_rows, width);
      Eigen::Map<RowMat> out(nxt + jj * out_rows * width, out_rows, width);
      out.noalias() = g * in;
    }
    cur = nxt;
    std::swap(nxt, spare);
    J *= n;
  }

  g0(gr, gc) = saved_entry;

  Eigen::MatrixXd Y = Eigen::Map<const RowMat>(cur, N, B).transpose();
  if (layer.has_bias()) Y.rowwise() += layer.bias.transpose();
  return Y;
}

inline Eigen::VectorXd tt_matvec(const TTLinear& layer, const Eigen::VectorXd& x) {
  return tt_matvec_batch(layer, x.transpose()).row(0);
}

// Dense M x N matrix represented by the chain; built by merging one core at
// a time (index-by-index slice products are kept to the tests as an
// independent oracle).
inline Eigen::MatrixXd tt_reconstruct(const TTLinear& layer) {
  const TTShape& s = layer.shape;
  const int L = s.order();
  RowMat acc(1, 1);
  acc(0, 0) = 1.0;
  long I = 1, J = 1;
  for (int k = 0; k < L; ++k) {
    const int rp = s.ranks[k], m = s.in_factors[k];
    const int n = s.out_factors[k], r = s.ranks[k + 1];
    RowMat next(I * m * J * n, r);
    const Eigen::VectorXd& core = layer.cores[k];
    for (long ii = 0; ii < I; ++ii) {
      for (long jj = 0; jj < J; ++jj) {
        const auto row = acc.row(ii * J + jj);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> slice(
                core.data() + (static_cast<long>(i) * n + j) * r, rp, r,
                Eigen::OuterStride<>(static_cast<long>(m) * n * r));
            next.row((ii * m + i) * (J * n) + (jj * n + j)).noalias() = row * slice;
          }
        }
      }
    }
    acc = std::move(next);
    I *= m;
    J *= n;
  }
  return Eigen::Map<RowMat>(acc.data(), I, J);
}

// Gaussian core initialization matched to a target entry variance of the
// reconstructed matrix (default: Glorot, 2/(M+N)). An entry of W is a sum
// over prod(r_1..r_{L-1}) uncorrelated products of L core entries, so each
// core entry gets std dev (target_var / prod_ranks)^(1/2L).
inline TTLinear tt_random(const TTShape& shape, std::mt19937_64& rng,
                          double target_entry_var = -1.0, bool with_bias = true) {
  shape.validate();
  const int L = shape.order();
  if (target_entry_var <= 0.0)
    target_entry_var = 2.0 / static_cast<double>(shape.rows() + shape.cols());
  double prod_ranks = 1.0;
  for (int k = 1; k < L; ++k) prod_ranks *= shape.ranks[k];
  const double core_sigma = std::pow(target_entry_var / prod_ranks, 1.0 / (2.0 * L));

  TTLinear layer;
  layer.shape = shape;
  layer.cores.resize(L);
  std::normal_distribution<double> gauss(0.0, core_sigma);
  for (int k = 0; k < L; ++k) {
    layer.cores[k].resize(shape.core_size(k));
    for (long t = 0; t < shape.core_size(k); ++t) layer.cores[k][t] = gauss(rng);
  }
  if (with_bias) layer.bias = Eigen::VectorXd::Zero(shape.cols());
  return layer;
}

inline TTLinear tt_zeros(const TTShape& shape, bool with_bias = true) {
  shape.validate();
  TTLinear layer;
  layer.shape = shape;
  layer.cores.resize(shape.order());
  for (int k = 0; k < shape.order(); ++k)
    layer.cores[k] = Eigen::VectorXd::Zero(shape.core_size(k));
  if (with_bias) layer.bias = Eigen::VectorXd::Zero(shape.cols());
  return layer;
}

}  // namespace ttzo
