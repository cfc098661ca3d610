#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

#include "ttzo/quadrature.hpp"
#include "ttzo/rng.hpp"

namespace ttzo {

// Gaussian-smoothed wrapper u(x) = E_{d ~ N(0, sigma^2 I)} f(x + d) around a
// batch-callable base model f: (B x dim) -> (B x m). First derivatives and
// Laplacians of u are evaluated from forward passes only, either by Monte
// Carlo (mc) or on a sparse grid (sg).
struct SmoothedModel {
  enum class Mode { mc, sg };

  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> f;
  int dim = 0;
  double sigma = 0.1;
  Mode mode = Mode::sg;
  int mc_samples = 1024;
  SparseGrid grid;        // sg mode; nodes already scaled by sigma
  std::uint64_t seed = 0; // mc mode draw seed

  void validate() const {
    if (!f) throw std::invalid_argument("SmoothedModel: missing base model");
    if (dim < 1) throw std::invalid_argument("SmoothedModel: dim must be >= 1");
    if (sigma <= 0.0) throw std::invalid_argument("SmoothedModel: sigma must be > 0");
    if (mode == Mode::mc) {
      if (mc_samples < 1)
        throw std::invalid_argument("SmoothedModel: mc_samples must be >= 1");
    } else {
      if (grid.dim != dim)
        throw std::invalid_argument("SmoothedModel: grid dimension mismatch");
      if (grid.sigma != sigma)
        throw std::invalid_argument("SmoothedModel: grid sigma mismatch");
    }
  }
};

inline SmoothedModel make_sg_smoothed(
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> f, int dim, double sigma,
    int level = 3) {
  SmoothedModel m;
  m.f = std::move(f);
  m.dim = dim;
  m.sigma = sigma;
  m.mode = SmoothedModel::Mode::sg;
  m.grid = smolyak_build(dim, level, sigma);
  m.validate();
  return m;
}

inline SmoothedModel make_mc_smoothed(
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> f, int dim, double sigma,
    int samples = 1024, std::uint64_t seed = 0) {
  SmoothedModel m;
  m.f = std::move(f);
  m.dim = dim;
  m.sigma = sigma;
  m.mode = SmoothedModel::Mode::mc;
  m.mc_samples = samples;
  m.seed = seed;
  m.validate();
  return m;
}

// Wraps a scalar function into the batch interface (tests, small problems).
inline std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> scalar_base(
    std::function<double(const Eigen::VectorXd&)> f) {
  return [f = std::move(f)](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Y(X.rows(), 1);
    for (long i = 0; i < X.rows(); ++i) Y(i, 0) = f(X.row(i).transpose());
    return Y;
  };
}

namespace detail {

// Offsets d_j and averaging weights for one smoothing evaluation.
inline void stein_offsets(const SmoothedModel& m, std::uint64_t draw_key,
                          Eigen::MatrixXd& offsets, Eigen::VectorXd& weights) {
  if (m.mode == SmoothedModel::Mode::sg) {
    offsets = m.grid.nodes;
    weights = m.grid.weights;
  } else {
    auto rng = make_rng(m.seed, Stream::stein_mc, draw_key);
    offsets.resize(m.mc_samples, m.dim);
    for (long i = 0; i < offsets.rows(); ++i)
      offsets.row(i) = m.sigma * gaussian_vector(rng, m.dim).transpose();
    weights = Eigen::VectorXd::Constant(m.mc_samples, 1.0 / m.mc_samples);
  }
}

inline void check_finite(const Eigen::MatrixXd& Y, const char* where) {
  if (!Y.allFinite())
    throw std::runtime_error(std::string(where) + ": non-finite base model output");
}

}  // namespace detail

// Value, first derivatives, and Laplacian of the smoothed scalar model at a
// batch of points (one per row of X). The Laplacian covers the first
// lap_dims coordinates (-1 = all), so a PDE over (x, t) can take a spatial
// Laplacian while smoothing jointly. Each point costs 2n+1 base evaluations
// (n offsets, antithetic pairs, plus the shared center), batched into a
// single base-model call.
struct ScalarSteinBatch {
  Eigen::VectorXd value;  // smoothed u at each point
  Eigen::MatrixXd grad;   // B x dim
  Eigen::VectorXd lap;    // Laplacian over the leading lap_dims coordinates
};

inline ScalarSteinBatch stein_scalar_batch(const SmoothedModel& m,
                                           const Eigen::MatrixXd& X, int lap_dims = -1,
                                           std::uint64_t draw_key = 0) {
  m.validate();
  if (X.cols() != m.dim)
    throw std::invalid_argument("stein_scalar_batch: point dimension mismatch");
  if (lap_dims < 0) lap_dims = m.dim;
  if (lap_dims > m.dim)
    throw std::invalid_argument("stein_scalar_batch: lap_dims exceeds dim");
  const long B = X.rows();

  Eigen::MatrixXd offsets;
  Eigen::VectorXd w;
  detail::stein_offsets(m, draw_key, offsets, w);
  const long n = offsets.rows();

  Eigen::MatrixXd P((2 * n + 1) * B, m.dim);
  for (long b = 0; b < B; ++b) {
    const long base = (2 * n + 1) * b;
    P.middleRows(base, n) = offsets.rowwise() + X.row(b);
    P.middleRows(base + n, n) = (-offsets).rowwise() + X.row(b);
    P.row(base + 2 * n) = X.row(b);
  }
  const Eigen::MatrixXd Y = m.f(P);
  if (Y.rows() != P.rows() || Y.cols() != 1)
    throw std::invalid_argument("stein_scalar_batch: base model must be scalar");
  detail::check_finite(Y, "stein_scalar_batch");

  const double inv2s2 = 1.0 / (2.0 * m.sigma * m.sigma);
  const double inv2s4 = inv2s2 / (m.sigma * m.sigma);
  // Per-offset Laplacian coefficient (||d_x||^2 - sigma^2 * lap_dims) / (2 sigma^4).
  Eigen::VectorXd lap_c(n);
  for (long j = 0; j < n; ++j)
    lap_c[j] = (offsets.row(j).head(lap_dims).squaredNorm() -
                m.sigma * m.sigma * lap_dims) *
               inv2s4;

  ScalarSteinBatch out;
  out.value.resize(B);
  out.grad.resize(B, m.dim);
  out.lap.resize(B);
  for (long b = 0; b < B; ++b) {
    const long base = (2 * n + 1) * b;
    const auto plus = Y.col(0).segment(base, n);
    const auto minus = Y.col(0).segment(base + n, n);
    const double center = Y(base + 2 * n, 0);
    out.value[b] = w.dot(plus);
    const Eigen::VectorXd wdiff = w.cwiseProduct(plus - minus) * inv2s2;
    out.grad.row(b) = wdiff.transpose() * offsets;
    const Eigen::VectorXd second = plus + minus - 2.0 * center * Eigen::VectorXd::Ones(n);
    out.lap[b] = lap_c.cwiseProduct(w).dot(second);
  }
  return out;
}

// Single-point versions for vector-valued base models.

inline Eigen::VectorXd smoothed_value(const SmoothedModel& m, const Eigen::VectorXd& x,
                                      std::uint64_t draw_key = 0) {
  m.validate();
  Eigen::MatrixXd offsets;
  Eigen::VectorXd w;
  detail::stein_offsets(m, draw_key, offsets, w);
  const Eigen::MatrixXd Y = m.f(offsets.rowwise() + x.transpose());
  detail::check_finite(Y, "smoothed_value");
  return Y.transpose() * w;
}

// d/dx of the smoothed model, one output row per base output component.
inline Eigen::MatrixXd stein_grad(const SmoothedModel& m, const Eigen::VectorXd& x,
                                  std::uint64_t draw_key = 0) {
  m.validate();
  Eigen::MatrixXd offsets;
  Eigen::VectorXd w;
  detail::stein_offsets(m, draw_key, offsets, w);
  const long n = offsets.rows();
  Eigen::MatrixXd P(2 * n, m.dim);
  P.topRows(n) = offsets.rowwise() + x.transpose();
  P.bottomRows(n) = (-offsets).rowwise() + x.transpose();
  const Eigen::MatrixXd Y = m.f(P);
  detail::check_finite(Y, "stein_grad");
  const double inv2s2 = 1.0 / (2.0 * m.sigma * m.sigma);
  // (m_out x n) difference matrix times (n x dim) offsets.
  const Eigen::MatrixXd diff = (Y.topRows(n) - Y.bottomRows(n)).transpose();
  return diff * (w.asDiagonal() * offsets) * inv2s2;
}

// Componentwise Laplacian over the leading lap_dims coordinates (-1 = all).
inline Eigen::VectorXd stein_laplacian(const SmoothedModel& m, const Eigen::VectorXd& x,
                                       int lap_dims = -1, std::uint64_t draw_key = 0) {
  m.validate();
  if (lap_dims < 0) lap_dims = m.dim;
  if (lap_dims > m.dim)
    throw std::invalid_argument("stein_laplacian: lap_dims exceeds dim");
  Eigen::MatrixXd offsets;
  Eigen::VectorXd w;
  detail::stein_offsets(m, draw_key, offsets, w);
  const long n = offsets.rows();
  Eigen::MatrixXd P(2 * n + 1, m.dim);
  P.topRows(n) = offsets.rowwise() + x.transpose();
  P.middleRows(n, n) = (-offsets).rowwise() + x.transpose();
  P.row(2 * n) = x.transpose();
  const Eigen::MatrixXd Y = m.f(P);
  detail::check_finite(Y, "stein_laplacian");
  const double s2 = m.sigma * m.sigma;
  const double inv2s4 = 1.0 / (2.0 * s2 * s2);
  Eigen::VectorXd c(n);
  for (long j = 0; j < n; ++j)
    c[j] = (offsets.row(j).head(lap_dims).squaredNorm() - s2 * lap_dims) * inv2s4;
  const Eigen::MatrixXd second =
      Y.topRows(n) + Y.middleRows(n, n) -
      2.0 * Eigen::VectorXd::Ones(n) * Y.row(2 * n);
  return second.transpose() * w.cwiseProduct(c);
}

}  // namespace ttzo
