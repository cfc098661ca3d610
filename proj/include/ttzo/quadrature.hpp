#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ttzo {

// One-dimensional quadrature rule against the standard normal density.
struct UnivariateRule {
  int level = 0;  // number of nodes
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

// Probabilists' Gauss-Hermite rule with n nodes, exact for polynomials of
// degree <= 2n-1 against N(0,1). Golub-Welsch: nodes are eigenvalues of the
// Jacobi matrix (zero diagonal, off-diagonal sqrt(k)), weights the squared
// first eigenvector components. Nodes are then symmetrized so mirror pairs
// are exact negatives and the middle node of an odd rule is exactly 0.
inline UnivariateRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    J(k, k - 1) = std::sqrt(static_cast<double>(k));
    J(k - 1, k) = J(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  UnivariateRule rule;
  rule.level = n;
  rule.nodes = es.eigenvalues();
  rule.weights = es.eigenvectors().row(0).transpose().cwiseAbs2();

  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double t = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -t;
    rule.nodes[j] = t;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

// Smolyak sparse grid for integration against N(0, sigma^2 I) in D
// dimensions. Nodes are stored one per row, sorted lexicographically;
// weights may be negative.
struct SparseGrid {
  int dim = 0;
  int level = 0;
  double sigma = 1.0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> nodes;
  Eigen::VectorXd weights;

  long size() const { return nodes.rows(); }
};

namespace detail {

inline long binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Enumerates l in {1,2,...}^D with sum(l) = total, invoking visit(l).
inline void compositions(int total, int D, std::vector<int>& l, int pos,
                         const std::function<void(const std::vector<int>&)>& visit) {
  if (pos == D - 1) {
    const int last = total;
    if (last >= 1) {
      l[pos] = last;
      visit(l);
    }
    return;
  }
  const int remaining_min = D - 1 - pos;  // later entries need >= 1 each
  for (int v = 1; v <= total - remaining_min; ++v) {
    l[pos] = v;
    compositions(total - v, D, l, pos + 1, visit);
  }
}

}  // namespace detail

// Level-k Smolyak combination of Gauss-Hermite rules with linear growth
// (level l rule has l nodes): sum over multi-indices l >= 1 with
// sum(l) = D + q, q in [max(0, k-D) .. k-1], of the tensor rules weighted
// by (-1)^(k-1-q) * C(D-1, k-1-q). Coincident nodes are merged by summing
// weights. After symmetrization the only value shared across univariate
// levels is exactly 0.0, so exact double comparison implements the merge.
inline SparseGrid smolyak_build(int D, int k, double sigma = 1.0) {
  if (D < 1) throw std::invalid_argument("smolyak_build: D must be >= 1");
  if (k < 1) throw std::invalid_argument("smolyak_build: k must be >= 1");
  if (sigma <= 0.0) throw std::invalid_argument("smolyak_build: sigma must be > 0");

  std::vector<UnivariateRule> rules(k + 1);
  for (int l = 1; l <= k; ++l) rules[l] = gauss_hermite(l);

  std::map<std::vector<double>, double> merged;
  std::vector<int> l(D);
  std::vector<double> point(D);
  for (int q = std::max(0, k - D); q <= k - 1; ++q) {
    const double coeff = ((k - 1 - q) % 2 ? -1.0 : 1.0) *
                         static_cast<double>(detail::binom(D - 1, k - 1 - q));
    detail::compositions(D + q, D, l, 0, [&](const std::vector<int>& li) {
      long npts = 1;
      for (int m = 0; m < D; ++m) npts *= li[m];
      std::vector<int> idx(D, 0);
      for (long p = 0; p < npts; ++p) {
        double w = coeff;
        for (int m = 0; m < D; ++m) {
          point[m] = rules[li[m]].nodes[idx[m]];
          w *= rules[li[m]].weights[idx[m]];
        }
        merged[point] += w;
        for (int m = D - 1; m >= 0; --m) {
          if (++idx[m] < li[m]) break;
          idx[m] = 0;
        }
      }
    });
  }

  SparseGrid grid;
  grid.dim = D;
  grid.level = k;
  grid.sigma = sigma;
  grid.nodes.resize(static_cast<long>(merged.size()), D);
  grid.weights.resize(static_cast<long>(merged.size()));
  long row = 0;
  for (const auto& [pt, w] : merged) {
    for (int m = 0; m < D; ++m) grid.nodes(row, m) = sigma * pt[m];
    grid.weights[row] = w;
    ++row;
  }
  return grid;
}

inline double integrate(const SparseGrid& grid,
                        const std::function<double(const Eigen::VectorXd&)>& f) {
  double total = 0.0;
  for (long j = 0; j < grid.size(); ++j) {
    const double v = f(grid.nodes.row(j).transpose());
    if (!std::isfinite(v))
      throw std::runtime_error("integrate: non-finite function value at node " +
                               std::to_string(j));
    total += grid.weights[j] * v;
  }
  return total;
}

// Binary grid cache. Layout (native little-endian):
//   8-byte magic "TTZOGRID", u32 version, u32 D, u32 k, f64 sigma,
//   u64 node count, then count*D node doubles (row-major), count weights.
inline void save_grid(const SparseGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_grid: cannot open " + path);
  const char magic[8] = {'T', 'T', 'Z', 'O', 'G', 'R', 'I', 'D'};
  out.write(magic, 8);
  const std::uint32_t version = 1, d = static_cast<std::uint32_t>(grid.dim),
                      k = static_cast<std::uint32_t>(grid.level);
  const std::uint64_t count = static_cast<std::uint64_t>(grid.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(&k), 4);
  out.write(reinterpret_cast<const char*>(&grid.sigma), 8);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(grid.nodes.data()),
            static_cast<std::streamsize>(sizeof(double) * grid.nodes.size()));
  out.write(reinterpret_cast<const char*>(grid.weights.data()),
            static_cast<std::streamsize>(sizeof(double) * grid.weights.size()));
  if (!out) throw std::runtime_error("save_grid: write failed for " + path);
}

inline SparseGrid load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_grid: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "TTZOGRID", 8) != 0)
    throw std::runtime_error("load_grid: bad magic in " + path);
  std::uint32_t version = 0, d = 0, k = 0;
  std::uint64_t count = 0;
  SparseGrid grid;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  in.read(reinterpret_cast<char*>(&k), 4);
  in.read(reinterpret_cast<char*>(&grid.sigma), 8);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in || version != 1)
    throw std::runtime_error("load_grid: unsupported version in " + path);
  grid.dim = static_cast<int>(d);
  grid.level = static_cast<int>(k);
  grid.nodes.resize(static_cast<long>(count), grid.dim);
  grid.weights.resize(static_cast<long>(count));
  in.read(reinterpret_cast<char*>(grid.nodes.data()),
          static_cast<std::streamsize>(sizeof(double) * grid.nodes.size()));
  in.read(reinterpret_cast<char*>(grid.weights.data()),
          static_cast<std::streamsize>(sizeof(double) * grid.weights.size()));
  if (!in) throw std::runtime_error("load_grid: truncated file " + path);
  return grid;
}

}  // namespace ttzo
