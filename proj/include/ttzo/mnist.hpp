#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ttzo/grad_oracle.hpp"
#include "ttzo/loss.hpp"
#include "ttzo/network.hpp"
#include "ttzo/zo.hpp"

namespace ttzo {

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw std::runtime_error(path + ": truncated IDX header");
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

constexpr std::uint32_t kIdxImageMagic = 0x00000803u;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801u;
constexpr int kMnistPixels = 28 * 28;

// Big-endian IDX image container; pixels come out scaled to [0,1].
inline Eigen::MatrixXd load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  const std::uint32_t magic = detail::read_be32(in, path);
  if (magic != kIdxImageMagic)
    throw std::runtime_error(path + ": bad IDX image magic");
  const std::uint32_t count = detail::read_be32(in, path);
  const std::uint32_t rows = detail::read_be32(in, path);
  const std::uint32_t cols = detail::read_be32(in, path);
  if (rows != 28 || cols != 28)
    throw std::runtime_error(path + ": expected 28x28 images");
  std::vector<unsigned char> buf(static_cast<size_t>(count) * kMnistPixels);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(in.gcount()) != buf.size())
    throw std::runtime_error(path + ": truncated IDX image data");
  Eigen::MatrixXd X(count, kMnistPixels);
  for (std::uint32_t i = 0; i < count; ++i)
    for (int j = 0; j < kMnistPixels; ++j)
      X(i, j) = buf[static_cast<size_t>(i) * kMnistPixels + j] / 255.0;
  return X;
}

inline std::vector<int> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  const std::uint32_t magic = detail::read_be32(in, path);
  if (magic != kIdxLabelMagic)
    throw std::runtime_error(path + ": bad IDX label magic");
  const std::uint32_t count = detail::read_be32(in, path);
  std::vector<unsigned char> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<size_t>(in.gcount()) != buf.size())
    throw std::runtime_error(path + ": truncated IDX label data");
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (buf[i] > 9)
      throw std::runtime_error(path + ": label out of range 0-9 at index " +
                               std::to_string(i));
    labels[i] = buf[i];
  }
  return labels;
}

inline void write_idx_images(const std::string& path,
                             const std::vector<std::uint8_t>& pixels, long count) {
  if (pixels.size() != static_cast<size_t>(count) * kMnistPixels)
    throw std::invalid_argument(path + ": pixel buffer size must be count*784");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  detail::write_be32(out, kIdxImageMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(count));
  detail::write_be32(out, 28);
  detail::write_be32(out, 28);
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline void write_idx_labels(const std::string& path,
                             const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  detail::write_be32(out, kIdxLabelMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

struct Dataset {
  Eigen::MatrixXd X;  // one image per row, values in [0,1]
  std::vector<int> y;

  long size() const { return X.rows(); }
};

inline Dataset load_dataset(const std::string& images_path,
                            const std::string& labels_path) {
  Dataset d;
  d.X = load_idx_images(images_path);
  d.y = load_idx_labels(labels_path);
  if (d.X.rows() != static_cast<long>(d.y.size()))
    throw std::runtime_error("image/label count mismatch: " + images_path + " has " +
                             std::to_string(d.X.rows()) + ", " + labels_path + " has " +
                             std::to_string(d.y.size()));
  return d;
}

inline Dataset take(const Dataset& d, long start, long count) {
  if (start < 0 || count < 0 || start + count > d.size())
    throw std::out_of_range("dataset slice out of range");
  Dataset out;
  out.X = d.X.middleRows(start, count);
  out.y.assign(d.y.begin() + start, d.y.begin() + start + count);
  return out;
}

// Deterministic epoch shuffling: every index appears exactly once per epoch,
// with a fresh permutation drawn from the batch stream for each epoch.
struct EpochBatcher {
  const Dataset* data = nullptr;
  int batch = 64;
  std::uint64_t seed = 0;
  long cached_epoch = -1;
  std::vector<long> perm;

  long steps_per_epoch() const {
    return (data->size() + batch - 1) / batch;
  }

  void fill(long epoch, long pos, Eigen::MatrixXd& Xb, std::vector<int>& yb) {
    if (epoch != cached_epoch) {
      perm.resize(data->size());
      std::iota(perm.begin(), perm.end(), 0L);
      auto rng = make_rng(seed, Stream::batch, static_cast<std::uint64_t>(epoch));
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    const long start = pos * batch;
    const long count = std::min<long>(batch, data->size() - start);
    if (count <= 0) throw std::out_of_range("batch position past end of epoch");
    Xb.resize(count, data->X.cols());
    yb.resize(count);
    for (long i = 0; i < count; ++i) {
      Xb.row(i) = data->X.row(perm[start + i]);
      yb[i] = data->y[perm[start + i]];
    }
  }
};

namespace detail {

// Per-step cache for the coordinate-descent fast path: inputs, pre-act
// outputs, and TT sweep stages for every layer at the base parameters. A
// single-coordinate perturbation then touches only what depends on it:
// dense-weight and bias bumps are rank-1 updates of the cached pre-act, and
// a TT core bump resumes the sweep at that core's stage. Everything below
// the touched layer is reused.
struct CoordCache {
  Eigen::VectorXd base;
  std::vector<Eigen::MatrixXd> A;       // A[0] = batch input, A[l+1] = layer l output
  std::vector<Eigen::MatrixXd> Z;       // Z[l] = layer l pre-activation
  std::vector<TTSweepCache> sweeps;     // populated for TT layers
  bool valid = false;

  void rebuild(Network& net, const Eigen::VectorXd& theta, const Eigen::MatrixXd& X) {
    unpack(net, theta);
    const size_t L = net.layers.size();
    A.assign(L + 1, {});
    Z.assign(L, {});
    sweeps.assign(L, {});
    A[0] = X;
    for (size_t l = 0; l < L; ++l) {
      if (const auto* tt = std::get_if<TTLinear>(&net.layers[l].op))
        Z[l] = tt_matvec_batch_cached(*tt, A[l], sweeps[l]);
      else
        Z[l] = layer_linear(net.layers[l], A[l]);
      A[l + 1] = Z[l];
      apply_act(net.layers[l].act, A[l + 1]);
    }
    base = theta;
    valid = true;
  }
};

}  // namespace detail

// Per-step loss oracle over one mini-batch. The coordinate path reuses
// cached prefix activations and re-runs only the suffix of the network, which
// is what makes full coordinate sweeps affordable on the TT models.
inline LossOracle make_mnist_oracle(const std::shared_ptr<Network>& work,
                                    Eigen::MatrixXd Xb, std::vector<int> yb) {
  auto cache = std::make_shared<detail::CoordCache>();
  auto Xp = std::make_shared<Eigen::MatrixXd>(std::move(Xb));
  auto yp = std::make_shared<std::vector<int>>(std::move(yb));

  LossOracle oracle;
  oracle.loss = [work, Xp, yp, cache](const Eigen::VectorXd& theta) {
    cache->valid = false;  // the net leaves the cached base parameters
    unpack(*work, theta);
    return ce_loss(forward_batch(*work, *Xp), *yp);
  };
  oracle.coord_loss = [work, Xp, yp, cache](const Eigen::VectorXd& theta, long idx,
                                            double mu) {
    Network& net = *work;
    if (!cache->valid || cache->base.size() != theta.size() ||
        !(cache->base.array() == theta.array()).all())
      cache->rebuild(net, theta, *Xp);

    size_t l = 0;
    long off = idx;
    while (l < net.layers.size() && off >= net.layers[l].param_count())
      off -= net.layers[l++].param_count();
    if (l == net.layers.size())
      throw std::out_of_range("coordinate index past parameter count");

    Eigen::MatrixXd Zp;
    if (const auto* tt = std::get_if<TTLinear>(&net.layers[l].op)) {
      const long weights = tt->shape.weight_param_count();
      if (off < weights) {
        int k = 0;
        while (off >= tt->cores[k].size()) off -= tt->cores[k++].size();
        Zp = tt_matvec_resume(*tt, cache->sweeps[l], k, off, mu);
      } else {
        Zp = cache->Z[l];
        Zp.col(off - weights).array() += mu;
      }
    } else {
      const auto& d = std::get<DenseLinear>(net.layers[l].op);
      Zp = cache->Z[l];
      const long ws = d.W.size();
      if (off < ws)
        Zp.col(off % d.W.cols()) += mu * cache->A[l].col(off / d.W.cols());
      else
        Zp.col(off - ws).array() += mu;
    }
    apply_act(net.layers[l].act, Zp);
    for (size_t m = l + 1; m < net.layers.size(); ++m)
      Zp = layer_forward(net.layers[m], Zp);
    return ce_loss(Zp, *yp);
  };
  return oracle;
}

// ZO training over shuffled mini-batches; the trace's val_metric column is
// held-out accuracy. The network's initial parameters are the starting point.
inline TrainResult train_mnist(const Network& proto, const Dataset& train,
                               const Dataset& val, OptMode mode,
                               const HybridSchedule& sched, long epochs, int batch,
                               std::uint64_t master_seed, bool record_time = false,
                               const std::function<bool(double)>& early_stop = {}) {
  if (train.size() < 1) throw std::invalid_argument("train_mnist: empty training set");
  if (batch < 1) throw std::invalid_argument("train_mnist: batch must be >= 1");
  auto work = std::make_shared<Network>(proto);
  auto batcher = std::make_shared<EpochBatcher>();
  batcher->data = &train;
  batcher->batch = batch;
  batcher->seed = master_seed;
  const long steps = batcher->steps_per_epoch();

  auto make_oracle = [work, batcher, steps](long step) {
    Eigen::MatrixXd Xb;
    std::vector<int> yb;
    batcher->fill(step / steps, step % steps, Xb, yb);
    return make_mnist_oracle(work, std::move(Xb), std::move(yb));
  };
  auto validate = [work, &val](const Eigen::VectorXd& theta) {
    unpack(*work, theta);
    return accuracy(forward_batch(*work, val.X), val.y);
  };

  auto perturb_rng = make_rng(master_seed, Stream::perturb);
  return zo_train(make_oracle, pack(proto), mode, sched, epochs, steps, perturb_rng,
                  validate, record_time, early_stop);
}

// First-order baseline: plain SGD with the exact analytic gradient. Only the
// dense architectures support it; each step counts as one oracle query.
inline TrainResult fo_train_mnist(const Network& proto, const Dataset& train,
                                  const Dataset& val, const LrSchedule& lr,
                                  long epochs, int batch, std::uint64_t master_seed,
                                  bool record_time = false) {
  if (train.size() < 1) throw std::invalid_argument("fo_train_mnist: empty training set");
  Network work = proto;
  Eigen::VectorXd theta = pack(work);
  EpochBatcher batcher;
  batcher.data = &train;
  batcher.batch = batch;
  batcher.seed = master_seed;
  const long steps = batcher.steps_per_epoch();

  TrainResult result;
  Eigen::MatrixXd Xb;
  std::vector<int> yb;
  const auto t0 = std::chrono::steady_clock::now();
  for (long epoch = 0; epoch < epochs; ++epoch) {
    double loss_sum = 0.0;
    const double alpha = lr.at(epoch);
    for (long s = 0; s < steps; ++s) {
      batcher.fill(epoch, s, Xb, yb);
      OracleGrad g = exact_grad_mlp(work, theta, Xb, yb);
      if (!std::isfinite(g.loss)) {
        result.diverged = true;
        break;
      }
      theta -= alpha * g.grad;
      loss_sum += g.loss;
      result.total_queries += 1;
    }
    if (result.diverged) break;
    TraceRow row;
    row.epoch = epoch;
    row.stage = "fo";
    row.train_loss = loss_sum / static_cast<double>(steps);
    unpack(work, theta);
    row.val_metric = accuracy(forward_batch(work, val.X), val.y);
    row.cumulative_queries = result.total_queries;
    if (record_time)
      row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
    result.trace.rows.push_back(row);
  }
  result.theta = std::move(theta);
  return result;
}

}  // namespace ttzo
