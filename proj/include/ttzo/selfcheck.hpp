#pragma once

// Fast invariant suite behind the `verify` subcommand: exercises the load
// bearing identities of every module in a few seconds and reports one line
// per check.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ttzo/checkpoint.hpp"
#include "ttzo/loss.hpp"
#include "ttzo/mnist.hpp"
#include "ttzo/network.hpp"
#include "ttzo/pinn.hpp"
#include "ttzo/quadrature.hpp"
#include "ttzo/rng.hpp"
#include "ttzo/stein.hpp"
#include "ttzo/tensor_train.hpp"
#include "ttzo/zo.hpp"

namespace ttzo {

namespace detail {

inline void check_true(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

inline void check_close(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol))
    throw std::runtime_error(what + ": got " + std::to_string(got) + ", want " +
                             std::to_string(want));
}

}  // namespace detail

// Runs every check, prints "ok <name>" / "FAIL <name>: <reason>" lines, and
// returns true iff all passed.
inline bool run_selfcheck() {
  using detail::check_close;
  using detail::check_true;
  namespace fs = std::filesystem;

  std::vector<std::pair<std::string, std::function<void()>>> checks;

  checks.emplace_back("tt-matvec-matches-dense", [] {
    std::mt19937_64 rng(7);
    const std::vector<TTShape> shapes = {
        {{4, 3}, {2, 5}, {1, 3, 1}},
        {{2, 3, 4}, {3, 2, 2}, {1, 4, 5, 1}},
        {{3, 2, 2, 3}, {2, 2, 3, 2}, {1, 2, 4, 3, 1}},
    };
    for (const auto& shape : shapes) {
      TTLinear tt = tt_random(shape, rng);
      const Eigen::MatrixXd W = tt_reconstruct(tt);
      const Eigen::MatrixXd X =
          Eigen::MatrixXd::NullaryExpr(6, shape.rows(), [&](Eigen::Index, Eigen::Index) {
            return std::uniform_real_distribution<double>(-1, 1)(rng);
          });
      Eigen::MatrixXd want = X * W;
      want.rowwise() += tt.bias.transpose();
      const Eigen::MatrixXd got = tt_matvec_batch(tt, X);
      const double rel = (got - want).norm() / std::max(want.norm(), 1e-300);
      check_true(rel < 1e-10, "relative error " + std::to_string(rel));
    }
  });

  checks.emplace_back("parameter-counts", [] {
    std::mt19937_64 rng(3);
    check_close(mnist_mlp_dense(rng).param_count(), 814090, 0, "dense mnist");
    check_close(mnist_mlp_tt(6, rng).param_count(), 3962, 0, "tt mnist r=6");
    check_close(hjb_mlp_dense(20, 768, rng).param_count(), 608257, 0, "dense hjb");
  });

  checks.emplace_back("hermite-rule-symmetry", [] {
    for (int n = 1; n <= 9; ++n) {
      const UnivariateRule rule = gauss_hermite(n);
      double wsum = 0.0;
      for (int i = 0; i < n; ++i) {
        wsum += rule.weights[i];
        check_close(rule.nodes[i], -rule.nodes[n - 1 - i], 1e-13, "node symmetry");
      }
      check_close(wsum, 1.0, 1e-13, "weight sum");
    }
  });

  checks.emplace_back("sparse-grid-size-and-moments", [] {
    for (int D = 2; D <= 8; ++D) {
      const SparseGrid g = smolyak_build(D, 3);
      check_close(static_cast<double>(g.nodes.rows()), 2.0 * D * D + 2 * D + 1, 0,
                  "level-3 node count");
      check_close(g.weights.sum(), 1.0, 1e-12, "weight sum");
    }
    const double s = 0.7;
    const SparseGrid g = smolyak_build(3, 3, s);
    const Eigen::VectorXd x0 = g.nodes.col(0);
    check_close(g.weights.dot(x0), 0.0, 1e-10, "first moment");
    check_close(g.weights.dot(x0.cwiseProduct(x0)), s * s, 1e-10, "second moment");
    check_close(g.weights.dot(x0.array().pow(4).matrix()), 3 * s * s * s * s, 1e-9,
                "fourth moment");
  });

  checks.emplace_back("stein-exact-on-quadratic", [] {
    const int D = 4;
    Eigen::MatrixXd A(D, D);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) A(i, j) = u(rng);
    A = ((A + A.transpose()) / 2).eval();
    const Eigen::VectorXd b =
        Eigen::VectorXd::NullaryExpr(D, [&](Eigen::Index) { return u(rng); });
    auto f = [&](const Eigen::MatrixXd& P) {
      Eigen::MatrixXd out(P.rows(), 1);
      for (long r = 0; r < P.rows(); ++r) {
        const Eigen::VectorXd x = P.row(r).transpose();
        out(r, 0) = x.dot(A * x) + b.dot(x);
      }
      return out;
    };
    const SmoothedModel m = make_sg_smoothed(f, D, 0.2);
    Eigen::MatrixXd X(3, D);
    for (long r = 0; r < X.rows(); ++r)
      for (int j = 0; j < D; ++j) X(r, j) = u(rng);
    const ScalarSteinBatch sb = stein_scalar_batch(m, X);
    for (long r = 0; r < X.rows(); ++r) {
      const Eigen::VectorXd x = X.row(r).transpose();
      const Eigen::VectorXd gwant = 2 * A * x + b;
      check_true((sb.grad.row(r).transpose() - gwant).norm() < 1e-8, "gradient");
      check_close(sb.lap[r], 2 * A.trace(), 1e-8, "laplacian");
    }
  });

  checks.emplace_back("cge-exact-on-quadratic", [] {
    const int d = 6;
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-1, 1);
    const Eigen::VectorXd c =
        Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return u(rng); });
    LossOracle oracle;
    oracle.loss = [&c](const Eigen::VectorXd& t) {
      return 0.5 * t.squaredNorm() + c.dot(t);
    };
    const Eigen::VectorXd theta =
        Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return u(rng); });
    // Forward difference of this quadratic is exactly theta + c + mu/2.
    const double mu = 1e-3;
    const ZoEstimate est = cge_estimate(oracle, theta, mu);
    const Eigen::VectorXd want =
        theta + c + Eigen::VectorXd::Constant(d, mu / 2);
    check_true((est.grad - want).norm() < 1e-9, "forward difference gradient");
    check_close(static_cast<double>(est.queries), d + 1.0, 0, "query count");
  });

  checks.emplace_back("backprop-matches-finite-difference", [] {
    std::mt19937_64 rng(23);
    Network net;
    net.layers.push_back({dense_glorot(5, 7, rng), Act::relu});
    net.layers.push_back({dense_glorot(7, 3, rng), Act::identity});
    Eigen::VectorXd theta = pack(net);
    Eigen::MatrixXd X(4, 5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (long r = 0; r < X.rows(); ++r)
      for (long p = 0; p < X.cols(); ++p) X(r, p) = u(rng);
    const std::vector<int> labels = {0, 2, 1, 2};
    const OracleGrad og = exact_grad_mlp(net, theta, X, labels);
    const double h = 1e-6;
    for (long i : {0L, 9L, 30L, theta.size() - 1}) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      unpack(net, tp);
      const double lp = ce_loss(forward_batch(net, X), labels);
      unpack(net, tm);
      const double lm = ce_loss(forward_batch(net, X), labels);
      check_close(og.grad[i], (lp - lm) / (2 * h), 1e-6, "coordinate " + std::to_string(i));
    }
  });

  checks.emplace_back("pde-residual-zero-at-exact-solution", [] {
    std::mt19937_64 rng(31);
    HjbConfig cfg;
    cfg.D = 4;
    cfg.mode = DerivMode::ad;
    Network net = hjb_mlp_tt(4, 40, 2, rng);
    for (auto& layer : net.layers)
      if (auto* tt = std::get_if<TTLinear>(&layer.op))
        for (auto& core : tt->cores) core.setZero();
    std::vector<DerivMode> modes = {DerivMode::ad, DerivMode::fd};
    for (DerivMode mode : modes) {
      cfg.mode = mode;
      HjbRun run(cfg, net, 5);
      auto pts_rng = make_rng(5, Stream::collocation);
      const Eigen::MatrixXd XT = sample_box(pts_rng, 50, cfg.D);
      const Eigen::VectorXd res = run.residuals(XT, 0);
      check_true(res.cwiseAbs().maxCoeff() < 1e-10, "max residual too large");
    }
  });

  checks.emplace_back("cross-entropy-uniform-logits", [] {
    const Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(3, 10);
    check_close(ce_loss(logits, {1, 5, 9}), std::log(10.0), 1e-12, "ln 10");
  });

  checks.emplace_back("checkpoint-round-trip", [] {
    std::mt19937_64 rng(41);
    Network net = mnist_mlp_tt(3, rng);
    const fs::path path = fs::temp_directory_path() / "ttzo-selfcheck-ckpt.bin";
    save_checkpoint(net, path.string());
    const Network back = load_checkpoint(path.string());
    fs::remove(path);
    const Eigen::VectorXd a = pack(net), b = pack(back);
    check_true(a.size() == b.size() && (a.array() == b.array()).all(),
               "parameters not bitwise identical");
  });

  checks.emplace_back("grid-cache-round-trip", [] {
    const SparseGrid g = smolyak_build(5, 3, 0.3);
    const fs::path path = fs::temp_directory_path() / "ttzo-selfcheck-grid.bin";
    save_grid(g, path.string());
    const SparseGrid back = load_grid(path.string());
    fs::remove(path);
    check_true(back.dim == g.dim && back.level == g.level && back.sigma == g.sigma,
               "header mismatch");
    check_true((back.nodes.array() == g.nodes.array()).all() &&
                   (back.weights.array() == g.weights.array()).all(),
               "payload not bitwise identical");
  });

  checks.emplace_back("idx-round-trip", [] {
    const fs::path dir = fs::temp_directory_path();
    const fs::path ip = dir / "ttzo-selfcheck.idx3";
    const fs::path lp = dir / "ttzo-selfcheck.idx1";
    std::vector<std::uint8_t> pixels(2 * kMnistPixels, 0);
    pixels[5] = 255;
    pixels[kMnistPixels + 9] = 128;
    write_idx_images(ip.string(), pixels, 2);
    write_idx_labels(lp.string(), {4, 7});
    const Eigen::MatrixXd X = load_idx_images(ip.string());
    const std::vector<int> y = load_idx_labels(lp.string());
    fs::remove(ip);
    fs::remove(lp);
    check_true(X.rows() == 2 && X.cols() == kMnistPixels, "image shape");
    check_close(X(0, 5), 1.0, 0, "pixel scaling");
    check_close(X(1, 9), 128.0 / 255.0, 0, "pixel scaling");
    check_true(y == std::vector<int>({4, 7}), "labels");
  });

  bool all_ok = true;
  for (const auto& [name, fn] : checks) {
    try {
      fn();
      std::printf("ok %s\n", name.c_str());
    } catch (const std::exception& e) {
      std::printf("FAIL %s: %s\n", name.c_str(), e.what());
      all_ok = false;
    }
  }
  return all_ok;
}

}  // namespace ttzo
