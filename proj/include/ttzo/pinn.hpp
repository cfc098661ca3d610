#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "ttzo/grad_oracle.hpp"
#include "ttzo/network.hpp"
#include "ttzo/stein.hpp"
#include "ttzo/zo.hpp"

namespace ttzo {

// HJB benchmark on [0,1]^D x [0,1]:
//   dU/dt + lap U - 0.05 ||grad U||^2 = -(1 + 0.05 D),  U(x, 1) = ||x||_1,
// exact solution U(x, t) = ||x||_1 + 1 - t. The network learns the
// correction f in U = f(x, t) + ||x||_1 + 1 - t, which absorbs the terminal
// condition; derivatives of the known part are added analytically, so the
// derivative backend only ever differentiates f.

enum class DerivMode { ad, fd, se, sg };

inline DerivMode deriv_mode_from_name(const std::string& s) {
  if (s == "ad") return DerivMode::ad;
  if (s == "fd") return DerivMode::fd;
  if (s == "se") return DerivMode::se;
  if (s == "sg") return DerivMode::sg;
  throw std::invalid_argument("unknown derivative mode: " + s);
}

struct HjbConfig {
  int D = 20;
  DerivMode mode = DerivMode::sg;
  double fd_h = 0.01;
  double sigma = 0.1;
  int sg_level = 3;
  int mc_samples = 1024;
  int collocation_batch = 100;
  long val_points = 10000;
  double lambda_terminal = 0.0;  // optional terminal-condition penalty

  double rhs() const { return -(1.0 + 0.05 * D); }

  void validate() const {
    if (D < 1) throw std::invalid_argument("HjbConfig: D must be >= 1");
    if (fd_h <= 0.0 || sigma <= 0.0)
      throw std::invalid_argument("HjbConfig: steps must be positive");
    if (collocation_batch < 1 || val_points < 1 || mc_samples < 1 || sg_level < 1)
      throw std::invalid_argument("HjbConfig: counts must be positive");
    if (lambda_terminal < 0.0)
      throw std::invalid_argument("HjbConfig: lambda_terminal must be >= 0");
  }
};

inline double hjb_exact_solution(const Eigen::VectorXd& x, double t) {
  return x.cwiseAbs().sum() + 1.0 - t;
}

// Uniform draws over [0,1]^D x [0,1]; one joint (x, t) point per row.
inline Eigen::MatrixXd sample_box(std::mt19937_64& rng, long count, int D) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::MatrixXd P(count, D + 1);
  for (long i = 0; i < P.rows(); ++i)
    for (long j = 0; j < P.cols(); ++j) P(i, j) = uni(rng);
  return P;
}

// Derivative estimates of the raw network at a batch of joint points.
struct NetDerivs {
  Eigen::VectorXd value;   // f at each point
  Eigen::VectorXd dt;      // df/dt
  Eigen::MatrixXd grad_x;  // B x D
  Eigen::VectorXd lap_x;   // spatial Laplacian
};

// Owns the working network and the precomputed smoothing grid for one
// experiment; parameters are swapped in through unpack before evaluation.
struct HjbRun {
  HjbConfig cfg;
  Network net;
  std::uint64_t master_seed = 0;
  SmoothedModel smooth;  // se/sg modes

  HjbRun(HjbConfig c, Network n, std::uint64_t seed)
      : cfg(c), net(std::move(n)), master_seed(seed) {
    cfg.validate();
    net.validate();
    if (net.input_dim() != cfg.D + 1 || net.output_dim() != 1)
      throw std::invalid_argument("HjbRun: network must map R^(D+1) -> R");
    if (cfg.mode == DerivMode::se || cfg.mode == DerivMode::sg) {
      smooth.f = [this](const Eigen::MatrixXd& P) { return forward_batch(net, P); };
      smooth.dim = cfg.D + 1;
      smooth.sigma = cfg.sigma;
      if (cfg.mode == DerivMode::sg) {
        smooth.mode = SmoothedModel::Mode::sg;
        smooth.grid = smolyak_build(cfg.D + 1, cfg.sg_level, cfg.sigma);
      } else {
        smooth.mode = SmoothedModel::Mode::mc;
        smooth.mc_samples = cfg.mc_samples;
        smooth.seed = master_seed;
      }
      smooth.validate();
    }
  }

  // Swap in a precomputed smoothing grid (e.g. from a gridgen cache file).
  void use_grid(SparseGrid grid) {
    if (cfg.mode != DerivMode::sg)
      throw std::invalid_argument("use_grid: run is not in sg mode");
    smooth.grid = std::move(grid);
    smooth.validate();
  }

  NetDerivs net_derivs(const Eigen::MatrixXd& XT, std::uint64_t draw_key) {
    const int D = cfg.D;
    if (XT.cols() != D + 1)
      throw std::invalid_argument("net_derivs: joint points must have D+1 columns");
    const long B = XT.rows();
    NetDerivs out;
    switch (cfg.mode) {
      case DerivMode::se:
      case DerivMode::sg: {
        ScalarSteinBatch sb = stein_scalar_batch(smooth, XT, D, draw_key);
        out.value = std::move(sb.value);
        out.dt = sb.grad.col(D);
        out.grad_x = sb.grad.leftCols(D);
        out.lap_x = std::move(sb.lap);
        break;
      }
      case DerivMode::fd: {
        const long stride = 2 * (D + 1) + 1;
        Eigen::MatrixXd P(stride * B, D + 1);
        for (long b = 0; b < B; ++b) {
          const long base = stride * b;
          P.row(base) = XT.row(b);
          for (int i = 0; i <= D; ++i) {
            P.row(base + 1 + i) = XT.row(b);
            P(base + 1 + i, i) += cfg.fd_h;
            P.row(base + 1 + D + 1 + i) = XT.row(b);
            P(base + 1 + D + 1 + i, i) -= cfg.fd_h;
          }
        }
        const Eigen::MatrixXd Y = forward_batch(net, P);
        out.value.resize(B);
        out.dt.resize(B);
        out.grad_x.resize(B, D);
        out.lap_x.resize(B);
        const double inv2h = 1.0 / (2.0 * cfg.fd_h);
        const double invh2 = 1.0 / (cfg.fd_h * cfg.fd_h);
        for (long b = 0; b < B; ++b) {
          const long base = stride * b;
          const double u0 = Y(base, 0);
          out.value[b] = u0;
          double lap = 0.0;
          for (int i = 0; i <= D; ++i) {
            const double up = Y(base + 1 + i, 0);
            const double um = Y(base + 1 + D + 1 + i, 0);
            const double g = (up - um) * inv2h;
            if (i < D) {
              out.grad_x(b, i) = g;
              lap += (up + um - 2.0 * u0) * invh2;
            } else {
              out.dt[b] = g;
            }
          }
          out.lap_x[b] = lap;
        }
        break;
      }
      case DerivMode::ad: {
        out.value.resize(B);
        out.dt.resize(B);
        out.grad_x.resize(B, D);
        out.lap_x.resize(B);
        for (long b = 0; b < B; ++b) {
          PinnDerivs pd = exact_pinn_derivatives(net, XT.row(b).transpose(), D);
          out.value[b] = pd.u;
          out.dt[b] = pd.du_dt;
          out.grad_x.row(b) = pd.grad_x.transpose();
          out.lap_x[b] = pd.lap_x;
        }
        break;
      }
    }
    return out;
  }

  // PDE residual of the transformed solution at each point.
  Eigen::VectorXd residuals(const Eigen::MatrixXd& XT, std::uint64_t draw_key) {
    const int D = cfg.D;
    NetDerivs nd = net_derivs(XT, draw_key);
    const long B = XT.rows();
    Eigen::VectorXd res(B);
    for (long b = 0; b < B; ++b) {
      double grad_sq = 0.0;
      for (int i = 0; i < D; ++i) {
        const double xi = XT(b, i);
        const double sgn = xi > 0.0 ? 1.0 : (xi < 0.0 ? -1.0 : 0.0);
        const double gi = nd.grad_x(b, i) + sgn;
        grad_sq += gi * gi;
      }
      res[b] = (nd.dt[b] - 1.0) + nd.lap_x[b] - 0.05 * grad_sq - cfg.rhs();
    }
    return res;
  }

  double loss_at_params(const Eigen::VectorXd& theta, const Eigen::MatrixXd& XT,
                        std::uint64_t draw_key) {
    unpack(net, theta);
    const Eigen::VectorXd res = residuals(XT, draw_key);
    double loss = res.squaredNorm() / static_cast<double>(res.size());
    if (cfg.lambda_terminal > 0.0) {
      // With the built-in transform the terminal misfit is f(x, 1) itself.
      Eigen::MatrixXd XT1 = XT;
      XT1.col(cfg.D).setOnes();
      const Eigen::MatrixXd f1 = forward_batch(net, XT1);
      loss += cfg.lambda_terminal * f1.squaredNorm() / static_cast<double>(f1.rows());
    }
    return loss;
  }

  // MSE of the (unsmoothed) transformed prediction against the exact
  // solution; with this transform the error is exactly f itself.
  double validation_mse(const Eigen::MatrixXd& XT) {
    const Eigen::MatrixXd f = forward_batch(net, XT);
    return f.squaredNorm() / static_cast<double>(f.rows());
  }
};

// ZO training against freshly sampled collocation batches. The trace's
// val_metric column holds the validation MSE on a fixed point set.
inline TrainResult train_hjb(HjbRun& run, OptMode mode, const HybridSchedule& sched,
                             long epochs, long steps_per_epoch,
                             bool record_time = false,
                             const std::function<bool(double)>& early_stop = {}) {
  auto colloc_rng = make_rng(run.master_seed, Stream::collocation);
  auto val_rng = make_rng(run.master_seed, Stream::validation);
  auto perturb_rng = make_rng(run.master_seed, Stream::perturb);
  const Eigen::MatrixXd val_set = sample_box(val_rng, run.cfg.val_points, run.cfg.D);

  auto make_oracle = [&run, &colloc_rng](long step) {
    Eigen::MatrixXd batch = sample_box(colloc_rng, run.cfg.collocation_batch, run.cfg.D);
    LossOracle oracle;
    oracle.loss = [&run, batch = std::move(batch), step](const Eigen::VectorXd& theta) {
      return run.loss_at_params(theta, batch, static_cast<std::uint64_t>(step));
    };
    return oracle;
  };
  auto validate = [&run, &val_set](const Eigen::VectorXd& theta) {
    unpack(run.net, theta);
    return run.validation_mse(val_set);
  };

  return zo_train(make_oracle, pack(run.net), mode, sched, epochs, steps_per_epoch,
                  perturb_rng, validate, record_time, early_stop);
}

}  // namespace ttzo
