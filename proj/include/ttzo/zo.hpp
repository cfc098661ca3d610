#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "ttzo/rng.hpp"
#include "ttzo/trace.hpp"

namespace ttzo {

struct DivergedLoss : std::runtime_error {
  explicit DivergedLoss(const std::string& what) : std::runtime_error(what) {}
};

// Loss closed over a fixed mini-batch (or collocation batch). coord_loss is
// an optional fast path for single-coordinate perturbations used by CGE:
// coord_loss(theta, i, mu) must equal loss(theta + mu*e_i) to round-off.
struct LossOracle {
  std::function<double(const Eigen::VectorXd&)> loss;
  std::function<double(const Eigen::VectorXd&, long, double)> coord_loss;

  double operator()(const Eigen::VectorXd& theta) const { return loss(theta); }
};

struct ZoEstimate {
  Eigen::VectorXd grad;
  long queries = 0;
  double loss_at_theta = 0.0;
};

inline double checked_loss(double v, const char* where) {
  if (!std::isfinite(v))
    throw DivergedLoss(std::string("non-finite loss in ") + where);
  return v;
}

// Randomized estimate: grad = sum_i 1/(N mu) [L(theta + mu xi_i) - L(theta)] xi_i
// with xi_i i.i.d. standard Gaussian (or Rademacher). Uses N+1 loss queries;
// L(theta) is evaluated once and shared.
inline ZoEstimate rge_estimate(const LossOracle& oracle, const Eigen::VectorXd& theta,
                               int N, double mu, std::mt19937_64& rng,
                               bool rademacher = false) {
  if (N < 1) throw std::invalid_argument("rge_estimate: N must be >= 1");
  if (mu <= 0.0) throw std::invalid_argument("rge_estimate: mu must be > 0");
  ZoEstimate est;
  est.loss_at_theta = checked_loss(oracle(theta), "rge_estimate");
  est.grad = Eigen::VectorXd::Zero(theta.size());
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd xi = rademacher ? rademacher_vector(rng, theta.size())
                                          : gaussian_vector(rng, theta.size());
    const double li = checked_loss(oracle(theta + mu * xi), "rge_estimate");
    est.grad += ((li - est.loss_at_theta) / (N * mu)) * xi;
  }
  est.queries = N + 1;
  return est;
}

// Coordinate-wise estimate: grad_i = (L(theta + mu e_i) - L(theta)) / mu.
// Uses d+1 queries (or the coord_loss fast path when the oracle provides one).
inline ZoEstimate cge_estimate(const LossOracle& oracle, const Eigen::VectorXd& theta,
                               double mu) {
  if (mu <= 0.0) throw std::invalid_argument("cge_estimate: mu must be > 0");
  ZoEstimate est;
  est.loss_at_theta = checked_loss(oracle(theta), "cge_estimate");
  est.grad.resize(theta.size());
  if (oracle.coord_loss) {
    for (long i = 0; i < theta.size(); ++i) {
      const double li = checked_loss(oracle.coord_loss(theta, i, mu), "cge_estimate");
      est.grad[i] = (li - est.loss_at_theta) / mu;
    }
  } else {
    Eigen::VectorXd work = theta;
    for (long i = 0; i < theta.size(); ++i) {
      work[i] = theta[i] + mu;
      const double li = checked_loss(oracle(work), "cge_estimate");
      work[i] = theta[i];
      est.grad[i] = (li - est.loss_at_theta) / mu;
    }
  }
  est.queries = theta.size() + 1;
  return est;
}

// theta <- theta - alpha * sign(grad), with sign(0) = 0.
inline Eigen::VectorXd sign_step(const Eigen::VectorXd& theta,
                                 const Eigen::VectorXd& grad, double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("sign_step: alpha must be > 0");
  return theta - alpha * grad.unaryExpr([](double g) {
    return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
  });
}

// b <- m*b + grad; theta <- theta - alpha*b. A zero-initialized b makes the
// first step use b = grad.
inline Eigen::VectorXd momentum_step(const Eigen::VectorXd& theta,
                                     const Eigen::VectorXd& grad, Eigen::VectorXd& b,
                                     double m, double alpha) {
  if (m < 0.0 || m >= 1.0)
    throw std::invalid_argument("momentum_step: need 0 <= m < 1");
  if (b.size() == 0) b = Eigen::VectorXd::Zero(grad.size());
  b = m * b + grad;
  return theta - alpha * b;
}

struct LrSchedule {
  double lr0 = 1e-3;
  double decay = 0.9;    // multiplicative factor
  int every = 10;        // epochs between decays; 0 = constant

  double at(long epoch) const {
    if (every <= 0) return lr0;
    return lr0 * std::pow(decay, static_cast<double>(epoch / every));
  }
};

// Two-stage plan: sign steps on RGE until training loss plateaus, then
// momentum steps on CGE. Stage learning rates are indexed from each stage's
// own first epoch.
struct HybridSchedule {
  int rge_samples = 10;
  double mu_coarse = 0.1;
  LrSchedule lr_coarse;
  bool rademacher = false;

  double mu_fine = 0.01;
  double momentum = 0.9;
  LrSchedule lr_fine;

  // Switch after the relative epoch-loss improvement max(rel, 0) stays below
  // eps_switch for patience consecutive epochs. +inf forces a switch after
  // exactly `patience` epochs; 0 disables switching.
  double eps_switch = 1e-3;
  int patience = 3;

  void validate() const {
    if (rge_samples < 1 || mu_coarse <= 0.0 || mu_fine <= 0.0)
      throw std::invalid_argument("HybridSchedule: bad sampling parameters");
    if (momentum < 0.0 || momentum >= 1.0)
      throw std::invalid_argument("HybridSchedule: need 0 <= momentum < 1");
    if (patience < 1) throw std::invalid_argument("HybridSchedule: patience >= 1");
    if (eps_switch < 0.0) throw std::invalid_argument("HybridSchedule: eps_switch >= 0");
  }
};

enum class OptMode { rge, signrge, cge, hybrid };

inline OptMode opt_mode_from_name(const std::string& s) {
  if (s == "zo-rge") return OptMode::rge;
  if (s == "zo-signrge") return OptMode::signrge;
  if (s == "zo-cge") return OptMode::cge;
  if (s == "hybrid") return OptMode::hybrid;
  throw std::invalid_argument("unknown optimizer: " + s);
}

struct TrainResult {
  Trace trace;
  Eigen::VectorXd theta;
  bool diverged = false;
  long total_queries = 0;
};

// Generic epoch/step training loop shared by the tasks. make_oracle returns
// the loss closed over the batch for a global step index; validate computes
// the per-epoch validation metric. Throws nothing on divergence: the partial
// trace is returned with the flag set.
inline TrainResult zo_train(
    const std::function<LossOracle(long step)>& make_oracle, Eigen::VectorXd theta,
    OptMode mode, const HybridSchedule& sched, long epochs, long steps_per_epoch,
    std::mt19937_64& perturb_rng,
    const std::function<double(const Eigen::VectorXd&)>& validate,
    bool record_time = false,
    const std::function<bool(double)>& early_stop = {}) {
  sched.validate();
  if (epochs < 1 || steps_per_epoch < 1)
    throw std::invalid_argument("zo_train: need epochs >= 1 and steps_per_epoch >= 1");

  TrainResult result;
  bool fine = (mode == OptMode::cge);
  Eigen::VectorXd momentum_buf;
  long fine_start_epoch = 0;
  double prev_epoch_loss = std::numeric_limits<double>::quiet_NaN();
  int plateau_streak = 0;
  long global_step = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (long epoch = 0; epoch < epochs; ++epoch) {
    double loss_sum = 0.0;
    try {
      for (long s = 0; s < steps_per_epoch; ++s, ++global_step) {
        const LossOracle oracle = make_oracle(global_step);
        if (fine) {
          const double alpha = sched.lr_fine.at(epoch - fine_start_epoch);
          ZoEstimate est = cge_estimate(oracle, theta, sched.mu_fine);
          theta = momentum_step(theta, est.grad, momentum_buf, sched.momentum, alpha);
          result.total_queries += est.queries;
          loss_sum += est.loss_at_theta;
        } else {
          const double alpha = sched.lr_coarse.at(epoch);
          ZoEstimate est = rge_estimate(oracle, theta, sched.rge_samples,
                                        sched.mu_coarse, perturb_rng, sched.rademacher);
          theta = (mode == OptMode::rge) ? (theta - alpha * est.grad).eval()
                                         : sign_step(theta, est.grad, alpha);
          result.total_queries += est.queries;
          loss_sum += est.loss_at_theta;
        }
      }
    } catch (const DivergedLoss&) {
      result.diverged = true;
      break;
    }

    const double epoch_loss = loss_sum / static_cast<double>(steps_per_epoch);
    TraceRow row;
    row.epoch = epoch;
    row.stage = fine ? "fine" : "coarse";
    row.train_loss = epoch_loss;
    row.val_metric = validate ? validate(theta) : 0.0;
    row.cumulative_queries = result.total_queries;
    if (record_time)
      row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();
    result.trace.rows.push_back(row);
    if (early_stop && validate && early_stop(row.val_metric)) break;

    if (mode == OptMode::hybrid && !fine) {
      // First epoch counts as full (100%) improvement.
      const double rel = std::isnan(prev_epoch_loss)
                             ? 1.0
                             : std::max((prev_epoch_loss - epoch_loss) /
                                            std::max(std::abs(prev_epoch_loss), 1e-300),
                                        0.0);
      plateau_streak = (rel < sched.eps_switch) ? plateau_streak + 1 : 0;
      if (plateau_streak >= sched.patience) {
        fine = true;
        fine_start_epoch = epoch + 1;
        momentum_buf.resize(0);
      }
    }
    prev_epoch_loss = epoch_loss;
  }
  result.theta = std::move(theta);
  return result;
}

}  // namespace ttzo
