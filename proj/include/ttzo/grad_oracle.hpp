#pragma once

#include <functional>
#include <stdexcept>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ttzo/loss.hpp"
#include "ttzo/network.hpp"

namespace ttzo {

// Exact gradients for the fixed dense architectures, used as golden
// references in tests and for first-order baseline runs. The gradient-free
// training paths never call into this header.

struct OracleGrad {
  Eigen::VectorXd grad;
  double loss = 0.0;
};

namespace detail {

inline void act_derivative(Act act, const Eigen::MatrixXd& z, Eigen::MatrixXd& dphi) {
  switch (act) {
    case Act::identity: dphi = Eigen::MatrixXd::Ones(z.rows(), z.cols()); break;
    case Act::relu:
      dphi = (z.array() > 0.0).cast<double>().matrix();
      break;
    case Act::sine: dphi = z.array().cos().matrix(); break;
  }
}

}  // namespace detail

// Analytic gradient of the mean batch loss for an all-dense network via the
// layerwise chain rule. Throws for TT layers: a general autodiff engine is
// deliberately out of scope.
inline OracleGrad exact_grad_mlp(Network& net, const Eigen::VectorXd& theta,
                                 const Eigen::MatrixXd& X,
                                 const std::function<double(const Eigen::MatrixXd&)>& loss_value,
                                 const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& loss_grad) {
  unpack(net, theta);
  const size_t L = net.layers.size();
  std::vector<Eigen::MatrixXd> inputs(L);   // activation entering each layer
  std::vector<Eigen::MatrixXd> preact(L);   // affine output before activation
  Eigen::MatrixXd a = X;
  for (size_t l = 0; l < L; ++l) {
    const auto* d = std::get_if<DenseLinear>(&net.layers[l].op);
    if (!d) throw std::invalid_argument("exact_grad_mlp: dense layers only");
    inputs[l] = a;
    Eigen::MatrixXd z = a * d->W;
    z.rowwise() += d->bias.transpose();
    preact[l] = z;
    apply_act(net.layers[l].act, z);
    a = std::move(z);
  }

  OracleGrad out;
  out.loss = loss_value(a);
  Eigen::MatrixXd delta = loss_grad(a);  // dL/d(activated output), B x n_L

  out.grad.resize(net.param_count());
  long tail = out.grad.size();
  for (size_t li = L; li-- > 0;) {
    const auto& d = std::get<DenseLinear>(net.layers[li].op);
    Eigen::MatrixXd dphi;
    detail::act_derivative(net.layers[li].act, preact[li], dphi);
    delta = delta.cwiseProduct(dphi);  // now dL/dz
    const Eigen::VectorXd db = delta.colwise().sum();
    const Eigen::MatrixXd dW = inputs[li].transpose() * delta;
    tail -= db.size();
    out.grad.segment(tail, db.size()) = db;
    tail -= dW.size();
    Eigen::Map<RowMat>(out.grad.data() + tail, dW.rows(), dW.cols()) = dW;
    if (li > 0) delta = (delta * d.W.transpose()).eval();
  }
  return out;
}

// Cross-entropy flavour: mean softmax CE over integer labels.
inline OracleGrad exact_grad_mlp(Network& net, const Eigen::VectorXd& theta,
                                 const Eigen::MatrixXd& X, const std::vector<int>& labels) {
  const double invB = 1.0 / static_cast<double>(X.rows());
  return exact_grad_mlp(
      net, theta, X,
      [&labels](const Eigen::MatrixXd& logits) { return ce_loss(logits, labels); },
      [&labels, invB](const Eigen::MatrixXd& logits) {
        Eigen::MatrixXd d = softmax_rows(logits);
        for (long i = 0; i < d.rows(); ++i) d(i, labels[i]) -= 1.0;
        return (d * invB).eval();
      });
}

// Squared-error flavour: mean over the batch of ||pred - target||^2.
inline OracleGrad exact_grad_mlp(Network& net, const Eigen::VectorXd& theta,
                                 const Eigen::MatrixXd& X, const Eigen::MatrixXd& targets) {
  const double invB = 1.0 / static_cast<double>(X.rows());
  return exact_grad_mlp(
      net, theta, X,
      [&targets](const Eigen::MatrixXd& pred) { return mse_loss(pred, targets); },
      [&targets, invB](const Eigen::MatrixXd& pred) {
        return (2.0 * invB * (pred - targets)).eval();
      });
}

// Central-difference gradient of an arbitrary scalar loss; 2d queries.
inline Eigen::VectorXd fd_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                                const Eigen::VectorXd& theta, double h) {
  if (h <= 0.0) throw std::invalid_argument("fd_check: h must be > 0");
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd work = theta;
  for (long i = 0; i < theta.size(); ++i) {
    work[i] = theta[i] + h;
    const double fp = loss(work);
    work[i] = theta[i] - h;
    const double fm = loss(work);
    work[i] = theta[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Exact first derivatives and spatial Laplacian of a scalar network u(x, t)
// with input (x_1..x_D, t), by forward propagation of (value, Jacobian,
// Laplacian) triples through each layer. Supports identity/sine activations
// and both dense and TT affine maps; ReLU has no second derivative and is
// rejected.
struct PinnDerivs {
  double u = 0.0;
  double du_dt = 0.0;
  Eigen::VectorXd grad_x;  // length D
  double lap_x = 0.0;      // sum of d2u/dx_i^2 over spatial dims only
};

inline PinnDerivs exact_pinn_derivatives(const Network& net, const Eigen::VectorXd& xt,
                                         int spatial_dims) {
  if (xt.size() != net.input_dim())
    throw std::invalid_argument("exact_pinn_derivatives: input size mismatch");
  if (spatial_dims < 0 || spatial_dims > xt.size())
    throw std::invalid_argument("exact_pinn_derivatives: bad spatial_dims");
  if (net.output_dim() != 1)
    throw std::invalid_argument("exact_pinn_derivatives: scalar output expected");

  const long din = xt.size();
  Eigen::VectorXd v = xt;
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(din, din);  // width x din
  Eigen::VectorXd lap = Eigen::VectorXd::Zero(din);

  for (const auto& layer : net.layers) {
    Eigen::VectorXd z;
    Eigen::MatrixXd Jz;
    Eigen::VectorXd lz;
    if (const auto* d = std::get_if<DenseLinear>(&layer.op)) {
      z = d->W.transpose() * v + d->bias;
      Jz = d->W.transpose() * J;
      lz = d->W.transpose() * lap;
    } else {
      const TTLinear& tt = std::get<TTLinear>(layer.op);
      z = tt_matvec(tt, v);
      Eigen::MatrixXd cols(J.cols() + 1, J.rows());
      cols.topRows(J.cols()) = J.transpose();
      cols.row(J.cols()) = lap.transpose();
      Eigen::MatrixXd mapped = tt_matvec_batch(tt, cols);
      if (tt.has_bias()) mapped.rowwise() -= tt.bias.transpose();
      Jz = mapped.topRows(J.cols()).transpose();
      lz = mapped.row(J.cols()).transpose();
    }
    switch (layer.act) {
      case Act::identity:
        v = std::move(z);
        J = std::move(Jz);
        lap = std::move(lz);
        break;
      case Act::sine: {
        const Eigen::ArrayXd c = z.array().cos();
        const Eigen::ArrayXd s = z.array().sin();
        const Eigen::VectorXd spatial_sq =
            Jz.leftCols(spatial_dims).array().square().matrix().rowwise().sum();
        lap = (-s * spatial_sq.array() + c * lz.array()).matrix();
        J = c.matrix().asDiagonal() * Jz;
        v = s.matrix();
        break;
      }
      case Act::relu:
        throw std::invalid_argument("exact_pinn_derivatives: relu unsupported");
    }
  }

  PinnDerivs out;
  out.u = v[0];
  out.grad_x = J.row(0).head(spatial_dims);
  out.du_dt = (spatial_dims < din) ? J(0, din - 1) : 0.0;
  out.lap_x = lap[0];
  return out;
}

}  // namespace ttzo
