#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace ttzo {

// Row-wise softmax with max-subtraction; finite for any finite logits.
inline Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (long i = 0; i < p.rows(); ++i) {
    Eigen::RowVectorXd row = p.row(i);
    row.array() -= row.maxCoeff();
    Eigen::RowVectorXd e = row.array().exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

// Mean softmax cross-entropy over the batch.
inline double ce_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  if (logits.rows() != static_cast<long>(labels.size()))
    throw std::invalid_argument("ce_loss: batch size mismatch");
  double total = 0.0;
  for (long i = 0; i < logits.rows(); ++i) {
    if (labels[i] < 0 || labels[i] >= logits.cols())
      throw std::invalid_argument("ce_loss: label out of range");
    Eigen::RowVectorXd row = logits.row(i);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    total += lse - row[labels[i]];
  }
  return total / static_cast<double>(logits.rows());
}

// Mean over the batch of squared L2 prediction error.
inline double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  return (pred - target).squaredNorm() / static_cast<double>(pred.rows());
}

inline double accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  if (logits.rows() != static_cast<long>(labels.size()))
    throw std::invalid_argument("accuracy: batch size mismatch");
  long correct = 0;
  for (long i = 0; i < logits.rows(); ++i) {
    long argmax = 0;
    logits.row(i).maxCoeff(&argmax);
    if (argmax == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

}  // namespace ttzo
