#include "ttzo/network.hpp"

#include <gtest/gtest.h>

namespace {

using ttzo::Act;
using ttzo::DenseLinear;
using ttzo::Network;

Network single_dense(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, Act act) {
  Network net;
  net.layers.push_back({DenseLinear{W, b}, act});
  return net;
}

TEST(Network, IdentityLayerPassesInputThrough) {
  Network net = single_dense(Eigen::MatrixXd::Identity(4, 4),
                             Eigen::VectorXd::Zero(4), Act::identity);
  Eigen::VectorXd x(4);
  x << 1.0, -2.0, 0.5, 3.0;
  EXPECT_TRUE(ttzo::forward(net, x) == x);
}

TEST(Network, ZeroWeightsGiveZeroLogits) {
  Network net;
  net.layers.push_back({DenseLinear{Eigen::MatrixXd::Zero(6, 5),
                                    Eigen::VectorXd::Zero(5)},
                        Act::relu});
  net.layers.push_back({DenseLinear{Eigen::MatrixXd::Zero(5, 3),
                                    Eigen::VectorXd::Zero(3)},
                        Act::identity});
  Eigen::VectorXd x = Eigen::VectorXd::Ones(6);
  EXPECT_TRUE(ttzo::forward(net, x).isZero(0.0));
}

TEST(Network, SineLayerMatchesManualFormula) {
  auto rng = ttzo::make_rng(3, ttzo::Stream::init);
  DenseLinear d = ttzo::dense_glorot(3, 4, rng);
  d.bias = ttzo::gaussian_vector(rng, 4);
  Network net = single_dense(d.W, d.bias, Act::sine);
  Eigen::VectorXd x = ttzo::gaussian_vector(rng, 3);
  Eigen::VectorXd manual = (d.W.transpose() * x + d.bias).array().sin();
  EXPECT_LT((ttzo::forward(net, x) - manual).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Network, ReluClampsNegatives) {
  Network net = single_dense(Eigen::MatrixXd::Identity(3, 3),
                             Eigen::VectorXd::Zero(3), Act::relu);
  Eigen::VectorXd x(3);
  x << -1.0, 0.0, 2.0;
  Eigen::VectorXd y = ttzo::forward(net, x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 2.0);
}

TEST(Network, TtMlpForwardMatchesDenseReconstruction) {
  auto rng = ttzo::make_rng(11, ttzo::Stream::init);
  Network tt_net = ttzo::mnist_mlp_tt(6, rng);

  // Same weights realized densely via reconstruction.
  Network dense_net;
  for (const auto& layer : tt_net.layers) {
    const auto& tt = std::get<ttzo::TTLinear>(layer.op);
    dense_net.layers.push_back({DenseLinear{ttzo::tt_reconstruct(tt), tt.bias},
                                layer.act});
  }

  std::normal_distribution<double> gauss;
  Eigen::MatrixXd X(3, 784);
  for (long i = 0; i < X.size(); ++i) X(i / 784, i % 784) = gauss(rng);
  Eigen::MatrixXd a = ttzo::forward_batch(tt_net, X);
  Eigen::MatrixXd b = ttzo::forward_batch(dense_net, X);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Network, ParameterCountsMatchPinnedArchitectures) {
  auto rng = ttzo::make_rng(0, ttzo::Stream::init);
  EXPECT_EQ(ttzo::mnist_mlp_dense(rng).param_count(), 814090);
  EXPECT_EQ(ttzo::mnist_mlp_tt(6, rng).param_count(), 3962);
  EXPECT_EQ(ttzo::mnist_mlp_tt(10, rng).param_count(), 8314);
  EXPECT_EQ(ttzo::hjb_mlp_dense(20, 768, rng).param_count(), 608257);
  EXPECT_EQ(ttzo::hjb_mlp_tt(20, 768, 6, rng).param_count(), 6817);
  EXPECT_EQ(ttzo::hjb_mlp_tt(4, 64, 4, rng).param_count(), 897);
}

TEST(Network, TtWeightCountsCompress) {
  // Weight-only counts: 2928 TT vs 812800 dense for the MNIST shapes.
  ttzo::TTShape l1{{7, 4, 4, 7}, {8, 4, 4, 8}, {1, 6, 6, 6, 1}};
  ttzo::TTShape l2{{8, 4, 4, 8}, {1, 5, 2, 1}, {1, 6, 6, 6, 1}};
  EXPECT_EQ(l1.weight_param_count() + l2.weight_param_count(), 2928);
  EXPECT_LT(2928, 812800);
}

TEST(Network, PackUnpackRoundTripPreservesForward) {
  auto rng = ttzo::make_rng(21, ttzo::Stream::init);
  Network net = ttzo::mnist_mlp_tt(3, rng);
  Eigen::VectorXd theta = ttzo::pack(net);
  EXPECT_EQ(theta.size(), net.param_count());

  std::normal_distribution<double> gauss;
  std::vector<Eigen::VectorXd> inputs, before;
  for (int i = 0; i < 10; ++i) {
    inputs.push_back(ttzo::gaussian_vector(rng, 784));
    before.push_back(ttzo::forward(net, inputs.back()));
  }
  ttzo::unpack(net, theta);
  for (int i = 0; i < 10; ++i)
    EXPECT_TRUE(ttzo::forward(net, inputs[i]) == before[i]) << "input " << i;
}

TEST(Network, PackUnpackIsBijection) {
  auto rng = ttzo::make_rng(22, ttzo::Stream::init);
  Network net;
  net.layers.push_back({ttzo::dense_glorot(3, 4, rng), Act::relu});
  ttzo::TTShape shape{{2, 2}, {3, 2}, {1, 2, 1}};
  net.layers.push_back({ttzo::tt_random(shape, rng), Act::identity});

  Eigen::VectorXd theta = ttzo::pack(net);
  for (long i : {0L, 5L, 12L, theta.size() - 1}) {
    Eigen::VectorXd perturbed = theta;
    perturbed[i] += 0.5;
    ttzo::unpack(net, perturbed);
    Eigen::VectorXd repacked = ttzo::pack(net);
    long diffs = 0;
    for (long j = 0; j < theta.size(); ++j)
      if (repacked[j] != theta[j]) ++diffs;
    EXPECT_EQ(diffs, 1) << "coordinate " << i;
    EXPECT_EQ(repacked[i], theta[i] + 0.5);
  }
}

TEST(Network, DensePackOrderIsRowMajorThenBias) {
  Network net;
  Eigen::MatrixXd W(2, 3);
  W << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd b(3);
  b << 7, 8, 9;
  net.layers.push_back({DenseLinear{W, b}, Act::identity});
  Eigen::VectorXd theta = ttzo::pack(net);
  Eigen::VectorXd expected(9);
  expected << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  EXPECT_TRUE(theta == expected);
}

TEST(Network, ForwardIsPure) {
  auto rng = ttzo::make_rng(33, ttzo::Stream::init);
  Network net = ttzo::hjb_mlp_tt(4, 64, 4, rng);
  Eigen::VectorXd x = ttzo::gaussian_vector(rng, 5);
  Eigen::VectorXd a = ttzo::forward(net, x);
  Eigen::VectorXd b = ttzo::forward(net, x);
  EXPECT_TRUE(a == b);
}

TEST(Network, MismatchedInputThrows) {
  auto rng = ttzo::make_rng(1, ttzo::Stream::init);
  Network net = ttzo::mnist_mlp_dense(rng);
  EXPECT_THROW(ttzo::forward(net, Eigen::VectorXd::Zero(10)), std::invalid_argument);
  EXPECT_THROW(ttzo::unpack(net, Eigen::VectorXd::Zero(10)), std::invalid_argument);
}

TEST(Network, ValidateCatchesDimensionMismatch) {
  Network net;
  net.layers.push_back({DenseLinear{Eigen::MatrixXd::Zero(3, 4),
                                    Eigen::VectorXd::Zero(4)},
                        Act::relu});
  net.layers.push_back({DenseLinear{Eigen::MatrixXd::Zero(5, 2),
                                    Eigen::VectorXd::Zero(2)},
                        Act::identity});
  EXPECT_THROW(net.validate(), std::invalid_argument);
}

}  // namespace
