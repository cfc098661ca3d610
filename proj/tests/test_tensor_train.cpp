#include "ttzo/tensor_train.hpp"

#include <gtest/gtest.h>

#include <vector>

namespace {

using ttzo::TTLinear;
using ttzo::TTShape;

// Independent oracle: evaluate W(i, j) as the explicit chain product of core
// slices, decomposing i and j by hand. Shares no code with tt_reconstruct
// (progressive merge) or tt_matvec (GEMM sweep).
double chain_entry(const TTLinear& tt, long i, long j) {
  const TTShape& s = tt.shape;
  const int L = s.order();
  std::vector<int> iv(L), jv(L);
  long ii = i, jj = j;
  for (int k = L - 1; k >= 0; --k) {
    iv[k] = static_cast<int>(ii % s.in_factors[k]);
    ii /= s.in_factors[k];
    jv[k] = static_cast<int>(jj % s.out_factors[k]);
    jj /= s.out_factors[k];
  }
  std::vector<double> v{1.0};
  for (int k = 0; k < L; ++k) {
    std::vector<double> w(s.ranks[k + 1], 0.0);
    for (int b = 0; b < s.ranks[k + 1]; ++b)
      for (int a = 0; a < s.ranks[k]; ++a)
        w[b] += v[a] * tt.core_entry(k, a, iv[k], jv[k], b);
    v = std::move(w);
  }
  return v[0];
}

Eigen::MatrixXd chain_matrix(const TTLinear& tt) {
  Eigen::MatrixXd W(tt.shape.rows(), tt.shape.cols());
  for (long i = 0; i < W.rows(); ++i)
    for (long j = 0; j < W.cols(); ++j) W(i, j) = chain_entry(tt, i, j);
  return W;
}

TTLinear make_filled(const TTShape& shape, double value) {
  TTLinear tt = ttzo::tt_zeros(shape, false);
  for (auto& c : tt.cores) c.setConstant(value);
  return tt;
}

TEST(TensorTrain, OnesCoresRankOneGiveAllOnes) {
  TTShape shape{{2, 2}, {2, 2}, {1, 1, 1}};
  TTLinear tt = make_filled(shape, 1.0);
  Eigen::MatrixXd W = ttzo::tt_reconstruct(tt);
  ASSERT_EQ(W.rows(), 4);
  ASSERT_EQ(W.cols(), 4);
  EXPECT_TRUE(W.isApprox(Eigen::MatrixXd::Ones(4, 4), 1e-15));
}

TEST(TensorTrain, OnesCoresRankTwoGiveAllTwos) {
  TTShape shape{{2, 2}, {2, 2}, {1, 2, 1}};
  TTLinear tt = make_filled(shape, 1.0);
  Eigen::MatrixXd W = ttzo::tt_reconstruct(tt);
  EXPECT_TRUE(W.isApprox(2.0 * Eigen::MatrixXd::Ones(4, 4), 1e-15));
}

TEST(TensorTrain, RankOneChainIsKroneckerProduct) {
  // Cores hold A = [[1,2],[3,4]] and B = [[5,6],[7,8]]; the chain with all
  // ranks 1 is their Kronecker product under the row-major index split.
  TTShape shape{{2, 2}, {2, 2}, {1, 1, 1}};
  TTLinear tt = ttzo::tt_zeros(shape, false);
  Eigen::Matrix2d A, B;
  A << 1, 2, 3, 4;
  B << 5, 6, 7, 8;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      tt.cores[0][i * 2 + j] = A(i, j);
      tt.cores[1][i * 2 + j] = B(i, j);
    }
  Eigen::MatrixXd W = ttzo::tt_reconstruct(tt);
  EXPECT_DOUBLE_EQ(W(0, 0), 5.0);    // A(0,0) B(0,0)
  EXPECT_DOUBLE_EQ(W(0, 3), 2.0 * 6.0);
  EXPECT_DOUBLE_EQ(W(3, 2), 4.0 * 7.0);
  EXPECT_DOUBLE_EQ(W(2, 1), 3.0 * 6.0);
  for (long i = 0; i < 4; ++i)
    for (long j = 0; j < 4; ++j)
      EXPECT_DOUBLE_EQ(W(i, j), A(i / 2, j / 2) * B(i % 2, j % 2));
}

TEST(TensorTrain, ZeroCoresGiveZeroMatrix) {
  TTShape shape{{3, 2}, {2, 3}, {1, 4, 1}};
  TTLinear tt = ttzo::tt_zeros(shape, false);
  EXPECT_TRUE(ttzo::tt_reconstruct(tt).isZero(0.0));
}

TEST(TensorTrain, ReconstructMatchesChainOracle) {
  TTShape shape{{2, 3, 2}, {3, 2, 2}, {1, 2, 2, 1}};
  auto rng = ttzo::make_rng(1234, ttzo::Stream::init);
  TTLinear tt = ttzo::tt_random(shape, rng, 1.0, false);
  Eigen::MatrixXd W = ttzo::tt_reconstruct(tt);
  Eigen::MatrixXd O = chain_matrix(tt);
  ASSERT_EQ(W.rows(), 12);
  ASSERT_EQ(W.cols(), 12);
  EXPECT_LT((W - O).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TensorTrain, MatvecMatchesDenseApply) {
  TTShape shape{{4, 3}, {2, 5}, {1, 3, 1}};
  auto rng = ttzo::make_rng(99, ttzo::Stream::init);
  TTLinear tt = ttzo::tt_random(shape, rng);
  std::normal_distribution<double> gauss;
  tt.bias = Eigen::VectorXd::NullaryExpr(10, [&](Eigen::Index) { return gauss(rng); });
  Eigen::MatrixXd W = chain_matrix(tt);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x =
        Eigen::VectorXd::NullaryExpr(12, [&](Eigen::Index) { return gauss(rng); });
    Eigen::VectorXd y = ttzo::tt_matvec(tt, x);
    Eigen::VectorXd ref = W.transpose() * x + tt.bias;
    EXPECT_LT((y - ref).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(TensorTrain, BatchMatvecMatchesSingle) {
  TTShape shape{{7, 4, 4, 7}, {8, 4, 4, 8}, {1, 6, 6, 6, 1}};
  auto rng = ttzo::make_rng(7, ttzo::Stream::init);
  TTLinear tt = ttzo::tt_random(shape, rng);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd X(5, 784);
  for (long r = 0; r < X.rows(); ++r)
    for (long c = 0; c < X.cols(); ++c) X(r, c) = gauss(rng);
  Eigen::MatrixXd Y = ttzo::tt_matvec_batch(tt, X);
  ASSERT_EQ(Y.rows(), 5);
  ASSERT_EQ(Y.cols(), 1024);
  for (long r = 0; r < X.rows(); ++r) {
    Eigen::VectorXd y = ttzo::tt_matvec(tt, X.row(r).transpose());
    EXPECT_LT((Y.row(r).transpose() - y).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TensorTrain, MnistLayerParameterCounts) {
  TTShape l1{{7, 4, 4, 7}, {8, 4, 4, 8}, {1, 6, 6, 6, 1}};
  TTShape l2{{8, 4, 4, 8}, {1, 5, 2, 1}, {1, 6, 6, 6, 1}};
  EXPECT_EQ(l1.weight_param_count(), 1824);
  EXPECT_EQ(l2.weight_param_count(), 1104);

  auto rng = ttzo::make_rng(0, ttzo::Stream::init);
  EXPECT_EQ(ttzo::parameter_count(ttzo::tt_random(l1, rng)), 1824 + 1024);
  EXPECT_EQ(ttzo::parameter_count(ttzo::tt_random(l2, rng)), 1104 + 10);

  TTShape l1_r10{{7, 4, 4, 7}, {8, 4, 4, 8}, {1, 10, 10, 10, 1}};
  TTShape l2_r10{{8, 4, 4, 8}, {1, 5, 2, 1}, {1, 10, 10, 10, 1}};
  EXPECT_EQ(l1_r10.weight_param_count(), 4320);
  EXPECT_EQ(l2_r10.weight_param_count(), 2960);
}

TEST(TensorTrain, ShapeValidationRejectsBadRanks) {
  TTShape bad_boundary{{2, 2}, {2, 2}, {1, 2, 2}};
  EXPECT_THROW(bad_boundary.validate(), std::invalid_argument);
  TTShape bad_len{{2, 2}, {2, 2}, {1, 1}};
  EXPECT_THROW(bad_len.validate(), std::invalid_argument);
  TTShape bad_factor{{2, 0}, {2, 2}, {1, 1, 1}};
  EXPECT_THROW(bad_factor.validate(), std::invalid_argument);
  TTShape ok{{2, 2}, {2, 2}, {1, 3, 1}};
  EXPECT_NO_THROW(ok.validate());
}

TEST(TensorTrain, MatvecRejectsWrongInputWidth) {
  TTShape shape{{2, 2}, {2, 2}, {1, 1, 1}};
  TTLinear tt = make_filled(shape, 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(5);
  EXPECT_THROW(ttzo::tt_matvec(tt, x), std::invalid_argument);
}

TEST(TensorTrain, RandomInitMatchesTargetEntryVariance) {
  // Reconstructed entries should have variance ~ 2/(M+N) regardless of
  // order and ranks. Averaged over 100 independent draws.
  TTShape shape{{3, 3, 3}, {3, 3, 3}, {1, 4, 4, 1}};
  const double target = 2.0 / (27.0 + 27.0);
  auto rng = ttzo::make_rng(2024, ttzo::Stream::init);
  double sum_sq = 0.0;
  long count = 0;
  for (int draw = 0; draw < 100; ++draw) {
    TTLinear tt = ttzo::tt_random(shape, rng, -1.0, false);
    Eigen::MatrixXd W = ttzo::tt_reconstruct(tt);
    sum_sq += W.squaredNorm();
    count += W.size();
  }
  const double var = sum_sq / static_cast<double>(count);
  EXPECT_NEAR(var, target, 0.15 * target);
}

TEST(TensorTrain, RandomInitBiasIsZero) {
  TTShape shape{{2, 2}, {2, 2}, {1, 2, 1}};
  auto rng = ttzo::make_rng(5, ttzo::Stream::init);
  TTLinear tt = ttzo::tt_random(shape, rng);
  ASSERT_EQ(tt.bias.size(), 4);
  EXPECT_TRUE(tt.bias.isZero(0.0));
}

}  // namespace
