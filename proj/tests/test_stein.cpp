#include "ttzo/stein.hpp"

#include <gtest/gtest.h>

namespace {

using ttzo::SmoothedModel;

std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> counting_base(
    std::function<double(const Eigen::VectorXd&)> f, long* counter) {
  return [f = std::move(f), counter](const Eigen::MatrixXd& X) {
    *counter += X.rows();
    Eigen::MatrixXd Y(X.rows(), 1);
    for (long i = 0; i < X.rows(); ++i) Y(i, 0) = f(X.row(i).transpose());
    return Y;
  };
}

TEST(Stein, ConstantBaseInBothModes) {
  auto base = ttzo::scalar_base([](const Eigen::VectorXd&) { return 4.2; });
  Eigen::VectorXd x = Eigen::VectorXd::Ones(3);
  for (auto model : {ttzo::make_sg_smoothed(base, 3, 0.1),
                     ttzo::make_mc_smoothed(base, 3, 0.1, 64, 5)}) {
    EXPECT_NEAR(ttzo::smoothed_value(model, x)[0], 4.2, 1e-12);
    EXPECT_TRUE(ttzo::stein_grad(model, x).isZero(0.0));
    EXPECT_TRUE(ttzo::stein_laplacian(model, x).isZero(0.0));
  }
}

TEST(Stein, LinearBaseIsExactInSgMode)  {
  Eigen::VectorXd a(4);
  a << 1.5, -0.3, 0.8, 2.0;
  auto base = ttzo::scalar_base(
      [a](const Eigen::VectorXd& x) { return a.dot(x) + 0.7; });
  SmoothedModel model = ttzo::make_sg_smoothed(base, 4, 0.1);
  Eigen::VectorXd x(4);
  x << 0.2, -1.0, 0.5, 0.0;
  EXPECT_NEAR(ttzo::smoothed_value(model, x)[0], a.dot(x) + 0.7, 1e-12);
  EXPECT_LT((ttzo::stein_grad(model, x).row(0).transpose() - a).cwiseAbs().maxCoeff(),
            1e-11);
  // Second difference of a linear function cancels at each node up to
  // round-off, which the 1/(2 sigma^4) factor then amplifies ~5000x.
  EXPECT_TRUE(ttzo::stein_laplacian(model, x).isZero(1e-11));
}

TEST(Stein, SquaredNormBaseMatchesAnalyticSmoothing) {
  const int D = 5;
  const double sigma = 0.1;
  auto base = ttzo::scalar_base([](const Eigen::VectorXd& x) { return x.squaredNorm(); });
  SmoothedModel model = ttzo::make_sg_smoothed(base, D, sigma);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(D, -0.8, 0.8);
  EXPECT_NEAR(ttzo::smoothed_value(model, x)[0], x.squaredNorm() + sigma * sigma * D,
              1e-12);
  EXPECT_LT((ttzo::stein_grad(model, x).row(0).transpose() - 2.0 * x).cwiseAbs()
                .maxCoeff(),
            1e-10);
  EXPECT_NEAR(ttzo::stein_laplacian(model, x)[0], 2.0 * D, 1e-9);
}

TEST(Stein, RandomQuadraticExactness) {
  const int D = 7;
  auto rng = ttzo::make_rng(17, ttzo::Stream::acceptance);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd A(D, D);
  for (long i = 0; i < A.size(); ++i) A(i / D, i % D) = gauss(rng);
  A = ((A + A.transpose()) / 2.0).eval();
  Eigen::VectorXd bvec = ttzo::gaussian_vector(rng, D);
  auto base = ttzo::scalar_base([A, bvec](const Eigen::VectorXd& x) {
    return 0.5 * x.dot(A * x) + bvec.dot(x) + 1.3;
  });
  SmoothedModel model = ttzo::make_sg_smoothed(base, D, 0.1);
  Eigen::VectorXd x = ttzo::gaussian_vector(rng, D);

  Eigen::VectorXd exact_grad = A * x + bvec;
  const double exact_lap = A.trace();
  EXPECT_LT((ttzo::stein_grad(model, x).row(0).transpose() - exact_grad).norm(),
            1e-8 * exact_grad.norm());
  EXPECT_NEAR(ttzo::stein_laplacian(model, x)[0], exact_lap,
              1e-8 * std::abs(exact_lap));
}

TEST(Stein, SubsetLaplacianCoversLeadingDims) {
  auto base = ttzo::scalar_base([](const Eigen::VectorXd& x) {
    return x[0] * x[0] + 3.0 * x[1] * x[1] + x[2] * x[2];
  });
  SmoothedModel model = ttzo::make_sg_smoothed(base, 3, 0.2);
  Eigen::VectorXd x(3);
  x << 0.1, 0.4, -0.2;
  EXPECT_NEAR(ttzo::stein_laplacian(model, x, 2)[0], 8.0, 1e-9);
  EXPECT_NEAR(ttzo::stein_laplacian(model, x)[0], 10.0, 1e-9);
}

TEST(Stein, VectorValuedBase) {
  Eigen::VectorXd a(3);
  a << 0.5, -1.0, 2.0;
  auto base = [a](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Y(X.rows(), 2);
    for (long i = 0; i < X.rows(); ++i) {
      Y(i, 0) = X.row(i).squaredNorm();
      Y(i, 1) = a.dot(X.row(i).transpose());
    }
    return Y;
  };
  SmoothedModel model = ttzo::make_sg_smoothed(base, 3, 0.1);
  Eigen::VectorXd x(3);
  x << 0.3, -0.6, 0.9;
  Eigen::MatrixXd G = ttzo::stein_grad(model, x);
  ASSERT_EQ(G.rows(), 2);
  EXPECT_LT((G.row(0).transpose() - 2.0 * x).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((G.row(1).transpose() - a).cwiseAbs().maxCoeff(), 1e-10);
  Eigen::VectorXd lap = ttzo::stein_laplacian(model, x);
  EXPECT_NEAR(lap[0], 6.0, 1e-9);
  EXPECT_NEAR(lap[1], 0.0, 1e-11);
}

TEST(Stein, BatchAgreesWithSinglePointCalls) {
  auto base = ttzo::scalar_base([](const Eigen::VectorXd& x) {
    return std::sin(x[0]) + std::cos(0.5 * x[1]) * x[2];
  });
  SmoothedModel model = ttzo::make_sg_smoothed(base, 3, 0.1);
  auto rng = ttzo::make_rng(8, ttzo::Stream::acceptance);
  Eigen::MatrixXd X(4, 3);
  for (long i = 0; i < X.size(); ++i) X(i / 3, i % 3) = 0.5 * ttzo::gaussian_vector(rng, 1)[0];

  ttzo::ScalarSteinBatch batch = ttzo::stein_scalar_batch(model, X, 2);
  for (long b = 0; b < X.rows(); ++b) {
    Eigen::VectorXd x = X.row(b).transpose();
    EXPECT_NEAR(batch.value[b], ttzo::smoothed_value(model, x)[0], 1e-13);
    EXPECT_LT((batch.grad.row(b) - ttzo::stein_grad(model, x).row(0)).cwiseAbs()
                  .maxCoeff(),
              1e-13);
    EXPECT_NEAR(batch.lap[b], ttzo::stein_laplacian(model, x, 2)[0], 1e-12);
  }
}

TEST(Stein, McConsistentWithSgOnSmoothFunction) {
  auto base = ttzo::scalar_base([](const Eigen::VectorXd& x) {
    return std::sin(x[0]) + x[1] * x[1] * std::cos(x[2]);
  });
  Eigen::VectorXd x(3);
  x << 0.2, -0.5, 0.8;
  SmoothedModel sg = ttzo::make_sg_smoothed(base, 3, 0.1, 4);
  SmoothedModel mc = ttzo::make_mc_smoothed(base, 3, 0.1, 10000, 31);
  // MC standard error at 1e4 samples is ~1e-2 for the gradient and a few
  // times that for the Laplacian; 3-sigma style bands.
  EXPECT_LT((ttzo::stein_grad(mc, x) - ttzo::stein_grad(sg, x)).cwiseAbs().maxCoeff(),
            0.05);
  EXPECT_NEAR(ttzo::stein_laplacian(mc, x)[0], ttzo::stein_laplacian(sg, x)[0], 0.15);
  EXPECT_NEAR(ttzo::smoothed_value(mc, x)[0], ttzo::smoothed_value(sg, x)[0], 0.01);
}

TEST(Stein, GradOddLaplacianEvenUnderReflection) {
  Eigen::VectorXd x0(2);
  x0 << 0.3, -0.4;
  auto f = [](const Eigen::VectorXd& y) {
    return std::sin(y[0] + 0.5 * y[1]) + y[0] * y[0] * y[1];
  };
  auto reflected = [f, x0](const Eigen::VectorXd& y) {
    return f((2.0 * x0 - y).eval());
  };
  SmoothedModel mf = ttzo::make_sg_smoothed(ttzo::scalar_base(f), 2, 0.1);
  SmoothedModel mg = ttzo::make_sg_smoothed(ttzo::scalar_base(reflected), 2, 0.1);
  EXPECT_LT((ttzo::stein_grad(mf, x0) + ttzo::stein_grad(mg, x0)).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_NEAR(ttzo::stein_laplacian(mf, x0)[0], ttzo::stein_laplacian(mg, x0)[0], 1e-12);
}

TEST(Stein, GradMatchesFiniteDifferenceOfSmoothedValue) {
  // A cubic keeps every integrand inside the level-3 exactness degree, so
  // only the O(h^2) finite-difference error remains.
  auto base = ttzo::scalar_base([](const Eigen::VectorXd& x) {
    return x[0] * x[0] * x[0] + 2.0 * x[0] * x[1] + x[1] * x[1] * x[0] - x[1];
  });
  SmoothedModel model = ttzo::make_sg_smoothed(base, 2, 0.1);
  Eigen::VectorXd x(2);
  x << 0.4, -0.7;
  Eigen::VectorXd g = ttzo::stein_grad(model, x).row(0).transpose();
  const double h = 1e-4;
  for (int i = 0; i < 2; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd =
        (ttzo::smoothed_value(model, xp)[0] - ttzo::smoothed_value(model, xm)[0]) /
        (2.0 * h);
    EXPECT_NEAR(g[i], fd, 1e-6) << "i=" << i;
  }
}

TEST(Stein, QueryCountsPerEvaluation) {
  long count = 0;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  SmoothedModel model = ttzo::make_sg_smoothed(
      counting_base([](const Eigen::VectorXd& v) { return v.squaredNorm(); }, &count),
      2, 0.1);
  const long n = model.grid.size();  // 13 at D=2, k=3
  ASSERT_EQ(n, 13);

  count = 0;
  ttzo::stein_scalar_batch(model, Eigen::MatrixXd::Zero(3, 2));
  EXPECT_EQ(count, 3 * (2 * n + 1));

  count = 0;
  ttzo::stein_laplacian(model, x);
  EXPECT_EQ(count, 2 * n + 1);

  count = 0;
  ttzo::stein_grad(model, x);
  EXPECT_EQ(count, 2 * n);

  count = 0;
  ttzo::smoothed_value(model, x);
  EXPECT_EQ(count, n);
}

TEST(Stein, McDrawsAreReproduciblePerKey) {
  auto base = ttzo::scalar_base([](const Eigen::VectorXd& x) {
    return std::sin(x.sum());
  });
  SmoothedModel model = ttzo::make_mc_smoothed(base, 3, 0.1, 32, 77);
  Eigen::VectorXd x(3);
  x << 0.1, 0.2, 0.3;
  Eigen::MatrixXd a = ttzo::stein_grad(model, x, 5);
  Eigen::MatrixXd b = ttzo::stein_grad(model, x, 5);
  Eigen::MatrixXd c = ttzo::stein_grad(model, x, 6);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Stein, ValidationCatchesMismatches) {
  auto base = ttzo::scalar_base([](const Eigen::VectorXd& x) { return x.sum(); });
  SmoothedModel model = ttzo::make_sg_smoothed(base, 3, 0.1);
  model.grid = ttzo::smolyak_build(2, 3, 0.1);
  EXPECT_THROW(model.validate(), std::invalid_argument);

  SmoothedModel model2 = ttzo::make_sg_smoothed(base, 3, 0.1);
  EXPECT_THROW(ttzo::stein_laplacian(model2, Eigen::VectorXd::Zero(3), 5),
               std::invalid_argument);
}

TEST(Stein, NonFiniteBaseOutputThrows) {
  auto base = ttzo::scalar_base([](const Eigen::VectorXd& x) {
    return x[0] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  });
  SmoothedModel model = ttzo::make_sg_smoothed(base, 2, 0.5);
  EXPECT_THROW(ttzo::smoothed_value(model, Eigen::VectorXd::Zero(2)),
               std::runtime_error);
}

}  // namespace
