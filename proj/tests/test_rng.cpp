#include "ttzo/rng.hpp"

#include <gtest/gtest.h>

namespace {

TEST(Rng, StreamsAreDeterministic) {
  auto a = ttzo::make_rng(42, ttzo::Stream::perturb);
  auto b = ttzo::make_rng(42, ttzo::Stream::perturb);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, StreamsDiffer) {
  auto a = ttzo::make_rng(42, ttzo::Stream::init);
  auto b = ttzo::make_rng(42, ttzo::Stream::perturb);
  auto c = ttzo::make_rng(43, ttzo::Stream::init);
  auto d = ttzo::make_rng(42, ttzo::Stream::init, 1);
  EXPECT_NE(a(), b());
  auto a2 = ttzo::make_rng(42, ttzo::Stream::init);
  EXPECT_NE(a2(), c());
  auto a3 = ttzo::make_rng(42, ttzo::Stream::init);
  EXPECT_NE(a3(), d());
}

TEST(Rng, GaussianVectorMoments) {
  auto rng = ttzo::make_rng(7, ttzo::Stream::acceptance);
  Eigen::VectorXd v = ttzo::gaussian_vector(rng, 100000);
  EXPECT_NEAR(v.mean(), 0.0, 0.02);
  EXPECT_NEAR(v.squaredNorm() / v.size(), 1.0, 0.03);
}

TEST(Rng, RademacherVectorIsSignOnly) {
  auto rng = ttzo::make_rng(7, ttzo::Stream::acceptance);
  Eigen::VectorXd v = ttzo::rademacher_vector(rng, 10000);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    EXPECT_TRUE(v[i] == 1.0 || v[i] == -1.0);
  EXPECT_NEAR(v.mean(), 0.0, 0.05);
}

}  // namespace
