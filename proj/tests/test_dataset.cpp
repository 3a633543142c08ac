#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "deqk/dataset.hpp"
#include "oracles.hpp"

namespace deqk {
namespace {

TEST(SampleSphere, SinglePoint) {
  const auto data = sample_sphere(1, 3, {11, "data"});
  EXPECT_EQ(data.n(), 1);
  EXPECT_EQ(data.d(), 3);
  EXPECT_NEAR(data.x().col(0).norm(), 1.0, 1e-15);
  EXPECT_NEAR(data.gram()(0, 0), 1.0, 1e-15);
}

TEST(SampleSphere, RejectsBadSizes) {
  EXPECT_THROW(sample_sphere(0, 3, {1, "data"}), dimension_error);
  EXPECT_THROW(sample_sphere(4, 1, {1, "data"}), dimension_error);
}

TEST(SampleSphere, DeterministicPerStream) {
  const auto a = sample_sphere(20, 30, {5, "data"});
  const auto b = sample_sphere(20, 30, {5, "data"});
  const auto c = sample_sphere(20, 30, {5, "other"});
  const auto e = sample_sphere(20, 30, {6, "data"});
  EXPECT_TRUE(a.x() == b.x());
  EXPECT_FALSE(a.x() == c.x());
  EXPECT_FALSE(a.x() == e.x());
}

TEST(SampleSphere, NormsAndGramInvariants) {
  const auto data = sample_sphere(200, 240, {1, "data"});
  const auto& g = data.gram();
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    EXPECT_NEAR(data.x().col(i).norm(), 1.0, 1e-12);
    EXPECT_NEAR(g(i, i), 1.0, 1e-12);
  }
  EXPECT_TRUE(g == g.transpose());
  EXPECT_LE(g.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
}

TEST(SampleSphere, OffDiagonalScaleAndIsotropy) {
  const Eigen::Index n = 300, d = 360;
  double mean_sum = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = sample_sphere(n, d, {seed, "data"});
    const auto& g = data.gram();
    double sq = 0, s = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        sq += g(i, j) * g(i, j);
        s += g(i, j);
      }
    const double pairs = n * (n - 1) / 2.0;
    EXPECT_NEAR(std::sqrt(sq / pairs), 1.0 / std::sqrt(static_cast<double>(d)), 0.05 / std::sqrt(d));
    mean_sum += s / pairs;
  }
  EXPECT_LT(std::abs(mean_sum / 10), 5 * 3 / std::sqrt(double(n) * n * d));
}

TEST(Gram, OrthonormalDuplicateAndNaive) {
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(5, 3);
  EXPECT_TRUE(gram(eye).isApprox(Eigen::MatrixXd::Identity(3, 3)));

  Eigen::MatrixXd x(3, 2);
  x.col(0) << 0.6, 0.8, 0;
  x.col(1) = x.col(0);
  EXPECT_DOUBLE_EQ(gram(x)(0, 1), 1.0);

  const auto data = sample_sphere(4, 8, {9, "data"});
  const Eigen::MatrixXd ref = oracle::naive_gram(data.x());
  EXPECT_LE((data.gram() - ref).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DataMatrix, RejectsNonUnitColumns) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(3, 2);
  x(0, 0) = 2;
  EXPECT_THROW(DataMatrix{x}, domain_error);
}

TEST(DataCsv, RoundTripIsExact) {
  const auto data = sample_sphere(7, 5, {42, "data"});
  std::stringstream ss;
  write_data_csv(ss, data);
  EXPECT_EQ(ss.str().substr(0, 9), "d,n,seed\n");
  const auto back = read_data_csv(ss);
  EXPECT_TRUE(back.x() == data.x());
  EXPECT_EQ(back.seed(), 42u);
}

TEST(DataCsv, RejectsMalformedInput) {
  std::stringstream a("n,d\n");
  EXPECT_THROW(read_data_csv(a), domain_error);
  std::stringstream b("d,n,seed\n3,2,1\n1,0,0\n");
  EXPECT_THROW(read_data_csv(b), domain_error);
  std::stringstream c("d,n,seed\n3,1,1\n1,0\n");
  EXPECT_THROW(read_data_csv(c), domain_error);
}

}  // namespace
}  // namespace deqk
