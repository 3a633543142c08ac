#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "deqk/simulate.hpp"
#include "deqk/spectra.hpp"
#include "oracles.hpp"

namespace deqk {
namespace {

TEST(DeqForward, LinearInjectionOnlyNetwork) {
  const auto data = sample_sphere(10, 12, {1, "data"});
  const RngSpec rng{1, "deq"};
  const auto r = deq_forward(data, 300, SigmaA2(0.0), rng);
  EXPECT_TRUE(r.diagnostics.converged);
  EXPECT_EQ(r.diagnostics.iterations, 1);
  const Eigen::MatrixXd b = random_weights(300, 12, rng.child("B"));
  const Eigen::MatrixXd expected = (b * data.x()).unaryExpr([](double v) { return normalized_relu(v); });
  EXPECT_LE((r.features - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(DeqForward, DeterministicAndCertified) {
  const auto data = sample_sphere(20, 24, {2, "data"});
  const SigmaA2 s(0.2);
  const auto a = deq_forward(data, 400, s, {3, "deq"});
  const auto b = deq_forward(data, 400, s, {3, "deq"});
  EXPECT_TRUE(a.features == b.features);
  ASSERT_TRUE(a.diagnostics.converged);
  EXPECT_LE(a.diagnostics.final_residual, 1e-10);

  // Re-apply the layer map to the returned features.
  const Eigen::MatrixXd wa = random_weights(400, 400, RngSpec{3, "deq"}.child("A"));
  const Eigen::MatrixXd wb = random_weights(400, 24, RngSpec{3, "deq"}.child("B"));
  const Eigen::MatrixXd pre = std::sqrt(0.2 / 400) * wa * a.features + std::sqrt(0.8) * wb * data.x();
  const Eigen::MatrixXd again = pre.unaryExpr([](double v) { return normalized_relu(v); });
  const double change = (again - a.features).colwise().norm().maxCoeff() / std::sqrt(400.0);
  EXPECT_LE(change, 1e-10);
  EXPECT_LE((pre - a.preactivations).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DeqForward, ResidualDecaysGeometrically) {
  const auto data = sample_sphere(30, 36, {4, "data"});
  const auto r = deq_forward(data, 1000, SigmaA2(0.2), {4, "deq"});
  const auto& h = r.diagnostics.residual_history;
  ASSERT_GT(h.size(), 10u);
  // Late-phase per-step ratio stays below sigma_a plus slack.
  for (std::size_t i = h.size() - 8; i < h.size(); ++i) EXPECT_LT(h[i] / h[i - 1], std::sqrt(0.2) + 0.15);
  EXPECT_LT(h.back(), h.front() * 1e-9);
}

TEST(DeqForward, ReportsNonConvergence) {
  const auto data = sample_sphere(5, 6, {5, "data"});
  DeqOptions opt;
  opt.max_iter = 3;
  const auto r = deq_forward(data, 100, SigmaA2(0.5), {5, "deq"}, opt);
  EXPECT_FALSE(r.diagnostics.converged);
  EXPECT_EQ(r.diagnostics.iterations, 3);
  EXPECT_GT(r.diagnostics.final_residual, opt.tol);
  EXPECT_EQ(r.diagnostics.residual_history.size(), 3u);
}

TEST(DeqForward, RejectsBadArguments) {
  const auto data = sample_sphere(5, 6, {5, "data"});
  EXPECT_THROW(deq_forward(data, 0, SigmaA2(0.2), {5, "deq"}), dimension_error);
  DeqOptions opt;
  opt.tol = 0;
  EXPECT_THROW(deq_forward(data, 10, SigmaA2(0.2), {5, "deq"}, opt), domain_error);
}

TEST(DeqForward, ColumnNormsConcentrate) {
  const auto data = sample_sphere(50, 60, {6, "data"});
  const auto r = deq_forward(data, 2000, SigmaA2(0.2), {6, "deq"});
  const auto k = empirical_ck_deq(r);
  for (Eigen::Index i = 0; i < 50; ++i) EXPECT_NEAR(k.values(i, i), 1.0, 5 / std::sqrt(2000.0));
  // phi(h)^2 has variance E[phi^4] - 1 = 5 per entry; recurrence inflates it by 1/(1 - sa2).
  const auto z = empirical_ck_deq(r.features);
  const double sd = std::sqrt(5.0 / 2000) / 0.8;
  for (Eigen::Index i = 0; i < 50; ++i) EXPECT_NEAR(z.values(i, i), 1.0, 6 * sd);
  EXPECT_NEAR(z.values.diagonal().mean(), 1.0, 0.05);
}

TEST(EmpiricalCK, DuplicatedColumn) {
  Eigen::MatrixXd x = sample_sphere(3, 8, {7, "data"}).x();
  x.col(2) = x.col(0);
  const DataMatrix data(x);
  const auto r = deq_forward(data, 200, SigmaA2(0.3), {7, "deq"});
  const auto k = empirical_ck_deq(r);
  EXPECT_NEAR(k.values(0, 2), k.values(0, 0), 1e-12);
  EXPECT_TRUE(check_invariants(k).empty());
}

TEST(EmpiricalCK, PostActivationGramTracksDualMap) {
  // Without recurrence the features are phi(Bx), whose Gram estimates f(x_i^T x_j).
  const auto data = sample_sphere(20, 24, {8, "data"});
  const auto r = deq_forward(data, 20000, SigmaA2(0.0), {8, "deq"});
  const auto z = empirical_ck_deq(r.features);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = i + 1; j < 20; ++j)
      EXPECT_NEAR(z.values(i, j), oracle::dual_relu(data.gram()(i, j)), 0.05);
}

TEST(EmpiricalCK, ApproachesImplicitCKWithWidth) {
  const SigmaA2 s(0.2);
  const auto data = sample_sphere(40, 48, {9, "data"});
  const auto exact = implicit_ck(data, s);
  std::vector<double> res;
  for (Eigen::Index m : {200, 800, 3200})
    res.push_back(relative_residual(exact, empirical_ck_deq(deq_forward(data, m, s, {9, "deq"}))));
  EXPECT_GT(res[0], res[1]);
  EXPECT_GT(res[1], res[2]);
}

TEST(EmpiricalExplicit, ConstantActivationIsExact) {
  const auto data = sample_sphere(8, 10, {10, "data"});
  const auto k = empirical_explicit_kernels(data, {0, 0, 0.6}, 17, {10, "explicit"});
  EXPECT_LE((k.ck.values.array() - 0.36).abs().maxCoeff(), 1e-15);
  EXPECT_LE((k.ntk.values.array() - 0.36).abs().maxCoeff(), 1e-15);
}

TEST(EmpiricalExplicit, LinearActivationConvergesToGram) {
  const auto data = sample_sphere(50, 60, {11, "data"});
  const KernelMatrix g{data.gram(), KernelKind::ExplicitCK, {}};
  std::vector<double> res;
  for (Eigen::Index p : {100, 1000, 10000}) {
    const auto k = empirical_explicit_kernels(data, {0, 1, 0}, p, {11, "explicit"});
    res.push_back(relative_residual(g, k.ck));
  }
  EXPECT_GT(res[0], res[1]);
  EXPECT_GT(res[1], res[2]);
  EXPECT_LT(res[2], 3 * std::sqrt(50.0 / 10000));
}

TEST(EmpiricalExplicit, ClosedFormWithinStandardErrors) {
  const auto data = sample_sphere(3, 5, {12, "data"});
  const QuadraticActivation act{0.3, 0.8, -0.2};
  const long p = 1000000;
  const auto k = empirical_explicit_kernels(data, act, p, {12, "explicit"});
  const auto exact = explicit_ck(data, act);
  const auto exact_ntk = explicit_ntk(data, act);
  // Per-entry standard errors from an independent Monte Carlo of the same integrand.
  const auto dact = [&](double t) { return act.derivative(t); };
  const auto mc = oracle::monte_carlo_kernel(data.x(), act, act, 200000, 99);
  const auto mc_d = oracle::monte_carlo_kernel(data.x(), dact, dact, 200000, 98);
  const double shrink = std::sqrt(200000.0 / p);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double se = mc.stderr_(i, j) * shrink;
      // sd(A + gB) <= sd(A) + |g| sd(B)
      const double se_ntk = se + std::abs(data.gram()(i, j)) * mc_d.stderr_(i, j) * shrink;
      EXPECT_NEAR(k.ck.values(i, j), exact.values(i, j), 3 * se) << i << j;
      EXPECT_NEAR(k.ntk.values(i, j), exact_ntk.values(i, j), 3 * se_ntk) << i << j;
    }
}

TEST(EmpiricalExplicit, AveragedOverSeedsIsUnbiased) {
  const auto data = sample_sphere(6, 8, {13, "data"});
  const QuadraticActivation act{0.2, 0.9, 0.1};
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(6, 6);
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s)
    avg += empirical_explicit_kernels(data, act, 2000, {static_cast<std::uint64_t>(s), "explicit"}).ck.values;
  avg /= seeds;
  const auto exact = explicit_ck(data, act);
  const auto mc = oracle::monte_carlo_kernel(data.x(), act, act, 100000, 5);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const double se = mc.stderr_(i, j) * std::sqrt(100000.0 / (2000.0 * seeds));
      EXPECT_NEAR(avg(i, j), exact.values(i, j), 4 * se);
    }
}

TEST(RandomWeights, RademacherEntries) {
  const auto w = random_weights(50, 40, {1, "w"}, WeightLaw::Rademacher);
  EXPECT_TRUE((w.array().abs() == 1.0).all());
  EXPECT_LT(std::abs(w.mean()), 0.1);
}

}  // namespace
}  // namespace deqk
