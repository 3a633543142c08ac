#pragma once

// Finite-width Monte Carlo: the DEQ forward fixed point and random-feature
// estimates of the single-layer explicit kernels.

#include <cmath>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "deqk/dataset.hpp"
#include "deqk/errors.hpp"
#include "deqk/gaussian.hpp"
#include "deqk/kernels.hpp"
#include "deqk/rng.hpp"
#include "deqk/scalar_maps.hpp"

namespace deqk {

enum class WeightLaw { Gaussian, Rademacher };

/// How the input branch is scaled. Unit keeps sqrt(sb2) B x, whose per-entry
/// variance sb2 |x|^2 reproduces the sb2 x_i^T x_j term of the kernel recursion.
/// PerWidth uses sqrt(sb2 / m) B x, under which the injection vanishes as m grows.
enum class InjectionScaling { Unit, PerWidth };

inline constexpr std::string_view to_string(WeightLaw w) {
  return w == WeightLaw::Gaussian ? "gaussian" : "rademacher";
}

inline constexpr std::string_view to_string(InjectionScaling s) {
  return s == InjectionScaling::Unit ? "unit" : "per-width";
}

struct DeqOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  WeightLaw weights = WeightLaw::Gaussian;
  InjectionScaling injection = InjectionScaling::Unit;
};

struct DeqRunDiagnostics {
  int iterations = 0;
  double final_residual = 0.0;  // max_i |z_i - phi(pre(z_i))| / sqrt(m)
  bool converged = false;
  std::vector<double> residual_history;
};

struct DeqResult {
  Eigen::MatrixXd features;        // z*, m x n
  Eigen::MatrixXd preactivations;  // h* = sqrt(sa2/m) A z* + injection, m x n
  DeqRunDiagnostics diagnostics;
};

/// sqrt(2) max(x, 0).
inline double normalized_relu(double x) noexcept { return x > 0.0 ? std::numbers::sqrt2 * x : 0.0; }

/// rows x cols matrix of i.i.d. zero-mean unit-variance entries, filled column-major.
inline Eigen::MatrixXd random_weights(Eigen::Index rows, Eigen::Index cols, const RngSpec& rng,
                                      WeightLaw law = WeightLaw::Gaussian) {
  auto engine = make_engine(rng);
  Eigen::MatrixXd w(rows, cols);
  if (law == WeightLaw::Gaussian) {
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = normal(engine);
  } else {
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = (engine() >> 63) ? 1.0 : -1.0;
  }
  return w;
}

/// Picard iteration z <- phi(sqrt(sa2/m) A z + c B x) from z = 0. The returned
/// features are the last iterate whose residual was measured, so the certificate
/// final_residual <= tol holds for exactly the matrix handed back.
inline DeqResult deq_forward(const DataMatrix& data, Eigen::Index m, SigmaA2 sa2, const RngSpec& rng,
                             const DeqOptions& opt = {}) {
  if (m < 1) throw dimension_error("deq_forward: width must be >= 1");
  if (!(opt.tol > 0.0)) throw domain_error("deq_forward: tol must be positive");
  const Eigen::Index n = data.n();
  const Eigen::MatrixXd a = random_weights(m, m, rng.child("A"), opt.weights);
  const Eigen::MatrixXd b = random_weights(m, data.d(), rng.child("B"), opt.weights);

  const double md = static_cast<double>(m);
  const double scale_a = std::sqrt(sa2.value() / md);
  const double scale_b =
      opt.injection == InjectionScaling::Unit ? std::sqrt(sa2.sb2()) : std::sqrt(sa2.sb2() / md);
  const Eigen::MatrixXd injection = scale_b * (b * data.x());

  DeqResult out;
  auto& diag = out.diagnostics;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(m, n);
  Eigen::MatrixXd pre(m, n), next(m, n);
  for (int it = 0; it < opt.max_iter; ++it) {
    pre.noalias() = a * z;
    pre = scale_a * pre + injection;
    next = pre.unaryExpr([](double v) { return normalized_relu(v); });
    const double residual = (next - z).colwise().norm().maxCoeff() / std::sqrt(md);
    diag.residual_history.push_back(residual);
    diag.final_residual = residual;
    diag.iterations = it;
    if (residual <= opt.tol) {
      diag.converged = true;
      break;
    }
    z.swap(next);
  }
  if (!diag.converged) {
    // z was advanced past the last measured iterate; recompute its pre-activation.
    diag.iterations = opt.max_iter;
    pre.noalias() = a * z;
    pre = scale_a * pre + injection;
  }
  out.features = std::move(z);
  out.preactivations = std::move(pre);
  return out;
}

/// (1/m) M^T M of an m x n fixed-point matrix. With the pre-activations h*
/// this estimates G*, whose entries are pre-activation covariances; with the
/// post-activation features z* it estimates f(G*) entrywise instead.
inline KernelMatrix empirical_ck_deq(const Eigen::MatrixXd& fixed_point) {
  return {gram(fixed_point) / static_cast<double>(fixed_point.rows()), KernelKind::EmpiricalCK,
          KernelMeta{fixed_point.cols(), 0, std::nullopt, std::nullopt}};
}

inline KernelMatrix empirical_ck_deq(const DeqResult& run) {
  return empirical_ck_deq(run.preactivations);
}

struct EmpiricalExplicitKernels {
  KernelMatrix ck;
  KernelMatrix ntk;
};

/// Random-feature estimators (1/p) sigma(WX)^T sigma(WX) and
/// ck + (X^T X) o (1/p) sigma'(WX)^T sigma'(WX), W with p rows.
inline EmpiricalExplicitKernels empirical_explicit_kernels(const DataMatrix& data,
                                                           const QuadraticActivation& act,
                                                           Eigen::Index p, const RngSpec& rng,
                                                           WeightLaw law = WeightLaw::Gaussian) {
  if (p < 1) throw dimension_error("empirical_explicit_kernels: p must be >= 1");
  const Eigen::MatrixXd w = random_weights(p, data.d(), rng.child("W"), law);
  const Eigen::MatrixXd pre = w * data.x();
  const Eigen::MatrixXd act_v = pre.unaryExpr([&](double t) { return act(t); });
  const Eigen::MatrixXd act_d = pre.unaryExpr([&](double t) { return act.derivative(t); });
  const double pd = static_cast<double>(p);

  KernelMeta meta{data.n(), data.d(), std::nullopt, act};
  Eigen::MatrixXd ck = gram(act_v) / pd;
  Eigen::MatrixXd ntk = ck + data.gram().cwiseProduct(gram(act_d) / pd);
  return {KernelMatrix{std::move(ck), KernelKind::EmpiricalExplicitCK, meta},
          KernelMatrix{std::move(ntk), KernelKind::EmpiricalExplicitNTK, meta}};
}

}  // namespace deqk
