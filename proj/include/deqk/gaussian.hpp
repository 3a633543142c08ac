#pragma once

// Gaussian expectations of activations for z ~ N(0, 1) and for correlated
// standard pairs (u, v) with E[uv] = rho.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "deqk/errors.hpp"
#include "deqk/scalar_maps.hpp"

namespace deqk {

/// sigma(t) = a2 t^2 + a1 t + a0.
struct QuadraticActivation {
  double a2 = 0.0;
  double a1 = 0.0;
  double a0 = 0.0;

  double operator()(double t) const noexcept { return (a2 * t + a1) * t + a0; }
  double derivative(double t) const noexcept { return 2.0 * a2 * t + a1; }
  double second_derivative(double) const noexcept { return 2.0 * a2; }

  friend bool operator==(const QuadraticActivation&, const QuadraticActivation&) = default;
};

struct ActivationMoments {
  double mean = 0.0;       // E[sigma(z)]
  double d_mean = 0.0;     // E[sigma'(z)]
  double dd_mean = 0.0;    // E[sigma''(z)]
  double sq_mean = 0.0;    // E[sigma(z)^2]
  double d_sq_mean = 0.0;  // E[sigma'(z)^2]
};

inline ActivationMoments moments_quadratic(const QuadraticActivation& act) {
  const auto [a2, a1, a0] = act;
  return {a2 + a0, a1, 2.0 * a2, 3.0 * a2 * a2 + a1 * a1 + a0 * a0 + 2.0 * a2 * a0,
          4.0 * a2 * a2 + a1 * a1};
}

/// Gauss-Hermite rule for the standard normal measure; weights sum to one.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// Golub-Welsch on the probabilists' Hermite Jacobi matrix, then Newton
/// refinement of each node on the orthonormal recurrence and Christoffel weights.
inline GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw dimension_error("gauss_hermite: need at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi, Eigen::EigenvaluesOnly);

  // Orthonormal p_0..p_{n}; returns p_n, p_{n-1} and sum_{k<n} p_k^2.
  auto evaluate = [n](double x, double& pn, double& pn1, double& christoffel) {
    double prev = 0.0, cur = 1.0;
    christoffel = 0.0;
    for (int k = 0; k < n; ++k) {
      christoffel += cur * cur;
      const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                          std::sqrt(static_cast<double>(k + 1));
      prev = cur;
      cur = next;
    }
    pn = cur;
    pn1 = prev;
  };

  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()(i);
    double pn = 0, pn1 = 0, c = 0;
    for (int it = 0; it < 8; ++it) {
      evaluate(x, pn, pn1, c);
      const double step = pn / (std::sqrt(static_cast<double>(n)) * pn1);
      x -= step;
      if (std::abs(step) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)))
        break;
    }
    evaluate(x, pn, pn1, c);
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / c;
  }
  // Enforce exact symmetry of the rule.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Univariate moments of a general smooth activation given sigma, sigma', sigma''.
template <class F, class DF, class DDF>
ActivationMoments moments_quadrature(F&& sigma, DF&& dsigma, DDF&& ddsigma,
                                     const GaussHermiteRule& rule) {
  if (rule.size() < 16) throw dimension_error("moments_quadrature: need at least 16 nodes");
  ActivationMoments m;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double z = rule.nodes[i];
    const double w = rule.weights[i];
    const double s = sigma(z);
    const double ds = dsigma(z);
    m.mean += w * s;
    m.d_mean += w * ds;
    m.dd_mean += w * ddsigma(z);
    m.sq_mean += w * s * s;
    m.d_sq_mean += w * ds * ds;
  }
  return m;
}

template <class F, class DF, class DDF>
ActivationMoments moments_quadrature(F&& sigma, DF&& dsigma, DDF&& ddsigma, int nodes = 64) {
  if (nodes < 16) throw dimension_error("moments_quadrature: need at least 16 nodes");
  return moments_quadrature(sigma, dsigma, ddsigma, gauss_hermite(nodes));
}

inline ActivationMoments moments_quadrature(const QuadraticActivation& act, int nodes = 64) {
  return moments_quadrature([&](double t) { return act(t); },
                            [&](double t) { return act.derivative(t); },
                            [&](double t) { return act.second_derivative(t); }, nodes);
}

/// E[sigma(u) sigma(v)] for standard (u, v) with correlation rho.
inline double bivariate_sigma_sigma(const QuadraticActivation& act, double rho) {
  rho = detail::clamp_unit(rho, "bivariate_sigma_sigma");
  const auto [a2, a1, a0] = act;
  return a2 * a2 * (1.0 + 2.0 * rho * rho) + 2.0 * a2 * a0 + a1 * a1 * rho + a0 * a0;
}

/// E[sigma'(u) sigma'(v)] for standard (u, v) with correlation rho.
inline double bivariate_dsigma_dsigma(const QuadraticActivation& act, double rho) {
  rho = detail::clamp_unit(rho, "bivariate_dsigma_dsigma");
  return 4.0 * act.a2 * act.a2 * rho + act.a1 * act.a1;
}

/// E[phi(u) psi(v)] on the tensor rule, with v = rho u + sqrt(1 - rho^2) w.
template <class Phi, class Psi>
double bivariate_quadrature(Phi&& phi, Psi&& psi, double rho, const GaussHermiteRule& rule) {
  rho = detail::clamp_unit(rho, "bivariate_quadrature");
  const double c = std::sqrt(1.0 - rho * rho);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double u = rule.nodes[i];
    const double pu = phi(u);
    double inner = 0.0;
    for (std::size_t j = 0; j < rule.size(); ++j) {
      inner += rule.weights[j] * psi(rho * u + c * rule.nodes[j]);
    }
    acc += rule.weights[i] * pu * inner;
  }
  return acc;
}

}  // namespace deqk
