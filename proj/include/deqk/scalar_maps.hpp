#pragma once

// Scalar correlation maps of the ReLU deep-equilibrium network.
//
// f   : dual map of the normalized ReLU, rho -> E[phi(u) phi(v)] for unit-variance
//       Gaussians with correlation rho.
// g   : implicit CK map, the root x of x = sa2 f(x) + (1 - sa2) rho.
// h   : implicit NTK map on the CK value, h(x) = x / (1 - sa2 f'(x)).
// k   : h o g.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "deqk/errors.hpp"

namespace deqk {

inline constexpr double kBoundaryTol = 1e-12;

/// Variance share of the recurrent branch. sigma_b^2 = 1 - value() always.
class SigmaA2 {
 public:
  constexpr SigmaA2() = default;
  explicit SigmaA2(double value) : value_(value) {
    if (!(value >= 0.0 && value < 1.0)) {
      throw domain_error("sigma_a^2 must lie in [0, 1), got " + std::to_string(value));
    }
  }

  constexpr double value() const noexcept { return value_; }
  constexpr double sb2() const noexcept { return 1.0 - value_; }

 private:
  double value_ = 0.0;
};

namespace detail {

inline double clamp_unit(double x, const char* what) {
  if (!(std::abs(x) <= 1.0 + kBoundaryTol)) {
    throw domain_error(std::string(what) + ": argument outside [-1, 1]: " + std::to_string(x));
  }
  return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x);
}

// f'(x) on the closed interval; arccos is finite at the endpoints.
inline double f_prime_closed(double x) {
  return (std::numbers::pi - std::acos(x)) / std::numbers::pi;
}

inline double f_dprime_open(double x) {
  return 1.0 / (std::numbers::pi * std::sqrt(1.0 - x * x));
}

inline double f_tprime_open(double x) {
  const double s = 1.0 - x * x;
  return x / (std::numbers::pi * s * std::sqrt(s));
}

inline void require_interior(double x, const char* what) {
  if (!(std::abs(x) < 1.0 - 1e-9)) {
    throw domain_error(std::string(what) + ": requires |x| < 1 - 1e-9, got " + std::to_string(x));
  }
}

}  // namespace detail

/// Normalized-ReLU dual map. Inputs within 1e-12 of the boundary are clamped.
inline double f_relu(double x) {
  x = detail::clamp_unit(x, "f_relu");
  return (std::sqrt(1.0 - x * x) + (std::numbers::pi - std::acos(x)) * x) / std::numbers::pi;
}

struct FDerivatives {
  double first;
  double second;
};

/// f'(x) = (pi - arccos x)/pi and f''(x) = 1/(pi sqrt(1 - x^2)); f'' blows up at +-1.
inline FDerivatives f_derivatives(double x) {
  detail::require_interior(x, "f_derivatives");
  return {detail::f_prime_closed(x), detail::f_dprime_open(x)};
}

/// Root of x = sa2 f(x) + (1 - sa2) rho. Picard iteration (a contraction with
/// constant <= sa2) followed by Newton polishing to rounding level.
inline double solve_g(double rho, SigmaA2 sa2, double tol = 1e-13) {
  if (!(tol > 0.0)) throw domain_error("solve_g: tol must be positive");
  rho = detail::clamp_unit(rho, "solve_g");
  const double s = sa2.value();
  const double inject = (1.0 - s) * rho;
  if (rho == 1.0) return 1.0;
  if (s == 0.0) return rho;

  auto residual = [&](double x) { return x - s * f_relu(x) - inject; };

  double x = inject;
  constexpr int kBudget = 10000;
  int it = 0;
  for (; it < kBudget; ++it) {
    const double next = s * f_relu(x) + inject;
    const double step = std::abs(next - x);
    x = next;
    if (step <= 1e-6) break;
  }

  double prev = std::numeric_limits<double>::infinity();
  for (; it < kBudget; ++it) {
    const double slope = 1.0 - s * detail::f_prime_closed(x);
    const double step = residual(x) / slope;
    if (!(std::abs(step) < prev)) break;
    prev = std::abs(step);
    x = std::min(1.0, std::max(-1.0, x - step));
    if (step == 0.0) break;
  }

  if (!(std::abs(residual(x)) <= tol)) {
    throw convergence_error("solve_g: residual " + std::to_string(residual(x)) +
                            " above tolerance at rho=" + std::to_string(rho));
  }
  return x;
}

/// h(x) = x / (1 - sa2 (pi - arccos x)/pi).
inline double h_map(double rho, SigmaA2 sa2) {
  rho = detail::clamp_unit(rho, "h_map");
  return rho / (1.0 - sa2.value() * detail::f_prime_closed(rho));
}

struct HDerivatives {
  double first;
  double second;
};

/// h'(x), h''(x) for |x| < 1.
inline HDerivatives h_derivatives(double x, SigmaA2 sa2) {
  detail::require_interior(x, "h_derivatives");
  const double s = sa2.value();
  const double den = 1.0 - s * detail::f_prime_closed(x);
  const double den1 = -s * detail::f_dprime_open(x);
  const double den2 = -s * detail::f_tprime_open(x);
  const double first = (den - x * den1) / (den * den);
  const double second = (-x * den2 * den - 2.0 * den1 * (den - x * den1)) / (den * den * den);
  return {first, second};
}

/// Implicit NTK map k = h o g. k(1) = 1/(1 - sa2) exactly.
inline double k_map(double rho, SigmaA2 sa2, double tol = 1e-13) {
  return h_map(solve_g(rho, sa2, tol), sa2);
}

struct ScalarMapBundle {
  double angle_star;  // g(0)
  double g_at_one;
  double g_prime_0;
  double g_dprime_0;
  double k_at_zero;
  double k_at_one;
  double k_prime_0;
  double k_dprime_0;
};

/// Values and derivatives at zero of g and k, from implicit differentiation of
/// the fixed-point equation.
inline ScalarMapBundle scalar_bundle(SigmaA2 sa2, double tol = 1e-13) {
  const double s = sa2.value();
  const double sb = sa2.sb2();
  const double angle = solve_g(0.0, sa2, tol);
  const auto [fp, fpp] = f_derivatives(angle);
  const double den = 1.0 - s * fp;

  ScalarMapBundle b{};
  b.angle_star = angle;
  b.g_at_one = solve_g(1.0, sa2, tol);
  b.g_prime_0 = sb / den;
  b.g_dprime_0 = s * sb * sb * fpp / (den * den * den);

  const auto [hp, hpp] = h_derivatives(angle, sa2);
  b.k_at_zero = h_map(angle, sa2);
  b.k_at_one = h_map(b.g_at_one, sa2);
  b.k_prime_0 = sb * hp / den;
  b.k_dprime_0 = sb * sb * (hpp - s * fp * hpp + s * hp * fpp) / (den * den * den);
  return b;
}

struct RecursionValues {
  double ck;
  double ntk;
};

/// Finite-depth layer recursion, depth >= 1. The CK correlation is iterated
/// from rho; the NTK is the partial sum over layers of G^(h-1) times the
/// product of derivative kernels above it, with the topmost factor set to one.
inline RecursionValues scalar_recursion_oracle(double rho, SigmaA2 sa2, int depth) {
  if (depth < 1) throw dimension_error("scalar_recursion_oracle: depth must be >= 1");
  rho = detail::clamp_unit(rho, "scalar_recursion_oracle");
  const double s = sa2.value();

  // ck[l] = G^(l), dot[l] = Gdot^(l) for l = 1..depth (dot[0] unused).
  std::vector<double> ck(depth + 1), dot(depth + 1, 0.0);
  ck[0] = rho;
  for (int l = 1; l <= depth; ++l) {
    dot[l] = s * detail::f_prime_closed(ck[l - 1]);
    ck[l] = s * f_relu(ck[l - 1]) + (1.0 - s) * rho;
    ck[l] = std::min(1.0, std::max(-1.0, ck[l]));
  }

  double ntk = 0.0;
  for (int h = 1; h <= depth + 1; ++h) {
    double prod = 1.0;
    for (int hp = h; hp <= depth; ++hp) prod *= dot[hp];
    ntk += ck[h - 1] * prod;
  }
  return {ck[depth], ntk};
}

}  // namespace deqk
