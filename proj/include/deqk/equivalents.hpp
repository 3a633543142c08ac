#pragma once

// Three-term high-dimensional equivalents alpha 11^T + beta X^T X + mu I of the
// four exact kernels. The 1/d corrections use the experiment's finite d.

#include <cmath>
#include <string_view>

#include <Eigen/Dense>

#include "deqk/dataset.hpp"
#include "deqk/errors.hpp"
#include "deqk/gaussian.hpp"
#include "deqk/kernels.hpp"
#include "deqk/scalar_maps.hpp"

namespace deqk {

enum class EquivalentKind { ImplicitCK, ExplicitCK, ImplicitNTK, ExplicitNTK };

inline constexpr std::string_view to_string(EquivalentKind k) {
  switch (k) {
    case EquivalentKind::ImplicitCK: return "ImplicitCK";
    case EquivalentKind::ExplicitCK: return "ExplicitCK";
    case EquivalentKind::ImplicitNTK: return "ImplicitNTK";
    case EquivalentKind::ExplicitNTK: return "ExplicitNTK";
  }
  return "?";
}

inline constexpr bool is_ck(EquivalentKind k) {
  return k == EquivalentKind::ImplicitCK || k == EquivalentKind::ExplicitCK;
}

struct EquivalentCoeffs {
  double alpha = 0.0;
  double beta = 0.0;
  double mu = 0.0;
  EquivalentKind kind = EquivalentKind::ImplicitCK;
  Eigen::Index d = 0;
};

namespace detail {
inline void require_dim(Eigen::Index d) {
  if (d < 2) throw dimension_error("equivalent coefficients need d >= 2");
}
}  // namespace detail

inline EquivalentCoeffs implicit_ck_coeffs(SigmaA2 sa2, Eigen::Index d) {
  detail::require_dim(d);
  const auto b = scalar_bundle(sa2);
  return {b.angle_star + b.g_dprime_0 / (2.0 * d), b.g_prime_0,
          b.g_at_one - b.angle_star - b.g_prime_0, EquivalentKind::ImplicitCK, d};
}

inline EquivalentCoeffs implicit_ntk_coeffs(SigmaA2 sa2, Eigen::Index d) {
  detail::require_dim(d);
  const auto b = scalar_bundle(sa2);
  return {b.k_at_zero + b.k_dprime_0 / (2.0 * d), b.k_prime_0,
          b.k_at_one - b.k_at_zero - b.k_prime_0, EquivalentKind::ImplicitNTK, d};
}

inline EquivalentCoeffs explicit_ck_coeffs(const ActivationMoments& m, Eigen::Index d) {
  detail::require_dim(d);
  return {m.mean * m.mean + m.dd_mean * m.dd_mean / (2.0 * d), m.d_mean * m.d_mean,
          m.sq_mean - m.mean * m.mean - m.d_mean * m.d_mean, EquivalentKind::ExplicitCK, d};
}

inline EquivalentCoeffs explicit_ntk_coeffs(const ActivationMoments& m, Eigen::Index d) {
  detail::require_dim(d);
  return {m.mean * m.mean + 3.0 * m.dd_mean * m.dd_mean / (2.0 * d), 2.0 * m.d_mean * m.d_mean,
          m.sq_mean + m.d_sq_mean - m.mean * m.mean - 2.0 * m.d_mean * m.d_mean,
          EquivalentKind::ExplicitNTK, d};
}

/// alpha 11^T + beta X^T X + mu I on the given data.
inline KernelMatrix materialize(const EquivalentCoeffs& c, const DataMatrix& data) {
  if (c.d != data.d()) {
    throw dimension_error("materialize: coefficients built for d=" + std::to_string(c.d) +
                          " but data has d=" + std::to_string(data.d()));
  }
  Eigen::MatrixXd m = c.beta * data.gram();
  m.array() += c.alpha;
  m.diagonal().array() += c.mu;
  return {std::move(m), is_ck(c.kind) ? KernelKind::EquivalentCK : KernelKind::EquivalentNTK,
          KernelMeta{data.n(), data.d(), std::nullopt, std::nullopt}};
}

}  // namespace deqk
