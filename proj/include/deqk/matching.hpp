#pragma once

// Quadratic activations whose explicit-kernel equivalent coefficients coincide
// with those of the ReLU implicit network.

#include <algorithm>
#include <cmath>
#include <string>

#include "deqk/equivalents.hpp"
#include "deqk/errors.hpp"
#include "deqk/gaussian.hpp"
#include "deqk/kernels.hpp"
#include "deqk/spectra.hpp"

namespace deqk {

/// Sign picked for each square root; each entry is +1 or -1.
struct SignChoice {
  int s2 = 1;
  int s1 = 1;
  int s0 = 1;

  friend bool operator==(const SignChoice&, const SignChoice&) = default;
};

struct MatchResult {
  QuadraticActivation activation;
  EquivalentCoeffs target;
  EquivalentCoeffs achieved;
  SignChoice signs;

  double roundtrip_residual() const {
    return std::max({std::abs(target.alpha - achieved.alpha), std::abs(target.beta - achieved.beta),
                     std::abs(target.mu - achieved.mu)});
  }
};

namespace detail {

inline constexpr double kRadicandDust = 1e-14;

inline double guarded_sqrt(double value, const std::string& quantity) {
  if (value < -kRadicandDust) throw radicand_error(quantity, value);
  return std::sqrt(std::max(0.0, value));
}

inline void check_signs(const SignChoice& s) {
  for (int v : {s.s2, s.s1, s.s0}) {
    if (v != 1 && v != -1) throw domain_error("sign choice entries must be +1 or -1");
  }
}

// a2 = s2 sqrt(mu / mu_scale), a1 = s1 sqrt(beta / beta_scale),
// a0 = s0 sqrt(alpha - mu / d) - a2.
inline QuadraticActivation solve_quadratic(const EquivalentCoeffs& t, double mu_scale,
                                           double beta_scale, const SignChoice& s) {
  check_signs(s);
  QuadraticActivation act;
  act.a2 = s.s2 * guarded_sqrt(t.mu / mu_scale, "mu");
  act.a1 = s.s1 * guarded_sqrt(t.beta / beta_scale, "beta");
  act.a0 = s.s0 * guarded_sqrt(t.alpha - t.mu / static_cast<double>(t.d), "alpha - mu/d") - act.a2;
  return act;
}

}  // namespace detail

/// Explicit CK equivalent of sigma equals the implicit CK equivalent.
inline MatchResult match_ck(SigmaA2 sa2, Eigen::Index d, SignChoice signs = {}) {
  const auto target = implicit_ck_coeffs(sa2, d);
  const auto act = detail::solve_quadratic(target, 2.0, 1.0, signs);
  return {act, target, explicit_ck_coeffs(moments_quadratic(act), d), signs};
}

/// Explicit NTK equivalent of sigma equals the implicit NTK equivalent.
inline MatchResult match_ntk(SigmaA2 sa2, Eigen::Index d, SignChoice signs = {}) {
  const auto target = implicit_ntk_coeffs(sa2, d);
  const auto act = detail::solve_quadratic(target, 6.0, 2.0, signs);
  return {act, target, explicit_ntk_coeffs(moments_quadratic(act), d), signs};
}

struct MatchVerification {
  double relative_residual = 0.0;  // ||implicit - explicit||_2 / ||implicit||_2
  double ks = 0.0;
  Spectrum implicit_spectrum;
  Spectrum explicit_spectrum;
};

/// Builds the exact implicit kernel and the explicit kernel of the matched
/// activation on the same data and compares them.
inline MatchVerification verify_match(const MatchResult& result, const DataMatrix& data,
                                      SigmaA2 sa2) {
  if (result.target.d != data.d()) throw dimension_error("verify_match: d mismatch");
  const bool ck = is_ck(result.target.kind);
  const KernelMatrix imp = ck ? implicit_ck(data, sa2) : implicit_ntk(data, sa2);
  const KernelMatrix exp = ck ? explicit_ck(data, result.activation)
                              : explicit_ntk(data, result.activation);
  MatchVerification v;
  v.relative_residual = relative_residual(imp, exp);
  v.implicit_spectrum = eig_sym(imp);
  v.explicit_spectrum = eig_sym(exp);
  v.ks = ks_distance(v.implicit_spectrum, v.explicit_spectrum);
  return v;
}

}  // namespace deqk
