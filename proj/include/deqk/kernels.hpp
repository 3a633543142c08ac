#pragma once

#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "deqk/dataset.hpp"
#include "deqk/errors.hpp"
#include "deqk/gaussian.hpp"
#include "deqk/scalar_maps.hpp"

namespace deqk {

enum class KernelKind {
  ImplicitCK,
  ImplicitNTK,
  ExplicitCK,
  ExplicitNTK,
  EquivalentCK,
  EquivalentNTK,
  EmpiricalCK,
  EmpiricalExplicitCK,
  EmpiricalExplicitNTK,
};

inline constexpr std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::ImplicitCK: return "ImplicitCK";
    case KernelKind::ImplicitNTK: return "ImplicitNTK";
    case KernelKind::ExplicitCK: return "ExplicitCK";
    case KernelKind::ExplicitNTK: return "ExplicitNTK";
    case KernelKind::EquivalentCK: return "EquivalentCK";
    case KernelKind::EquivalentNTK: return "EquivalentNTK";
    case KernelKind::EmpiricalCK: return "EmpiricalCK";
    case KernelKind::EmpiricalExplicitCK: return "EmpiricalExplicitCK";
    case KernelKind::EmpiricalExplicitNTK: return "EmpiricalExplicitNTK";
  }
  return "?";
}

inline std::optional<KernelKind> kernel_kind_from_string(std::string_view s) {
  for (auto k : {KernelKind::ImplicitCK, KernelKind::ImplicitNTK, KernelKind::ExplicitCK,
                 KernelKind::ExplicitNTK, KernelKind::EquivalentCK, KernelKind::EquivalentNTK,
                 KernelKind::EmpiricalCK, KernelKind::EmpiricalExplicitCK,
                 KernelKind::EmpiricalExplicitNTK}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// What produced a kernel: implicit kinds carry sa2, explicit kinds an activation.
struct KernelMeta {
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  std::optional<double> sa2;
  std::optional<QuadraticActivation> activation;
};

struct KernelMatrix {
  Eigen::MatrixXd values;
  KernelKind kind = KernelKind::ImplicitCK;
  KernelMeta meta;

  Eigen::Index n() const noexcept { return values.rows(); }
};

namespace detail {

// Fills the upper triangle (diagonal excluded) with fn(i, j) and mirrors it.
// Entries are independent, so the result does not depend on the thread count.
template <class Fn>
void fill_symmetric(Eigen::MatrixXd& m, Fn&& fn) {
  const Eigen::Index n = m.rows();
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = fn(i, j);
        m(i, j) = v;
        m(j, i) = v;
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

inline KernelMeta implicit_meta(const DataMatrix& data, SigmaA2 sa2) {
  return {data.n(), data.d(), sa2.value(), std::nullopt};
}

inline KernelMeta explicit_meta(const DataMatrix& data, const QuadraticActivation& act) {
  return {data.n(), data.d(), std::nullopt, act};
}

}  // namespace detail

/// G*_ij = g(x_i^T x_j), unit diagonal.
inline KernelMatrix implicit_ck(const DataMatrix& data, SigmaA2 sa2) {
  Eigen::MatrixXd m(data.n(), data.n());
  const auto& gr = data.gram();
  detail::fill_symmetric(m, [&](Eigen::Index i, Eigen::Index j) { return solve_g(gr(i, j), sa2); });
  m.diagonal().setOnes();
  return {std::move(m), KernelKind::ImplicitCK, detail::implicit_meta(data, sa2)};
}

/// K*_ij = k(x_i^T x_j), diagonal 1/(1 - sa2).
inline KernelMatrix implicit_ntk(const DataMatrix& data, SigmaA2 sa2) {
  Eigen::MatrixXd m(data.n(), data.n());
  const auto& gr = data.gram();
  detail::fill_symmetric(m, [&](Eigen::Index i, Eigen::Index j) { return k_map(gr(i, j), sa2); });
  m.diagonal().setConstant(1.0 / sa2.sb2());
  return {std::move(m), KernelKind::ImplicitNTK, detail::implicit_meta(data, sa2)};
}

/// Applies h entrywise to an implicit CK.
inline KernelMatrix implicit_ntk_from_ck(const KernelMatrix& ck) {
  if (ck.kind != KernelKind::ImplicitCK || !ck.meta.sa2) {
    throw dimension_error("implicit_ntk_from_ck: input must be an ImplicitCK");
  }
  const SigmaA2 sa2(*ck.meta.sa2);
  Eigen::MatrixXd m(ck.n(), ck.n());
  detail::fill_symmetric(m, [&](Eigen::Index i, Eigen::Index j) { return h_map(ck.values(i, j), sa2); });
  m.diagonal().setConstant(1.0 / sa2.sb2());
  return {std::move(m), KernelKind::ImplicitNTK, ck.meta};
}

/// Sigma_ij = E_w[sigma(w^T x_i) sigma(w^T x_j)], w ~ N(0, I_d).
inline KernelMatrix explicit_ck(const DataMatrix& data, const QuadraticActivation& act) {
  Eigen::MatrixXd m(data.n(), data.n());
  const auto& gr = data.gram();
  detail::fill_symmetric(
      m, [&](Eigen::Index i, Eigen::Index j) { return bivariate_sigma_sigma(act, gr(i, j)); });
  m.diagonal().setConstant(moments_quadratic(act).sq_mean);
  return {std::move(m), KernelKind::ExplicitCK, detail::explicit_meta(data, act)};
}

/// Theta = Sigma + (X^T X) o E_w[sigma'(w^T x_i) sigma'(w^T x_j)].
inline KernelMatrix explicit_ntk(const DataMatrix& data, const QuadraticActivation& act) {
  Eigen::MatrixXd m(data.n(), data.n());
  const auto& gr = data.gram();
  detail::fill_symmetric(m, [&](Eigen::Index i, Eigen::Index j) {
    const double rho = gr(i, j);
    return bivariate_sigma_sigma(act, rho) + rho * bivariate_dsigma_dsigma(act, rho);
  });
  const auto mom = moments_quadratic(act);
  m.diagonal().setConstant(mom.sq_mean + mom.d_sq_mean);
  return {std::move(m), KernelKind::ExplicitNTK, detail::explicit_meta(data, act)};
}

/// Finite-depth CK/NTK recursion, entrywise. Unit diagonals are preserved at
/// every depth, so each entry only sees its own correlation.
inline std::pair<KernelMatrix, KernelMatrix> kernel_recursion(const DataMatrix& data, SigmaA2 sa2,
                                                              int depth) {
  if (depth < 1) throw dimension_error("kernel_recursion: depth must be >= 1");
  const Eigen::Index n = data.n();
  Eigen::MatrixXd ck(n, n), ntk(n, n);
  const auto& gr = data.gram();
  detail::fill_symmetric(ck, [&](Eigen::Index i, Eigen::Index j) {
    const auto r = scalar_recursion_oracle(gr(i, j), sa2, depth);
    ntk(i, j) = ntk(j, i) = r.ntk;
    return r.ck;
  });
  const auto diag = scalar_recursion_oracle(1.0, sa2, depth);
  ck.diagonal().setConstant(diag.ck);
  ntk.diagonal().setConstant(diag.ntk);
  const auto meta = detail::implicit_meta(data, sa2);
  return {KernelMatrix{std::move(ck), KernelKind::ImplicitCK, meta},
          KernelMatrix{std::move(ntk), KernelKind::ImplicitNTK, meta}};
}

/// Structural checks: symmetry and the analytic diagonal of each exact kind.
/// Returns human-readable violations; empty when all hold.
inline std::vector<std::string> check_invariants(const KernelMatrix& k, double tol = 1e-10) {
  std::vector<std::string> problems;
  if (k.values.rows() != k.values.cols()) {
    problems.emplace_back("not square");
    return problems;
  }
  if (!k.values.allFinite()) problems.emplace_back("non-finite entries");
  const double asym = (k.values - k.values.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol) problems.emplace_back("asymmetry " + std::to_string(asym));

  std::optional<double> diag;
  if (k.kind == KernelKind::ImplicitCK) diag = 1.0;
  if (k.kind == KernelKind::ImplicitNTK && k.meta.sa2) diag = 1.0 / (1.0 - *k.meta.sa2);
  if (k.kind == KernelKind::ExplicitCK && k.meta.activation)
    diag = moments_quadratic(*k.meta.activation).sq_mean;
  if (k.kind == KernelKind::ExplicitNTK && k.meta.activation) {
    const auto m = moments_quadratic(*k.meta.activation);
    diag = m.sq_mean + m.d_sq_mean;
  }
  if (diag) {
    const double dev = (k.values.diagonal().array() - *diag).abs().maxCoeff();
    if (dev > tol) problems.emplace_back("diagonal deviates by " + std::to_string(dev));
  }
  return problems;
}

}  // namespace deqk
