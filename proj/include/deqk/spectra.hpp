#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "deqk/errors.hpp"
#include "deqk/kernels.hpp"

namespace deqk {

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  KernelKind source_kind = KernelKind::ImplicitCK;

  std::size_t size() const noexcept { return eigenvalues.size(); }
};

struct DensityHistogram {
  std::vector<double> bin_edges;  // bins + 1, strictly increasing
  std::vector<double> mass;       // sums to one
};

namespace detail {

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw dimension_error("expected a square matrix");
  if (!m.allFinite()) throw domain_error("matrix has non-finite entries");
  return 0.5 * (m + m.transpose());
}

}  // namespace detail

/// Ascending eigenvalues of (M + M^T)/2.
inline std::vector<double> eigenvalues_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(detail::symmetrized(m), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw convergence_error("symmetric eigensolver failed");
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

inline Spectrum eig_sym(const KernelMatrix& k) { return {eigenvalues_sym(k.values), k.kind}; }

/// ||Q diag(L) Q^T - M||_F / ||M||_F for the symmetrized M.
inline double reconstruction_error(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd s = detail::symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  const Eigen::MatrixXd rec =
      es.eigenvectors() * es.eigenvalues().asDiagonal() * es.eigenvectors().transpose();
  const double scale = s.norm();
  return scale > 0 ? (rec - s).norm() / scale : (rec - s).norm();
}

/// Spectral norm of a symmetric matrix: largest absolute eigenvalue.
inline double operator_norm(const Eigen::MatrixXd& m) {
  const auto ev = eigenvalues_sym(m);
  return std::max(std::abs(ev.front()), std::abs(ev.back()));
}

inline double operator_norm_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw dimension_error("operator_norm_diff: shape mismatch");
  }
  return operator_norm(a - b);
}

inline double operator_norm_diff(const KernelMatrix& a, const KernelMatrix& b) {
  return operator_norm_diff(a.values, b.values);
}

/// ||a - b||_2 / ||a||_2.
inline double relative_residual(const KernelMatrix& a, const KernelMatrix& b) {
  return operator_norm_diff(a, b) / operator_norm(a.values);
}

/// Equal-width histogram of s over [lo, hi]; values outside land in the end bins.
inline DensityHistogram density(const Spectrum& s, double lo, double hi, int bins) {
  if (bins < 2) throw dimension_error("density: need at least 2 bins");
  if (s.eigenvalues.empty()) throw dimension_error("density: empty spectrum");
  if (!(hi > lo)) throw domain_error("density: empty range");
  const double width = (hi - lo) / bins;

  DensityHistogram h;
  h.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.bin_edges[b] = lo + width * b;
  h.bin_edges.back() = hi;
  h.mass.assign(bins, 0.0);
  const double unit = 1.0 / static_cast<double>(s.eigenvalues.size());
  for (double v : s.eigenvalues) {
    int b = static_cast<int>(std::floor((v - lo) / width));
    b = std::clamp(b, 0, bins - 1);
    h.mass[b] += unit;
  }
  return h;
}

namespace detail {

inline std::pair<double, double> padded_range(double mn, double mx) {
  const double range = mx - mn;
  const double pad = range > 0 ? 0.01 * range : 0.01 * std::max(1.0, std::abs(mx));
  return {mn - pad, mx + pad};
}

}  // namespace detail

/// Equal-width histogram over [min, max] widened by 1% of the range on each side.
inline DensityHistogram density(const Spectrum& s, int bins = 75) {
  if (s.eigenvalues.empty()) throw dimension_error("density: empty spectrum");
  const auto [mn, mx] = std::minmax_element(s.eigenvalues.begin(), s.eigenvalues.end());
  const auto [lo, hi] = detail::padded_range(*mn, *mx);
  return density(s, lo, hi, bins);
}

/// Histograms of a and b on shared bins spanning both spectra, for overlays.
inline std::pair<DensityHistogram, DensityHistogram> common_density(const Spectrum& a,
                                                                    const Spectrum& b,
                                                                    int bins = 75) {
  if (a.eigenvalues.empty() || b.eigenvalues.empty()) {
    throw dimension_error("common_density: empty spectrum");
  }
  const auto [amn, amx] = std::minmax_element(a.eigenvalues.begin(), a.eigenvalues.end());
  const auto [bmn, bmx] = std::minmax_element(b.eigenvalues.begin(), b.eigenvalues.end());
  const auto [lo, hi] = detail::padded_range(std::min(*amn, *bmn), std::max(*amx, *bmx));
  return {density(a, lo, hi, bins), density(b, lo, hi, bins)};
}

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ks_distance(const Spectrum& a, const Spectrum& b) {
  if (a.eigenvalues.empty() || b.eigenvalues.empty()) throw dimension_error("ks_distance: empty");
  std::vector<double> x = a.eigenvalues, y = b.eigenvalues;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return best;
}

}  // namespace deqk
