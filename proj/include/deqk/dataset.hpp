#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "deqk/errors.hpp"
#include "deqk/format.hpp"
#include "deqk/rng.hpp"

namespace deqk {

/// Symmetric X^T X, computed as a rank update so both triangles agree bitwise.
inline Eigen::MatrixXd gram(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.cols();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

/// d x n matrix of unit-norm columns with its cached Gram matrix.
class DataMatrix {
 public:
  DataMatrix() = default;

  explicit DataMatrix(Eigen::MatrixXd x, std::uint64_t seed = 0) : x_(std::move(x)), seed_(seed) {
    if (x_.cols() < 1 || x_.rows() < 2) {
      throw dimension_error("DataMatrix: need n >= 1 and d >= 2");
    }
    for (Eigen::Index i = 0; i < x_.cols(); ++i) {
      const double norm = x_.col(i).norm();
      if (!(std::abs(norm - 1.0) <= 1e-12)) {
        throw domain_error("DataMatrix: column " + std::to_string(i) + " has norm " +
                           std::to_string(norm));
      }
    }
    gram_ = deqk::gram(x_);
  }

  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const Eigen::MatrixXd& gram() const noexcept { return gram_; }
  Eigen::Index n() const noexcept { return x_.cols(); }
  Eigen::Index d() const noexcept { return x_.rows(); }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Same points in a new column order; perm[i] is the source column of column i.
  DataMatrix permuted(const std::vector<Eigen::Index>& perm) const {
    if (static_cast<Eigen::Index>(perm.size()) != n()) throw dimension_error("permuted: size");
    Eigen::MatrixXd y(d(), n());
    for (Eigen::Index i = 0; i < n(); ++i) y.col(i) = x_.col(perm[i]);
    return DataMatrix(std::move(y), seed_);
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::MatrixXd gram_;
  std::uint64_t seed_ = 0;
};

/// n i.i.d. points uniform on S^{d-1}: standard normal vectors scaled to unit length.
inline DataMatrix sample_sphere(Eigen::Index n, Eigen::Index d, const RngSpec& rng) {
  if (n < 1 || d < 2) throw dimension_error("sample_sphere: need n >= 1 and d >= 2");
  auto engine = make_engine(rng);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) x(i, j) = normal(engine);
    x.col(j) /= x.col(j).norm();
  }
  return DataMatrix(std::move(x), rng.seed);
}

// CSV layout: a "d,n,seed" header, one line with those values, then one line
// per data point (column of X) holding its d coordinates.
inline void write_data_csv(std::ostream& os, const DataMatrix& data) {
  os << "d,n,seed\n" << data.d() << ',' << data.n() << ',' << data.seed() << '\n';
  for (Eigen::Index j = 0; j < data.n(); ++j) {
    for (Eigen::Index i = 0; i < data.d(); ++i) {
      if (i) os << ',';
      os << format_double(data.x()(i, j));
    }
    os << '\n';
  }
}

inline DataMatrix read_data_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "d,n,seed") {
    throw domain_error("data csv: missing 'd,n,seed' header");
  }
  if (!std::getline(is, line)) throw domain_error("data csv: missing size line");
  long long d = 0, n = 0;
  unsigned long long seed = 0;
  char c1 = 0, c2 = 0;
  std::istringstream head(line);
  if (!(head >> d >> c1 >> n >> c2 >> seed) || c1 != ',' || c2 != ',' || d < 2 || n < 1) {
    throw domain_error("data csv: malformed size line '" + line + "'");
  }
  Eigen::MatrixXd x(d, n);
  for (long long j = 0; j < n; ++j) {
    if (!std::getline(is, line)) throw domain_error("data csv: truncated at point " + std::to_string(j));
    const auto values = parse_csv_row(line);
    if (static_cast<long long>(values.size()) != d) {
      throw domain_error("data csv: point " + std::to_string(j) + " has wrong length");
    }
    for (long long i = 0; i < d; ++i) x(i, j) = values[i];
  }
  return DataMatrix(std::move(x), seed);
}

}  // namespace deqk
