#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "prefmatch/ops.hpp"
#include "prefmatch/rng.hpp"

namespace testing {

using Matrix = std::vector<std::vector<double>>;

inline prefmatch::Tensor random_tensor(prefmatch::Shape shape, prefmatch::Rng& rng, bool grad = false,
                                       double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(prefmatch::element_count(shape));
  for (auto& x : v) x = dist(rng);
  return prefmatch::Tensor::from(std::move(shape), std::move(v), grad);
}

inline Matrix to_matrix(const prefmatch::Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

inline Matrix mm(const Matrix& a, const Matrix& b) {
  Matrix c(a.size(), std::vector<double>(b.front().size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[k].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Matrix tr(const Matrix& a) {
  Matrix t(a.front().size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline double max_abs_diff(const prefmatch::Tensor& t, const Matrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) worst = std::max(worst, std::abs(t.at(i, j) - m[i][j]));
  return worst;
}

/// Mean and standard error of a sample.
struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

inline Moments moments(const std::vector<double>& xs) {
  double s = 0.0, s2 = 0.0;
  for (double x : xs) s += x;
  const double n = static_cast<double>(xs.size());
  const double mean = s / n;
  for (double x : xs) s2 += (x - mean) * (x - mean);
  return {mean, std::sqrt(s2 / (n - 1.0) / n)};
}

}  // namespace testing
