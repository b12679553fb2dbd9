#pragma once

// Small dense symmetric eigensolver (cyclic Jacobi rotations).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "icarec/error.hpp"

namespace icarec::linalg {

struct SymEigen {
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // row-major d x d, column j pairs with values[j]
  std::size_t dim = 0;

  double vec(std::size_t row, std::size_t col) const { return vectors[row * dim + col]; }
};

/// Eigen-decomposition of a symmetric row-major d x d matrix.
inline SymEigen jacobi_eigen(std::vector<double> a, std::size_t d, int max_sweeps = 100) {
  if (a.size() != d * d) throw ShapeError("jacobi_eigen: matrix size does not match dimension");
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
  auto off = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) s += a[i * d + j] * a[i * d + j];
    return s;
  };
  double scale = 0.0;
  for (double x : a) scale += x * x;
  for (int sweep = 0; sweep < max_sweeps && off() > 1e-30 * scale; ++sweep) {
    for (std::size_t p = 0; p + 1 < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a[k * d + p], akq = a[k * d + q];
          a[k * d + p] = c * akp - s * akq;
          a[k * d + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a[p * d + k], aqk = a[q * d + k];
          a[p * d + k] = c * apk - s * aqk;
          a[q * d + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = v[k * d + p], vkq = v[k * d + q];
          v[k * d + p] = c * vkp - s * vkq;
          v[k * d + q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a[i * d + i] > a[j * d + j]; });
  SymEigen out;
  out.dim = d;
  out.values.resize(d);
  out.vectors.resize(d * d);
  for (std::size_t j = 0; j < d; ++j) {
    out.values[j] = a[order[j] * d + order[j]];
    for (std::size_t k = 0; k < d; ++k) out.vectors[k * d + j] = v[k * d + order[j]];
  }
  return out;
}

}  // namespace icarec::linalg
