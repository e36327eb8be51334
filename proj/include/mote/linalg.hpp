#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mote {

/// Dense row-major matrix. Deliberately minimal: the library only needs
/// contiguous row access and a couple of products.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0)) {}

  T* row(std::size_t i) { return data.data() + i * cols; }
  const T* row(std::size_t i) const { return data.data() + i * cols; }
  std::span<T> row_span(std::size_t i) { return {row(i), cols}; }
  std::span<const T> row_span(std::size_t i) const { return {row(i), cols}; }
  T& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Dot product accumulated in 64-bit regardless of the element type.
/// Eight independent accumulators break the FMA dependency chain; the
/// summation order is fixed, so results stay reproducible run to run.
template <typename T>
double dot64(const T* a, const T* b, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  double acc4 = 0.0, acc5 = 0.0, acc6 = 0.0, acc7 = 0.0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    acc1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
    acc2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
    acc3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
    acc4 += static_cast<double>(a[i + 4]) * static_cast<double>(b[i + 4]);
    acc5 += static_cast<double>(a[i + 5]) * static_cast<double>(b[i + 5]);
    acc6 += static_cast<double>(a[i + 6]) * static_cast<double>(b[i + 6]);
    acc7 += static_cast<double>(a[i + 7]) * static_cast<double>(b[i + 7]);
  }
  double acc = ((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7));
  for (; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename T>
double squared_distance(const T* a, const T* b, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    double d0 = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    double d1 = static_cast<double>(a[i + 1]) - static_cast<double>(b[i + 1]);
    double d2 = static_cast<double>(a[i + 2]) - static_cast<double>(b[i + 2]);
    double d3 = static_cast<double>(a[i + 3]) - static_cast<double>(b[i + 3]);
    acc0 += d0 * d0;
    acc1 += d1 * d1;
    acc2 += d2 * d2;
    acc3 += d3 * d3;
  }
  double acc = (acc0 + acc1) + (acc2 + acc3);
  for (; i < n; ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

template <typename T>
double l2_norm(std::span<const T> v) {
  return std::sqrt(dot64(v.data(), v.data(), v.size()));
}

template <typename T>
Matrix<T> transposed(const Matrix<T>& m) {
  Matrix<T> t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

/// C[i][j] = dot(a_i, b_j) where both operand "rows" are contiguous,
/// which keeps the inner loops vectorizable; callers pass a transposed
/// operand where the math needs a plain product.
template <typename T>
void gemm_row_dot_raw(const T* a, std::size_t arows, std::size_t cols, const T* b,
                      std::size_t brows, Matrix<T>& out) {
  out.rows = arows;
  out.cols = brows;
  out.data.assign(arows * brows, T(0));
  for (std::size_t i = 0; i < arows; ++i) {
    const T* ra = a + i * cols;
    T* ro = out.row(i);
    for (std::size_t j = 0; j < brows; ++j) {
      ro[j] = static_cast<T>(dot64(ra, b + j * cols, cols));
    }
  }
}

template <typename T>
void gemm_row_dot(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out) {
  gemm_row_dot_raw(a.data.data(), a.rows, a.cols, b.data.data(), b.rows, out);
}

inline double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  double na = l2_norm(a);
  double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot64(a.data(), b.data(), a.size()) / (na * nb);
}

}  // namespace mote
