#ifndef BVLAB_LINALG_HPP
#define BVLAB_LINALG_HPP

#include <optional>
#include <vector>

#include "bvlab/errors.hpp"
#include "bvlab/rational.hpp"

namespace bvlab {

/** \brief Dense exact matrix, row-major. */
struct QMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<Rational> a;

  QMatrix() = default;
  QMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}

  Rational& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const Rational& operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

/** \brief In-place reduced row echelon form; returns pivot columns. */
inline std::vector<std::size_t> rref(QMatrix& m)
{
  std::vector<std::size_t> piv;
  std::size_t r = 0;
  for (std::size_t c = 0; c < m.cols && r < m.rows; ++c) {
    std::size_t p = r;
    while (p < m.rows && m(p, c) == 0) ++p;
    if (p == m.rows) continue;
    if (p != r)
      for (std::size_t j = 0; j < m.cols; ++j) std::swap(m(p, j), m(r, j));
    Rational inv = Rational(1) / m(r, c);
    for (std::size_t j = c; j < m.cols; ++j) m(r, j) *= inv;
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (i == r || m(i, c) == 0) continue;
      Rational f = m(i, c);
      for (std::size_t j = c; j < m.cols; ++j) m(i, j) -= f * m(r, j);
    }
    piv.push_back(c);
    ++r;
  }
  return piv;
}

inline std::size_t rank(QMatrix m) { return rref(m).size(); }

/** \brief Some solution of A x = b (free variables zero), or nullopt if inconsistent. */
inline std::optional<std::vector<Rational>> solve(const QMatrix& A, const std::vector<Rational>& b)
{
  if (b.size() != A.rows) throw InputError("solve: right-hand side has wrong length");
  QMatrix m(A.rows, A.cols + 1);
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t j = 0; j < A.cols; ++j) m(i, j) = A(i, j);
    m(i, A.cols) = b[i];
  }
  auto piv = rref(m);
  if (!piv.empty() && piv.back() == A.cols) return std::nullopt;
  std::vector<Rational> x(A.cols);
  for (std::size_t r = 0; r < piv.size(); ++r) x[piv[r]] = m(r, A.cols);
  return x;
}

}  // namespace bvlab

#endif  // BVLAB_LINALG_HPP
