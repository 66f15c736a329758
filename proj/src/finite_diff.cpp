#include "inrd/finite_diff.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace inrd {

Vec64 fd_gradient(const ScalarField& f, ConstVecView s, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  Vec64 x(s.begin(), s.end());
  Vec64 g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Mat64 fd_hessian(const ScalarField& f, ConstVecView s, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_hessian: step must be positive");
  const std::size_t n = s.size();
  if (n > kMaxHessianDim)
    throw std::invalid_argument("fd_hessian: dimension " + std::to_string(n) + " exceeds " +
                                std::to_string(kMaxHessianDim) +
                                "; use the quadratic-form probe (so_stat) instead");
  Vec64 x(s.begin(), s.end());
  Mat64 H(n, n);
  const double f0 = f(x);
  const double h2 = h * h;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    H(i, i) = (fp - 2.0 * f0 + fm) / h2;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double xj = x[j];
      x[i] = xi + h; x[j] = xj + h;
      const double fpp = f(x);
      x[j] = xj - h;
      const double fpm = f(x);
      x[i] = xi - h;
      const double fmm = f(x);
      x[j] = xj + h;
      const double fmp = f(x);
      x[i] = xi; x[j] = xj;
      H(i, j) = (fpp - fpm - fmp + fmm) / (4.0 * h2);
      H(j, i) = H(i, j);
    }
  }
  return H;
}

namespace {

double frobenius(const Mat64& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

void require_symmetric(const Mat64& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("eigensolver: matrix must be square");
  const double tol = 1e-8 * std::max(1.0, frobenius(h));
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = i + 1; j < h.cols(); ++j)
      if (std::abs(h(i, j) - h(j, i)) > tol)
        throw std::invalid_argument("eigensolver: matrix is not symmetric within tolerance");
}

}  // namespace

Vec64 symmetric_eigenvalues(const Mat64& h) {
  require_symmetric(h);
  const std::size_t n = h.rows();
  Mat64 a = h;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (h(i, j) + h(j, i));

  const double scale = std::max(frobenius(a), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-15 * scale) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle zeroing a(p,q); t = tan(theta) with the smaller root.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
      }
    }
  }
  Vec64 eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double min_eigenvalue(const Mat64& h) {
  if (h.rows() == 0) throw std::invalid_argument("min_eigenvalue: empty matrix");
  return symmetric_eigenvalues(h).front();
}

}  // namespace inrd
