#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace inrd {

/// Dense real vector. Observations, perturbations and gradients all live here.
using Vec64 = std::vector<double>;
using ConstVecView = std::span<const double>;

/// Row-major dense matrix.
class Mat64 {
 public:
  Mat64() = default;
  Mat64(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat64(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("Mat64: data length " + std::to_string(data_.size()) +
                                  " != rows*cols " + std::to_string(rows_ * cols_));
  }

  static Mat64 identity(std::size_t n) {
    Mat64 m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  bool operator==(const Mat64&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
}

inline double dot(ConstVecView a, ConstVecView b) {
  require_same_size(a.size(), b.size(), "dot");
  // Vectorised reduction; the lane split is fixed at compile time, so results are
  // reproducible run to run.
  const double* pa = a.data();
  const double* pb = b.data();
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < a.size(); ++i) s += pa[i] * pb[i];
  return s;
}

inline double norm_l2(ConstVecView a) { return std::sqrt(dot(a, a)); }

inline double norm_l1(ConstVecView a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline double norm_linf(ConstVecView a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline Vec64 add(ConstVecView a, ConstVecView b) {
  require_same_size(a.size(), b.size(), "add");
  Vec64 out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Vec64 sub(ConstVecView a, ConstVecView b) {
  require_same_size(a.size(), b.size(), "sub");
  Vec64 out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vec64 scaled(ConstVecView a, double k) {
  Vec64 out(a.begin(), a.end());
  for (double& v : out) v *= k;
  return out;
}

/// y += k * x
inline void axpy(double k, ConstVecView x, std::span<double> y) {
  require_same_size(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += k * x[i];
}

inline double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline Vec64 sign(ConstVecView a) {
  Vec64 out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = sign(a[i]);
  return out;
}

inline bool all_finite(ConstVecView a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// y = M x
inline Vec64 matvec(const Mat64& m, ConstVecView x) {
  require_same_size(m.cols(), x.size(), "matvec");
  Vec64 y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
  return y;
}

/// y = Mᵀ x
inline Vec64 matvec_transposed(const Mat64& m, ConstVecView x) {
  require_same_size(m.rows(), x.size(), "matvec_transposed");
  Vec64 y(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(x[r], m.row(r), y);
  return y;
}

/// Index of the largest entry; ties resolve to the lowest index.
inline std::size_t argmax(ConstVecView a) {
  if (a.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i] > a[best]) best = i;
  return best;
}

/// Neumaier-compensated sum, stable against summation order to ~1 ulp of the result.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace inrd
