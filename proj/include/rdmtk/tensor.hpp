#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace rdmtk {

/// Dense rank-4 tensor with uniform dimension, row-major layout.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int dim) : dim_(dim), v_(static_cast<size_t>(dim) * dim * dim * dim, 0.0) {}

  int dim() const { return dim_; }
  double& operator()(int i, int j, int k, int l) { return v_[index(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return v_[index(i, j, k, l)]; }

  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  double frobenius_norm() const {
    double s = 0.0;
    for (double x : v_) s += x * x;
    return std::sqrt(s);
  }

 private:
  size_t index(int i, int j, int k, int l) const {
    assert(i >= 0 && i < dim_ && j >= 0 && j < dim_ && k >= 0 && k < dim_ && l >= 0 && l < dim_);
    return ((static_cast<size_t>(i) * dim_ + j) * dim_ + k) * dim_ + l;
  }
  int dim_ = 0;
  std::vector<double> v_;
};

/// Dense rank-6 tensor with uniform dimension. Sized for 2r <= 16 (16^6 doubles).
class Tensor6 {
 public:
  Tensor6() = default;
  explicit Tensor6(int dim)
      : dim_(dim), v_(static_cast<size_t>(dim) * dim * dim * dim * dim * dim, 0.0) {}

  int dim() const { return dim_; }
  double& operator()(int i, int j, int k, int q, int s, int t) { return v_[index(i, j, k, q, s, t)]; }
  double operator()(int i, int j, int k, int q, int s, int t) const {
    return v_[index(i, j, k, q, s, t)];
  }

  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  size_t index(int i, int j, int k, int q, int s, int t) const {
    assert(i >= 0 && i < dim_ && t >= 0 && t < dim_);
    return ((((static_cast<size_t>(i) * dim_ + j) * dim_ + k) * dim_ + q) * dim_ + s) * dim_ + t;
  }
  int dim_ = 0;
  std::vector<double> v_;
};

/// Pairwise (cascade) summation: deterministic and accurate for long reductions.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

}  // namespace rdmtk
