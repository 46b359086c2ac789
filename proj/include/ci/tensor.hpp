#pragma once

#include <cstddef>
#include <vector>

#include "ci/common.hpp"

namespace ci::num {

// Dense row-major tensor of doubles, rank 1 or 2. Deliberately tiny: the
// whole pipeline only ever needs vectors and matrices.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t n) { return Tensor(std::vector<std::size_t>{n}); }
  static Tensor zeros(std::size_t r, std::size_t c) {
    return Tensor(std::vector<std::size_t>{r, c});
  }
  static Tensor scalar(double v) {
    Tensor t = zeros(1);
    t.data_[0] = v;
    return t;
  }
  static Tensor from(std::vector<double> data, std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // rows()/cols() view a vector as a 1 x n row.
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    return shape_.empty() ? 0 : (shape_.size() == 2 ? shape_[1] : shape_[0]);
  }

  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  // Scalar accessor; throws ContractError unless size()==1.
  double item() const;

  void fill(double v);

 private:
  explicit Tensor(std::vector<std::size_t> shape);

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// --- kernels ----------------------------------------------------------------
// The functions below are the hot paths (OpenMP-parallel when it pays off).
// Serial reference versions with independent arithmetic live in ci::oracle::ref
// and double as correctness oracles and benchmark baselines.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

// Apply f elementwise (serial; used for small tensors and tests).
Tensor map(const Tensor& a, double (*f)(double));

double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double mean(const Tensor& a);
double max_abs(const Tensor& a);

}  // namespace ci::num
