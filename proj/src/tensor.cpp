#include "ci/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace ci::num {

namespace {

std::size_t shape_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void check_rank(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 2)
    throw DimError("tensor rank must be 1 or 2");
  for (std::size_t d : shape)
    if (d == 0) throw DimError("tensor dimensions must be positive");
}

// Parallelizing tiny loops costs more than it saves; only fork for real work.
constexpr std::size_t kParallelCutoff = 16384;

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  check_rank(shape_);
  data_.assign(shape_count(shape_), 0.0);
}

Tensor Tensor::from(std::vector<double> data, std::vector<std::size_t> shape) {
  check_rank(shape);
  if (data.size() != shape_count(shape))
    throw DimError("tensor data size does not match shape");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() requires a single-element tensor");
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw DimError("matmul expects rank-2 tensors");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) throw DimError("matmul inner dimensions differ");
  Tensor out = Tensor::zeros(n, m);
  const double* A = a.data();
  const double* B = b.data();
  double* C = out.data();
  // i-k-j order: unit-stride inner loop. Rows are independent, so the
  // parallel result is bit-identical to the serial one at any thread count.
#pragma omp parallel for schedule(static) if (n * k * m > kParallelCutoff)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    double* Ci = C + i * m;
    const double* Ai = A + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = Ai[kk];
      const double* Bk = B + kk * m;
      for (std::size_t j = 0; j < m; ++j) Ci[j] += aik * Bk[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) throw DimError("transpose expects a rank-2 tensor");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor out = Tensor::zeros(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

namespace {

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f, const char* name) {
  if (!a.same_shape(b)) throw DimError(std::string(name) + ": shape mismatch");
  Tensor out = a;
  double* o = out.data();
  const double* bp = b.data();
  const std::int64_t n = static_cast<std::int64_t>(a.size());
#pragma omp parallel for schedule(static) if (n > static_cast<std::int64_t>(kParallelCutoff))
  for (std::int64_t i = 0; i < n; ++i) o[i] = f(o[i], bp[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x + y; }, "add");
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x - y; }, "sub");
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, [](double x, double y) { return x * y; }, "mul");
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.vec()) v *= s;
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.vec()) v += s;
  return out;
}

Tensor map(const Tensor& a, double (*f)(double)) {
  Tensor out = a;
  for (double& v : out.vec()) v = f(v);
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimError("dot: shape mismatch");
  // Serial accumulation: reduction order is part of the determinism contract.
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.vec()) s += v;
  return s;
}

double mean(const Tensor& a) {
  if (a.size() == 0) throw DimError("mean of empty tensor");
  return sum(a) / static_cast<double>(a.size());
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.vec()) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace ci::num
