#include "ci/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ci::oracle {

namespace ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) throw DimError("ref::matmul expects rank-2 tensors");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) throw DimError("ref::matmul inner dimensions differ");
  Tensor out = Tensor::zeros(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) s += a.at(i, kk) * b.at(kk, j);
      out.at(i, j) = s;
    }
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
  return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimError("ref::add shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimError("ref::mul shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

}  // namespace ref

Tensor fd_jacobian(const std::function<Tensor(const Tensor&)>& map, const Tensor& x,
                   double eps) {
  if (x.ndim() != 1) throw DimError("fd_jacobian expects a rank-1 input point");
  const Tensor y0 = map(x);
  const std::size_t m = y0.size(), n = x.size();
  Tensor J = Tensor::zeros(m, n);
  for (std::size_t j = 0; j < n; ++j) {
    Tensor xp = x, xm = x;
    xp.data()[j] += eps;
    xm.data()[j] -= eps;
    const Tensor yp = map(xp);
    const Tensor ym = map(xm);
    if (yp.size() != m || ym.size() != m)
      throw DimError("fd_jacobian: map output size changed across evaluations");
    for (std::size_t i = 0; i < m; ++i)
      J.at(i, j) = (yp.data()[i] - ym.data()[i]) / (2.0 * eps);
  }
  return J;
}

Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                   double eps) {
  Tensor g = x;
  g.fill(0.0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    Tensor xp = x, xm = x;
    xp.data()[j] += eps;
    xm.data()[j] -= eps;
    g.data()[j] = (f(xp) - f(xm)) / (2.0 * eps);
  }
  return g;
}

double det(const Tensor& a) {
  if (a.ndim() != 2 || a.shape()[0] != a.shape()[1])
    throw DimError("det expects a square matrix");
  const std::size_t n = a.shape()[0];
  Tensor lu = a;
  double d = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(lu.at(r, c)) > std::fabs(lu.at(piv, c))) piv = r;
    if (lu.at(piv, c) == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu.at(piv, j), lu.at(c, j));
      d = -d;
    }
    d *= lu.at(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = lu.at(r, c) / lu.at(c, c);
      for (std::size_t j = c; j < n; ++j) lu.at(r, j) -= f * lu.at(c, j);
    }
  }
  return d;
}

double log_abs_det(const Tensor& a) {
  const double d = det(a);
  if (d == 0.0) throw ContractError("log_abs_det: singular matrix");
  return std::log(std::fabs(d));
}

std::vector<std::size_t> enumerate_assignment(const Tensor& score) {
  if (score.ndim() != 2 || score.shape()[0] != score.shape()[1])
    throw DimError("enumerate_assignment expects a square score matrix");
  const std::size_t n = score.shape()[0];
  if (n > 9) throw ScaleError("enumerate_assignment: n > 9 is too large to enumerate");
  std::vector<std::size_t> perm(n), best(n);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_s = -1e300;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += score.at(i, perm[i]);
    if (s > best_s) {
      best_s = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double gaussian_nll(const Tensor& x, const Tensor& mean, const Tensor& var) {
  if (!x.same_shape(mean) || !x.same_shape(var))
    throw DimError("gaussian_nll: shape mismatch");
  for (double v : var.vec())
    if (!(v > 0.0)) throw ContractError("gaussian_nll: variances must be positive");
  const std::size_t B = x.rows(), n = x.cols();
  const double log2pi = std::log(2.0 * M_PI);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x.at(b, i) - mean.at(b, i);
      const double v = var.at(b, i);
      s += 0.5 * (d * d / v + std::log(v) + log2pi);
    }
    total += s;
  }
  return total / static_cast<double>(B);
}

}  // namespace ci::oracle
