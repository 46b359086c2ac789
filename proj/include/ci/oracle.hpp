#pragma once

#include <functional>
#include <vector>

#include "ci/tensor.hpp"

namespace ci::oracle {

using num::Tensor;

// Serial reference kernels. Deliberately written with the most naive
// arithmetic order so they share no code path with the OpenMP kernels they
// check; they also serve as the baseline side of the kernel benchmark.
namespace ref {

Tensor matmul(const Tensor& a, const Tensor& b);  // plain i-j-k triple loop
double sum(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

}  // namespace ref

// Central finite-difference Jacobian of a vector map at x. Used to check
// every analytic/autodiff derivative in the project.
Tensor fd_jacobian(const std::function<Tensor(const Tensor&)>& map, const Tensor& x,
                   double eps = 1e-5);

// Central finite-difference gradient of a scalar function.
Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                   double eps = 1e-5);

// Determinant via Gaussian elimination with partial pivoting. Square only.
double det(const Tensor& a);

// log |det a|; throws ContractError if the matrix is singular.
double log_abs_det(const Tensor& a);

// Best permutation by exhaustive enumeration: maximizes sum_i score(i, p(i)).
// Square score matrix, n <= 9 (ScaleError beyond that).
std::vector<std::size_t> enumerate_assignment(const Tensor& score);

// Mean negative log density of rows of x under independent Gaussians with
// per-row means and variances (all B x n). Closed form, no autodiff.
double gaussian_nll(const Tensor& x, const Tensor& mean, const Tensor& var);

}  // namespace ci::oracle
