#include "ci/adam.hpp"

#include <cmath>
#include <string>

namespace ci::num {

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size())
    throw DimError("adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      Tensor z = *p;
      z.fill(0.0);
      m_.push_back(z);
      v_.push_back(std::move(z));
    }
  }
  if (m_.size() != params.size())
    throw DimError("adam: parameter count changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    if (!p.same_shape(g)) throw DimError("adam: gradient shape mismatch at parameter " + std::to_string(k));
    if (!g.all_finite())
      throw TrainingError("adam: non-finite gradient at parameter " + std::to_string(k) +
                          " on step " + std::to_string(t_));
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = cfg_.beta1 * m.data()[i] + (1.0 - cfg_.beta1) * gi;
      v.data()[i] = cfg_.beta2 * v.data()[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mh = m.data()[i] / bc1;
      const double vh = v.data()[i] / bc2;
      p.data()[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
    }
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

}  // namespace ci::num
