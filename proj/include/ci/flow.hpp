#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ci/tape.hpp"

namespace ci::flow {

using num::Tape;
using num::Tensor;
using num::VarId;

enum class Init {
  Identity,  // final subnet layers zeroed: the flow starts as the identity map
  Random,    // all layers random: a generic nonlinear diffeomorphism
};

struct FlowConfig {
  std::size_t dim = 0;
  int depth = 6;
  int hidden = 0;  // 0 -> max(16, 4*dim)
  double s_max = 3.0;  // scales are squashed to (-s_max, s_max)
  bool volume_preserving = false;  // center scales per sample: det == 1
  Init init = Init::Identity;
  std::uint64_t seed = 0;

  std::size_t hidden_width() const {
    return hidden > 0 ? static_cast<std::size_t>(hidden)
                      : std::max<std::size_t>(16, 4 * dim);
  }
};

// Stack of affine coupling layers with fixed seeded coordinate permutations
// between them. Forward maps latents to observations; inverse is exact (no
// iteration) and both directions can be recorded on a Tape for training.
// Log-determinants come from the scale activations, not from any matrix
// factorization.
class FlowModel {
 public:
  FlowModel() = default;
  explicit FlowModel(FlowConfig cfg);

  const FlowConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.dim; }

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::size_t param_count() const;  // total scalar count
  std::vector<std::string> param_names() const;
  void set_params(const std::vector<Tensor>& p);

  // Tape-recorded passes over a B x dim batch already on the tape. Returns
  // (output id, per-sample log|det J| as B x 1). param_ids must follow the
  // params() ordering; pass leaves with requires_grad to train.
  std::pair<VarId, VarId> forward_on(Tape& t, VarId z,
                                     const std::vector<VarId>& param_ids) const;
  std::pair<VarId, VarId> inverse_on(Tape& t, VarId x,
                                     const std::vector<VarId>& param_ids) const;

  // Convenience evaluation without gradients.
  std::pair<Tensor, Tensor> forward(const Tensor& z) const;
  std::pair<Tensor, Tensor> inverse(const Tensor& x) const;

  // Jacobians at a single point (length-dim input), via one backward pass per
  // output row. forward: dx/dz; inverse: dz/dx.
  Tensor jacobian_forward(const Tensor& z) const;
  Tensor jacobian_inverse(const Tensor& x) const;

 private:
  struct Layer {
    std::vector<std::size_t> cond, trans;  // index split for this layer
    std::vector<std::size_t> perm, perm_inv;  // applied after the coupling
    std::size_t param_base = 0;  // index of W1 in params_
  };

  std::vector<VarId> push_const_params(Tape& t) const;
  // One coupling layer; dir=+1 forward, -1 inverse. Returns (out, s_rowsum).
  std::pair<VarId, VarId> couple(Tape& t, VarId in, const Layer& L,
                                 const std::vector<VarId>& pid, int dir) const;

  FlowConfig cfg_;
  std::vector<Tensor> params_;
  std::vector<Layer> layers_;
};

}  // namespace ci::flow
