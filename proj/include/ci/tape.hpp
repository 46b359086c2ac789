#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ci/tensor.hpp"

namespace ci::num {

using VarId = std::int32_t;

// Reverse-mode autodiff over Tensor-valued nodes. Nodes are appended in
// evaluation order; backward() walks them in reverse, so parents always have
// smaller ids than children. Gradients of a node stay zero until a backward
// pass that reaches it runs. backward() may be called repeatedly with
// different seeds (zero_grad() in between) to pull out Jacobian rows.
class Tape {
 public:
  // Leaves: parameters (requires_grad) or constants (no gradient tracked;
  // ops whose inputs are all constants skip backward entirely).
  VarId leaf(Tensor value, bool requires_grad = false);

  const Tensor& value(VarId id) const { return node(id).val; }
  const Tensor& grad(VarId id) const;
  bool requires_grad(VarId id) const { return node(id).req; }

  // Seeds d(objective)/d(objective)=1 and accumulates gradients into every
  // reachable requires_grad node. The objective must be a scalar.
  void backward(VarId objective);
  // General seed (same shape as the output); used for Jacobian extraction.
  void backward(VarId output, const Tensor& seed);

  void zero_grad();
  void clear();  // drop all nodes, keep allocated capacity
  std::size_t size() const { return nodes_.size(); }

  // --- ops ---
  VarId matmul(VarId a, VarId b);
  VarId transpose(VarId a);
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);
  VarId div(VarId a, VarId b);  // throws ContractError on an exactly-zero denominator
  VarId neg(VarId a);
  VarId scale(VarId a, double s);
  VarId add_const(VarId a, double s);

  VarId tanh_(VarId a);
  VarId sigmoid(VarId a);
  VarId exp_(VarId a);  // domain-guarded: inputs must stay below overflow
  VarId log_(VarId a);  // domain-guarded: inputs must be positive
  VarId square(VarId a);
  VarId softabs(VarId a, double delta = 1e-12);  // sqrt(x^2 + delta)

  // Broadcast a length-k vector across the rows of a B x k matrix.
  VarId add_rowvec(VarId m, VarId v);
  VarId mul_rowvec(VarId m, VarId v);

  VarId row_sum(VarId a);                      // B x k -> B x 1
  VarId broadcast_col(VarId a, std::size_t k);  // B x 1 -> B x k
  VarId select_cols(VarId a, std::vector<std::size_t> idx);
  VarId select_rows(VarId a, std::vector<std::size_t> idx);
  VarId concat_cols(VarId a, VarId b);

  VarId sum_all(VarId a);   // -> scalar
  VarId mean_all(VarId a);  // -> scalar

 private:
  struct Node {
    Tensor val;
    Tensor grad;  // always shaped like val, zero until backward touches it
    std::function<void(Tape&)> back;
    bool req = false;
  };

  Node& node(VarId id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(VarId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  VarId push(Tensor val, bool req, std::function<void(Tape&)> back);
  Tensor& grad_mut(VarId id) { return node(id).grad; }

  std::vector<Node> nodes_;

  friend struct TapeTestPeek;
};

}  // namespace ci::num
