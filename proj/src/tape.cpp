#include "ci/tape.hpp"

#include <cmath>
#include <utility>

namespace ci::num {

namespace {
// exp() overflows above ~709.78; treat anything past 700 as a domain error
// rather than silently producing inf.
constexpr double kExpDomainMax = 700.0;
}  // namespace

VarId Tape::push(Tensor val, bool req, std::function<void(Tape&)> back) {
  Node n;
  n.grad = val;  // same shape
  n.grad.fill(0.0);
  n.val = std::move(val);
  n.req = req;
  n.back = req ? std::move(back) : std::function<void(Tape&)>();
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, {});
}

const Tensor& Tape::grad(VarId id) const { return node(id).grad; }

void Tape::backward(VarId objective) {
  if (value(objective).size() != 1)
    throw ContractError("backward: objective must be a scalar node");
  backward(objective, Tensor::scalar(1.0));
}

void Tape::backward(VarId output, const Tensor& seed) {
  if (!seed.same_shape(value(output)))
    throw DimError("backward: seed shape must match output shape");
  if (!node(output).req)
    throw ContractError("backward: output does not depend on any parameter");
  grad_mut(output) = seed;
  for (VarId id = output; id >= 0; --id) {
    Node& n = node(id);
    if (n.req && n.back) n.back(*this);
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad.fill(0.0);
}

void Tape::clear() { nodes_.clear(); }

// Helper: accumulate src into the gradient of id.
static void acc(Tensor& g, const Tensor& src) {
  double* gp = g.data();
  const double* sp = src.data();
  for (std::size_t i = 0; i < g.size(); ++i) gp[i] += sp[i];
}

VarId Tape::matmul(VarId a, VarId b) {
  Tensor out = num::matmul(value(a), value(b));
  bool req = node(a).req || node(b).req;
  VarId id = push(std::move(out), req, {});
  if (req) {
    node(id).back = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      if (t.node(a).req) acc(t.grad_mut(a), num::matmul(g, num::transpose(t.value(b))));
      if (t.node(b).req) acc(t.grad_mut(b), num::matmul(num::transpose(t.value(a)), g));
    };
  }
  return id;
}

VarId Tape::transpose(VarId a) {
  VarId id = push(num::transpose(value(a)), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) { acc(t.grad_mut(a), num::transpose(t.grad(id))); };
  }
  return id;
}

VarId Tape::add(VarId a, VarId b) {
  VarId id = push(num::add(value(a), value(b)), node(a).req || node(b).req, {});
  if (node(id).req) {
    node(id).back = [a, b, id](Tape& t) {
      if (t.node(a).req) acc(t.grad_mut(a), t.grad(id));
      if (t.node(b).req) acc(t.grad_mut(b), t.grad(id));
    };
  }
  return id;
}

VarId Tape::sub(VarId a, VarId b) {
  VarId id = push(num::sub(value(a), value(b)), node(a).req || node(b).req, {});
  if (node(id).req) {
    node(id).back = [a, b, id](Tape& t) {
      if (t.node(a).req) acc(t.grad_mut(a), t.grad(id));
      if (t.node(b).req) {
        Tensor& gb = t.grad_mut(b);
        const Tensor& g = t.grad(id);
        for (std::size_t i = 0; i < gb.size(); ++i) gb.data()[i] -= g.data()[i];
      }
    };
  }
  return id;
}

VarId Tape::mul(VarId a, VarId b) {
  VarId id = push(num::mul(value(a), value(b)), node(a).req || node(b).req, {});
  if (node(id).req) {
    node(id).back = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      if (t.node(a).req) acc(t.grad_mut(a), num::mul(g, t.value(b)));
      if (t.node(b).req) acc(t.grad_mut(b), num::mul(g, t.value(a)));
    };
  }
  return id;
}

VarId Tape::div(VarId a, VarId b) {
  const Tensor& bv = value(b);
  for (double v : bv.vec())
    if (v == 0.0) throw ContractError("div: zero denominator");
  if (!value(a).same_shape(bv)) throw DimError("div: shape mismatch");
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] /= bv.data()[i];
  VarId id = push(std::move(out), node(a).req || node(b).req, {});
  if (node(id).req) {
    node(id).back = [a, b, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const Tensor& bv2 = t.value(b);
      if (t.node(a).req) {
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.size(); ++i)
          ga.data()[i] += g.data()[i] / bv2.data()[i];
      }
      if (t.node(b).req) {
        Tensor& gb = t.grad_mut(b);
        const Tensor& av = t.value(a);
        for (std::size_t i = 0; i < gb.size(); ++i)
          gb.data()[i] -= g.data()[i] * av.data()[i] / (bv2.data()[i] * bv2.data()[i]);
      }
    };
  }
  return id;
}

VarId Tape::neg(VarId a) { return scale(a, -1.0); }

VarId Tape::scale(VarId a, double s) {
  VarId id = push(num::scale(value(a), s), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id, s](Tape& t) { acc(t.grad_mut(a), num::scale(t.grad(id), s)); };
  }
  return id;
}

VarId Tape::add_const(VarId a, double s) {
  VarId id = push(num::add_scalar(value(a), s), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) { acc(t.grad_mut(a), t.grad(id)); };
  }
  return id;
}

VarId Tape::tanh_(VarId a) {
  Tensor out = value(a);
  for (double& v : out.vec()) v = std::tanh(v);
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const Tensor& y = t.value(id);
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga.data()[i] += g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
    };
  }
  return id;
}

VarId Tape::sigmoid(VarId a) {
  Tensor out = value(a);
  for (double& v : out.vec()) v = 1.0 / (1.0 + std::exp(-v));
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const Tensor& y = t.value(id);
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga.data()[i] += g.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
    };
  }
  return id;
}

VarId Tape::exp_(VarId a) {
  Tensor out = value(a);
  for (double& v : out.vec()) {
    if (v > kExpDomainMax) throw ContractError("exp: input exceeds overflow domain");
    v = std::exp(v);
  }
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      acc(t.grad_mut(a), num::mul(t.grad(id), t.value(id)));
    };
  }
  return id;
}

VarId Tape::log_(VarId a) {
  Tensor out = value(a);
  for (double& v : out.vec()) {
    if (!(v > 0.0)) throw ContractError("log: input must be positive");
    v = std::log(v);
  }
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const Tensor& x = t.value(a);
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga.data()[i] += g.data()[i] / x.data()[i];
    };
  }
  return id;
}

VarId Tape::square(VarId a) {
  Tensor out = value(a);
  for (double& v : out.vec()) v = v * v;
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const Tensor& x = t.value(a);
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga.data()[i] += 2.0 * g.data()[i] * x.data()[i];
    };
  }
  return id;
}

VarId Tape::softabs(VarId a, double delta) {
  Tensor out = value(a);
  for (double& v : out.vec()) v = std::sqrt(v * v + delta);
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const Tensor& x = t.value(a);
      const Tensor& y = t.value(id);
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga.data()[i] += g.data()[i] * x.data()[i] / y.data()[i];
    };
  }
  return id;
}

static void check_rowvec(const Tensor& m, const Tensor& v, const char* name) {
  if (m.ndim() != 2) throw DimError(std::string(name) + ": matrix operand must be rank 2");
  if (v.size() != m.shape()[1])
    throw DimError(std::string(name) + ": vector length must match matrix columns");
}

VarId Tape::add_rowvec(VarId m, VarId v) {
  check_rowvec(value(m), value(v), "add_rowvec");
  Tensor out = value(m);
  const Tensor& vv = value(v);
  const std::size_t r = out.shape()[0], c = out.shape()[1];
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) += vv.data()[j];
  VarId id = push(std::move(out), node(m).req || node(v).req, {});
  if (node(id).req) {
    node(id).back = [m, v, id](Tape& t) {
      const Tensor& g = t.grad(id);
      if (t.node(m).req) acc(t.grad_mut(m), g);
      if (t.node(v).req) {
        Tensor& gv = t.grad_mut(v);
        const std::size_t r2 = g.shape()[0], c2 = g.shape()[1];
        for (std::size_t i = 0; i < r2; ++i)
          for (std::size_t j = 0; j < c2; ++j) gv.data()[j] += g.at(i, j);
      }
    };
  }
  return id;
}

VarId Tape::mul_rowvec(VarId m, VarId v) {
  check_rowvec(value(m), value(v), "mul_rowvec");
  Tensor out = value(m);
  const Tensor& vv = value(v);
  const std::size_t r = out.shape()[0], c = out.shape()[1];
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) *= vv.data()[j];
  VarId id = push(std::move(out), node(m).req || node(v).req, {});
  if (node(id).req) {
    node(id).back = [m, v, id](Tape& t) {
      const Tensor& g = t.grad(id);
      const std::size_t r2 = g.shape()[0], c2 = g.shape()[1];
      if (t.node(m).req) {
        Tensor& gm = t.grad_mut(m);
        const Tensor& vv2 = t.value(v);
        for (std::size_t i = 0; i < r2; ++i)
          for (std::size_t j = 0; j < c2; ++j) gm.at(i, j) += g.at(i, j) * vv2.data()[j];
      }
      if (t.node(v).req) {
        Tensor& gv = t.grad_mut(v);
        const Tensor& mv = t.value(m);
        for (std::size_t i = 0; i < r2; ++i)
          for (std::size_t j = 0; j < c2; ++j) gv.data()[j] += g.at(i, j) * mv.at(i, j);
      }
    };
  }
  return id;
}

VarId Tape::row_sum(VarId a) {
  const Tensor& av = value(a);
  if (av.ndim() != 2) throw DimError("row_sum expects a rank-2 tensor");
  const std::size_t r = av.shape()[0], c = av.shape()[1];
  Tensor out = Tensor::zeros(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += av.at(i, j);
    out.at(i, 0) = s;
  }
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const std::size_t r2 = ga.shape()[0], c2 = ga.shape()[1];
      for (std::size_t i = 0; i < r2; ++i)
        for (std::size_t j = 0; j < c2; ++j) ga.at(i, j) += g.at(i, 0);
    };
  }
  return id;
}

VarId Tape::broadcast_col(VarId a, std::size_t k) {
  const Tensor& av = value(a);
  if (av.ndim() != 2 || av.shape()[1] != 1)
    throw DimError("broadcast_col expects a B x 1 tensor");
  const std::size_t r = av.shape()[0];
  Tensor out = Tensor::zeros(r, k);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) out.at(i, j) = av.at(i, 0);
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const std::size_t r2 = g.shape()[0], c2 = g.shape()[1];
      for (std::size_t i = 0; i < r2; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c2; ++j) s += g.at(i, j);
        ga.at(i, 0) += s;
      }
    };
  }
  return id;
}

VarId Tape::select_cols(VarId a, std::vector<std::size_t> idx) {
  const Tensor& av = value(a);
  if (av.ndim() != 2) throw DimError("select_cols expects a rank-2 tensor");
  const std::size_t r = av.shape()[0], c = av.shape()[1];
  for (std::size_t j : idx)
    if (j >= c) throw DimError("select_cols: index out of range");
  Tensor out = Tensor::zeros(r, idx.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) out.at(i, j) = av.at(i, idx[j]);
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id, idx = std::move(idx)](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const std::size_t r2 = g.shape()[0];
      for (std::size_t i = 0; i < r2; ++i)
        for (std::size_t j = 0; j < idx.size(); ++j) ga.at(i, idx[j]) += g.at(i, j);
    };
  }
  return id;
}

VarId Tape::select_rows(VarId a, std::vector<std::size_t> idx) {
  const Tensor& av = value(a);
  if (av.ndim() != 2) throw DimError("select_rows expects a rank-2 tensor");
  const std::size_t r = av.shape()[0], c = av.shape()[1];
  for (std::size_t i : idx)
    if (i >= r) throw DimError("select_rows: index out of range");
  Tensor out = Tensor::zeros(idx.size(), c);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = av.at(idx[i], j);
  VarId id = push(std::move(out), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id, idx = std::move(idx)](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const Tensor& g = t.grad(id);
      const std::size_t c2 = g.shape()[1];
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c2; ++j) ga.at(idx[i], j) += g.at(i, j);
    };
  }
  return id;
}

VarId Tape::concat_cols(VarId a, VarId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.ndim() != 2 || bv.ndim() != 2 || av.shape()[0] != bv.shape()[0])
    throw DimError("concat_cols: operands must be rank 2 with equal row counts");
  const std::size_t r = av.shape()[0], p = av.shape()[1], q = bv.shape()[1];
  Tensor out = Tensor::zeros(r, p + q);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < p; ++j) out.at(i, j) = av.at(i, j);
    for (std::size_t j = 0; j < q; ++j) out.at(i, p + j) = bv.at(i, j);
  }
  VarId id = push(std::move(out), node(a).req || node(b).req, {});
  if (node(id).req) {
    node(id).back = [a, b, id, p, q](Tape& t) {
      const Tensor& g = t.grad(id);
      const std::size_t r2 = g.shape()[0];
      if (t.node(a).req) {
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < r2; ++i)
          for (std::size_t j = 0; j < p; ++j) ga.at(i, j) += g.at(i, j);
      }
      if (t.node(b).req) {
        Tensor& gb = t.grad_mut(b);
        for (std::size_t i = 0; i < r2; ++i)
          for (std::size_t j = 0; j < q; ++j) gb.at(i, j) += g.at(i, p + j);
      }
    };
  }
  return id;
}

VarId Tape::sum_all(VarId a) {
  VarId id = push(Tensor::scalar(num::sum(value(a))), node(a).req, {});
  if (node(id).req) {
    node(id).back = [a, id](Tape& t) {
      Tensor& ga = t.grad_mut(a);
      const double g = t.grad(id).data()[0];
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g;
    };
  }
  return id;
}

VarId Tape::mean_all(VarId a) {
  const double inv = 1.0 / static_cast<double>(value(a).size());
  VarId s = sum_all(a);
  return scale(s, inv);
}

}  // namespace ci::num
