#include "ci/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ci/common.hpp"

namespace ci::flow {

namespace {

Tensor gauss_init(Rng& rng, std::size_t r, std::size_t c, double sd) {
  Tensor t = Tensor::zeros(r, c);
  for (double& v : t.vec()) v = rng.gaussian() * sd;
  return t;
}

}  // namespace

FlowModel::FlowModel(FlowConfig cfg) : cfg_(cfg) {
  if (cfg_.dim < 2) throw ConfigError("flow: coupling layers need dim >= 2");
  if (cfg_.depth < 1) throw ConfigError("flow: depth must be >= 1");
  if (!(cfg_.s_max > 0.0)) throw ConfigError("flow: s_max must be positive");
  const std::size_t n = cfg_.dim;
  const std::size_t h = cfg_.hidden_width();
  const std::size_t split = n / 2;
  Rng wrng = substream(cfg_.seed, "flow-weights", 0);
  // Composition of the inter-layer permutations applied so far; the final
  // layer undoes it so the whole stack permutes nothing and identity-init
  // really is the identity map.
  std::vector<std::size_t> net_perm(n);
  std::iota(net_perm.begin(), net_perm.end(), 0);
  for (int l = 0; l < cfg_.depth; ++l) {
    Layer L;
    std::vector<std::size_t> first(split), second(n - split);
    std::iota(first.begin(), first.end(), 0);
    std::iota(second.begin(), second.end(), split);
    // Alternate which half is transformed so every coordinate moves.
    if (l % 2 == 0) {
      L.cond = first;
      L.trans = second;
    } else {
      L.cond = second;
      L.trans = first;
    }
    if (l + 1 < cfg_.depth) {
      Rng prng = substream(cfg_.seed, "flow-perm", static_cast<std::uint64_t>(l));
      L.perm.resize(n);
      std::iota(L.perm.begin(), L.perm.end(), 0);
      for (std::size_t i = n - 1; i > 0; --i)
        std::swap(L.perm[i], L.perm[prng.uniform_int(i + 1)]);
      std::vector<std::size_t> next(n);
      for (std::size_t j = 0; j < n; ++j) next[j] = net_perm[L.perm[j]];
      net_perm = std::move(next);
    } else {
      L.perm.resize(n);
      for (std::size_t j = 0; j < n; ++j) L.perm[net_perm[j]] = j;
    }
    L.perm_inv.resize(n);
    for (std::size_t i = 0; i < n; ++i) L.perm_inv[L.perm[i]] = i;
    L.param_base = params_.size();

    const std::size_t a = L.cond.size(), b = L.trans.size();
    const double sd1 = 1.0 / std::sqrt(static_cast<double>(a));
    const double sd2 = 1.0 / std::sqrt(static_cast<double>(h));
    params_.push_back(gauss_init(wrng, a, h, sd1));   // W1
    params_.push_back(Tensor::zeros(1, h));           // b1
    params_.push_back(gauss_init(wrng, h, h, sd2));   // W2
    params_.push_back(Tensor::zeros(1, h));           // b2
    if (cfg_.init == Init::Identity) {
      params_.push_back(Tensor::zeros(h, 2 * b));     // W3
      params_.push_back(Tensor::zeros(1, 2 * b));     // b3
    } else {
      Tensor w3 = gauss_init(wrng, h, 2 * b, sd2);
      // Keep random scale outputs moderate so generator Jacobians stay
      // well-conditioned; shifts keep full strength.
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < b; ++j) w3.at(i, j) *= 0.3;
      params_.push_back(std::move(w3));
      Tensor b3 = gauss_init(wrng, 1, 2 * b, 0.2);
      params_.push_back(std::move(b3));
    }
    layers_.push_back(std::move(L));
  }
}

std::size_t FlowModel::param_count() const {
  std::size_t c = 0;
  for (const Tensor& p : params_) c += p.size();
  return c;
}

std::vector<std::string> FlowModel::param_names() const {
  static const char* kNames[6] = {"W1", "b1", "W2", "b2", "W3", "b3"};
  std::vector<std::string> out;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    for (int k = 0; k < 6; ++k)
      out.push_back("layer" + std::to_string(l) + "/" + kNames[k]);
  return out;
}

void FlowModel::set_params(const std::vector<Tensor>& p) {
  if (p.size() != params_.size()) throw DimError("flow: parameter list size mismatch");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!p[i].same_shape(params_[i]))
      throw DimError("flow: parameter shape mismatch at index " + std::to_string(i));
  params_ = p;
}

std::vector<VarId> FlowModel::push_const_params(Tape& t) const {
  std::vector<VarId> ids;
  ids.reserve(params_.size());
  for (const Tensor& p : params_) ids.push_back(t.leaf(p, false));
  return ids;
}

std::pair<VarId, VarId> FlowModel::couple(Tape& t, VarId in, const Layer& L,
                                          const std::vector<VarId>& pid, int dir) const {
  const std::size_t n = cfg_.dim;
  const std::size_t b = L.trans.size();
  VarId zc = t.select_cols(in, L.cond);
  VarId zt = t.select_cols(in, L.trans);
  VarId h1 = t.tanh_(t.add_rowvec(t.matmul(zc, pid[L.param_base + 0]), pid[L.param_base + 1]));
  VarId h2 = t.tanh_(t.add_rowvec(t.matmul(h1, pid[L.param_base + 2]), pid[L.param_base + 3]));
  VarId raw = t.add_rowvec(t.matmul(h2, pid[L.param_base + 4]), pid[L.param_base + 5]);
  std::vector<std::size_t> s_idx(b), t_idx(b);
  std::iota(s_idx.begin(), s_idx.end(), 0);
  std::iota(t_idx.begin(), t_idx.end(), b);
  // Smoothly squash scales into (-s_max, s_max); keeps exp() tame everywhere.
  VarId s = t.scale(t.tanh_(t.scale(t.select_cols(raw, s_idx), 1.0 / cfg_.s_max)), cfg_.s_max);
  if (cfg_.volume_preserving) {
    VarId mean_s = t.scale(t.row_sum(s), 1.0 / static_cast<double>(b));
    s = t.sub(s, t.broadcast_col(mean_s, b));
  }
  VarId shift = t.select_cols(raw, t_idx);
  VarId out_t;
  if (dir > 0) {
    out_t = t.add(t.mul(zt, t.exp_(s)), shift);
  } else {
    out_t = t.mul(t.sub(zt, shift), t.exp_(t.neg(s)));
  }
  // Reassemble columns in original coordinate order.
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < L.cond.size(); ++k) order[L.cond[k]] = k;
  for (std::size_t k = 0; k < b; ++k) order[L.trans[k]] = L.cond.size() + k;
  VarId merged = t.select_cols(t.concat_cols(zc, out_t), order);
  return {merged, t.row_sum(s)};
}

std::pair<VarId, VarId> FlowModel::forward_on(Tape& t, VarId z,
                                              const std::vector<VarId>& pid) const {
  if (pid.size() != params_.size()) throw DimError("flow: param id list size mismatch");
  if (t.value(z).cols() != cfg_.dim) throw DimError("flow: input width != dim");
  VarId cur = z;
  VarId logdet = t.leaf(Tensor::zeros(t.value(z).rows(), 1), false);
  for (const Layer& L : layers_) {
    auto [merged, srow] = couple(t, cur, L, pid, +1);
    logdet = t.add(logdet, srow);
    cur = t.select_cols(merged, L.perm);
  }
  return {cur, logdet};
}

std::pair<VarId, VarId> FlowModel::inverse_on(Tape& t, VarId x,
                                              const std::vector<VarId>& pid) const {
  if (pid.size() != params_.size()) throw DimError("flow: param id list size mismatch");
  if (t.value(x).cols() != cfg_.dim) throw DimError("flow: input width != dim");
  VarId cur = x;
  VarId logdet = t.leaf(Tensor::zeros(t.value(x).rows(), 1), false);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    cur = t.select_cols(cur, it->perm_inv);
    auto [merged, srow] = couple(t, cur, *it, pid, -1);
    logdet = t.sub(logdet, srow);
    cur = merged;
  }
  return {cur, logdet};
}

std::pair<Tensor, Tensor> FlowModel::forward(const Tensor& z) const {
  Tape t;
  VarId in = t.leaf(z, false);
  auto [out, ld] = forward_on(t, in, push_const_params(t));
  return {t.value(out), t.value(ld)};
}

std::pair<Tensor, Tensor> FlowModel::inverse(const Tensor& x) const {
  Tape t;
  VarId in = t.leaf(x, false);
  auto [out, ld] = inverse_on(t, in, push_const_params(t));
  return {t.value(out), t.value(ld)};
}

static Tensor point_jacobian(const FlowModel& m, const Tensor& p, bool forward) {
  if (p.size() != m.dim()) throw DimError("flow jacobian: point size != dim");
  Tape t;
  VarId in = t.leaf(Tensor::from(p.vec(), {1, m.dim()}), true);
  std::vector<VarId> pids;
  for (const Tensor& q : m.params()) pids.push_back(t.leaf(q, false));
  auto [out, ld] = forward ? m.forward_on(t, in, pids) : m.inverse_on(t, in, pids);
  (void)ld;
  const std::size_t n = m.dim();
  Tensor J = Tensor::zeros(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    t.zero_grad();
    Tensor seed = Tensor::zeros(1, n);
    seed.at(0, r) = 1.0;
    t.backward(out, seed);
    for (std::size_t c = 0; c < n; ++c) J.at(r, c) = t.grad(in).at(0, c);
  }
  return J;
}

Tensor FlowModel::jacobian_forward(const Tensor& z) const {
  return point_jacobian(*this, z, true);
}

Tensor FlowModel::jacobian_inverse(const Tensor& x) const {
  return point_jacobian(*this, x, false);
}

}  // namespace ci::flow
