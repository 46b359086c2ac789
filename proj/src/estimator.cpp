#include "ci/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include "ci/adam.hpp"
#include "ci/common.hpp"

namespace ci::est {

using num::Adam;
using num::Tape;
using num::VarId;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// All trainable tensors in one place; order defines the checkpoint layout.
struct ParamSet {
  std::vector<Tensor> flow;
  Tensor logit_M, mean_dev, logvar_dev;
  Tensor base_mean, base_logvar;
  Tensor zB_mean, zB_logvar;  // empty when n_B == 0
};

ParamSet init_params(const TrainConfig& cfg, const flow::FlowModel& fl) {
  ParamSet p;
  p.flow = fl.params();
  p.logit_M = Tensor::zeros(cfg.n_A, cfg.u);
  p.mean_dev = Tensor::zeros(cfg.n_A, cfg.u);
  p.logvar_dev = Tensor::zeros(cfg.n_A, cfg.u);
  p.base_mean = Tensor::zeros(1, cfg.n_A);
  p.base_logvar = Tensor::zeros(1, cfg.n_A);
  if (cfg.n_B) {
    p.zB_mean = Tensor::zeros(1, cfg.n_B);
    p.zB_logvar = Tensor::zeros(1, cfg.n_B);
  }
  return p;
}

ParamSet params_of(const FittedModel& m) {
  ParamSet p;
  p.flow = m.flow.params();
  p.logit_M = m.prior.logit_M;
  p.mean_dev = m.prior.mean_dev;
  p.logvar_dev = m.prior.logvar_dev;
  p.base_mean = m.prior.base_mean;
  p.base_logvar = m.prior.base_logvar;
  p.zB_mean = m.prior.zB_mean;
  p.zB_logvar = m.prior.zB_logvar;
  return p;
}

struct ParamIds {
  std::vector<VarId> flow;
  VarId logit_M = -1, mean_dev = -1, logvar_dev = -1;
  VarId base_mean = -1, base_logvar = -1;
  VarId zB_mean = -1, zB_logvar = -1;
};

ParamIds push_params(Tape& t, const ParamSet& p, const TrainConfig& cfg, bool train) {
  ParamIds ids;
  for (const Tensor& q : p.flow) ids.flow.push_back(t.leaf(q, train));
  ids.logit_M = t.leaf(p.logit_M, train && cfg.gating);
  ids.mean_dev = t.leaf(p.mean_dev, train);
  ids.logvar_dev = t.leaf(p.logvar_dev, train);
  ids.base_mean = t.leaf(p.base_mean, train);
  ids.base_logvar = t.leaf(p.base_logvar, train);
  if (cfg.n_B) {
    ids.zB_mean = t.leaf(p.zB_mean, train);
    ids.zB_logvar = t.leaf(p.zB_logvar, train);
  }
  return ids;
}

struct Objective {
  VarId loss = -1;   // nll + lambda * penalties
  VarId nll = -1;    // scalar
  double l1_gates = 0.0;
  double jac_l1 = 0.0;
};

// Builds the full training objective for one batch already on the tape.
Objective build_objective(Tape& t, const flow::FlowModel& fl, const TrainConfig& cfg,
                          const ParamIds& ids, VarId Xp, VarId C, bool with_penalty) {
  const std::size_t n_A = cfg.n_A, n_B = cfg.n_B, n = cfg.n();
  const std::size_t B = t.value(Xp).rows();

  auto [zhat, logdet_inv] = fl.inverse_on(t, Xp, ids.flow);

  std::vector<std::size_t> a_idx(n_A), b_idx(n_B);
  std::iota(a_idx.begin(), a_idx.end(), 0);
  std::iota(b_idx.begin(), b_idx.end(), n_A);
  VarId zA = t.select_cols(zhat, a_idx);

  // Class effects: gate * bounded deviation, summed over active classes.
  VarId v;
  if (cfg.gating) {
    v = t.sigmoid(ids.logit_M);
  } else {
    Tensor ones = Tensor::zeros(n_A, cfg.u);
    ones.fill(1.0);
    v = t.leaf(std::move(ones), false);
  }
  const double D = cfg.dev_bound;
  VarId dlv = t.scale(t.tanh_(t.scale(ids.logvar_dev, 1.0 / D)), D);
  VarId dmu = t.scale(t.tanh_(t.scale(ids.mean_dev, 1.0 / D)), D);
  VarId lvA = t.add_rowvec(t.matmul(C, t.transpose(t.mul(v, dlv))), ids.base_logvar);
  VarId muA = t.add_rowvec(t.matmul(C, t.transpose(t.mul(v, dmu))), ids.base_mean);

  VarId dA = t.sub(zA, muA);
  VarId termA = t.add(t.mul(t.square(dA), t.exp_(t.neg(lvA))), lvA);
  VarId rows = t.row_sum(termA);

  if (n_B) {
    VarId zB = t.select_cols(zhat, b_idx);
    VarId zero = t.leaf(Tensor::zeros(B, n_B), false);
    VarId lvB = t.add_rowvec(zero, ids.zB_logvar);
    VarId dB = t.add_rowvec(zB, t.neg(ids.zB_mean));
    VarId termB = t.add(t.mul(t.square(dB), t.exp_(t.neg(lvB))), lvB);
    rows = t.add(rows, t.row_sum(termB));
  }

  VarId nll = t.mean_all(
      t.sub(t.add_const(t.scale(rows, 0.5), 0.5 * static_cast<double>(n) * kLog2Pi),
            logdet_inv));

  Objective obj;
  obj.nll = nll;
  VarId loss = nll;
  if (with_penalty && cfg.lambda > 0.0) {
    if (cfg.gating) {
      VarId l1 = t.sum_all(v);
      obj.l1_gates = t.value(l1).item();
      loss = t.add(loss, t.scale(l1, cfg.lambda));
    }
    if (cfg.jac_penalty) {
      // Probe |d xhat / d zhat| of the decoder at a few encoded points with
      // central differences routed through the tape: the probe points are
      // constants, so gradients flow into the flow parameters only.
      const std::size_t K = std::min<std::size_t>(cfg.jac_points, B);
      const Tensor& zv = t.value(zhat);
      Tensor plus = Tensor::zeros(K * n, n), minus = Tensor::zeros(K * n, n);
      for (std::size_t s = 0; s < K; ++s)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t c = 0; c < n; ++c) {
            const double base = zv.at(s, c);
            const double d = (c == j) ? cfg.jac_probe_eps : 0.0;
            plus.at(s * n + j, c) = base + d;
            minus.at(s * n + j, c) = base - d;
          }
      auto [fp, ldp] = fl.forward_on(t, t.leaf(std::move(plus), false), ids.flow);
      auto [fm, ldm] = fl.forward_on(t, t.leaf(std::move(minus), false), ids.flow);
      (void)ldp;
      (void)ldm;
      VarId diff = t.scale(t.sub(fp, fm), 1.0 / (2.0 * cfg.jac_probe_eps));
      VarId jl1 = t.scale(t.sum_all(t.softabs(diff, 1e-12)),
                          1.0 / static_cast<double>(K * n * n));
      obj.jac_l1 = t.value(jl1).item();
      loss = t.add(loss, t.scale(jl1, cfg.lambda));
    }
  } else if (cfg.gating) {
    obj.l1_gates = num::sum(t.value(v));
  }
  obj.loss = loss;
  return obj;
}

struct EvalResult {
  double nll = 0.0;
  double objective = 0.0;  // nll + lambda * penalties (penalties from a probe batch)
  double l1 = 0.0;
};

EvalResult eval_objective(const flow::FlowModel& fl, const TrainConfig& cfg,
                          const ParamSet& p, const Tensor& Xp, const Tensor& Cv) {
  const std::size_t N = Xp.rows();
  EvalResult r;
  double total = 0.0;
  std::size_t done = 0;
  bool first = true;
  double pen = 0.0;
  while (done < N) {
    const std::size_t B = std::min<std::size_t>(2048, N - done);
    Tensor xb = Tensor::zeros(B, Xp.cols());
    Tensor cb = Tensor::zeros(B, Cv.cols());
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t j = 0; j < Xp.cols(); ++j) xb.at(i, j) = Xp.at(done + i, j);
      for (std::size_t j = 0; j < Cv.cols(); ++j) cb.at(i, j) = Cv.at(done + i, j);
    }
    Tape t;
    ParamIds ids = push_params(t, p, cfg, false);
    VarId xid = t.leaf(std::move(xb), false);
    VarId cid = t.leaf(std::move(cb), false);
    // Penalties are data-independent up to the probe points; measure once.
    Objective obj = build_objective(t, fl, cfg, ids, xid, cid, first);
    const double nll = t.value(obj.nll).item();
    total += nll * static_cast<double>(B);
    if (first) {
      pen = cfg.lambda * (cfg.gating ? obj.l1_gates : 0.0) + cfg.lambda * obj.jac_l1;
      r.l1 = obj.l1_gates;
      first = false;
    }
    done += B;
  }
  r.nll = total / static_cast<double>(N);
  r.objective = r.nll + pen;
  return r;
}

FittedModel assemble(const TrainConfig& cfg, const flow::FlowModel& fl, const ParamSet& p,
                     const Tensor& projection) {
  FittedModel m;
  m.cfg = cfg;
  m.flow = fl;
  m.flow.set_params(p.flow);
  m.prior.logit_M = p.logit_M;
  m.prior.mean_dev = p.mean_dev;
  m.prior.logvar_dev = p.logvar_dev;
  m.prior.base_mean = p.base_mean;
  m.prior.base_logvar = p.base_logvar;
  m.prior.zB_mean = p.zB_mean;
  m.prior.zB_logvar = p.zB_logvar;
  m.prior.dev_bound = cfg.dev_bound;
  m.prior.gating = cfg.gating;
  m.projection = projection;
  return m;
}

FittedModel train_core(const gen::Dataset& data, const TrainConfig& cfg,
                       std::optional<ParamSet> warm_start, int epochs,
                       std::vector<TrainLogRow> history) {
  if (cfg.n_A == 0 || cfg.u == 0) throw ConfigError("train: n_A and u must be positive");
  if (cfg.n() < 2) throw ConfigError("train: the flow needs at least two latents");
  if (data.C.cols() != cfg.u) throw DimError("train: class width disagrees with config");
  if (data.X.cols() < cfg.n()) throw DimError("train: observation dim below latent dim");
  if (cfg.batch_size < 8) throw ConfigError("train: batch size must be at least 8");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 0.5))
    throw ConfigError("train: val fraction must be in (0, 0.5)");
  const std::size_t N = data.X.rows();
  if (N < 64) throw ConfigError("train: need at least 64 samples");

  flow::FlowConfig fc;
  fc.dim = cfg.n();
  fc.depth = cfg.flow_depth;
  fc.hidden = cfg.flow_hidden;
  fc.s_max = cfg.s_max;
  fc.volume_preserving = cfg.volume_preserving;
  fc.init = flow::Init::Identity;
  fc.seed = substream(cfg.seed, "estimator-flow", 0).next_u64();
  flow::FlowModel fl(fc);

  Tensor P = reduce_dimension_matrix(cfg.n(), data.X.cols(), cfg.seed);
  Tensor Xp = num::matmul(data.X, num::transpose(P));

  ParamSet params = warm_start ? std::move(*warm_start) : init_params(cfg, fl);

  // Held-out split is a pure function of the seed: resuming sees the same one.
  std::vector<std::size_t> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  Rng srng = substream(cfg.seed, "train-split", 0);
  for (std::size_t i = N - 1; i > 0; --i) std::swap(idx[i], idx[srng.uniform_int(i + 1)]);
  const std::size_t val_n =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(N * cfg.val_fraction)));
  const std::size_t train_n = N - val_n;
  if (train_n < static_cast<std::size_t>(cfg.batch_size))
    throw ConfigError("train: too few training samples for one batch");
  std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + val_n);
  std::vector<std::size_t> train_idx(idx.begin() + val_n, idx.end());

  Tensor Xval = Tensor::zeros(val_n, Xp.cols());
  Tensor Cval = Tensor::zeros(val_n, cfg.u);
  for (std::size_t i = 0; i < val_n; ++i) {
    for (std::size_t j = 0; j < Xp.cols(); ++j) Xval.at(i, j) = Xp.at(val_idx[i], j);
    for (std::size_t j = 0; j < cfg.u; ++j) Cval.at(i, j) = data.C.at(val_idx[i], j);
  }

  auto main_ptrs = [&](ParamSet& p) {
    std::vector<Tensor*> out;
    for (Tensor& q : p.flow) out.push_back(&q);
    out.push_back(&p.mean_dev);
    out.push_back(&p.logvar_dev);
    out.push_back(&p.base_mean);
    out.push_back(&p.base_logvar);
    if (cfg.n_B) {
      out.push_back(&p.zB_mean);
      out.push_back(&p.zB_logvar);
    }
    return out;
  };

  Adam opt_main({.lr = cfg.lr});
  Adam opt_gate({.lr = cfg.lr * cfg.gate_lr_scale});

  ParamSet best = params;
  double best_obj = 1e300;
  int best_epoch = -1;
  int since_best = 0;
  const int epoch_base = history.empty() ? 0 : history.back().epoch + 1;

  Tape t;
  for (int ep = 0; ep < epochs; ++ep) {
    const auto wall_start = std::chrono::steady_clock::now();
    Rng erng = substream(cfg.seed, "train-shuffle", static_cast<std::uint64_t>(epoch_base + ep));
    for (std::size_t i = train_idx.size() - 1; i > 0; --i)
      std::swap(train_idx[i], train_idx[erng.uniform_int(i + 1)]);

    double ep_nll = 0.0, ep_l1 = 0.0;
    std::size_t ep_count = 0, batches = 0;
    for (std::size_t start = 0; start + cfg.batch_size <= train_idx.size();
         start += cfg.batch_size) {
      const std::size_t B = cfg.batch_size;
      Tensor xb = Tensor::zeros(B, Xp.cols());
      Tensor cb = Tensor::zeros(B, cfg.u);
      for (std::size_t i = 0; i < B; ++i) {
        const std::size_t r = train_idx[start + i];
        for (std::size_t j = 0; j < Xp.cols(); ++j) xb.at(i, j) = Xp.at(r, j);
        for (std::size_t j = 0; j < cfg.u; ++j) cb.at(i, j) = data.C.at(r, j);
      }
      t.clear();
      ParamIds ids = push_params(t, params, cfg, true);
      VarId xid = t.leaf(std::move(xb), false);
      VarId cid = t.leaf(std::move(cb), false);
      Objective obj = build_objective(t, fl, cfg, ids, xid, cid, true);
      const double loss = t.value(obj.loss).item();
      if (!std::isfinite(loss) || loss > cfg.divergence_limit)
        throw TrainingError("training diverged at epoch " + std::to_string(epoch_base + ep) +
                            ", batch " + std::to_string(batches) + " (loss " +
                            std::to_string(loss) + ")");
      t.backward(obj.loss);

      std::vector<Tensor*> mp = main_ptrs(params);
      std::vector<const Tensor*> mg;
      for (std::size_t k = 0; k < ids.flow.size(); ++k) mg.push_back(&t.grad(ids.flow[k]));
      mg.push_back(&t.grad(ids.mean_dev));
      mg.push_back(&t.grad(ids.logvar_dev));
      mg.push_back(&t.grad(ids.base_mean));
      mg.push_back(&t.grad(ids.base_logvar));
      if (cfg.n_B) {
        mg.push_back(&t.grad(ids.zB_mean));
        mg.push_back(&t.grad(ids.zB_logvar));
      }
      opt_main.step(mp, mg);
      if (cfg.gating) opt_gate.step({&params.logit_M}, {&t.grad(ids.logit_M)});

      ep_nll += t.value(obj.nll).item() * B;
      ep_l1 += obj.l1_gates;
      ep_count += B;
      ++batches;
    }
    if (batches == 0) throw ConfigError("train: no full batch fits the training split");

    EvalResult val = eval_objective(fl, cfg, params, Xval, Cval);
    if (!std::isfinite(val.objective) || val.objective > cfg.divergence_limit)
      throw TrainingError("validation objective diverged at epoch " +
                          std::to_string(epoch_base + ep));
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall_start)
            .count();
    TrainLogRow row;
    row.epoch = epoch_base + ep;
    row.train_nll = ep_nll / static_cast<double>(ep_count);
    row.val_nll = val.nll;
    row.l1_M = batches ? ep_l1 / static_cast<double>(batches) : 0.0;
    row.wall_ms = wall_ms;
    history.push_back(row);

    if (val.objective < best_obj - cfg.min_improve) {
      best_obj = val.objective;
      best = params;
      best_epoch = epoch_base + ep;
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }

  FittedModel m = assemble(cfg, fl, best, P);
  m.log = std::move(history);
  m.best_val_objective = best_obj;
  m.stopped_epoch = best_epoch;
  return m;
}

}  // namespace

Tensor PriorParams::gates() const {
  Tensor v = logit_M;
  if (!gating) {
    v.fill(1.0);
    return v;
  }
  for (double& x : v.vec()) x = 1.0 / (1.0 + std::exp(-x));
  return v;
}

std::pair<double, double> PriorParams::class_entry(std::size_t i, std::size_t j) const {
  const double dmu = dev_bound * std::tanh(mean_dev.at(i, j) / dev_bound);
  const double dlv = dev_bound * std::tanh(logvar_dev.at(i, j) / dev_bound);
  return {base_mean.at(0, i) + dmu, std::exp(base_logvar.at(0, i) + dlv)};
}

std::pair<double, double> PriorParams::base_entry(std::size_t i) const {
  return {base_mean.at(0, i), std::exp(base_logvar.at(0, i))};
}

Tensor reduce_dimension_matrix(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m < n) throw ConfigError("reduce_dimension: observation dim below latent dim");
  Tensor P = Tensor::zeros(n, m);
  if (m == n) {
    for (std::size_t i = 0; i < n; ++i) P.at(i, i) = 1.0;
    return P;
  }
  Rng rng = substream(seed, "projection", 0);
  for (double& v : P.vec()) v = rng.gaussian();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t p = 0; p < r; ++p) {
      double d = 0.0;
      for (std::size_t j = 0; j < m; ++j) d += P.at(r, j) * P.at(p, j);
      for (std::size_t j = 0; j < m; ++j) P.at(r, j) -= d * P.at(p, j);
    }
    double nrm = 0.0;
    for (std::size_t j = 0; j < m; ++j) nrm += P.at(r, j) * P.at(r, j);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-9) throw ContractError("reduce_dimension: projection degenerated");
    for (std::size_t j = 0; j < m; ++j) P.at(r, j) /= nrm;
  }
  return P;
}

Tensor FittedModel::encode(const Tensor& X) const {
  Tensor Xp = num::matmul(X, num::transpose(projection));
  auto [Z, ld] = flow.inverse(Xp);
  (void)ld;
  return Z;
}

Tensor FittedModel::encoder_jacobian(const Tensor& x) const {
  if (x.size() != projection.shape()[1])
    throw DimError("encoder_jacobian: point size disagrees with observation dim");
  Tensor xp = num::matmul(Tensor::from(x.vec(), {1, x.size()}), num::transpose(projection));
  Tensor Jf = flow.jacobian_inverse(Tensor::from(xp.vec(), {xp.size()}));
  return num::matmul(Jf, projection);
}

double model_nll(const FittedModel& model, const Tensor& X, const Tensor& C) {
  if (X.rows() != C.rows()) throw DimError("model_nll: X and C row counts differ");
  Tensor Xp = num::matmul(X, num::transpose(model.projection));
  ParamSet p = params_of(model);
  TrainConfig cfg = model.cfg;
  cfg.lambda = 0.0;
  return eval_objective(model.flow, cfg, p, Xp, C).nll;
}

FittedModel train_model(const gen::Dataset& data, const TrainConfig& cfg) {
  return train_core(data, cfg, std::nullopt, cfg.epochs, {});
}

FittedModel resume_training(const FittedModel& model, const gen::Dataset& data,
                            int extra_epochs) {
  if (extra_epochs < 1) throw ConfigError("resume: extra epochs must be positive");
  return train_core(data, model.cfg, params_of(model), extra_epochs, model.log);
}

StructureMatrix extract_structure(const FittedModel& model, double tau,
                                  std::vector<std::string>* warnings) {
  if (!model.prior.gating)
    throw ContractError("extract_structure: model was trained without gates");
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("extract_structure: tau must be in (0,1)");
  Tensor v = model.prior.gates();
  StructureMatrix M(model.cfg.n_A, model.cfg.u);
  for (std::size_t i = 0; i < model.cfg.n_A; ++i)
    for (std::size_t j = 0; j < model.cfg.u; ++j) {
      const double g = v.at(i, j);
      M.set(i, j, g >= tau ? 1 : 0);
      if (warnings && g >= 0.5 * tau && g <= 2.0 * tau) {
        warnings->push_back("gate (" + std::to_string(i) + "," + std::to_string(j) +
                            ") = " + std::to_string(g) + " is near the threshold " +
                            std::to_string(tau));
      }
    }
  return M;
}

}  // namespace ci::est
