#include "ci/genmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace ci::gen {

namespace {

// Coordinate-wise nonlinearity of the sandwich mixing. Strictly increasing
// with derivative in [1, 1.5], so it is a diffeomorphism of the real line
// and never destroys support structure.
double phi(double t) { return t + 0.5 * std::tanh(t); }
double phi_prime(double t) {
  const double th = std::tanh(t);
  return 1.0 + 0.5 * (1.0 - th * th);
}
double phi_inverse(double x) {
  double v = x - 0.5 * std::tanh(x);
  for (int it = 0; it < 50; ++it) {
    const double f = phi(v) - x;
    if (std::fabs(f) < 1e-15) break;
    v -= f / phi_prime(v);
  }
  return v;
}

Tensor map_phi(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.vec()) v = phi(v);
  return out;
}

Tensor map_phi_inverse(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.vec()) v = phi_inverse(v);
  return out;
}

// Gauss-Jordan inverse with partial pivoting; fine at these sizes.
Tensor invert(const Tensor& a) {
  if (a.ndim() != 2 || a.shape()[0] != a.shape()[1])
    throw DimError("invert expects a square matrix");
  const std::size_t n = a.shape()[0];
  Tensor w = a;
  Tensor inv = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) inv.at(i, i) = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(w.at(r, c)) > std::fabs(w.at(piv, c))) piv = r;
    if (w.at(piv, c) == 0.0) throw ContractError("invert: singular matrix");
    if (piv != c)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(w.at(piv, j), w.at(c, j));
        std::swap(inv.at(piv, j), inv.at(c, j));
      }
    const double d = w.at(c, c);
    for (std::size_t j = 0; j < n; ++j) {
      w.at(c, j) /= d;
      inv.at(c, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = w.at(r, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        w.at(r, j) -= f * w.at(c, j);
        inv.at(r, j) -= f * inv.at(c, j);
      }
    }
  }
  return inv;
}

double binomial(std::size_t u, std::size_t k) {
  double b = 1.0;
  for (std::size_t i = 0; i < k; ++i) b = b * static_cast<double>(u - i) / static_cast<double>(i + 1);
  return b;
}

double signed_mag(Rng& rng, double lo, double hi) {
  const double mag = rng.uniform(lo, hi);
  return rng.uniform() < 0.5 ? -mag : mag;
}

void materialize_mixing(GenerativeSpec& spec);

}  // namespace

StructureMatrix sample_structure(std::size_t n_A, std::size_t u, bool require_diversity,
                                 Rng& rng, double extra_edge_prob) {
  if (n_A == 0 || u == 0) throw ConfigError("sample_structure: empty dimensions");
  if (!require_diversity) {
    StructureMatrix M(n_A, u);
    for (std::size_t i = 0; i < n_A; ++i) {
      std::size_t w = 0;
      for (int tries = 0; w == 0; ++tries) {
        if (tries > 10000) throw ConfigError("sample_structure: cannot draw nonzero row");
        w = 0;
        for (std::size_t j = 0; j < u; ++j) {
          const std::uint8_t b = rng.uniform() < 0.5 ? 1 : 0;
          M.set(i, j, b);
          w += b;
        }
      }
    }
    return M;
  }

  const std::size_t k = u / 2;
  if (u < 2 || n_A > static_cast<std::size_t>(binomial(u, std::max<std::size_t>(k, 1))))
    throw ConfigError("sample_structure: no antichain of " + std::to_string(n_A) +
                      " supports exists over " + std::to_string(u) + " classes");

  // Distinct same-size supports form an antichain, which is exactly what the
  // per-row condition needs. Use singletons when they suffice, otherwise
  // floor(u/2)-subsets.
  std::vector<std::vector<std::size_t>> supports;
  if (n_A <= u) {
    std::vector<std::size_t> cols(u);
    std::iota(cols.begin(), cols.end(), 0);
    for (std::size_t i = u - 1; i > 0; --i) std::swap(cols[i], cols[rng.uniform_int(i + 1)]);
    for (std::size_t i = 0; i < n_A; ++i) supports.push_back({cols[i]});
  } else {
    std::vector<std::size_t> sel(k);
    std::iota(sel.begin(), sel.end(), 0);
    const std::size_t want = std::min<std::size_t>(4 * n_A, 100000);
    while (supports.size() < want) {
      supports.push_back(sel);
      // next k-subset in lexicographic order
      std::size_t i = k;
      while (i > 0 && sel[i - 1] == u - k + i - 1) --i;
      if (i == 0) break;
      ++sel[i - 1];
      for (std::size_t j = i; j < k; ++j) sel[j] = sel[j - 1] + 1;
    }
    for (std::size_t i = supports.size() - 1; i > 0; --i)
      std::swap(supports[i], supports[rng.uniform_int(i + 1)]);
    supports.resize(n_A);
  }

  StructureMatrix M(n_A, u);
  for (std::size_t i = 0; i < supports.size(); ++i)
    for (std::size_t j : supports[i]) M.set(i, j, 1);

  // Give unused classes a concept when that keeps the condition intact.
  for (std::size_t j = 0; j < u; ++j) {
    bool used = false;
    for (std::size_t i = 0; i < n_A; ++i) used = used || M.at(i, j);
    if (used) continue;
    std::vector<std::size_t> order(n_A);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n_A - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    for (std::size_t i : order) {
      M.set(i, j, 1);
      if (check_structural_diversity(M).holds) break;
      M.set(i, j, 0);
    }
  }

  // Optional extra dependencies, kept only when still legal.
  if (extra_edge_prob > 0.0) {
    for (std::size_t i = 0; i < n_A; ++i)
      for (std::size_t j = 0; j < u; ++j) {
        if (M.at(i, j) || rng.uniform() >= extra_edge_prob) continue;
        M.set(i, j, 1);
        if (!check_structural_diversity(M).holds) M.set(i, j, 0);
      }
  }

  if (!check_structural_diversity(M).holds)
    throw ContractError("sample_structure: construction failed the diversity check");
  return M;
}

GenerativeSpec make_spec(const GenConfig& cfg) {
  if (cfg.u < 2) throw ConfigError("make_spec: need at least two classes");
  if (cfg.n_A == 0) throw ConfigError("make_spec: need at least one class-dependent latent");
  if (!(cfg.var_lo > 0.0) || !(cfg.var_hi > cfg.var_lo))
    throw ConfigError("make_spec: invalid variance range");
  if (cfg.min_log_ratio >= std::log(cfg.var_hi / cfg.var_lo))
    throw ConfigError("make_spec: min_log_ratio infeasible for the variance range");

  GenerativeSpec spec;
  spec.n_A = cfg.n_A;
  spec.n_B = cfg.n_B;
  spec.u = cfg.u;
  spec.m = cfg.m == 0 ? cfg.n_A + cfg.n_B : cfg.m;
  spec.seed = cfg.seed;
  spec.kind = cfg.mixing;
  spec.flow_depth = cfg.flow_depth;
  spec.sparse_fill = cfg.sparse_fill;
  spec.pin_zB_columns = cfg.pin_zB_columns;
  spec.entangled_zB = cfg.entangled_zB;
  if (spec.m < spec.n()) throw ConfigError("make_spec: observation dim below latent dim");

  Rng srng = substream(cfg.seed, "structure", 0);
  switch (cfg.structure) {
    case StructureMode::Diverse:
      spec.M = sample_structure(cfg.n_A, cfg.u, true, srng, cfg.extra_edge_prob);
      break;
    case StructureMode::RandomBernoulli:
      spec.M = sample_structure(cfg.n_A, cfg.u, false, srng);
      break;
    case StructureMode::AllOnes:
      spec.M = StructureMatrix(cfg.n_A, cfg.u);
      for (auto& b : spec.M.bits) b = 1;
      break;
    case StructureMode::Provided:
      if (!cfg.provided_M) throw ConfigError("make_spec: structure mode Provided needs a matrix");
      spec.M = *cfg.provided_M;
      if (spec.M.n_concepts != cfg.n_A || spec.M.n_classes != cfg.u)
        throw ConfigError("make_spec: provided matrix dimensions disagree with config");
      break;
  }

  Rng trng = substream(cfg.seed, "tables", 0);
  spec.mu_table = Tensor::zeros(spec.n_A, spec.u);
  spec.var_table = Tensor::zeros(spec.n_A, spec.u);
  spec.base_mean = Tensor::zeros(spec.n_A);
  spec.base_var = Tensor::zeros(spec.n_A);
  for (std::size_t i = 0; i < spec.n_A; ++i) {
    spec.base_var.at(i) = trng.uniform(cfg.var_lo, cfg.var_hi);
    for (std::size_t j = 0; j < spec.u; ++j) {
      if (!spec.M.at(i, j)) continue;
      double v = 0.0;
      int tries = 0;
      do {
        if (++tries > 10000)
          throw ConfigError("make_spec: cannot satisfy min_log_ratio; loosen the dials");
        v = trng.uniform(cfg.var_lo, cfg.var_hi);
      } while (std::fabs(std::log(v / spec.base_var.at(i))) < cfg.min_log_ratio);
      spec.var_table.at(i, j) = v;
      if (cfg.mean_range > 0.0)
        spec.mu_table.at(i, j) = trng.uniform(-cfg.mean_range, cfg.mean_range);
    }
  }
  spec.zB_var = spec.n_B ? Tensor::zeros(spec.n_B) : Tensor();
  for (std::size_t i = 0; i < spec.n_B; ++i)
    spec.zB_var.at(i) = trng.uniform(cfg.var_lo, cfg.var_hi);

  // Normalize the entangled set: indices must be class-independent latents,
  // and pairing needs an even count (extend or trim).
  for (std::size_t v : spec.entangled_zB)
    if (v < spec.n_A || v >= spec.n())
      throw ConfigError("make_spec: entangled indices must name class-independent latents");
  std::sort(spec.entangled_zB.begin(), spec.entangled_zB.end());
  spec.entangled_zB.erase(std::unique(spec.entangled_zB.begin(), spec.entangled_zB.end()),
                          spec.entangled_zB.end());
  if (spec.entangled_zB.size() % 2 == 1) {
    bool extended = false;
    for (std::size_t j = spec.n_A; j < spec.n() && !extended; ++j) {
      if (!std::binary_search(spec.entangled_zB.begin(), spec.entangled_zB.end(), j)) {
        spec.entangled_zB.push_back(j);
        std::sort(spec.entangled_zB.begin(), spec.entangled_zB.end());
        extended = true;
      }
    }
    if (!extended) spec.entangled_zB.pop_back();
  }

  materialize_mixing(spec);
  return spec;
}

namespace {

void materialize_mixing(GenerativeSpec& spec) {
  const std::size_t n = spec.n(), m = spec.m;
  if (spec.kind == MixingKind::DenseFlow) {
    if (n < 2) throw ConfigError("dense-flow mixing needs at least two latents");
    flow::FlowConfig fc;
    fc.dim = n;
    fc.depth = spec.flow_depth;
    fc.init = flow::Init::Random;
    fc.seed = substream(spec.seed, "mix-flow", 0).next_u64();
    spec.mix_flow = flow::FlowModel(fc);
    if (m > n) {
      Rng lrng = substream(spec.seed, "mix-lift", 0);
      // Random matrix -> orthonormal columns via Gram-Schmidt.
      Tensor Q = Tensor::zeros(m, n);
      for (double& v : Q.vec()) v = lrng.gaussian();
      for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
          double d = 0.0;
          for (std::size_t r = 0; r < m; ++r) d += Q.at(r, c) * Q.at(r, p);
          for (std::size_t r = 0; r < m; ++r) Q.at(r, c) -= d * Q.at(r, p);
        }
        double nrm = 0.0;
        for (std::size_t r = 0; r < m; ++r) nrm += Q.at(r, c) * Q.at(r, c);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-9) throw ContractError("mixing lift degenerated");
        for (std::size_t r = 0; r < m; ++r) Q.at(r, c) /= nrm;
      }
      spec.lift = Q;
    }
    return;
  }

  // Sparse sandwich. Lower-triangular core with nonzero diagonal; when
  // pinned, class-independent columns carry only their diagonal entry so each
  // such latent has a row identifying it uniquely. A block rotation applied
  // to entangled column pairs merges their supports.
  Rng rng = substream(spec.seed, "mix-sparse", 0);
  Tensor L = Tensor::zeros(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    L.at(r, r) = signed_mag(rng, 0.8, 1.5);
    for (std::size_t c = 0; c < r; ++c) {
      const bool zB_col = c >= spec.n_A;
      if (zB_col && spec.pin_zB_columns) continue;
      if (rng.uniform() < spec.sparse_fill) L.at(r, c) = signed_mag(rng, 0.3, 1.0);
    }
  }
  Tensor core = L;
  if (!spec.entangled_zB.empty()) {
    Tensor B = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) B.at(i, i) = 1.0;
    for (std::size_t p = 0; p + 1 < spec.entangled_zB.size(); p += 2) {
      const std::size_t a = spec.entangled_zB[p], b = spec.entangled_zB[p + 1];
      B.at(a, b) = 0.8;
      B.at(b, a) = 0.8;
    }
    core = num::matmul(L, B);
  }
  spec.A_core_inv = invert(core);

  std::vector<std::size_t> rows(m);
  std::iota(rows.begin(), rows.end(), 0);
  for (std::size_t i = m - 1; i > 0; --i) std::swap(rows[i], rows[rng.uniform_int(i + 1)]);
  spec.core_rows.assign(rows.begin(), rows.begin() + n);

  spec.A_vals = Tensor::zeros(m, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) spec.A_vals.at(spec.core_rows[k], j) = core.at(k, j);
  for (std::size_t r = n; r < m; ++r) {
    const std::size_t obs = rows[r];
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (rng.uniform() < spec.sparse_fill) {
        spec.A_vals.at(obs, j) = signed_mag(rng, 0.3, 1.0);
        ++count;
      }
    if (count == 0) spec.A_vals.at(obs, rng.uniform_int(n)) = signed_mag(rng, 0.3, 1.0);
  }
  spec.f_support = SupportSet::from_mask([&] {
    Tensor mask = Tensor::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) mask.at(i, j) = spec.A_vals.at(i, j) != 0.0 ? 1.0 : 0.0;
    return mask;
  }());
}

}  // namespace

Tensor mix_forward(const GenerativeSpec& spec, const Tensor& Z) {
  if (Z.cols() != spec.n()) throw DimError("mix_forward: latent width mismatch");
  if (spec.kind == MixingKind::DenseFlow) {
    auto [X, ld] = spec.mix_flow.forward(Z);
    (void)ld;
    if (spec.m > spec.n()) return num::matmul(X, num::transpose(spec.lift));
    return X;
  }
  Tensor P = map_phi(Z);
  Tensor W = num::matmul(P, num::transpose(spec.A_vals));
  return map_phi(W);
}

Tensor mix_inverse(const GenerativeSpec& spec, const Tensor& X) {
  if (X.cols() != spec.m) throw DimError("mix_inverse: observation width mismatch");
  if (spec.kind == MixingKind::DenseFlow) {
    Tensor Xn = spec.m > spec.n() ? num::matmul(X, spec.lift) : X;
    auto [Z, ld] = spec.mix_flow.inverse(Xn);
    (void)ld;
    return Z;
  }
  const std::size_t B = X.rows(), n = spec.n();
  Tensor Wc = Tensor::zeros(B, n);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < n; ++k)
      Wc.at(b, k) = phi_inverse(X.at(b, spec.core_rows[k]));
  Tensor Y = num::matmul(Wc, num::transpose(spec.A_core_inv));
  return map_phi_inverse(Y);
}

Tensor ground_truth_jacobian(const GenerativeSpec& spec, const Tensor& z) {
  if (z.size() != spec.n()) throw DimError("ground_truth_jacobian: point size mismatch");
  const std::size_t n = spec.n(), m = spec.m;
  if (spec.kind == MixingKind::DenseFlow) {
    Tensor J = spec.mix_flow.jacobian_forward(Tensor::from(z.vec(), {n}));
    if (m > n) return num::matmul(spec.lift, J);
    return J;
  }
  Tensor pz = Tensor::zeros(n);
  for (std::size_t j = 0; j < n; ++j) pz.at(j) = phi(z.data()[j]);
  Tensor J = Tensor::zeros(m, n);
  for (std::size_t k = 0; k < m; ++k) {
    double w = 0.0;
    for (std::size_t j = 0; j < n; ++j) w += spec.A_vals.at(k, j) * pz.at(j);
    const double pw = phi_prime(w);
    for (std::size_t j = 0; j < n; ++j)
      J.at(k, j) = pw * spec.A_vals.at(k, j) * phi_prime(z.data()[j]);
  }
  return J;
}

void conditional_moments(const GenerativeSpec& spec, const std::vector<double>& c,
                         Tensor& mean_out, Tensor& var_out) {
  if (c.size() != spec.u) throw DimError("conditional_moments: class vector width mismatch");
  const std::size_t n = spec.n();
  mean_out = Tensor::zeros(n);
  var_out = Tensor::zeros(n);
  for (std::size_t i = 0; i < spec.n_A; ++i) {
    std::size_t pick = spec.u;
    for (std::size_t j = 0; j < spec.u; ++j)
      if (c[j] > 0.5 && spec.M.at(i, j)) {
        pick = j;
        break;  // lowest-index active connected class wins
      }
    if (pick < spec.u) {
      mean_out.at(i) = spec.mu_table.at(i, pick);
      var_out.at(i) = spec.var_table.at(i, pick);
    } else {
      mean_out.at(i) = spec.base_mean.at(i);
      var_out.at(i) = spec.base_var.at(i);
    }
  }
  for (std::size_t i = 0; i < spec.n_B; ++i) {
    mean_out.at(spec.n_A + i) = 0.0;
    var_out.at(spec.n_A + i) = spec.zB_var.at(i);
  }
}

Dataset sample_dataset(const GenerativeSpec& spec, std::size_t N, std::uint64_t seed,
                       ClassMode mode, double multi_hot_p, bool keep_latents) {
  if (N == 0) throw ConfigError("sample_dataset: N must be positive");
  if (mode == ClassMode::MultiHot && !(multi_hot_p > 0.0 && multi_hot_p < 1.0))
    throw ConfigError("sample_dataset: multi-hot probability must be in (0,1)");
  Rng crng = substream(seed, "data-class", 0);
  Rng zrng = substream(seed, "data-latent", 0);
  const std::size_t n = spec.n();
  Tensor C = Tensor::zeros(N, spec.u);
  Tensor Z = Tensor::zeros(N, n);
  std::vector<double> c(spec.u);
  Tensor mean, var;
  for (std::size_t t = 0; t < N; ++t) {
    std::fill(c.begin(), c.end(), 0.0);
    if (mode == ClassMode::OneHot) {
      c[crng.uniform_int(spec.u)] = 1.0;
    } else {
      bool any = false;
      int tries = 0;
      while (!any) {
        if (++tries > 10000) throw DataError("sample_dataset: cannot draw a nonzero class vector");
        for (std::size_t j = 0; j < spec.u; ++j) {
          c[j] = crng.uniform() < multi_hot_p ? 1.0 : 0.0;
          any = any || c[j] > 0.5;
        }
      }
    }
    for (std::size_t j = 0; j < spec.u; ++j) C.at(t, j) = c[j];
    conditional_moments(spec, c, mean, var);
    for (std::size_t i = 0; i < n; ++i)
      Z.at(t, i) = zrng.gaussian(mean.at(i), var.at(i));
  }
  Dataset d;
  d.X = mix_forward(spec, Z);
  d.C = std::move(C);
  if (keep_latents) d.Z = std::move(Z);
  d.spec_hash = spec.hash();
  d.sample_seed = seed;
  return d;
}

DistinctnessReport conditional_density_distinctness(const GenerativeSpec& spec,
                                                    double min_gap) {
  DistinctnessReport rep;
  rep.holds = true;
  rep.min_gap.assign(spec.n_A, 1e300);
  for (std::size_t i = 0; i < spec.n_A; ++i) {
    for (std::size_t j = 0; j < spec.u; ++j) {
      if (!spec.M.at(i, j)) continue;
      const double vgap =
          std::fabs(std::log(spec.var_table.at(i, j)) - std::log(spec.base_var.at(i)));
      const double mgap = std::fabs(spec.mu_table.at(i, j) - spec.base_mean.at(i));
      rep.min_gap[i] = std::min(rep.min_gap[i], std::max(vgap, mgap));
    }
    if (spec.M.row_weight(i) == 0) rep.min_gap[i] = 0.0;
    if (rep.min_gap[i] < min_gap) rep.holds = false;
  }
  return rep;
}

std::string GenerativeSpec::to_json() const {
  nlohmann::json j;
  j["n_A"] = n_A;
  j["n_B"] = n_B;
  j["u"] = u;
  j["m"] = m;
  j["seed"] = seed;
  j["kind"] = kind == MixingKind::DenseFlow ? "dense-flow" : "sparse-sandwich";
  j["flow_depth"] = flow_depth;
  j["sparse_fill"] = sparse_fill;
  j["pin_zB_columns"] = pin_zB_columns;
  j["entangled_zB"] = entangled_zB;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < n_A; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < u; ++c) row.push_back(static_cast<int>(M.at(i, c)));
    rows.push_back(std::move(row));
  }
  j["M"] = std::move(rows);
  j["mu_table"] = mu_table.vec();
  j["var_table"] = var_table.vec();
  j["base_mean"] = base_mean.vec();
  j["base_var"] = base_var.vec();
  j["zB_var"] = n_B ? zB_var.vec() : std::vector<double>{};
  return j.dump(2) + "\n";
}

GenerativeSpec GenerativeSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("spec json parse error: ") + e.what());
  }
  GenerativeSpec s;
  try {
    s.n_A = j.at("n_A").get<std::size_t>();
    s.n_B = j.at("n_B").get<std::size_t>();
    s.u = j.at("u").get<std::size_t>();
    s.m = j.at("m").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dense-flow")
      s.kind = MixingKind::DenseFlow;
    else if (kind == "sparse-sandwich")
      s.kind = MixingKind::SparseSandwich;
    else
      throw DataError("spec json: unknown mixing kind " + kind);
    s.flow_depth = j.at("flow_depth").get<int>();
    s.sparse_fill = j.at("sparse_fill").get<double>();
    s.pin_zB_columns = j.at("pin_zB_columns").get<bool>();
    s.entangled_zB = j.at("entangled_zB").get<std::vector<std::size_t>>();
    s.M = StructureMatrix(s.n_A, s.u);
    const auto& rows = j.at("M");
    if (!rows.is_array() || rows.size() != s.n_A) throw DataError("spec json: bad M");
    for (std::size_t i = 0; i < s.n_A; ++i)
      for (std::size_t c = 0; c < s.u; ++c)
        s.M.set(i, c, rows.at(i).at(c).get<int>() ? 1 : 0);
    auto tensor_field = [&](const char* name, std::vector<std::size_t> shape) {
      auto v = j.at(name).get<std::vector<double>>();
      if (shape.empty()) return Tensor();
      return Tensor::from(std::move(v), std::move(shape));
    };
    s.mu_table = tensor_field("mu_table", {s.n_A, s.u});
    s.var_table = tensor_field("var_table", {s.n_A, s.u});
    s.base_mean = tensor_field("base_mean", {s.n_A});
    s.base_var = tensor_field("base_var", {s.n_A});
    s.zB_var = s.n_B ? tensor_field("zB_var", {s.n_B}) : Tensor();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("spec json field error: ") + e.what());
  }
  materialize_mixing(s);
  return s;
}

std::uint64_t GenerativeSpec::hash() const { return fnv1a(to_json()); }

}  // namespace ci::gen
