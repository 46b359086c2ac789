#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "ci/common.hpp"
#include "ci/genmodel.hpp"
#include "ci/oracle.hpp"
#include "doctest.h"

using namespace ci;
using namespace ci::gen;
using num::Tensor;

TEST_CASE("sampled diverse structures always pass the checker") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    for (auto [n, u] : std::vector<std::pair<std::size_t, std::size_t>>{
             {1, 2}, {2, 2}, {2, 3}, {3, 3}, {3, 4}, {5, 4}, {5, 5}, {6, 5}, {10, 5}}) {
      StructureMatrix M = sample_structure(n, u, true, rng);
      CAPTURE(seed);
      CAPTURE(n);
      CAPTURE(u);
      REQUIRE(check_structural_diversity(M).holds);
    }
  }
}

TEST_CASE("infeasible diverse structure sizes are rejected") {
  Rng rng(1);
  // Largest antichain over 3 classes has C(3,1) = 3 supports.
  CHECK_THROWS_AS(sample_structure(4, 3, true, rng), ConfigError);
  CHECK_THROWS_AS(sample_structure(3, 2, true, rng), ConfigError);
  CHECK_THROWS_AS(sample_structure(0, 3, true, rng), ConfigError);
}

TEST_CASE("random structures have no zero rows and same seed reproduces") {
  Rng a(7), b(7);
  StructureMatrix M1 = sample_structure(6, 5, false, a);
  StructureMatrix M2 = sample_structure(6, 5, false, b);
  CHECK(M1 == M2);
  for (std::size_t i = 0; i < 6; ++i) CHECK(M1.row_weight(i) >= 1);
}

TEST_CASE("make_spec tables respect ranges and separation") {
  GenConfig cfg;
  cfg.n_A = 4;
  cfg.u = 5;
  cfg.n_B = 2;
  cfg.seed = 3;
  cfg.min_log_ratio = 0.35;
  GenerativeSpec spec = make_spec(cfg);
  for (std::size_t i = 0; i < spec.n_A; ++i) {
    CHECK(spec.base_var.at(i) >= 0.5);
    CHECK(spec.base_var.at(i) <= 3.0);
    CHECK(spec.base_mean.at(i) == 0.0);
    for (std::size_t j = 0; j < spec.u; ++j) {
      if (!spec.M.at(i, j)) {
        CHECK(spec.var_table.at(i, j) == 0.0);
        continue;
      }
      CHECK(spec.var_table.at(i, j) >= 0.5);
      CHECK(spec.var_table.at(i, j) <= 3.0);
      CHECK(std::fabs(std::log(spec.var_table.at(i, j) / spec.base_var.at(i))) >= 0.35);
      CHECK(spec.mu_table.at(i, j) == 0.0);  // means stay zero by default
    }
  }
  for (std::size_t i = 0; i < spec.n_B; ++i) {
    CHECK(spec.zB_var.at(i) >= 0.5);
    CHECK(spec.zB_var.at(i) <= 3.0);
  }
  CHECK(conditional_density_distinctness(spec, 0.3).holds);
}

TEST_CASE("make_spec rejects bad configs") {
  GenConfig cfg;
  cfg.u = 1;
  CHECK_THROWS_AS(make_spec(cfg), ConfigError);
  cfg = {};
  cfg.min_log_ratio = 5.0;
  CHECK_THROWS_AS(make_spec(cfg), ConfigError);
  cfg = {};
  cfg.m = 2;  // below n_A + n_B = 3
  CHECK_THROWS_AS(make_spec(cfg), ConfigError);
  cfg = {};
  cfg.structure = StructureMode::Provided;
  CHECK_THROWS_AS(make_spec(cfg), ConfigError);
}

TEST_CASE("conditional moments follow the lookup rule") {
  GenConfig cfg;
  cfg.n_A = 2;
  cfg.n_B = 1;
  cfg.u = 3;
  cfg.seed = 11;
  cfg.structure = StructureMode::Provided;
  StructureMatrix M(2, 3);
  M.set(0, 0, 1);
  M.set(0, 2, 1);
  M.set(1, 1, 1);
  cfg.provided_M = M;
  GenerativeSpec spec = make_spec(cfg);

  Tensor mean, var;
  // Class 0 active: concept 0 connected, concept 1 not.
  conditional_moments(spec, {1.0, 0.0, 0.0}, mean, var);
  CHECK(var.at(0) == spec.var_table.at(0, 0));
  CHECK(var.at(1) == spec.base_var.at(1));
  CHECK(var.at(2) == spec.zB_var.at(0));
  // Multi-hot 0 and 2: lowest active connected class wins for concept 0.
  conditional_moments(spec, {1.0, 0.0, 1.0}, mean, var);
  CHECK(var.at(0) == spec.var_table.at(0, 0));
  conditional_moments(spec, {0.0, 0.0, 1.0}, mean, var);
  CHECK(var.at(0) == spec.var_table.at(0, 2));
  CHECK_THROWS_AS(conditional_moments(spec, {1.0}, mean, var), DimError);
}

TEST_CASE("sparse sandwich mixing round trips") {
  for (std::size_t m : {4ul, 7ul}) {
    GenConfig cfg;
    cfg.n_A = 2;
    cfg.n_B = 2;
    cfg.u = 3;
    cfg.m = m;
    cfg.seed = 21;
    GenerativeSpec spec = make_spec(cfg);
    Rng rng(5);
    Tensor Z = Tensor::zeros(11, 4);
    for (double& v : Z.vec()) v = rng.gaussian() * 1.4;
    Tensor X = mix_forward(spec, Z);
    CHECK(X.rows() == 11);
    CHECK(X.cols() == m);
    Tensor Z2 = mix_inverse(spec, X);
    for (std::size_t i = 0; i < Z.size(); ++i)
      CHECK(Z2.data()[i] == doctest::Approx(Z.data()[i]).epsilon(1e-9));
  }
}

TEST_CASE("dense flow mixing round trips including lifted observations") {
  for (std::size_t m : {3ul, 6ul}) {
    GenConfig cfg;
    cfg.n_A = 3;
    cfg.u = 4;
    cfg.m = m;
    cfg.seed = 22;
    cfg.mixing = MixingKind::DenseFlow;
    GenerativeSpec spec = make_spec(cfg);
    Rng rng(6);
    Tensor Z = Tensor::zeros(9, 3);
    for (double& v : Z.vec()) v = rng.gaussian();
    Tensor X = mix_forward(spec, Z);
    Tensor Z2 = mix_inverse(spec, X);
    for (std::size_t i = 0; i < Z.size(); ++i)
      CHECK(Z2.data()[i] == doctest::Approx(Z.data()[i]).epsilon(1e-8));
  }
}

TEST_CASE("ground truth jacobian matches finite differences") {
  for (MixingKind kind : {MixingKind::SparseSandwich, MixingKind::DenseFlow}) {
    GenConfig cfg;
    cfg.n_A = 2;
    cfg.n_B = 1;
    cfg.u = 3;
    cfg.m = 5;
    cfg.seed = 31;
    cfg.mixing = kind;
    GenerativeSpec spec = make_spec(cfg);
    Tensor z = Tensor::from({0.4, -0.9, 1.2}, {3});
    Tensor J = ground_truth_jacobian(spec, z);
    Tensor Jfd = oracle::fd_jacobian(
        [&](const Tensor& q) {
          Tensor X = mix_forward(spec, Tensor::from(q.vec(), {1, 3}));
          return Tensor::from(X.vec(), {X.size()});
        },
        z);
    REQUIRE(J.shape() == Jfd.shape());
    for (std::size_t i = 0; i < J.size(); ++i)
      CHECK(J.data()[i] == doctest::Approx(Jfd.data()[i]).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("sparse mixing support matches the value pattern and pins zB columns") {
  GenConfig cfg;
  cfg.n_A = 2;
  cfg.n_B = 3;
  cfg.u = 3;
  cfg.m = 8;
  cfg.seed = 41;
  cfg.sparse_fill = 0.6;
  GenerativeSpec spec = make_spec(cfg);
  const std::size_t n = spec.n();
  for (std::size_t i = 0; i < spec.m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      CHECK(spec.f_support.contains(i, j) == (spec.A_vals.at(i, j) != 0.0));
  // Each class-independent latent owns a core row whose zB-support is just
  // itself: the analogue of the single-latent intersection witness.
  for (std::size_t i = spec.n_A; i < n; ++i) {
    const std::size_t row = spec.core_rows[i];
    for (std::size_t j = spec.n_A; j < n; ++j)
      CHECK(spec.f_support.contains(row, j) == (j == i));
  }
}

TEST_CASE("entangled latent pairs share merged supports") {
  GenConfig cfg;
  cfg.n_A = 2;
  cfg.n_B = 2;
  cfg.u = 3;
  cfg.seed = 43;
  cfg.entangled_zB = {2, 3};
  GenerativeSpec spec = make_spec(cfg);
  // Every core row touching latent 2 also touches latent 3 and vice versa:
  // no support-based witness can separate them.
  for (std::size_t k = 0; k < spec.n(); ++k) {
    const std::size_t row = spec.core_rows[k];
    CHECK(spec.f_support.contains(row, 2) == spec.f_support.contains(row, 3));
  }
  // Odd-sized sets get normalized to an even pairing.
  GenConfig odd = cfg;
  odd.entangled_zB = {2};
  GenerativeSpec spec2 = make_spec(odd);
  CHECK(spec2.entangled_zB.size() == 2);
}

TEST_CASE("dataset sampling is deterministic and class-conditional variances match") {
  GenConfig cfg;
  cfg.n_A = 2;
  cfg.n_B = 1;
  cfg.u = 3;
  cfg.seed = 51;
  GenerativeSpec spec = make_spec(cfg);
  Dataset d1 = sample_dataset(spec, 3000, 99);
  Dataset d2 = sample_dataset(spec, 3000, 99);
  REQUIRE(d1.X.size() == d2.X.size());
  for (std::size_t i = 0; i < d1.X.size(); ++i) CHECK(d1.X.data()[i] == d2.X.data()[i]);
  Dataset d3 = sample_dataset(spec, 3000, 100);
  double diff = 0.0;
  for (std::size_t i = 0; i < d1.X.size(); ++i)
    diff = std::max(diff, std::fabs(d1.X.data()[i] - d3.X.data()[i]));
  CHECK(diff > 1e-6);

  // Empirical class-conditional variance tracks the tables.
  Dataset big = sample_dataset(spec, 30000, 7);
  REQUIRE(big.Z.has_value());
  for (std::size_t j = 0; j < spec.u; ++j) {
    for (std::size_t i = 0; i < spec.n_A; ++i) {
      double s = 0.0, s2 = 0.0;
      std::size_t cnt = 0;
      for (std::size_t t = 0; t < 30000; ++t) {
        if (big.C.at(t, j) < 0.5) continue;
        const double z = big.Z->at(t, i);
        s += z;
        s2 += z * z;
        ++cnt;
      }
      REQUIRE(cnt > 5000);
      const double mean = s / cnt;
      const double var = s2 / cnt - mean * mean;
      const double expect = spec.M.at(i, j) ? spec.var_table.at(i, j) : spec.base_var.at(i);
      CHECK(var == doctest::Approx(expect).epsilon(0.12));
    }
  }
  // Observations really are the mixed latents.
  Tensor Zrec = mix_inverse(spec, big.X);
  for (std::size_t i = 0; i < 200; ++i)
    CHECK(Zrec.data()[i] == doctest::Approx(big.Z->data()[i]).epsilon(1e-8));
}

TEST_CASE("multi-hot classes always have at least one active class") {
  GenConfig cfg;
  cfg.n_A = 2;
  cfg.u = 4;
  cfg.seed = 61;
  GenerativeSpec spec = make_spec(cfg);
  Dataset d = sample_dataset(spec, 500, 3, ClassMode::MultiHot, 0.25);
  for (std::size_t t = 0; t < 500; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += d.C.at(t, j);
    CHECK(s >= 1.0);
  }
}

TEST_CASE("spec json round trips bit-exactly and rebuilds the same mixing") {
  for (MixingKind kind : {MixingKind::SparseSandwich, MixingKind::DenseFlow}) {
    GenConfig cfg;
    cfg.n_A = 3;
    cfg.n_B = 1;
    cfg.u = 4;
    cfg.m = 6;
    cfg.seed = 71;
    cfg.mixing = kind;
    GenerativeSpec spec = make_spec(cfg);
    const std::string js = spec.to_json();
    GenerativeSpec back = GenerativeSpec::from_json(js);
    CHECK(back.to_json() == js);
    CHECK(back.hash() == spec.hash());
    Rng rng(2);
    Tensor Z = Tensor::zeros(5, 4);
    for (double& v : Z.vec()) v = rng.gaussian();
    Tensor X1 = mix_forward(spec, Z);
    Tensor X2 = mix_forward(back, Z);
    for (std::size_t i = 0; i < X1.size(); ++i) CHECK(X1.data()[i] == X2.data()[i]);
  }
}

TEST_CASE("distinctness report flags an indistinct table") {
  GenConfig cfg;
  cfg.n_A = 2;
  cfg.u = 3;
  cfg.seed = 81;
  GenerativeSpec spec = make_spec(cfg);
  // Force one connected entry to match its base variance exactly.
  for (std::size_t j = 0; j < spec.u; ++j)
    if (spec.M.at(0, j)) {
      spec.var_table.at(0, j) = spec.base_var.at(0);
      break;
    }
  auto rep = conditional_density_distinctness(spec, 0.05);
  CHECK_FALSE(rep.holds);
  CHECK(rep.min_gap[0] < 0.05);
}
