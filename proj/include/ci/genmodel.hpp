#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ci/flow.hpp"
#include "ci/structure.hpp"
#include "ci/tensor.hpp"

namespace ci::gen {

using num::Tensor;

// How observations are produced from latents.
//  DenseFlow: a random-init coupling flow; Jacobian is dense, no support
//    structure to recover.
//  SparseSandwich: x = phi(A * phi(z)) with phi(t) = t + tanh(t)/2 applied
//    coordinate-wise and A a row-permuted matrix with an invertible core.
//    The Jacobian support equals the support of A, so support-based
//    conditions can be arranged exactly.
enum class MixingKind { DenseFlow, SparseSandwich };

enum class StructureMode {
  Diverse,          // sampled to satisfy the per-row diversity condition
  RandomBernoulli,  // iid 0/1 rows (no structural condition); zero rows redrawn
  AllOnes,          // every concept depends on every class
  Provided,         // caller supplies M
};

enum class ClassMode { OneHot, MultiHot };

struct GenConfig {
  std::size_t n_A = 3;  // class-dependent latents
  std::size_t n_B = 0;  // class-independent latents
  std::size_t u = 4;    // classes
  std::size_t m = 0;    // observation dim; 0 means n_A + n_B
  std::uint64_t seed = 0;

  StructureMode structure = StructureMode::Diverse;
  std::optional<StructureMatrix> provided_M;
  double extra_edge_prob = 0.15;  // extra 1s added to a diverse M when legal

  // Conditional Gaussian tables. Means stay at zero by default; variances are
  // uniform on [var_lo, var_hi], with connected entries redrawn until they
  // differ from the concept's base variance by at least min_log_ratio in log
  // space (otherwise the class effect can be statistically invisible).
  double var_lo = 0.5, var_hi = 3.0;
  double min_log_ratio = 0.35;
  double mean_range = 0.0;  // connected means uniform on [-mean_range, mean_range]

  MixingKind mixing = MixingKind::SparseSandwich;
  int flow_depth = 4;            // dense mixing
  double sparse_fill = 0.35;     // sparse mixing: below-diagonal fill probability
  bool pin_zB_columns = true;    // sparse mixing: give each class-independent
                                 // latent a column touched by exactly one core row
  std::vector<std::size_t> entangled_zB;  // sparse mixing: these class-independent
                                          // latents get pairwise-merged supports,
                                          // defeating support-based separation
};

// Fully materialized generative process.
struct GenerativeSpec {
  std::size_t n_A = 0, n_B = 0, u = 0, m = 0;
  StructureMatrix M;
  Tensor mu_table;   // n_A x u, used where M is 1
  Tensor var_table;  // n_A x u, used where M is 1
  Tensor base_mean;  // n_A
  Tensor base_var;   // n_A
  Tensor zB_var;     // n_B (means are zero)

  MixingKind kind = MixingKind::SparseSandwich;
  std::uint64_t seed = 0;
  int flow_depth = 4;
  double sparse_fill = 0.35;
  bool pin_zB_columns = true;
  std::vector<std::size_t> entangled_zB;

  // Materialized mixing (derived deterministically from the fields above).
  flow::FlowModel mix_flow;               // DenseFlow
  Tensor lift;                            // m x n orthonormal columns when m > n
  Tensor A_vals;                          // SparseSandwich: m x n value matrix
  Tensor A_core_inv;                      // n x n inverse of the core rows
  std::vector<std::size_t> core_rows;     // observation indices of the core
  SupportSet f_support;                   // support of A (SparseSandwich)

  std::size_t n() const { return n_A + n_B; }

  std::string to_json() const;
  static GenerativeSpec from_json(const std::string& text);
  std::uint64_t hash() const;  // FNV-1a of the canonical serialization
};

// Samples a structure matrix. With require_diversity the result always passes
// the diversity checker (antichain construction + verified extras); throws
// ConfigError when n_A exceeds the largest antichain on u classes.
StructureMatrix sample_structure(std::size_t n_A, std::size_t u, bool require_diversity,
                                 Rng& rng, double extra_edge_prob = 0.15);

GenerativeSpec make_spec(const GenConfig& cfg);

struct Dataset {
  Tensor X;                  // N x m
  Tensor C;                  // N x u (0/1)
  std::optional<Tensor> Z;   // N x n ground-truth latents
  std::uint64_t spec_hash = 0;
  std::uint64_t sample_seed = 0;
};

Dataset sample_dataset(const GenerativeSpec& spec, std::size_t N, std::uint64_t seed,
                       ClassMode mode = ClassMode::OneHot, double multi_hot_p = 0.3,
                       bool keep_latents = true);

// Conditional mean/variance of every latent given a 0/1 class vector. For a
// class-dependent latent the lowest-index active connected class wins; with
// one-hot classes that is simply "the class" when connected, else the base
// distribution. Class-independent latents ignore c.
void conditional_moments(const GenerativeSpec& spec, const std::vector<double>& c,
                         Tensor& mean_out, Tensor& var_out);

Tensor mix_forward(const GenerativeSpec& spec, const Tensor& Z);   // B x n -> B x m
Tensor mix_inverse(const GenerativeSpec& spec, const Tensor& X);   // B x m -> B x n
Tensor ground_truth_jacobian(const GenerativeSpec& spec, const Tensor& z);  // m x n at point

// Verifies that every connected table entry is actually distinguishable from
// its base distribution (log-variance gap or mean gap), i.e. the class
// structure leaves a statistical trace.
struct DistinctnessReport {
  bool holds = false;
  std::vector<double> min_gap;  // per class-dependent concept
};
DistinctnessReport conditional_density_distinctness(const GenerativeSpec& spec,
                                                    double min_gap = 0.05);

}  // namespace ci::gen
