#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ci/flow.hpp"
#include "ci/genmodel.hpp"
#include "ci/structure.hpp"
#include "ci/tensor.hpp"

namespace ci::est {

using num::Tensor;

struct TrainConfig {
  // Model split: the estimator assumes the first n_A latents are
  // class-dependent and the rest are not. u is the class count.
  std::size_t n_A = 0, n_B = 0, u = 0;

  int epochs = 200;
  int batch_size = 256;
  double lr = 1e-3;
  // Gate logits get their own optimizer with lr * gate_lr_scale: the gates
  // must finish their descent within the early-stopping window, and at the
  // shared rate they lag the likelihood by an order of magnitude.
  double gate_lr_scale = 10.0;

  double lambda = 0.1;       // penalty weight
  bool gating = true;        // false: class effects fully dense (no gates, no gate penalty)
  bool jac_penalty = false;  // also penalize |decoder Jacobian| entries
  int jac_points = 8;
  double jac_probe_eps = 1e-4;

  double val_fraction = 0.1;
  int patience = 10;
  double min_improve = 1e-5;
  double divergence_limit = 1e8;

  int flow_depth = 6;
  int flow_hidden = 0;  // 0 -> max(16, 4n)
  double s_max = 3.0;
  bool volume_preserving = false;

  double dev_bound = 2.0;  // class effects on mean/log-variance live in (-bound, bound)
  std::uint64_t seed = 0;

  std::size_t n() const { return n_A + n_B; }
};

// Conditional prior parameters. A class effect on latent i from class j is
// gate(i,j) * bounded_deviation(i,j), added to the base mean/log-variance.
// With binary gates and one-hot classes this reduces to a per-(i,j) table
// lookup, matching the generator's rule; the ell_1 penalty acts on the gates.
struct PriorParams {
  Tensor logit_M;     // n_A x u
  Tensor mean_dev;    // n_A x u raw, squashed by dev_bound * tanh(x / dev_bound)
  Tensor logvar_dev;  // n_A x u raw
  Tensor base_mean;   // 1 x n_A
  Tensor base_logvar; // 1 x n_A
  Tensor zB_mean;     // 1 x n_B (absent when n_B == 0)
  Tensor zB_logvar;   // 1 x n_B
  double dev_bound = 2.0;
  bool gating = true;

  Tensor gates() const;  // sigmoid(logit_M), or all-ones when gating is off
  // Effective (mean, variance) of latent i under class j at full gate.
  std::pair<double, double> class_entry(std::size_t i, std::size_t j) const;
  std::pair<double, double> base_entry(std::size_t i) const;
};

struct TrainLogRow {
  int epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;
  double l1_M = 0.0;
  double wall_ms = 0.0;
};

struct FittedModel {
  TrainConfig cfg;
  flow::FlowModel flow;      // decoder direction: latent -> projected observation
  PriorParams prior;
  Tensor projection;         // n x m orthonormal rows (identity when m == n)
  std::vector<TrainLogRow> log;
  double best_val_objective = 0.0;
  int stopped_epoch = 0;

  Tensor encode(const Tensor& X) const;           // B x m -> B x n
  Tensor encoder_jacobian(const Tensor& x) const; // n x m at one observation
};

// Orthonormal-row projection used to map m-dim observations onto the model's
// n-dim latent space. Identity when m == n.
Tensor reduce_dimension_matrix(std::size_t n, std::size_t m, std::uint64_t seed);

// Mean negative log-likelihood (no penalty) of observations under the model.
double model_nll(const FittedModel& model, const Tensor& X, const Tensor& C);

FittedModel train_model(const gen::Dataset& data, const TrainConfig& cfg);

// Continues training a fitted model on the same data for extra epochs.
// Optimizer moments restart; parameters and the held-out split do not.
FittedModel resume_training(const FittedModel& model, const gen::Dataset& data,
                            int extra_epochs);

// Binarizes the gates at threshold tau. Entries within a factor of two of
// the threshold are reported as ambiguous.
StructureMatrix extract_structure(const FittedModel& model, double tau = 0.05,
                                  std::vector<std::string>* warnings = nullptr);

}  // namespace ci::est
