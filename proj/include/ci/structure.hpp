#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ci/tensor.hpp"

namespace ci {

// Binary class-dependence matrix: one row per class-dependent latent concept,
// one column per class label. Entry (i,j) = 1 means concept i's conditional
// distribution depends on class j.
struct StructureMatrix {
  std::size_t n_concepts = 0;
  std::size_t n_classes = 0;
  std::vector<std::uint8_t> bits;  // row-major n_concepts x n_classes

  StructureMatrix() = default;
  StructureMatrix(std::size_t n, std::size_t u) : n_concepts(n), n_classes(u), bits(n * u, 0) {}

  std::uint8_t at(std::size_t i, std::size_t j) const { return bits[i * n_classes + j]; }
  void set(std::size_t i, std::size_t j, std::uint8_t v) { bits[i * n_classes + j] = v ? 1 : 0; }

  std::vector<std::size_t> row_support(std::size_t i) const;
  std::size_t row_weight(std::size_t i) const;
  bool operator==(const StructureMatrix& o) const = default;

  // Throws DataError if empty, values outside {0,1}, or any all-zero row.
  // All-zero columns are legal (a class no concept depends on) but are
  // surfaced as warnings by the diversity checker.
  void validate() const;

  std::string to_json() const;
  static StructureMatrix from_json(const std::string& text);
};

// Verdict of the per-row diversity condition: for row i there must exist a
// class set J (|J|>1) and j in J with M[i,j]=1, M[i,k]=0 for k in J\{j}, and
// no other row all-zero on J\{j}. Row i satisfies it iff its support is a
// nonempty proper subset of the classes and no other row's support is
// contained in it; the maximal candidate set J\{j} is then exactly the zero
// set of row i.
struct DiversityReport {
  struct Row {
    bool ok = false;
    // When ok: witness class j plus the maximal set J\{j} (row i's zeros).
    std::size_t witness_class = 0;
    std::vector<std::size_t> witness_zeros;
    // When !ok: rows whose support is contained in row i's support (or the
    // reason is an empty/full row, flagged below).
    std::vector<std::size_t> blocking_rows;
    bool empty_row = false;
    bool full_row = false;
  };
  bool holds = false;
  std::vector<Row> rows;
  std::vector<std::size_t> zero_columns;  // advisory, not a failure

  std::string summary() const;
};

DiversityReport check_structural_diversity(const StructureMatrix& M);

// Literal enumeration of all (J, j) pairs per row. Exponential in the class
// count (ScaleError above 16 classes); exists to cross-check the fast path.
DiversityReport brute_force_diversity(const StructureMatrix& M);

// Exact row matching: returns p with est.row(i) == truth.row(p(i)) for all i,
// or nullopt when no such bijection exists.
std::optional<std::vector<std::size_t>> match_rows_up_to_permutation(
    const StructureMatrix& est, const StructureMatrix& truth);

// Maximum-total-score assignment on a square score matrix (Hungarian method,
// shortest augmenting paths with potentials, O(n^3)). Returns p with row i
// assigned to column p[i].
std::vector<std::size_t> optimal_assignment(const num::Tensor& score);

// Nonzero-pattern of a Jacobian-like matrix. Pairs are sorted, deduplicated,
// and bounds-checked against (rows, cols).
struct SupportSet {
  std::size_t rows = 0, cols = 0;
  std::vector<std::pair<std::size_t, std::size_t>> entries;

  SupportSet() = default;
  SupportSet(std::size_t r, std::size_t c,
             std::vector<std::pair<std::size_t, std::size_t>> e);

  bool contains(std::size_t i, std::size_t j) const;
  std::vector<std::size_t> row_entries(std::size_t i) const;
  num::Tensor to_mask() const;  // rows x cols 0/1 matrix
  static SupportSet from_mask(const num::Tensor& mask);
};

// Entries of |m| at or above tau * max|m|. A zero matrix yields an empty set.
SupportSet threshold_support(const num::Tensor& m, double tau);

}  // namespace ci
