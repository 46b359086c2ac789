#include "ci/structure.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace ci {

std::vector<std::size_t> StructureMatrix::row_support(std::size_t i) const {
  std::vector<std::size_t> s;
  for (std::size_t j = 0; j < n_classes; ++j)
    if (at(i, j)) s.push_back(j);
  return s;
}

std::size_t StructureMatrix::row_weight(std::size_t i) const {
  std::size_t w = 0;
  for (std::size_t j = 0; j < n_classes; ++j) w += at(i, j);
  return w;
}

void StructureMatrix::validate() const {
  if (n_concepts == 0 || n_classes == 0)
    throw DataError("structure matrix must have at least one row and one column");
  if (bits.size() != n_concepts * n_classes)
    throw DataError("structure matrix storage size does not match dimensions");
  for (std::uint8_t b : bits)
    if (b > 1) throw DataError("structure matrix entries must be 0 or 1");
  for (std::size_t i = 0; i < n_concepts; ++i)
    if (row_weight(i) == 0)
      throw DataError("structure matrix row " + std::to_string(i) +
                      " is all zero; every concept must depend on some class");
}

std::string StructureMatrix::to_json() const {
  nlohmann::json j;
  j["n_A"] = n_concepts;
  j["u"] = n_classes;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < n_concepts; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < n_classes; ++c) row.push_back(static_cast<int>(at(i, c)));
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

StructureMatrix StructureMatrix::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("structure json parse error: ") + e.what());
  }
  if (!j.is_object() || !j.contains("n_A") || !j.contains("u") || !j.contains("rows"))
    throw DataError("structure json must contain n_A, u and rows");
  StructureMatrix M;
  try {
    M.n_concepts = j.at("n_A").get<std::size_t>();
    M.n_classes = j.at("u").get<std::size_t>();
    const auto& rows = j.at("rows");
    if (!rows.is_array() || rows.size() != M.n_concepts)
      throw DataError("structure json: rows count does not match n_A");
    M.bits.reserve(M.n_concepts * M.n_classes);
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != M.n_classes)
        throw DataError("structure json: row length does not match u");
      for (const auto& v : row) {
        const int x = v.get<int>();
        if (x != 0 && x != 1) throw DataError("structure json: entries must be 0 or 1");
        M.bits.push_back(static_cast<std::uint8_t>(x));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("structure json field error: ") + e.what());
  }
  return M;
}

std::string DiversityReport::summary() const {
  std::ostringstream os;
  os << "diversity: " << (holds ? "holds" : "violated") << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    os << "  concept " << i << ": ";
    if (r.ok) {
      os << "ok (witness class " << r.witness_class << ", zero set {";
      for (std::size_t k = 0; k < r.witness_zeros.size(); ++k)
        os << (k ? "," : "") << r.witness_zeros[k];
      os << "})\n";
    } else if (r.empty_row) {
      os << "fail (depends on no class)\n";
    } else if (r.full_row) {
      os << "fail (depends on every class)\n";
    } else {
      os << "fail (blocked by concept";
      for (std::size_t b : r.blocking_rows) os << " " << b;
      os << ")\n";
    }
  }
  for (std::size_t j : zero_columns)
    os << "  note: class " << j << " is used by no concept\n";
  return os.str();
}

DiversityReport check_structural_diversity(const StructureMatrix& M) {
  const std::size_t n = M.n_concepts, u = M.n_classes;
  DiversityReport rep;
  rep.rows.resize(n);
  rep.holds = n > 0;
  for (std::size_t j = 0; j < u; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any = any || M.at(i, j);
    if (!any) rep.zero_columns.push_back(j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    DiversityReport::Row& r = rep.rows[i];
    const std::size_t w = M.row_weight(i);
    if (w == 0) {
      r.empty_row = true;
      rep.holds = false;
      continue;
    }
    if (w == u) {
      r.full_row = true;
      rep.holds = false;
      continue;
    }
    // Support is a nonempty proper subset. The condition reduces to: no other
    // row's support fits inside row i's support (equivalently, every other
    // row hits row i's zero set).
    for (std::size_t o = 0; o < n; ++o) {
      if (o == i) continue;
      bool hits_zero_set = false;
      for (std::size_t j = 0; j < u; ++j)
        if (!M.at(i, j) && M.at(o, j)) {
          hits_zero_set = true;
          break;
        }
      if (!hits_zero_set) r.blocking_rows.push_back(o);
    }
    if (r.blocking_rows.empty()) {
      r.ok = true;
      // Smallest class in the support serves as the witness j; the full zero
      // set is the maximal J\{j}.
      for (std::size_t j = 0; j < u; ++j)
        if (!M.at(i, j)) r.witness_zeros.push_back(j);
      r.witness_class = M.row_support(i).front();
    } else {
      rep.holds = false;
    }
  }
  return rep;
}

DiversityReport brute_force_diversity(const StructureMatrix& M) {
  const std::size_t n = M.n_concepts, u = M.n_classes;
  if (u > 16) throw ScaleError("brute_force_diversity: more than 16 classes");
  DiversityReport rep;
  rep.rows.resize(n);
  rep.holds = n > 0;
  for (std::size_t j = 0; j < u; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any = any || M.at(i, j);
    if (!any) rep.zero_columns.push_back(j);
  }
  const std::uint32_t full = (u >= 32) ? 0xffffffffu : ((1u << u) - 1u);
  std::vector<std::uint32_t> supp(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < u; ++j)
      if (M.at(i, j)) supp[i] |= (1u << j);
  for (std::size_t i = 0; i < n; ++i) {
    DiversityReport::Row& r = rep.rows[i];
    r.empty_row = supp[i] == 0;
    r.full_row = supp[i] == full;
    bool found = false;
    for (std::uint32_t J = 0; J <= full && !found; ++J) {
      if (__builtin_popcount(J) < 2) continue;
      for (std::size_t j = 0; j < u && !found; ++j) {
        if (!(J & (1u << j))) continue;
        const std::uint32_t K = J & ~(1u << j);
        if (!(supp[i] & (1u << j))) continue;   // M[i,j] != 0
        if (supp[i] & K) continue;              // M[i,k] == 0 for k in J\{j}
        bool blocked = false;
        for (std::size_t o = 0; o < n && !blocked; ++o)
          if (o != i && (supp[o] & K) == 0) blocked = true;  // another all-zero row on K
        if (!blocked) {
          found = true;
          r.ok = true;
          r.witness_class = j;
          for (std::size_t k = 0; k < u; ++k)
            if (K & (1u << k)) r.witness_zeros.push_back(k);
        }
      }
    }
    if (!found) {
      rep.holds = false;
      for (std::size_t o = 0; o < n; ++o)
        if (o != i && (supp[o] & ~supp[i]) == 0) r.blocking_rows.push_back(o);
    }
  }
  return rep;
}

std::vector<std::size_t> optimal_assignment(const num::Tensor& score) {
  if (score.ndim() != 2 || score.shape()[0] != score.shape()[1])
    throw DimError("optimal_assignment expects a square score matrix");
  if (!score.all_finite()) throw ContractError("optimal_assignment: non-finite scores");
  const int n = static_cast<int>(score.shape()[0]);
  // Shortest-augmenting-path formulation over costs; negate to maximize.
  const double INF = 1e300;
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, INF);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = INF;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -score.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<std::size_t> out(n);
  for (int j = 1; j <= n; ++j)
    if (p[j]) out[p[j] - 1] = static_cast<std::size_t>(j - 1);
  return out;
}

std::optional<std::vector<std::size_t>> match_rows_up_to_permutation(
    const StructureMatrix& est, const StructureMatrix& truth) {
  if (est.n_concepts != truth.n_concepts || est.n_classes != truth.n_classes)
    return std::nullopt;
  const std::size_t n = est.n_concepts;
  if (n == 0) return std::vector<std::size_t>{};
  // Score exact row equality, let the assignment solver pick the pairing,
  // then verify it really is exact everywhere.
  num::Tensor s = num::Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      bool eq = true;
      for (std::size_t j = 0; j < est.n_classes; ++j)
        if (est.at(i, j) != truth.at(k, j)) {
          eq = false;
          break;
        }
      s.at(i, k) = eq ? 1.0 : 0.0;
    }
  std::vector<std::size_t> p = optimal_assignment(s);
  for (std::size_t i = 0; i < n; ++i)
    if (s.at(i, p[i]) != 1.0) return std::nullopt;
  return p;
}

SupportSet::SupportSet(std::size_t r, std::size_t c,
                       std::vector<std::pair<std::size_t, std::size_t>> e)
    : rows(r), cols(c), entries(std::move(e)) {
  for (const auto& [i, j] : entries)
    if (i >= rows || j >= cols) throw ContractError("support entry out of bounds");
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
}

bool SupportSet::contains(std::size_t i, std::size_t j) const {
  return std::binary_search(entries.begin(), entries.end(), std::make_pair(i, j));
}

std::vector<std::size_t> SupportSet::row_entries(std::size_t i) const {
  std::vector<std::size_t> out;
  for (const auto& [r, c] : entries)
    if (r == i) out.push_back(c);
  return out;
}

num::Tensor SupportSet::to_mask() const {
  num::Tensor m = num::Tensor::zeros(rows, cols);
  for (const auto& [i, j] : entries) m.at(i, j) = 1.0;
  return m;
}

SupportSet SupportSet::from_mask(const num::Tensor& mask) {
  if (mask.ndim() != 2) throw DimError("from_mask expects a rank-2 tensor");
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < mask.shape()[0]; ++i)
    for (std::size_t j = 0; j < mask.shape()[1]; ++j)
      if (mask.at(i, j) != 0.0) e.emplace_back(i, j);
  return SupportSet(mask.shape()[0], mask.shape()[1], std::move(e));
}

SupportSet threshold_support(const num::Tensor& m, double tau) {
  if (m.ndim() != 2) throw DimError("threshold_support expects a rank-2 tensor");
  if (!(tau >= 0.0)) throw ConfigError("threshold_support: tau must be >= 0");
  const double mx = num::max_abs(m);
  std::vector<std::pair<std::size_t, std::size_t>> e;
  if (mx > 0.0) {
    for (std::size_t i = 0; i < m.shape()[0]; ++i)
      for (std::size_t j = 0; j < m.shape()[1]; ++j)
        if (std::fabs(m.at(i, j)) / mx >= tau) e.emplace_back(i, j);
  }
  return SupportSet(m.shape()[0], m.shape()[1], std::move(e));
}

}  // namespace ci
