#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>

#include "ci/common.hpp"
#include "ci/oracle.hpp"
#include "ci/structure.hpp"
#include "doctest.h"

using namespace ci;
using num::Tensor;

namespace {

StructureMatrix from_rows(std::vector<std::vector<int>> rows) {
  StructureMatrix M(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      M.set(i, j, static_cast<std::uint8_t>(rows[i][j]));
  return M;
}

StructureMatrix random_matrix(Rng& rng, std::size_t n, std::size_t u, double density) {
  StructureMatrix M(n, u);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < u; ++j)
      M.set(i, j, rng.uniform() < density ? 1 : 0);
  return M;
}

}  // namespace

TEST_CASE("diversity holds on a hand-built antichain") {
  // Supports {0,3}, {1,2}, none containing the other; third concept with a
  // full row breaks it, so keep to two here.
  auto M = from_rows({{1, 0, 0, 1}, {0, 1, 1, 0}});
  auto rep = check_structural_diversity(M);
  CHECK(rep.holds);
  CHECK(rep.rows[0].ok);
  CHECK(rep.rows[1].ok);
  // Maximal witness: the zero set of each row.
  CHECK(rep.rows[0].witness_zeros == std::vector<std::size_t>{1, 2});
  CHECK(rep.rows[1].witness_zeros == std::vector<std::size_t>{0, 3});
}

TEST_CASE("full row fails diversity and is reported as such") {
  auto M = from_rows({{1, 0, 0, 1}, {0, 1, 1, 0}, {1, 1, 1, 1}});
  auto rep = check_structural_diversity(M);
  CHECK_FALSE(rep.holds);
  CHECK(rep.rows[0].ok);
  CHECK(rep.rows[1].ok);
  CHECK_FALSE(rep.rows[2].ok);
  CHECK(rep.rows[2].full_row);
}

TEST_CASE("contained support blocks the containing row") {
  // supp(row0) = {0,1}, supp(row1) = {0} contained in it: row0 must fail and
  // name row1; row1 itself is fine (row0 hits its zero set at class 1).
  auto M = from_rows({{1, 1, 0}, {1, 0, 0}});
  auto rep = check_structural_diversity(M);
  CHECK_FALSE(rep.holds);
  CHECK_FALSE(rep.rows[0].ok);
  CHECK(rep.rows[0].blocking_rows == std::vector<std::size_t>{1});
  CHECK(rep.rows[1].ok);
}

TEST_CASE("duplicate rows block each other") {
  auto M = from_rows({{1, 0}, {1, 0}});
  auto rep = check_structural_diversity(M);
  CHECK_FALSE(rep.holds);
  CHECK_FALSE(rep.rows[0].ok);
  CHECK_FALSE(rep.rows[1].ok);
}

TEST_CASE("two-class multi-animal example fails diversity") {
  // Two classes sharing concepts: fins unique to one class, legs to the
  // other, two concepts shared by both. Shared full rows sink it.
  auto M = from_rows({{1, 0}, {1, 0}, {1, 1}, {0, 1}});
  auto rep = check_structural_diversity(M);
  CHECK_FALSE(rep.holds);
  CHECK_FALSE(rep.rows[2].ok);
  CHECK(rep.rows[2].full_row);
  // The duplicated single-class rows also block each other.
  CHECK_FALSE(rep.rows[0].ok);
  CHECK_FALSE(rep.rows[1].ok);
  CHECK(rep.rows[3].ok);
}

TEST_CASE("single concept with one zero class passes") {
  auto M = from_rows({{1, 0}});
  auto rep = check_structural_diversity(M);
  CHECK(rep.holds);
  CHECK(rep.rows[0].ok);
  CHECK(rep.rows[0].witness_class == 0);
  CHECK(rep.rows[0].witness_zeros == std::vector<std::size_t>{1});
  // Class 1 is unused: advisory only.
  CHECK(rep.zero_columns == std::vector<std::size_t>{1});
}

TEST_CASE("single class can never satisfy diversity") {
  auto M = from_rows({{1}});
  auto rep = check_structural_diversity(M);
  CHECK_FALSE(rep.holds);
  CHECK(rep.rows[0].full_row);
}

TEST_CASE("checker equals brute force exhaustively for small shapes") {
  // Every matrix with n <= 3 rows, u <= 4 columns.
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t u = 1; u <= 4; ++u) {
      const std::size_t cells = n * u;
      for (std::uint32_t bitsv = 0; bitsv < (1u << cells); ++bitsv) {
        StructureMatrix M(n, u);
        for (std::size_t k = 0; k < cells; ++k)
          M.bits[k] = (bitsv >> k) & 1u;
        auto fast = check_structural_diversity(M);
        auto slow = brute_force_diversity(M);
        REQUIRE(fast.holds == slow.holds);
        for (std::size_t i = 0; i < n; ++i) REQUIRE(fast.rows[i].ok == slow.rows[i].ok);
      }
    }
  }
}

TEST_CASE("checker equals brute force on random 8x8 matrices") {
  Rng rng(1234);
  for (int rep = 0; rep < 1000; ++rep) {
    const double density = rng.uniform(0.15, 0.85);
    StructureMatrix M = random_matrix(rng, 8, 8, density);
    auto fast = check_structural_diversity(M);
    auto slow = brute_force_diversity(M);
    REQUIRE(fast.holds == slow.holds);
    for (std::size_t i = 0; i < 8; ++i) REQUIRE(fast.rows[i].ok == slow.rows[i].ok);
  }
}

TEST_CASE("brute force scale guard") {
  StructureMatrix M(2, 17);
  CHECK_THROWS_AS(brute_force_diversity(M), ScaleError);
}

TEST_CASE("structure json round trip") {
  auto M = from_rows({{1, 0, 0, 1}, {0, 1, 1, 0}, {1, 1, 1, 1}});
  auto back = StructureMatrix::from_json(M.to_json());
  CHECK(back == M);
}

TEST_CASE("structure json rejects malformed input") {
  CHECK_THROWS_AS(StructureMatrix::from_json("not json"), DataError);
  CHECK_THROWS_AS(StructureMatrix::from_json("{\"n_A\":1,\"u\":2}"), DataError);
  CHECK_THROWS_AS(StructureMatrix::from_json("{\"n_A\":1,\"u\":2,\"rows\":[[1,2]]}"),
                  DataError);
  CHECK_THROWS_AS(StructureMatrix::from_json("{\"n_A\":2,\"u\":2,\"rows\":[[1,0]]}"),
                  DataError);
}

TEST_CASE("validate rejects zero rows but accepts zero columns") {
  auto M = from_rows({{1, 0}, {0, 0}});
  CHECK_THROWS_AS(M.validate(), DataError);
  auto ok = from_rows({{1, 0}, {1, 0}});
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("optimal_assignment equals enumeration on random 5x5 scores") {
  Rng rng(777);
  for (int rep = 0; rep < 1000; ++rep) {
    Tensor s = Tensor::zeros(5, 5);
    for (double& v : s.vec()) v = rng.uniform(-10.0, 10.0);
    auto fast = optimal_assignment(s);
    auto slow = oracle::enumerate_assignment(s);
    double fast_total = 0.0, slow_total = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      fast_total += s.at(i, fast[i]);
      slow_total += s.at(i, slow[i]);
    }
    // Optimal value must match exactly; the argmax may tie.
    REQUIRE(fast_total == doctest::Approx(slow_total).epsilon(1e-12));
    // Must be a permutation.
    std::vector<std::size_t> sorted = fast;
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4});
  }
}

TEST_CASE("optimal_assignment input guards") {
  CHECK_THROWS_AS(optimal_assignment(Tensor::zeros(2, 3)), DimError);
  Tensor bad = Tensor::zeros(2, 2);
  bad.at(0, 0) = std::nan("");
  CHECK_THROWS_AS(optimal_assignment(bad), ContractError);
}

TEST_CASE("match_rows_up_to_permutation finds the exact bijection") {
  auto truth = from_rows({{1, 0, 0, 1}, {0, 1, 1, 0}, {1, 1, 1, 1}});
  auto est = from_rows({{1, 1, 1, 1}, {1, 0, 0, 1}, {0, 1, 1, 0}});
  auto p = match_rows_up_to_permutation(est, truth);
  REQUIRE(p.has_value());
  CHECK((*p)[0] == 2);
  CHECK((*p)[1] == 0);
  CHECK((*p)[2] == 1);
}

TEST_CASE("match_rows_up_to_permutation handles duplicates and rejects mismatch") {
  auto truth = from_rows({{1, 0}, {1, 0}, {0, 1}});
  auto est = from_rows({{0, 1}, {1, 0}, {1, 0}});
  REQUIRE(match_rows_up_to_permutation(est, truth).has_value());
  auto other = from_rows({{1, 1}, {1, 0}, {0, 1}});
  CHECK_FALSE(match_rows_up_to_permutation(other, truth).has_value());
  auto wrong_shape = from_rows({{1, 0}});
  CHECK_FALSE(match_rows_up_to_permutation(wrong_shape, truth).has_value());
}

TEST_CASE("support set dedups, sorts and bounds-checks") {
  SupportSet s(3, 3, {{2, 1}, {0, 0}, {2, 1}});
  CHECK(s.entries.size() == 2);
  CHECK(s.entries[0] == std::make_pair<std::size_t, std::size_t>(0, 0));
  CHECK(s.contains(2, 1));
  CHECK_FALSE(s.contains(1, 1));
  CHECK_THROWS_AS(SupportSet(2, 2, {{2, 0}}), ContractError);
}

TEST_CASE("threshold_support normalizes by the largest entry") {
  Tensor J = Tensor::from({10.0, 0.4, -0.04, 5.0}, {2, 2});
  SupportSet s = threshold_support(J, 0.05);
  CHECK(s.contains(0, 0));
  CHECK(s.contains(1, 1));
  // 0.4/10 = 0.04 < 0.05 excluded; |-0.04|/10 likewise.
  CHECK_FALSE(s.contains(0, 1));
  CHECK_FALSE(s.contains(1, 0));
  // Zero matrix -> empty support.
  CHECK(threshold_support(Tensor::zeros(2, 2), 0.05).entries.empty());
}

TEST_CASE("support mask round trip") {
  Tensor mask = Tensor::from({1.0, 0.0, 0.0, 1.0, 1.0, 0.0}, {2, 3});
  SupportSet s = SupportSet::from_mask(mask);
  Tensor back = s.to_mask();
  for (std::size_t i = 0; i < mask.size(); ++i) CHECK(mask.data()[i] == back.data()[i]);
}
