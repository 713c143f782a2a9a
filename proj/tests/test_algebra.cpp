// Copyright 2026 The nsg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <set>

#include "nsg/algebra.hpp"
#include "nsg/error.hpp"
#include "test_util.hpp"

namespace nsg {
namespace {

using testing::naive_canonical;
using testing::naive_relabel;
using testing::zero_based;

const CayleyTable kKlein = CayleyTable::from_rows({"1234", "2143", "3412", "4321"});
const CayleyTable kNilpotent =
    CayleyTable::from_rows({"11111", "11111", "11212", "11121", "11212"});

TEST(Permutation, RejectsNonBijections) {
  EXPECT_THROW(Permutation({1, 1}), InvalidArgument);
  EXPECT_THROW(Permutation({0, 1}), InvalidArgument);
  EXPECT_THROW(Permutation({1, 3}), InvalidArgument);
  EXPECT_NO_THROW(Permutation({2, 1}));
}

TEST(Permutation, InverseComposesToIdentity) {
  for (const auto& p : all_permutations(4)) {
    const auto q = p.inverse();
    for (Element x = 1; x <= 4; ++x) EXPECT_EQ(q(p(x)), x);
  }
}

TEST(Permutation, AllPermutationsAreDistinctAndOrdered) {
  const auto perms = all_permutations(5);
  ASSERT_EQ(perms.size(), 120u);
  EXPECT_EQ(perms.front(), Permutation::identity(5));
  for (std::size_t i = 1; i < perms.size(); ++i) {
    EXPECT_TRUE(std::ranges::lexicographical_compare(perms[i - 1].images(),
                                                     perms[i].images()));
  }
}

TEST(CayleyTable, RejectsOutOfRangeCells) {
  EXPECT_THROW(CayleyTable(2, {1, 2, 3, 1}), InvalidArgument);
  EXPECT_THROW(CayleyTable(2, {0, 1, 1, 1}), InvalidArgument);
  EXPECT_THROW(CayleyTable(2, {1, 1, 1}), InvalidArgument);
  EXPECT_THROW(CayleyTable(0, {}), InvalidArgument);
}

TEST(CayleyTable, ReadsOneBasedCells) {
  EXPECT_EQ(kNilpotent(3, 3), 2);
  EXPECT_EQ(kNilpotent(4, 4), 2);
  EXPECT_EQ(kNilpotent(3, 4), 1);
  EXPECT_EQ(to_string(CayleyTable::from_rows({"12", "21"})), "12/21");
}

TEST(Associativity, KnownExamples) {
  EXPECT_TRUE(is_associative(kKlein));
  EXPECT_TRUE(is_associative(kNilpotent));
  EXPECT_TRUE(is_associative(CayleyTable::from_rows({"1"})));
  EXPECT_FALSE(is_associative(CayleyTable::from_rows({"22", "11"})));
  EXPECT_FALSE(is_associative(CayleyTable::from_rows({"21", "11"})));
}

TEST(Associativity, MatchesNaiveCheckOnAllMagmasOfOrderTwoAndThree) {
  for (std::size_t n : {2u, 3u}) {
    std::size_t total = 1;
    for (std::size_t c = 0; c < n * n; ++c) total *= n;
    std::vector<int> op(n * n, 0);
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t x = code;
      for (auto& v : op) {
        v = static_cast<int>(x % n);
        x /= n;
      }
      EXPECT_EQ(is_associative(testing::from_zero_based(n, op)),
                testing::naive_associative(n, op));
    }
  }
}

TEST(Relabel, MatchesNaiveRelabel) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = testing::random_magma(4, rng);
    for (const auto& p : all_permutations(4)) {
      std::vector<int> p0;
      for (Element e : p.images()) p0.push_back(e - 1);
      EXPECT_EQ(zero_based(relabel(t, p)), naive_relabel(4, zero_based(t), p0));
    }
  }
}

TEST(Relabel, PreservesAssociativityUnderAllPermutations) {
  for (const auto& p : all_permutations(5)) {
    EXPECT_TRUE(is_associative(relabel(kNilpotent, p)));
  }
  const auto bad = CayleyTable::from_rows({"22", "11"});
  for (const auto& p : all_permutations(2)) EXPECT_FALSE(is_associative(relabel(bad, p)));
}

TEST(Relabel, ComposesAndInverts) {
  Rng rng(9);
  const auto perms = all_permutations(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = testing::random_magma(4, rng);
    const auto& p = perms[rng.below(perms.size())];
    const auto& q = perms[rng.below(perms.size())];
    std::vector<Element> qp;
    for (Element x = 1; x <= 4; ++x) qp.push_back(q(p(x)));
    EXPECT_EQ(relabel(relabel(t, p), q), relabel(t, Permutation(qp)));
    EXPECT_EQ(relabel(relabel(t, p), p.inverse()), t);
  }
}

TEST(Relabel, RejectsSizeMismatch) {
  EXPECT_THROW(relabel(kKlein, Permutation::identity(3)), DimensionMismatch);
}

TEST(Opposite, IsAnInvolutionAndTransposes) {
  EXPECT_EQ(opposite(opposite(kNilpotent)), kNilpotent);
  EXPECT_EQ(opposite(CayleyTable::from_rows({"12", "12"})),
            CayleyTable::from_rows({"11", "22"}));
}

TEST(CanonicalForm, MatchesBruteForceMinimum) {
  Rng rng(17);
  for (std::size_t n : {1u, 2u, 3u, 4u}) {
    for (int trial = 0; trial < 40; ++trial) {
      const auto t = testing::random_magma(n, rng);
      EXPECT_EQ(zero_based(canonical_form(t)), naive_canonical(n, zero_based(t)));
    }
  }
  EXPECT_EQ(zero_based(canonical_form(kNilpotent)), naive_canonical(5, zero_based(kNilpotent)));
}

TEST(CanonicalForm, InvariantUnderRelabelAndOpposite) {
  Rng rng(23);
  const auto perms = all_permutations(5);
  for (int trial = 0; trial < 25; ++trial) {
    const auto t = testing::random_magma(5, rng);
    const auto c = canonical_form(t);
    EXPECT_EQ(canonical_form(c), c);
    EXPECT_EQ(canonical_form(opposite(t)), c);
    EXPECT_EQ(canonical_form(relabel(t, perms[rng.below(perms.size())])), c);
    EXPECT_LE(c, t);
  }
}

TEST(CanonicalForm, SeparatesNonEquivalentTables) {
  // Left-zero and right-zero bands are anti-isomorphic, so they share a class;
  // a null semigroup is in a different one.
  const auto left_zero = CayleyTable::from_rows({"111", "222", "333"});
  const auto right_zero = opposite(left_zero);
  const auto null = CayleyTable::from_rows({"111", "111", "111"});
  EXPECT_EQ(canonical_form(left_zero), canonical_form(right_zero));
  EXPECT_NE(canonical_form(left_zero), canonical_form(null));
}

TEST(PartialTable, ParsesUnknownMarkers) {
  const auto p = PartialTable::from_rows({"1?", ".0"});
  EXPECT_EQ(p.unknown_count(), 3u);
  EXPECT_EQ(p.at(1, 1), std::optional<Element>(1));
  EXPECT_FALSE(p.at(1, 2).has_value());
  EXPECT_TRUE(p.agrees_with(CayleyTable::from_rows({"12", "21"})));
  EXPECT_FALSE(p.agrees_with(CayleyTable::from_rows({"22", "21"})));
  EXPECT_THROW(PartialTable(2, {3, 0, 0, 0}), InvalidArgument);
}

TEST(PartialTable, SetAndClear) {
  auto p = PartialTable::unknown(3);
  EXPECT_EQ(p.unknown_count(), 9u);
  p.set(2, 3, 1);
  EXPECT_TRUE(p.is_known(2, 3));
  EXPECT_EQ(p.unknown_count(), 8u);
  p.set(2, 3, std::nullopt);
  EXPECT_EQ(p, PartialTable::unknown(3));
  EXPECT_THROW(p.set(1, 1, 4), InvalidArgument);
}

TEST(Cube, OneHotRoundTrip) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = testing::random_magma(4, rng);
    const auto c = table_to_cube(t);
    EXPECT_TRUE(satisfies_cube_invariants(4, c.values()));
    EXPECT_EQ(cube_to_table(c), t);
    for (Element i = 1; i <= 4; ++i)
      for (Element j = 1; j <= 4; ++j)
        for (Element k = 1; k <= 4; ++k) EXPECT_EQ(c(i, j, k), t(i, j) == k ? 1.0 : 0.0);
  }
}

TEST(Cube, FlatIndexLayout) {
  const auto t = CayleyTable::from_rows({"12", "22"});
  const auto cube = table_to_cube(t);
  const auto v = cube.values();
  // (i, j, k) -> (i-1) n^2 + (j-1) n + (k-1)
  EXPECT_EQ(v[0 * 4 + 0 * 2 + 0], 1.0);  // 1*1 = 1
  EXPECT_EQ(v[0 * 4 + 1 * 2 + 1], 1.0);  // 1*2 = 2
  EXPECT_EQ(v[1 * 4 + 0 * 2 + 1], 1.0);  // 2*1 = 2
  EXPECT_EQ(v[1 * 4 + 1 * 2 + 0], 0.0);
}

TEST(Cube, ArgmaxBreaksTiesToSmallestElement) {
  const std::vector<double> v{0.5, 0.5, 0.2, 0.8, 0.3, 0.7, 0.6, 0.4};
  EXPECT_EQ(cube_to_table(2, v), CayleyTable::from_rows({"12", "21"}));
}

TEST(Cube, PartialUsesUniformRows) {
  const auto c = partial_to_cube(PartialTable::from_rows({"1?", "?2"}));
  EXPECT_EQ(c(1, 1, 1), 1.0);
  EXPECT_EQ(c(1, 2, 1), 0.5);
  EXPECT_EQ(c(1, 2, 2), 0.5);
  EXPECT_EQ(c(2, 2, 2), 1.0);
  EXPECT_TRUE(satisfies_cube_invariants(2, c.values()));
}

TEST(Cube, RejectsInvalidValues) {
  EXPECT_THROW(ProbabilityCube(2, {0.5, 0.6, 1, 0, 1, 0, 1, 0}), InvalidArgument);
  EXPECT_THROW(ProbabilityCube(2, {-0.1, 1.1, 1, 0, 1, 0, 1, 0}), InvalidArgument);
  EXPECT_THROW(ProbabilityCube(2, {1, 0, 1}), InvalidArgument);
  EXPECT_FALSE(satisfies_cube_invariants(2, std::vector<double>{0.5, 0.5 + 1e-6, 1, 0, 1, 0, 1, 0}));
  EXPECT_TRUE(satisfies_cube_invariants(2, std::vector<double>{0.5, 0.5 + 1e-10, 1, 0, 1, 0, 1, 0}));
}

TEST(Residual, HandDerivedValues) {
  // 1*1 = 2, 2*1 = 1: (1*1)*1 = 1 but 1*(1*1) = 2.
  const auto c = table_to_cube(CayleyTable::from_rows({"22", "11"}));
  EXPECT_EQ(associator_residual(c, 1, 1, 1, 1), 1.0);
  EXPECT_EQ(associator_residual(c, 1, 1, 1, 2), -1.0);
  EXPECT_THROW(associator_residual(c, 3, 1, 1, 1), InvalidArgument);
}

TEST(Residual, VanishesExactlyForAssociativeTables) {
  const auto c = table_to_cube(kNilpotent);
  for (Element i = 1; i <= 5; ++i)
    for (Element j = 1; j <= 5; ++j)
      for (Element k = 1; k <= 5; ++k)
        for (Element l = 1; l <= 5; ++l) EXPECT_EQ(associator_residual(c, i, j, k, l), 0.0);
}

TEST(Residual, OneHotResidualDetectsEveryNonAssociativeMagma) {
  // All 16 operations on two elements.
  for (int code = 0; code < 16; ++code) {
    std::vector<Element> cells;
    for (int b = 0; b < 4; ++b) cells.push_back(static_cast<Element>(1 + ((code >> b) & 1)));
    const CayleyTable t(2, cells);
    const auto c = table_to_cube(t);
    bool any = false;
    for (Element i = 1; i <= 2; ++i)
      for (Element j = 1; j <= 2; ++j)
        for (Element k = 1; k <= 2; ++k)
          for (Element l = 1; l <= 2; ++l) any |= associator_residual(c, i, j, k, l) != 0.0;
    EXPECT_EQ(any, !is_associative(t));
  }
}

}  // namespace
}  // namespace nsg
