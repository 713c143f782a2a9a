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

#include <cmath>
#include <nlohmann/json.hpp>

#include "nsg/enumerate.hpp"
#include "nsg/error.hpp"
#include "nsg/objective.hpp"
#include "test_util.hpp"

namespace nsg {
namespace {

// Triple products by the definition, one output at a time.
TripleDistributions naive_triples(std::size_t n, const std::vector<double>& y) {
  auto at = [&](std::size_t i, std::size_t j, std::size_t k) { return y[(i * n + j) * n + k]; };
  TripleDistributions d{n, std::vector<double>(n * n * n * n), std::vector<double>(n * n * n * n)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          double left = 0, right = 0;
          for (std::size_t m = 0; m < n; ++m) {
            left += at(i, j, m) * at(m, k, l);
            right += at(i, m, l) * at(j, k, m);
          }
          const std::size_t idx = ((i * n + j) * n + k) * n + l;
          d.left[idx] = left;
          d.right[idx] = right;
        }
  return d;
}

double naive_kl(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0) s += x[i] * std::log(x[i] / std::max(y[i], 1e-12));
  }
  return s;
}

TEST(Kl, HandValues) {
  const std::vector<double> x{0.5, 0.5};
  const std::vector<double> y{0.25, 0.75};
  EXPECT_NEAR(kl_divergence(x, y), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
  EXPECT_EQ(kl_divergence(x, x), 0.0);
  // 0 log 0 = 0, and a zero in y is clamped rather than producing infinity.
  EXPECT_EQ(kl_divergence(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}), 0.0);
  EXPECT_NEAR(kl_divergence(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}),
              -std::log(1e-12), 1e-9);
  EXPECT_THROW(kl_divergence(x, std::vector<double>{1.0}), DimensionMismatch);
}

TEST(Kl, NonNegativeOnRandomDistributions) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = testing::random_cube(3, rng);
    const auto y = testing::random_cube(3, rng);
    const double kl = kl_divergence(x, y);
    EXPECT_GE(kl, 0.0);
    EXPECT_NEAR(kl, naive_kl(x, y), 1e-12);
  }
}

TEST(TripleProducts, MatchDefinition) {
  Rng rng(2);
  for (std::size_t n : {2u, 3u, 4u}) {
    const auto y = testing::random_cube(n, rng);
    const auto got = triple_products(n, y);
    const auto want = naive_triples(n, y);
    ASSERT_EQ(got.left.size(), want.left.size());
    for (std::size_t i = 0; i < got.left.size(); ++i) {
      EXPECT_NEAR(got.left[i], want.left[i], 1e-14);
      EXPECT_NEAR(got.right[i], want.right[i], 1e-14);
    }
  }
  EXPECT_THROW(triple_products(2, std::vector<double>(7)), DimensionMismatch);
}

TEST(TripleProducts, EveryOutputDistributionNormalises) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 4;
    const auto d = triple_products(n, testing::random_cube(n, rng));
    for (std::size_t g = 0; g < n * n * n; ++g) {
      double l = 0, r = 0;
      for (std::size_t k = 0; k < n; ++k) {
        l += d.left[g * n + k];
        r += d.right[g * n + k];
      }
      EXPECT_NEAR(l, 1.0, 1e-9);
      EXPECT_NEAR(r, 1.0, 1e-9);
    }
  }
}

TEST(AssociatorLoss, UniformTwoElementCubeHasHalfEverywhere) {
  const std::vector<double> y(8, 0.5);
  const auto d = triple_products(2, y);
  for (double v : d.left) EXPECT_EQ(v, 0.5);
  for (double v : d.right) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(associator_loss(2, y), 0.0);
}

TEST(AssociatorLoss, ZeroOnSemigroupsPositiveOnOtherMagmas) {
  for (const auto& t : enumerate_tables(3)) {
    EXPECT_NEAR(associator_loss(table_to_cube(t)), 0.0, 1e-12);
    EXPECT_NEAR(associator_loss(table_to_cube(t), true), 0.0, 1e-12);
  }
  int positive = 0;
  for (int code = 0; code < 16; ++code) {
    std::vector<Element> cells;
    for (int b = 0; b < 4; ++b) cells.push_back(static_cast<Element>(1 + ((code >> b) & 1)));
    const CayleyTable t(2, cells);
    const double al = associator_loss(table_to_cube(t));
    if (is_associative(t)) {
      EXPECT_EQ(al, 0.0);
    } else {
      EXPECT_GT(al, 0.0);
      ++positive;
    }
  }
  EXPECT_EQ(positive, 8);
}

TEST(AssociatorLoss, HandValueForOneHotMagma) {
  // For one-hot cubes every mismatching (i,j,k) contributes 1 * log(1/1e-12).
  const auto t = CayleyTable::from_rows({"22", "11"});
  int mismatches = 0;
  for (Element i = 1; i <= 2; ++i)
    for (Element j = 1; j <= 2; ++j)
      for (Element k = 1; k <= 2; ++k) mismatches += t(t(i, j), k) != t(i, t(j, k));
  EXPECT_NEAR(associator_loss(table_to_cube(t)), mismatches * -std::log(1e-12), 1e-9);
}

TEST(AssociatorLoss, SymmetricVariantAveragesBothDirections) {
  Rng rng(4);
  const auto y = testing::random_cube(3, rng);
  const auto d = naive_triples(3, y);
  EXPECT_NEAR(associator_loss(3, y), naive_kl(d.left, d.right), 1e-12);
  EXPECT_NEAR(associator_loss(3, y, true),
              0.5 * (naive_kl(d.left, d.right) + naive_kl(d.right, d.left)), 1e-12);
}

TEST(Rates, GuessAndAssociativeRates) {
  const auto a = CayleyTable::from_rows({"11", "11"});
  const auto b = CayleyTable::from_rows({"12", "21"});
  const auto bad = CayleyTable::from_rows({"22", "11"});
  const std::vector<CayleyTable> outputs{a, b, bad, a};
  const std::vector<CayleyTable> originals{a, a, bad, a};
  EXPECT_DOUBLE_EQ(guess_rate(outputs, originals), 0.75);
  EXPECT_DOUBLE_EQ(associative_rate(outputs), 0.75);
  EXPECT_THROW(guess_rate(outputs, std::vector<CayleyTable>{a}), DimensionMismatch);
  EXPECT_THROW(associative_rate(std::vector<CayleyTable>{}), InvalidArgument);
}

TEST(LossName, ParsesAndPrints) {
  EXPECT_EQ(parse_loss_name("kl"), LossName::kKl);
  EXPECT_EQ(parse_loss_name("al"), LossName::kAssociator);
  EXPECT_EQ(to_string(LossName::kAssociator), "al");
  EXPECT_THROW(parse_loss_name("mse"), InvalidArgument);
}

TEST(TapeLosses, AgreeWithPlainFunctions) {
  Rng rng(5);
  const std::size_t n = 3, batch = 4, d = 27;
  ad::Tensor y({batch, d});
  ad::Tensor x({batch, d});
  double al = 0, al_sym = 0, kl = 0;
  for (std::size_t r = 0; r < batch; ++r) {
    const auto yr = testing::random_cube(n, rng);
    const auto xr = testing::random_cube(n, rng);
    std::copy(yr.begin(), yr.end(), y.data().begin() + r * d);
    std::copy(xr.begin(), xr.end(), x.data().begin() + r * d);
    al += associator_loss(n, yr) / batch;
    al_sym += associator_loss(n, yr, true) / batch;
    kl += kl_divergence(xr, yr) / batch;
  }
  ad::Tape tape;
  EXPECT_NEAR(ad_ops::associator_loss(tape.constant(y), n).value().item(), al, 1e-12);
  EXPECT_NEAR(ad_ops::associator_loss(tape.constant(y), n, true).value().item(), al_sym, 1e-12);
  EXPECT_NEAR(ad_ops::kl_divergence(tape.constant(x), tape.constant(y)).value().item(), kl,
              1e-12);
  const auto left = ad_ops::left_products(tape.constant(y), n);
  EXPECT_EQ(left.value().shape(), (std::vector<std::size_t>{batch, 81}));
}

TEST(TapeLosses, ZeroTargetsGetZeroGradient) {
  ad::Tape tape;
  const ad::Var x = tape.variable(ad::Tensor({1, 2}, {0.0, 1.0}));
  const ad::Var y = tape.variable(ad::Tensor({1, 2}, {0.25, 0.75}));
  tape.backward(ad_ops::kl_divergence(x, y));
  EXPECT_TRUE(std::isfinite(x.grad()[0]));
  EXPECT_EQ(y.grad()[0], 0.0);
  EXPECT_NEAR(y.grad()[1], -1.0 / 0.75, 1e-14);
}

TEST(Metrics, JsonRoundTripAndKeys) {
  MetricsReport r{0.25, 0.8, 1000, "al", "abc123", 0.5, 42, "feed"};
  const auto text = to_json(r);
  EXPECT_EQ(metrics_from_json(text), r);
  const auto j = nlohmann::json::parse(text);
  for (const char* key : {"guess_rate", "associative_rate", "n_tables", "loss_name",
                          "checkpoint_id", "mask_fraction", "seed", "dataset_hash"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_THROW(metrics_from_json("{\"guess_rate\": 1}"), MalformedFile);
}

}  // namespace
}  // namespace nsg
