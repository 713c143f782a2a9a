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

#pragma once

// Losses and quality metrics. Each loss exists in two forms: a plain function
// on probability cubes and a differentiable tape operation over a batch of
// flattened cubes (one cube per row).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsg/algebra.hpp"
#include "nsg/autodiff.hpp"

namespace nsg {

inline constexpr double kLogFloor = 1e-12;

enum class LossName { kKl, kAssociator };

std::string to_string(LossName loss);
LossName parse_loss_name(const std::string& text);  // "kl" or "al"

// P{(e_i e_j) e_k = e_l} and P{e_i (e_j e_k) = e_l}, flattened over
// (i, j, k, l) lexicographically (length n^4).
struct TripleDistributions {
  std::size_t n = 0;
  std::vector<double> left;
  std::vector<double> right;
};

// sum x log(x / max(y, 1e-12)) with 0 log 0 = 0.
double kl_divergence(std::span<const double> x, std::span<const double> y);
double kl_divergence(const ProbabilityCube& x, const ProbabilityCube& y);

TripleDistributions triple_products(const ProbabilityCube& y);
TripleDistributions triple_products(std::size_t n, std::span<const double> y);

// KL(left, right) of the triple distributions. The symmetric variant averages
// both argument orders.
double associator_loss(const ProbabilityCube& y, bool symmetric = false);
double associator_loss(std::size_t n, std::span<const double> y,
                       bool symmetric = false);

// Whole-table matches between rounded outputs and originals.
double guess_rate(std::span<const CayleyTable> outputs,
                  std::span<const CayleyTable> originals);
double associative_rate(std::span<const CayleyTable> outputs);

namespace ad_ops {

// Batch mean of row-wise KL(x, y); either side may carry gradients.
ad::Var kl_divergence(ad::Var x, ad::Var y);
// Rows are flattened n^3 cubes; results are [batch, n^4].
ad::Var left_products(ad::Var y, std::size_t n);
ad::Var right_products(ad::Var y, std::size_t n);
// Batch mean associator loss.
ad::Var associator_loss(ad::Var y, std::size_t n, bool symmetric = false);

}  // namespace ad_ops

struct MetricsReport {
  double guess_rate = 0.0;
  double associative_rate = 0.0;
  std::size_t n_tables = 0;
  std::string loss_name;
  std::string checkpoint_id;
  double mask_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string dataset_hash;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

std::string to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& text);

}  // namespace nsg
