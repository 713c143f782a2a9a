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

#include <cstdint>
#include <string>
#include <vector>

#include "nsg/autodiff.hpp"

namespace nsg {

struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  ad::GradCheckResult worst;
};

// Gradients that vanish identically (inputs a train-mode batch norm cancels).
// Relative error is undefined there, so both sides are bounded in absolute
// value instead.
struct ZeroGradientEntry {
  std::string name;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
  std::size_t checked = 0;
};

inline constexpr double kRelativeTolerance = 1e-4;
inline constexpr double kZeroAnalyticTolerance = 1e-10;
inline constexpr double kZeroNumericTolerance = 1e-8;

struct GradCheckSuiteReport {
  std::vector<GradCheckEntry> entries;
  std::vector<ZeroGradientEntry> zero_entries;
  double max_relative_error() const;
  bool passed() const;
};

struct GradCheckSuiteOptions {
  std::uint64_t seed = 7;
  std::size_t points = 10;
  double step = 1e-5;
  // Network used for the composed network + associator loss check.
  std::size_t network_n = 3;
  std::size_t network_depth = 2;
  std::size_t network_batch = 4;
  // Coordinates sampled per parameter tensor of the composed check.
  std::size_t network_coordinates = 24;
  bool include_network = true;
};

// Finite-difference checks of every tape primitive and of the full network
// with the associator loss, at `points` seeded random points each.
GradCheckSuiteReport run_gradcheck_suite(const GradCheckSuiteOptions& options = {});

}  // namespace nsg
