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

// Train/validation/test construction: class-level split, orbit augmentation,
// masking noise and the on-disk dataset directory.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "nsg/algebra.hpp"
#include "nsg/random.hpp"

namespace nsg {

struct SplitConfig {
  std::array<double, 3> ratios{0.1, 0.1, 0.8};  // train, validation, test
  std::uint64_t seed = 0;

  void validate() const;
};

struct NoiseConfig {
  double mask_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  // Number of cells masked in an n x n table: floor(fraction * n^2).
  std::size_t masked_cells(std::size_t n) const;
};

struct ClassSplit {
  std::vector<CayleyTable> train;
  std::vector<CayleyTable> validation;
  std::vector<CayleyTable> test;
};

using MaskedPair = std::pair<PartialTable, CayleyTable>;

struct DatasetMeta {
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.1, 0.1, 0.8};
  double mask_fraction = 0.5;

  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct DatasetBundle {
  std::size_t n = 0;
  DatasetMeta meta;
  std::vector<CayleyTable> train;  // unmasked; masked per batch in training
  std::vector<MaskedPair> validation;
  std::vector<MaskedPair> test;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

// Seeded shuffle, then floor(ratio * size) classes to train and validation;
// the remainder goes to test.
ClassSplit split_classes(const std::vector<CayleyTable>& classes,
                         const SplitConfig& cfg);

// Concatenated orbits of the representatives, in input order.
std::vector<CayleyTable> augment(const std::vector<CayleyTable>& classes);

// Exactly cfg.masked_cells(n) distinct cells, chosen uniformly without
// replacement from `draw`, become unknown. cfg.seed is not consulted.
PartialTable mask_random(const CayleyTable& t, const NoiseConfig& cfg,
                         Rng& draw);

struct BuildConfig {
  std::size_t n = 5;
  std::array<double, 3> ratios{0.1, 0.1, 0.8};
  double mask_fraction = 0.5;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

// Full pipeline from enumeration to masked validation/test pairs. Each
// validation/test table gets one fixed mask from its own derived stream.
DatasetBundle build_dataset(const BuildConfig& cfg);
DatasetBundle build_dataset(std::size_t n,
                            const std::vector<CayleyTable>& classes,
                            const BuildConfig& cfg);

// Directory layout: train.tbl, valid.tbl, valid_mask.tbl, test.tbl,
// test_mask.tbl and meta.json carrying counts and per-file checksums.
void write_dataset(const DatasetBundle& bundle,
                   const std::filesystem::path& dir);
DatasetBundle read_dataset(const std::filesystem::path& dir);

// Hash over every file of a dataset directory, for report provenance.
std::string dataset_content_hash(const std::filesystem::path& dir);

}  // namespace nsg
