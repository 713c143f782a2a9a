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

// Exact enumeration of finite semigroups by depth-first search over cells,
// pruning on associativity as soon as a triple becomes fully determined.
// Used as ground truth for everything the network produces.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nsg/algebra.hpp"

namespace nsg {

inline constexpr std::size_t kMaxEnumerationCardinality = 6;

struct EnumerateOptions {
  // Worker threads for subtree fan-out. Output order does not depend on it.
  std::size_t threads = 1;
};

struct EnumerationReport {
  std::size_t n = 0;
  std::uint64_t labeled_count = 0;
  std::uint64_t class_count = 0;
  double elapsed_seconds = 0.0;
};

struct CompletionQuery {
  PartialTable partial;
  std::optional<std::size_t> limit;
};

struct TableHash {
  std::size_t operator()(const CayleyTable& t) const noexcept;
};

// Visit every associative completion of `partial` in lexicographic order of
// the flattened cells. The visitor returns false to stop early.
void for_each_completion(const PartialTable& partial,
                         const std::function<bool(const CayleyTable&)>& visit);

// Every associative table on {1..n}, lexicographically ordered.
// n must be in 1..6; n = 6 takes a long time.
std::vector<CayleyTable> enumerate_tables(std::size_t n,
                                          const EnumerateOptions& options = {});
std::uint64_t count_tables(std::size_t n, const EnumerateOptions& options = {});

// One canonical representative per isomorphism/anti-isomorphism class,
// sorted lexicographically.
std::vector<CayleyTable> enumerate_classes(
    std::size_t n, const EnumerateOptions& options = {});

// Same reduction from an already computed list of associative tables.
std::vector<CayleyTable> reduce_to_classes(const std::vector<CayleyTable>& tables,
                                           const EnumerateOptions& options = {});

// All (or the first `limit`) associative tables agreeing with the known
// cells. Empty iff the partial table is not solvable.
std::vector<CayleyTable> complete_partial(const CompletionQuery& query);

// Relabelings of t and of its opposite, deduplicated and sorted.
std::vector<CayleyTable> orbit(const CayleyTable& t);

EnumerationReport enumeration_report(std::size_t n,
                                     const EnumerateOptions& options = {});
std::string to_json(const EnumerationReport& report);

}  // namespace nsg
