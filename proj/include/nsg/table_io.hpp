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

// Text format: first line `n=<cardinality>`, then one table per line with n^2
// space-separated 1-based cells in row-major order. Partial tables write 0
// for unknown cells.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "nsg/algebra.hpp"

namespace nsg {

struct TableFile {
  std::size_t n = 0;
  std::vector<CayleyTable> tables;
};

struct PartialFile {
  std::size_t n = 0;
  std::vector<PartialTable> tables;
};

void write_tables(std::ostream& out, std::size_t n,
                  std::span<const CayleyTable> tables);
void write_partials(std::ostream& out, std::size_t n,
                    std::span<const PartialTable> tables);

// Throw MalformedFile on syntax errors or out-of-range cells.
TableFile read_tables(std::istream& in);
PartialFile read_partials(std::istream& in);

void write_tables(const std::filesystem::path& path, std::size_t n,
                  std::span<const CayleyTable> tables);
void write_partials(const std::filesystem::path& path, std::size_t n,
                    std::span<const PartialTable> tables);
TableFile read_tables(const std::filesystem::path& path);
PartialFile read_partials(const std::filesystem::path& path);

}  // namespace nsg
