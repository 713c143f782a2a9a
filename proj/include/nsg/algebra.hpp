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

// Finite magmas and semigroups: symbolic Cayley tables, partial tables,
// permutations and the probability-cube encoding used by the network.
//
// Elements are 1-based throughout, matching how multiplication tables are
// usually printed. Flat cube index of (i, j, k) is (i-1)n^2 + (j-1)n + (k-1).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nsg {

using Element = std::uint8_t;

// Largest cardinality representable with the Element type.
inline constexpr std::size_t kMaxCardinality = 255;

class Permutation {
 public:
  static Permutation identity(std::size_t n);
  // `images[i-1]` is the image of element i. Throws InvalidArgument unless it
  // is a bijection on {1..n}.
  explicit Permutation(std::vector<Element> images);

  std::size_t size() const { return images_.size(); }
  Element operator()(Element x) const { return images_[x - 1]; }
  Permutation inverse() const;
  std::span<const Element> images() const { return images_; }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<Element> images_;
};

// All n! permutations of {1..n} in lexicographic order of their image lists.
std::vector<Permutation> all_permutations(std::size_t n);

// A total binary operation on {1..n}.
class CayleyTable {
 public:
  // Row-major cells, each in 1..n. Throws InvalidArgument otherwise.
  CayleyTable(std::size_t n, std::vector<Element> cells);
  // Convenience for tests: rows given as strings of digits, e.g. {"11", "22"}.
  static CayleyTable from_rows(std::initializer_list<std::string> rows);

  std::size_t size() const { return n_; }
  Element operator()(Element i, Element j) const {
    return cells_[(i - 1) * n_ + (j - 1)];
  }
  std::span<const Element> cells() const { return cells_; }

  friend bool operator==(const CayleyTable&, const CayleyTable&) = default;
  // Lexicographic on the row-major flattening (tables of equal size).
  friend std::strong_ordering operator<=>(const CayleyTable& a,
                                          const CayleyTable& b) {
    if (auto c = a.n_ <=> b.n_; c != 0) return c;
    return a.cells_ <=> b.cells_;
  }

 private:
  std::size_t n_;
  std::vector<Element> cells_;
};

inline constexpr Element kUnknown = 0;

// An n x n grid whose cells are either a known element or unknown (stored 0).
class PartialTable {
 public:
  // Row-major cells in 0..n, where 0 marks an unknown cell.
  PartialTable(std::size_t n, std::vector<Element> cells);
  static PartialTable unknown(std::size_t n);
  static PartialTable from_table(const CayleyTable& t);
  // Rows as strings; '?', '.' or '0' mark unknown cells.
  static PartialTable from_rows(std::initializer_list<std::string> rows);

  std::size_t size() const { return n_; }
  std::optional<Element> at(Element i, Element j) const;
  bool is_known(Element i, Element j) const {
    return cells_[(i - 1) * n_ + (j - 1)] != kUnknown;
  }
  void set(Element i, Element j, std::optional<Element> value);
  std::size_t unknown_count() const;
  std::span<const Element> cells() const { return cells_; }

  // True when `t` matches every known cell.
  bool agrees_with(const CayleyTable& t) const;

  friend bool operator==(const PartialTable&, const PartialTable&) = default;

 private:
  std::size_t n_;
  std::vector<Element> cells_;
};

// Flat array of n^3 reals holding P(e_i * e_j = e_k).
class ProbabilityCube {
 public:
  static constexpr double kRowTolerance = 1e-9;

  // Validates range [0,1] and row sums. Throws InvalidArgument otherwise.
  ProbabilityCube(std::size_t n, std::vector<double> values);

  std::size_t size() const { return n_; }
  double operator()(Element i, Element j, Element k) const {
    return values_[((i - 1) * n_ + (j - 1)) * n_ + (k - 1)];
  }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const ProbabilityCube&,
                         const ProbabilityCube&) = default;

 private:
  std::size_t n_;
  std::vector<double> values_;
};

// Checks [0,1] range and per-(i,j) normalisation without constructing a cube.
bool satisfies_cube_invariants(std::size_t n, std::span<const double> values,
                               double tolerance = ProbabilityCube::kRowTolerance);

bool is_associative(const CayleyTable& t);
CayleyTable opposite(const CayleyTable& t);
// result(p(i), p(j)) = p(t(i, j)).
CayleyTable relabel(const CayleyTable& t, const Permutation& p);
// Lexicographically smallest table among relabelings of t and of opposite(t).
CayleyTable canonical_form(const CayleyTable& t);

ProbabilityCube table_to_cube(const CayleyTable& t);
// argmax over k with ties going to the smallest k.
CayleyTable cube_to_table(const ProbabilityCube& c);
CayleyTable cube_to_table(std::size_t n, std::span<const double> values);
ProbabilityCube partial_to_cube(const PartialTable& p);

// sum_m c(i,j,m) c(m,k,l) - c(i,m,l) c(j,k,m)
double associator_residual(const ProbabilityCube& c, Element i, Element j,
                           Element k, Element l);

std::string to_string(const CayleyTable& t);

}  // namespace nsg
