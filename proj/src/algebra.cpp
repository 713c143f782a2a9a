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

#include "nsg/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nsg/error.hpp"

namespace nsg {

namespace {

void check_cardinality(std::size_t n) {
  if (n == 0 || n > kMaxCardinality) {
    throw InvalidArgument("cardinality must be in 1.." +
                          std::to_string(kMaxCardinality) + ", got " +
                          std::to_string(n));
  }
}

std::vector<Element> parse_rows(std::initializer_list<std::string> rows,
                                bool allow_unknown) {
  const std::size_t n = rows.size();
  std::vector<Element> cells;
  cells.reserve(n * n);
  for (const auto& row : rows) {
    if (row.size() != n) {
      throw InvalidArgument("row '" + row + "' does not have " +
                            std::to_string(n) + " cells");
    }
    for (char ch : row) {
      if (allow_unknown && (ch == '?' || ch == '.' || ch == '0')) {
        cells.push_back(kUnknown);
      } else if (ch >= '1' && ch <= '9') {
        cells.push_back(static_cast<Element>(ch - '0'));
      } else {
        throw InvalidArgument(std::string("bad cell character '") + ch + "'");
      }
    }
  }
  return cells;
}

}  // namespace

// --- Permutation -----------------------------------------------------------

Permutation Permutation::identity(std::size_t n) {
  check_cardinality(n);
  std::vector<Element> images(n);
  std::iota(images.begin(), images.end(), Element{1});
  return Permutation(std::move(images));
}

Permutation::Permutation(std::vector<Element> images)
    : images_(std::move(images)) {
  check_cardinality(images_.size());
  std::vector<bool> seen(images_.size(), false);
  for (Element x : images_) {
    if (x < 1 || x > images_.size() || seen[x - 1]) {
      throw InvalidArgument("permutation is not a bijection on {1..n}");
    }
    seen[x - 1] = true;
  }
}

Permutation Permutation::inverse() const {
  std::vector<Element> inv(images_.size());
  for (std::size_t i = 0; i < images_.size(); ++i) {
    inv[images_[i] - 1] = static_cast<Element>(i + 1);
  }
  return Permutation(std::move(inv));
}

std::vector<Permutation> all_permutations(std::size_t n) {
  check_cardinality(n);
  std::vector<Element> images(n);
  std::iota(images.begin(), images.end(), Element{1});
  std::vector<Permutation> out;
  do {
    out.emplace_back(images);
  } while (std::next_permutation(images.begin(), images.end()));
  return out;
}

// --- CayleyTable -----------------------------------------------------------

CayleyTable::CayleyTable(std::size_t n, std::vector<Element> cells)
    : n_(n), cells_(std::move(cells)) {
  check_cardinality(n_);
  if (cells_.size() != n_ * n_) {
    throw DimensionMismatch("table of cardinality " + std::to_string(n_) +
                            " needs " + std::to_string(n_ * n_) +
                            " cells, got " + std::to_string(cells_.size()));
  }
  for (Element x : cells_) {
    if (x < 1 || x > n_) {
      throw InvalidArgument("cell value " + std::to_string(x) +
                            " outside 1.." + std::to_string(n_));
    }
  }
}

CayleyTable CayleyTable::from_rows(std::initializer_list<std::string> rows) {
  return CayleyTable(rows.size(), parse_rows(rows, false));
}

// --- PartialTable ----------------------------------------------------------

PartialTable::PartialTable(std::size_t n, std::vector<Element> cells)
    : n_(n), cells_(std::move(cells)) {
  check_cardinality(n_);
  if (cells_.size() != n_ * n_) {
    throw DimensionMismatch("partial table of cardinality " +
                            std::to_string(n_) + " needs " +
                            std::to_string(n_ * n_) + " cells, got " +
                            std::to_string(cells_.size()));
  }
  for (Element x : cells_) {
    if (x > n_) {
      throw InvalidArgument("cell value " + std::to_string(x) +
                            " outside 0.." + std::to_string(n_));
    }
  }
}

PartialTable PartialTable::unknown(std::size_t n) {
  check_cardinality(n);
  return PartialTable(n, std::vector<Element>(n * n, kUnknown));
}

PartialTable PartialTable::from_table(const CayleyTable& t) {
  return PartialTable(t.size(), {t.cells().begin(), t.cells().end()});
}

PartialTable PartialTable::from_rows(std::initializer_list<std::string> rows) {
  return PartialTable(rows.size(), parse_rows(rows, true));
}

std::optional<Element> PartialTable::at(Element i, Element j) const {
  const Element v = cells_[(i - 1) * n_ + (j - 1)];
  if (v == kUnknown) return std::nullopt;
  return v;
}

void PartialTable::set(Element i, Element j, std::optional<Element> value) {
  if (i < 1 || i > n_ || j < 1 || j > n_) {
    throw InvalidArgument("cell index out of range");
  }
  const Element v = value.value_or(kUnknown);
  if (v > n_) throw InvalidArgument("cell value out of range");
  cells_[(i - 1) * n_ + (j - 1)] = v;
}

std::size_t PartialTable::unknown_count() const {
  return static_cast<std::size_t>(
      std::count(cells_.begin(), cells_.end(), kUnknown));
}

bool PartialTable::agrees_with(const CayleyTable& t) const {
  if (t.size() != n_) return false;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    if (cells_[c] != kUnknown && cells_[c] != t.cells()[c]) return false;
  }
  return true;
}

// --- ProbabilityCube -------------------------------------------------------

bool satisfies_cube_invariants(std::size_t n, std::span<const double> values,
                               double tolerance) {
  if (n == 0 || values.size() != n * n * n) return false;
  for (std::size_t row = 0; row < n * n; ++row) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = values[row * n + k];
      if (!(v >= 0.0 && v <= 1.0)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance) return false;
  }
  return true;
}

ProbabilityCube::ProbabilityCube(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  check_cardinality(n_);
  if (values_.size() != n_ * n_ * n_) {
    throw DimensionMismatch("cube of cardinality " + std::to_string(n_) +
                            " needs " + std::to_string(n_ * n_ * n_) +
                            " values, got " + std::to_string(values_.size()));
  }
  if (!satisfies_cube_invariants(n_, values_)) {
    throw InvalidArgument(
        "cube values must lie in [0,1] and sum to 1 over k for every (i,j)");
  }
}

// --- Operations --------------------------------------------------------------

bool is_associative(const CayleyTable& t) {
  const std::size_t n = t.size();
  const auto cells = t.cells();
  auto mul = [&](std::size_t a, std::size_t b) -> std::size_t {
    return cells[a * n + b] - 1u;
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t ab = mul(a, b);
      for (std::size_t c = 0; c < n; ++c) {
        if (mul(ab, c) != mul(a, mul(b, c))) return false;
      }
    }
  }
  return true;
}

CayleyTable opposite(const CayleyTable& t) {
  const std::size_t n = t.size();
  std::vector<Element> cells(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cells[i * n + j] = t.cells()[j * n + i];
    }
  }
  return CayleyTable(n, std::move(cells));
}

CayleyTable relabel(const CayleyTable& t, const Permutation& p) {
  const std::size_t n = t.size();
  if (p.size() != n) {
    throw DimensionMismatch("permutation of size " + std::to_string(p.size()) +
                            " applied to table of cardinality " +
                            std::to_string(n));
  }
  std::vector<Element> cells(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t pi = p(static_cast<Element>(i + 1)) - 1u;
      const std::size_t pj = p(static_cast<Element>(j + 1)) - 1u;
      cells[pi * n + pj] = p(t.cells()[i * n + j]);
    }
  }
  return CayleyTable(n, std::move(cells));
}

CayleyTable canonical_form(const CayleyTable& t) {
  const std::size_t n = t.size();
  // Work 0-based. For q = p^-1 the relabeled table is
  // r(a, b) = p(t(q(a), q(b))); it is built row-major and abandoned as soon
  // as it compares greater than the best so far.
  std::vector<std::uint8_t> best(n * n);
  for (std::size_t c = 0; c < n * n; ++c) best[c] = t.cells()[c] - 1u;
  const CayleyTable op = opposite(t);
  std::vector<std::uint8_t> sources[2];
  for (int s = 0; s < 2; ++s) {
    const CayleyTable& src = s == 0 ? t : op;
    sources[s].resize(n * n);
    for (std::size_t c = 0; c < n * n; ++c) sources[s][c] = src.cells()[c] - 1u;
  }

  std::vector<std::uint8_t> q(n);
  std::vector<std::uint8_t> p(n);
  std::vector<std::uint8_t> candidate(n * n);
  std::iota(q.begin(), q.end(), std::uint8_t{0});
  do {
    for (std::size_t a = 0; a < n; ++a) p[q[a]] = static_cast<std::uint8_t>(a);
    for (const auto& src : sources) {
      bool less = false;
      bool abandon = false;
      for (std::size_t a = 0; a < n && !abandon; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          const std::size_t c = a * n + b;
          const std::uint8_t v = p[src[q[a] * n + q[b]]];
          candidate[c] = v;
          if (!less) {
            if (v > best[c]) {
              abandon = true;
              break;
            }
            if (v < best[c]) less = true;
          }
        }
      }
      if (!abandon && less) best = candidate;
    }
  } while (std::next_permutation(q.begin(), q.end()));

  std::vector<Element> cells(n * n);
  for (std::size_t c = 0; c < n * n; ++c) cells[c] = best[c] + 1u;
  return CayleyTable(n, std::move(cells));
}

ProbabilityCube table_to_cube(const CayleyTable& t) {
  const std::size_t n = t.size();
  std::vector<double> values(n * n * n, 0.0);
  for (std::size_t c = 0; c < n * n; ++c) {
    values[c * n + (t.cells()[c] - 1u)] = 1.0;
  }
  return ProbabilityCube(n, std::move(values));
}

CayleyTable cube_to_table(std::size_t n, std::span<const double> values) {
  if (values.size() != n * n * n) {
    throw DimensionMismatch("cube length does not match cardinality");
  }
  std::vector<Element> cells(n * n);
  for (std::size_t c = 0; c < n * n; ++c) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (values[c * n + k] > values[c * n + best]) best = k;
    }
    cells[c] = static_cast<Element>(best + 1);
  }
  return CayleyTable(n, std::move(cells));
}

CayleyTable cube_to_table(const ProbabilityCube& c) {
  return cube_to_table(c.size(), c.values());
}

ProbabilityCube partial_to_cube(const PartialTable& p) {
  const std::size_t n = p.size();
  std::vector<double> values(n * n * n, 0.0);
  const double uniform = 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < n * n; ++c) {
    const Element v = p.cells()[c];
    if (v == kUnknown) {
      std::fill_n(values.begin() + static_cast<std::ptrdiff_t>(c * n), n,
                  uniform);
    } else {
      values[c * n + (v - 1u)] = 1.0;
    }
  }
  return ProbabilityCube(n, std::move(values));
}

double associator_residual(const ProbabilityCube& c, Element i, Element j,
                           Element k, Element l) {
  const std::size_t n = c.size();
  for (Element x : {i, j, k, l}) {
    if (x < 1 || x > n) throw InvalidArgument("element index out of range");
  }
  double sum = 0.0;
  for (std::size_t m = 1; m <= n; ++m) {
    const auto e = static_cast<Element>(m);
    sum += c(i, j, e) * c(e, k, l) - c(i, e, l) * c(j, k, e);
  }
  return sum;
}

std::string to_string(const CayleyTable& t) {
  std::ostringstream out;
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out << '/';
    for (std::size_t j = 0; j < n; ++j) out << int(t.cells()[i * n + j]);
  }
  return out.str();
}

}  // namespace nsg
