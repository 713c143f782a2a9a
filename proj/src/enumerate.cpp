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

#include "nsg/enumerate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "nsg/error.hpp"

namespace nsg {

namespace {

constexpr std::uint8_t kFree = 0xff;

void check_enumeration_range(std::size_t n) {
  if (n < 1 || n > kMaxEnumerationCardinality) {
    throw InvalidArgument("enumeration supports n in 1.." +
                          std::to_string(kMaxEnumerationCardinality) +
                          ", got " + std::to_string(n));
  }
}

// Backtracking over the unknown cells of a partial table in row-major order.
// Values are 0-based internally, kFree marks a cell not yet assigned.
class Completer {
 public:
  explicit Completer(const PartialTable& partial) : n_(partial.size()) {
    cells_.resize(n_ * n_);
    for (std::size_t c = 0; c < n_ * n_; ++c) {
      const Element v = partial.cells()[c];
      cells_[c] = v == kUnknown ? kFree : static_cast<std::uint8_t>(v - 1);
      if (v == kUnknown) free_.push_back(c);
    }
  }

  // False when the known cells already violate associativity.
  bool consistent() const {
    for (std::size_t x = 0; x < n_; ++x) {
      for (std::size_t y = 0; y < n_; ++y) {
        for (std::size_t z = 0; z < n_; ++z) {
          if (!check(x, y, z)) return false;
        }
      }
    }
    return true;
  }

  const std::vector<std::size_t>& free_cells() const { return free_; }

  // Fix the first `prefix.size()` free cells; false if that already prunes.
  bool assign_prefix(const std::vector<std::uint8_t>& prefix) {
    for (std::size_t d = 0; d < prefix.size(); ++d) {
      cells_[free_[d]] = prefix[d];
      if (!check_cell(free_[d])) return false;
    }
    depth0_ = prefix.size();
    return true;
  }

  // Returns false if the visitor asked to stop.
  bool run(const std::function<bool(const CayleyTable&)>& visit) {
    return search(depth0_, visit);
  }

 private:
  std::uint8_t at(std::size_t a, std::size_t b) const {
    return cells_[a * n_ + b];
  }

  // (x y) z == x (y z) whenever all four involved cells are assigned.
  bool check(std::size_t x, std::size_t y, std::size_t z) const {
    const std::uint8_t p = at(x, y);
    const std::uint8_t q = at(y, z);
    if (p == kFree || q == kFree) return true;
    const std::uint8_t l = at(p, z);
    const std::uint8_t r = at(x, q);
    if (l == kFree || r == kFree) return true;
    return l == r;
  }

  // Every triple that just became fully assigned uses cell (a, b) in one of
  // its four roles.
  bool check_cell(std::size_t c) const {
    const std::size_t a = c / n_;
    const std::size_t b = c % n_;
    for (std::size_t z = 0; z < n_; ++z) {
      if (!check(a, b, z)) return false;
    }
    for (std::size_t x = 0; x < n_; ++x) {
      if (!check(x, a, b)) return false;
    }
    for (std::size_t x = 0; x < n_; ++x) {
      for (std::size_t y = 0; y < n_; ++y) {
        if (at(x, y) == a && !check(x, y, b)) return false;
        if (at(x, y) == b && !check(a, x, y)) return false;
      }
    }
    return true;
  }

  bool search(std::size_t depth,
              const std::function<bool(const CayleyTable&)>& visit) {
    if (depth == free_.size()) {
      std::vector<Element> out(cells_.size());
      for (std::size_t c = 0; c < cells_.size(); ++c) out[c] = cells_[c] + 1u;
      return visit(CayleyTable(n_, std::move(out)));
    }
    const std::size_t c = free_[depth];
    for (std::size_t v = 0; v < n_; ++v) {
      cells_[c] = static_cast<std::uint8_t>(v);
      if (check_cell(c) && !search(depth + 1, visit)) {
        cells_[c] = kFree;
        return false;
      }
    }
    cells_[c] = kFree;
    return true;
  }

  std::size_t n_;
  std::vector<std::uint8_t> cells_;
  std::vector<std::size_t> free_;
  std::size_t depth0_ = 0;
};

// Enumerate completions with the first free cells split into independent
// subtrees handled by a pool of workers, then merged in subtree order.
std::vector<CayleyTable> parallel_completions(const PartialTable& partial,
                                              std::size_t threads) {
  Completer root(partial);
  if (!root.consistent()) return {};
  const std::size_t n = partial.size();
  const std::size_t split = std::min<std::size_t>(2, root.free_cells().size());
  if (threads <= 1 || split == 0) {
    std::vector<CayleyTable> out;
    root.run([&](const CayleyTable& t) {
      out.push_back(t);
      return true;
    });
    return out;
  }

  std::vector<std::vector<std::uint8_t>> prefixes;
  std::vector<std::uint8_t> prefix(split, 0);
  for (;;) {
    prefixes.push_back(prefix);
    std::size_t d = split;
    while (d > 0 && ++prefix[d - 1] == n) prefix[--d] = 0;
    if (d == 0) break;
  }

  std::vector<std::vector<CayleyTable>> results(prefixes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < prefixes.size(); i = next++) {
      Completer local(partial);
      if (!local.assign_prefix(prefixes[i])) continue;
      local.run([&](const CayleyTable& t) {
        results[i].push_back(t);
        return true;
      });
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, prefixes.size()); ++t) {
    pool.emplace_back(worker);
  }
  for (auto& th : pool) th.join();

  std::vector<CayleyTable> out;
  for (auto& r : results) {
    out.insert(out.end(), std::make_move_iterator(r.begin()),
               std::make_move_iterator(r.end()));
  }
  return out;
}

}  // namespace

std::size_t TableHash::operator()(const CayleyTable& t) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ t.size();
  for (Element x : t.cells()) h = (h ^ x) * 0x100000001b3ULL;
  return static_cast<std::size_t>(h);
}

void for_each_completion(const PartialTable& partial,
                         const std::function<bool(const CayleyTable&)>& visit) {
  Completer completer(partial);
  if (!completer.consistent()) return;
  completer.run(visit);
}

std::vector<CayleyTable> enumerate_tables(std::size_t n,
                                          const EnumerateOptions& options) {
  check_enumeration_range(n);
  return parallel_completions(PartialTable::unknown(n), options.threads);
}

std::uint64_t count_tables(std::size_t n, const EnumerateOptions& options) {
  check_enumeration_range(n);
  if (options.threads > 1) return enumerate_tables(n, options).size();
  std::uint64_t count = 0;
  for_each_completion(PartialTable::unknown(n), [&](const CayleyTable&) {
    ++count;
    return true;
  });
  return count;
}

std::vector<CayleyTable> reduce_to_classes(const std::vector<CayleyTable>& tables,
                                           const EnumerateOptions& options) {
  std::vector<CayleyTable> canon;
  canon.reserve(tables.size());
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  if (threads == 1) {
    for (const auto& t : tables) canon.push_back(canonical_form(t));
  } else {
    std::vector<std::optional<CayleyTable>> slots(tables.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < tables.size(); i += threads) {
          slots[i] = canonical_form(tables[i]);
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& s : slots) canon.push_back(std::move(*s));
  }
  std::unordered_set<CayleyTable, TableHash> unique(canon.begin(), canon.end());
  std::vector<CayleyTable> out(unique.begin(), unique.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CayleyTable> enumerate_classes(std::size_t n,
                                           const EnumerateOptions& options) {
  return reduce_to_classes(enumerate_tables(n, options), options);
}

std::vector<CayleyTable> complete_partial(const CompletionQuery& query) {
  if (query.limit && *query.limit == 0) {
    throw InvalidArgument("completion limit must be at least 1");
  }
  std::vector<CayleyTable> out;
  for_each_completion(query.partial, [&](const CayleyTable& t) {
    out.push_back(t);
    return !query.limit || out.size() < *query.limit;
  });
  return out;
}

std::vector<CayleyTable> orbit(const CayleyTable& t) {
  std::set<CayleyTable> seen;
  const CayleyTable op = opposite(t);
  for (const auto& p : all_permutations(t.size())) {
    seen.insert(relabel(t, p));
    seen.insert(relabel(op, p));
  }
  return {seen.begin(), seen.end()};
}

EnumerationReport enumeration_report(std::size_t n,
                                     const EnumerateOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const auto tables = enumerate_tables(n, options);
  const auto classes = reduce_to_classes(tables, options);
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  return {n, tables.size(), classes.size(), elapsed.count()};
}

std::string to_json(const EnumerationReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["labeled_count"] = report.labeled_count;
  j["class_count"] = report.class_count;
  j["elapsed_seconds"] = report.elapsed_seconds;
  return j.dump();
}

}  // namespace nsg
