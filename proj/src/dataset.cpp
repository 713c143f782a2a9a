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

#include "nsg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "nsg/enumerate.hpp"
#include "nsg/error.hpp"
#include "nsg/hash.hpp"
#include "nsg/table_io.hpp"

namespace nsg {

namespace {

constexpr const char* kFiles[] = {"train.tbl", "valid.tbl", "valid_mask.tbl",
                                  "test.tbl", "test_mask.tbl"};

std::size_t floor_count(double ratio, std::size_t total) {
  // Tolerate representation error such as 0.7 * 10 = 6.9999...
  return static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(total) + 1e-9));
}

std::vector<MaskedPair> mask_all(const std::vector<CayleyTable>& tables,
                                 const NoiseConfig& noise,
                                 std::string_view purpose) {
  std::vector<MaskedPair> out;
  out.reserve(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i) {
    Rng draw(derive_seed(noise.seed, purpose, i));
    out.emplace_back(mask_random(tables[i], noise, draw), tables[i]);
  }
  return out;
}

void check_pairs(const TableFile& originals, const PartialFile& masks,
                 std::size_t n, const std::string& what) {
  if (originals.n != n || masks.n != n) {
    throw DimensionMismatch(what + " files declare a cardinality different "
                            "from meta.json");
  }
  if (originals.tables.size() != masks.tables.size()) {
    throw MalformedFile(what + " table and mask files differ in length");
  }
  for (std::size_t i = 0; i < masks.tables.size(); ++i) {
    if (!masks.tables[i].agrees_with(originals.tables[i])) {
      throw MalformedFile(what + " mask " + std::to_string(i) +
                          " contradicts its original table");
    }
  }
}

std::vector<MaskedPair> zip(PartialFile masks, TableFile originals) {
  std::vector<MaskedPair> out;
  out.reserve(masks.tables.size());
  for (std::size_t i = 0; i < masks.tables.size(); ++i) {
    out.emplace_back(std::move(masks.tables[i]), std::move(originals.tables[i]));
  }
  return out;
}

}  // namespace

void SplitConfig::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw InvalidArgument("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvalidArgument("split ratios must sum to 1");
  }
}

void NoiseConfig::validate() const {
  if (!(mask_fraction >= 0.0 && mask_fraction <= 1.0)) {
    throw InvalidArgument("mask fraction must lie in [0,1]");
  }
}

std::size_t NoiseConfig::masked_cells(std::size_t n) const {
  return std::min(n * n, floor_count(mask_fraction, n * n));
}

ClassSplit split_classes(const std::vector<CayleyTable>& classes,
                         const SplitConfig& cfg) {
  cfg.validate();
  if (classes.empty()) throw InvalidArgument("no classes to split");
  std::vector<CayleyTable> shuffled = classes;
  Rng rng(cfg.seed);
  rng.shuffle(std::span(shuffled));

  const std::size_t total = shuffled.size();
  const std::size_t n_train = floor_count(cfg.ratios[0], total);
  const std::size_t n_valid =
      std::min(total - n_train, floor_count(cfg.ratios[1], total));

  ClassSplit split;
  auto first = shuffled.begin();
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(first + static_cast<std::ptrdiff_t>(n_train),
                          first + static_cast<std::ptrdiff_t>(n_train + n_valid));
  split.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_valid),
                    shuffled.end());
  for (auto* part : {&split.train, &split.validation, &split.test}) {
    std::sort(part->begin(), part->end());
  }
  return split;
}

std::vector<CayleyTable> augment(const std::vector<CayleyTable>& classes) {
  std::vector<CayleyTable> out;
  std::unordered_set<CayleyTable, TableHash> seen;
  for (const auto& rep : classes) {
    for (auto& t : orbit(rep)) {
      if (seen.insert(t).second) out.push_back(std::move(t));
    }
  }
  return out;
}

PartialTable mask_random(const CayleyTable& t, const NoiseConfig& cfg,
                         Rng& draw) {
  cfg.validate();
  const std::size_t n = t.size();
  const std::size_t m = cfg.masked_cells(n);
  std::vector<std::size_t> order(n * n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first m slots are a uniform m-subset.
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + draw.below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<Element> cells(t.cells().begin(), t.cells().end());
  for (std::size_t i = 0; i < m; ++i) cells[order[i]] = kUnknown;
  return PartialTable(n, std::move(cells));
}

DatasetBundle build_dataset(std::size_t n,
                            const std::vector<CayleyTable>& classes,
                            const BuildConfig& cfg) {
  SplitConfig split_cfg{cfg.ratios, derive_seed(cfg.seed, "split")};
  NoiseConfig noise{cfg.mask_fraction, derive_seed(cfg.seed, "mask")};
  noise.validate();
  const ClassSplit split = split_classes(classes, split_cfg);

  DatasetBundle bundle;
  bundle.n = n;
  bundle.meta = {cfg.seed, cfg.ratios, cfg.mask_fraction};
  bundle.train = augment(split.train);
  bundle.validation = mask_all(augment(split.validation), noise, "valid");
  bundle.test = mask_all(augment(split.test), noise, "test");
  return bundle;
}

DatasetBundle build_dataset(const BuildConfig& cfg) {
  return build_dataset(cfg.n,
                       enumerate_classes(cfg.n, EnumerateOptions{cfg.threads}),
                       cfg);
}

void write_dataset(const DatasetBundle& bundle,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t n = bundle.n;
  auto split_pairs = [](const std::vector<MaskedPair>& pairs) {
    std::pair<std::vector<PartialTable>, std::vector<CayleyTable>> out;
    for (const auto& [mask, original] : pairs) {
      out.first.push_back(mask);
      out.second.push_back(original);
    }
    return out;
  };
  const auto [valid_masks, valid] = split_pairs(bundle.validation);
  const auto [test_masks, test] = split_pairs(bundle.test);
  write_tables(dir / "train.tbl", n, bundle.train);
  write_tables(dir / "valid.tbl", n, valid);
  write_partials(dir / "valid_mask.tbl", n, valid_masks);
  write_tables(dir / "test.tbl", n, test);
  write_partials(dir / "test_mask.tbl", n, test_masks);

  nlohmann::ordered_json meta;
  meta["format"] = "nsg-dataset";
  meta["version"] = 1;
  meta["n"] = n;
  meta["seed"] = bundle.meta.seed;
  meta["ratios"] = bundle.meta.ratios;
  meta["mask_fraction"] = bundle.meta.mask_fraction;
  meta["masks_per_table"] = 1;
  meta["counts"] = {{"train", bundle.train.size()},
                    {"valid", bundle.validation.size()},
                    {"test", bundle.test.size()}};
  nlohmann::ordered_json sums;
  for (const char* name : kFiles) sums[name] = hash_file(dir / name);
  meta["checksums"] = sums;

  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << '\n';
  if (!out) throw Error("cannot write meta.json in '" + dir.string() + "'");
}

DatasetBundle read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw MalformedFile("missing meta.json in '" + dir.string() + "'");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("meta.json: ") + e.what());
  }

  DatasetBundle bundle;
  try {
    if (meta.at("version").get<int>() != 1) {
      throw VersionMismatch("unsupported dataset version");
    }
    bundle.n = meta.at("n").get<std::size_t>();
    bundle.meta.seed = meta.at("seed").get<std::uint64_t>();
    bundle.meta.ratios = meta.at("ratios").get<std::array<double, 3>>();
    bundle.meta.mask_fraction = meta.at("mask_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("meta.json: ") + e.what());
  }

  TableFile train = read_tables(dir / "train.tbl");
  if (train.n != bundle.n) {
    throw DimensionMismatch("train.tbl cardinality differs from meta.json");
  }
  bundle.train = std::move(train.tables);

  TableFile valid = read_tables(dir / "valid.tbl");
  PartialFile valid_masks = read_partials(dir / "valid_mask.tbl");
  check_pairs(valid, valid_masks, bundle.n, "validation");
  bundle.validation = zip(std::move(valid_masks), std::move(valid));

  TableFile test = read_tables(dir / "test.tbl");
  PartialFile test_masks = read_partials(dir / "test_mask.tbl");
  check_pairs(test, test_masks, bundle.n, "test");
  bundle.test = zip(std::move(test_masks), std::move(test));

  // Content is parsed first so malformed cells get a specific diagnosis.
  try {
    for (const char* name : kFiles) {
      const auto expected = meta.at("checksums").at(name).get<std::string>();
      if (hash_file(dir / name) != expected) {
        throw ChecksumMismatch(std::string(name) + " does not match its "
                               "checksum in meta.json");
      }
    }
    const auto& counts = meta.at("counts");
    if (counts.at("train").get<std::size_t>() != bundle.train.size() ||
        counts.at("valid").get<std::size_t>() != bundle.validation.size() ||
        counts.at("test").get<std::size_t>() != bundle.test.size()) {
      throw MalformedFile("table counts disagree with meta.json");
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("meta.json: ") + e.what());
  }
  return bundle;
}

std::string dataset_content_hash(const std::filesystem::path& dir) {
  Fnv1a64 h;
  for (const char* name : {"meta.json", "train.tbl", "valid.tbl",
                           "valid_mask.tbl", "test.tbl", "test_mask.tbl"}) {
    h.update(name);
    h.update(hash_file(dir / name));
  }
  return h.hex();
}

}  // namespace nsg
