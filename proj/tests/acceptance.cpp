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


// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. The full-scale training comparison needs hours of CPU time and only
// runs when NSG_ACCEPT_LONG=1; otherwise it reports SKIP.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "nsg/dataset.hpp"
#include "nsg/enumerate.hpp"
#include "nsg/gradcheck_suite.hpp"
#include "nsg/objective.hpp"
#include "nsg/trainer.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using namespace nsg;

enum class Verdict { kPass, kFail, kSkip };

struct Line {
  int id;
  std::string title;
  Verdict verdict;
  std::string detail;
};

std::vector<Line> g_lines;

void report(int id, const std::string& title, Verdict v, const std::string& detail) {
  const char* tag = v == Verdict::kPass ? "PASS" : v == Verdict::kFail ? "FAIL" : "SKIP";
  std::cout << "[" << tag << "] criterion " << id << ": " << title << " -- " << detail
            << std::endl;
  g_lines.push_back({id, title, v, detail});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Shared by criteria 1 and 3.
std::vector<CayleyTable> g_tables5;
std::vector<CayleyTable> g_classes5;

void enumeration_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> expected{1, 4, 18, 126, 1160};
  std::ostringstream d;
  bool ok = true;
  for (std::size_t n = 1; n <= 5; ++n) {
    const auto tables = enumerate_tables(n);
    const auto classes = reduce_to_classes(tables);
    ok &= classes.size() == expected[n - 1];
    d << "n=" << n << ":" << classes.size() << " ";
    if (n == 5) {
      ok &= tables.size() == 183732;
      d << "labeled(5)=" << tables.size();
      g_tables5 = tables;
      g_classes5 = classes;
    }
  }
  const double secs = seconds_since(t0);
  ok &= secs <= 15 * 60;
  d << " in " << std::fixed << std::setprecision(1) << secs << "s";
  report(1, "class counts 1,4,18,126,1160 and 183732 labeled tables",
         ok ? Verdict::kPass : Verdict::kFail, d.str());
}

void brute_force_cross_check() {
  const auto b2 = testing::brute_force_count(2);
  const auto b3 = testing::brute_force_count(3);
  const auto e2 = count_tables(2);
  const auto e3 = count_tables(3);
  const bool ok = b2 == 8 && b3 == 113 && e2 == b2 && e3 == b3;
  std::ostringstream d;
  d << "exhaustive 2^4 -> " << b2 << ", 3^9 -> " << b3 << "; search " << e2 << ", " << e3;
  report(2, "labeled counts match exhaustive magma filtering", ok ? Verdict::kPass : Verdict::kFail,
         d.str());
}

void orbit_sum_identity() {
  std::set<CayleyTable> seen;
  std::size_t total = 0;
  bool disjoint = true;
  for (const auto& r : g_classes5) {
    for (const auto& t : orbit(r)) {
      ++total;
      disjoint &= seen.insert(t).second;
    }
  }
  const bool ok = total == 183732 && disjoint && seen.size() == g_tables5.size();
  std::ostringstream d;
  d << "sum of " << g_classes5.size() << " orbit sizes = " << total
    << (disjoint ? ", pairwise disjoint" : ", OVERLAP");
  report(3, "orbit sizes sum to 183732 and orbits are disjoint",
         ok ? Verdict::kPass : Verdict::kFail, d.str());
}

void completion_non_uniqueness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto partial = PartialTable::from_rows({"11111", "11111", "11???", "11???", "11???"});
  const auto found = complete_partial({partial, std::nullopt});
  const std::set<CayleyTable> set(found.begin(), found.end());
  const bool left =
      set.contains(CayleyTable::from_rows({"11111", "11111", "11212", "11121", "11212"}));
  const bool right =
      set.contains(CayleyTable::from_rows({"11111", "11111", "11222", "11222", "11222"}));
  const double secs = seconds_since(t0);
  const bool ok = found.size() >= 2 && left && right && secs < 1.0;
  std::ostringstream d;
  d << found.size() << " completions, both printed tables "
    << (left && right ? "present" : "MISSING") << ", " << std::setprecision(3) << secs << "s";
  report(4, "non-unique completion of the printed partial table",
         ok ? Verdict::kPass : Verdict::kFail, d.str());
}

void loss_correctness() {
  Rng rng(2024);
  const std::size_t samples = 2000;
  double worst_assoc = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto& t = g_tables5[rng.below(g_tables5.size())];
    worst_assoc = std::max(worst_assoc, std::abs(associator_loss(table_to_cube(t))));
  }
  int non_assoc = 0, positive = 0;
  for (int code = 0; code < 16; ++code) {
    std::vector<Element> cells;
    for (int b = 0; b < 4; ++b) cells.push_back(static_cast<Element>(1 + ((code >> b) & 1)));
    const CayleyTable t(2, cells);
    if (is_associative(t)) continue;
    ++non_assoc;
    positive += associator_loss(table_to_cube(t)) > 0.0;
  }
  double worst_norm = 0.0;
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 2 + c % 4;
    const auto d = triple_products(n, testing::random_cube(n, rng));
    for (std::size_t g = 0; g < n * n * n; ++g) {
      double l = 0, r = 0;
      for (std::size_t k = 0; k < n; ++k) {
        l += d.left[g * n + k];
        r += d.right[g * n + k];
      }
      worst_norm = std::max({worst_norm, std::abs(l - 1), std::abs(r - 1)});
    }
  }
  const bool ok = worst_assoc <= 1e-9 && non_assoc == 8 && positive == 8 && worst_norm <= 1e-9;
  std::ostringstream d;
  d << "max AL on " << samples << " sampled n=5 semigroups = " << worst_assoc << "; AL>0 on "
    << positive << "/" << non_assoc << " non-associative n=2 magmas; max normalisation error "
    << worst_norm;
  report(5, "associator loss zero on semigroups, positive otherwise, triples normalised",
         ok ? Verdict::kPass : Verdict::kFail, d.str());
}

void gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_gradcheck_suite({});
  std::ostringstream d;
  d << "max relative error " << r.max_relative_error() << " over " << r.entries.size()
    << " checks (10 points each, n=3 network)";
  for (const auto& z : r.zero_entries) {
    d << "; " << z.checked << " exact-zero coordinates bounded by " << z.max_abs_analytic
      << "/" << z.max_abs_numeric;
  }
  d << ", " << std::fixed << std::setprecision(1) << seconds_since(t0) << "s";
  report(6, "reverse mode vs central differences <= 1e-4",
         r.passed() ? Verdict::kPass : Verdict::kFail, d.str());
}

void training_reproduction() {
  const char* flag = std::getenv("NSG_ACCEPT_LONG");
  if (!flag || std::string(flag) != "1") {
    report(7, "full-scale AL vs KL training", Verdict::kSkip,
           "long job (hours of CPU); set NSG_ACCEPT_LONG=1 to run");
    return;
  }
  std::size_t runs = 5;
  if (const char* r = std::getenv("NSG_ACCEPT_LONG_RUNS")) runs = std::strtoul(r, nullptr, 10);
  std::size_t threads = 1;
  if (const char* t = std::getenv("NSG_THREADS")) threads = std::strtoul(t, nullptr, 10);
  const auto classes = g_classes5.empty() ? enumerate_classes(5) : g_classes5;
  std::size_t ordered = 0;
  double best_assoc = -1, best_guess = 0;
  std::ostringstream d;
  for (std::size_t s = 0; s < runs; ++s) {
    BuildConfig bc;
    bc.seed = s;
    const auto bundle = build_dataset(5, classes, bc);
    TrainConfig cfg;
    cfg.seeds = TrainSeeds::from_master(s);
    cfg.threads = threads;
    cfg.loss = LossName::kAssociator;
    const auto al = evaluate(train(cfg, bundle).model, bundle.test, {256, threads});
    cfg.loss = LossName::kKl;
    const auto kl = evaluate(train(cfg, bundle).model, bundle.test, {256, threads});
    ordered += kl.associative_rate < al.associative_rate;
    if (al.associative_rate > best_assoc) {
      best_assoc = al.associative_rate;
      best_guess = al.guess_rate;
    }
    d << "seed " << s << ": AL assoc " << al.associative_rate << " guess " << al.guess_rate
      << ", KL assoc " << kl.associative_rate << "; ";
  }
  const bool ok = 5 * ordered >= 4 * runs && best_assoc >= 0.75 && best_guess >= 0.10;
  d << "ordering held in " << ordered << "/" << runs;
  report(7, "full-scale AL vs KL training", ok ? Verdict::kPass : Verdict::kFail, d.str());
}

// Runs build-dataset, train and evaluate through the command line with the
// smoke configuration.
bool smoke_pipeline(const fs::path& dir, std::string& log) {
  std::ostringstream out, err;
  auto step = [&](std::vector<std::string> args) {
    const int code = cli::run(args, out, err);
    if (code != 0) log += "'" + args[0] + "' exited " + std::to_string(code) + ": " + err.str();
    return code == 0;
  };
  const auto data = (dir / "data").string();
  const auto ckpt = (dir / "model.ckpt").string();
  return step({"build-dataset", "-n", "5", "--ratios", "0.05,0.05,0.90", "--mask-fraction", "0.5",
               "--seed", "11", "--out", data}) &&
         step({"train", "--data", data, "--loss", "al", "--depth", "1", "--epochs", "20",
               "--seed", "3", "--out", ckpt, "--quiet"}) &&
         step({"evaluate", "--data", data, "--checkpoint", ckpt, "--out",
               (dir / "report.json").string()});
}

const fs::path g_root = fs::temp_directory_path() / "nsg_acceptance";

void smoke_training(bool pipeline_ok, double secs) {
  if (!pipeline_ok) {
    report(8, "smoke training", Verdict::kFail, "pipeline did not complete");
    return;
  }
  const auto dir = g_root / "run_a";
  std::istringstream history(slurp(dir / "model.ckpt.history.jsonl"));
  std::string line;
  double initial = 0, best = 0;
  while (std::getline(history, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("type", "") == "summary") initial = j.at("initial_validation_loss");
  }
  std::istringstream again(slurp(dir / "model.ckpt.history.jsonl"));
  std::size_t best_epoch = 0;
  std::vector<double> losses;
  while (std::getline(again, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("type", "") == "epoch") losses.push_back(j.at("validation_loss"));
    if (j.value("type", "") == "summary") best_epoch = j.at("best_epoch");
  }
  best = losses.at(best_epoch);
  const auto bundle = read_dataset(dir / "data");
  const auto model = load_checkpoint(dir / "model.ckpt");
  const auto eval = evaluate_detailed(model, bundle.test);
  const double drop = 1.0 - best / initial;
  const bool ok = drop >= 0.20 && eval.invalid_cubes == 0 && eval.known_cell_violations == 0 &&
                  losses.size() == 20 && secs <= 600;
  std::ostringstream d;
  d << "validation AL " << initial << " -> " << best << " (" << std::fixed << std::setprecision(1)
    << 100 * drop << "% lower) at epoch " << best_epoch << "; " << eval.outputs.size()
    << " outputs, " << eval.invalid_cubes << " invalid cubes, " << eval.known_cell_violations
    << " known-cell changes; test assoc rate " << std::setprecision(4)
    << eval.report.associative_rate << "; pipeline " << std::setprecision(1) << secs << "s";
  report(8, "smoke training (n=5, depth 1, 20 epochs, 5% of classes)",
         ok ? Verdict::kPass : Verdict::kFail, d.str());
}

void determinism(bool both_ok, const std::string& log) {
  if (!both_ok) {
    report(9, "determinism", Verdict::kFail, "pipeline failed: " + log);
    return;
  }
  std::vector<std::string> differing;
  std::size_t compared = 0;
  for (const char* f : {"data/train.tbl", "data/valid.tbl", "data/valid_mask.tbl",
                        "data/test.tbl", "data/test_mask.tbl", "data/meta.json", "model.ckpt",
                        "report.json"}) {
    ++compared;
    if (slurp(g_root / "run_a" / f) != slurp(g_root / "run_b" / f)) differing.push_back(f);
  }
  std::ostringstream d;
  d << compared << " files compared";
  for (const auto& f : differing) d << ", differs: " << f;
  report(9, "two seeded smoke pipelines are byte-identical",
         differing.empty() ? Verdict::kPass : Verdict::kFail, d.str());
}

}  // namespace

int main() {
  enumeration_oracle();
  brute_force_cross_check();
  orbit_sum_identity();
  completion_non_uniqueness();
  loss_correctness();
  gradient_fidelity();
  training_reproduction();

  fs::remove_all(g_root);
  fs::create_directories(g_root);
  std::string log;
  auto t0 = std::chrono::steady_clock::now();
  const bool a = smoke_pipeline(g_root / "run_a", log);
  const double secs = seconds_since(t0);
  smoke_training(a, secs);
  const bool b = a && smoke_pipeline(g_root / "run_b", log);
  determinism(a && b, log);
  fs::remove_all(g_root);

  std::size_t failed = 0, skipped = 0;
  for (const auto& l : g_lines) {
    failed += l.verdict == Verdict::kFail;
    skipped += l.verdict == Verdict::kSkip;
  }
  std::cout << (failed == 0 ? "acceptance: ok" : "acceptance: FAILED") << " ("
            << g_lines.size() << " criteria, " << g_lines.size() - failed - skipped
            << " passed, " << failed << " failed, " << skipped << " skipped)" << std::endl;
  return failed == 0 ? 0 : 1;
}
