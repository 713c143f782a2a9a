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


#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "nsg/dataset.hpp"
#include "nsg/enumerate.hpp"
#include "nsg/error.hpp"
#include "nsg/gradcheck_suite.hpp"
#include "nsg/hash.hpp"
#include "nsg/network.hpp"
#include "nsg/objective.hpp"
#include "nsg/table_io.hpp"
#include "nsg/trainer.hpp"

namespace nsg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// --threads wins, then NSG_THREADS, then a single thread.
std::size_t resolve_threads(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("NSG_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
    throw InvalidArgument("NSG_THREADS must be a positive integer");
  }
  return 1;
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  std::stringstream in(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ',')) {
    if (i == 3) throw InvalidArgument("--ratios takes exactly three values");
    try {
      std::size_t used = 0;
      r[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw InvalidArgument("--ratios: not a number: '" + part + "'");
    }
    ++i;
  }
  if (i != 3) throw InvalidArgument("--ratios takes exactly three values");
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

struct EnumerateArgs {
  std::size_t n = 0;
  bool classes = false;
  std::string out;
  std::size_t threads = 0;
};

int cmd_enumerate(const EnumerateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.n < 1 || a.n > kMaxEnumerationCardinality) {
    throw InvalidArgument("-n must be in 1.." + std::to_string(kMaxEnumerationCardinality));
  }
  if (a.n == 6) err << "warning: n=6 has 15973608 tables and takes a long time\n";
  EnumerateOptions opts;
  opts.threads = resolve_threads(a.threads);
  const auto tables = enumerate_tables(a.n, opts);
  out << "n=" << a.n << "\n";
  out << "labeled_count=" << tables.size() << "\n";
  if (a.classes) {
    const auto reps = reduce_to_classes(tables, opts);
    out << "class_count=" << reps.size() << "\n";
    if (!a.out.empty()) write_tables(fs::path(a.out), a.n, reps);
  } else if (!a.out.empty()) {
    write_tables(fs::path(a.out), a.n, tables);
  }
  return kExitOk;
}

struct BuildArgs {
  std::size_t n = 5;
  std::string ratios = "0.1,0.1,0.8";
  double mask_fraction = 0.5;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 0;
};

int cmd_build(const BuildArgs& a, std::ostream& out) {
  if (a.n < 1 || a.n > kMaxEnumerationCardinality) {
    throw InvalidArgument("-n must be in 1.." + std::to_string(kMaxEnumerationCardinality));
  }
  BuildConfig cfg;
  cfg.n = a.n;
  cfg.ratios = parse_ratios(a.ratios);
  cfg.mask_fraction = a.mask_fraction;
  cfg.seed = a.seed;
  cfg.threads = resolve_threads(a.threads);
  SplitConfig{cfg.ratios, cfg.seed}.validate();
  NoiseConfig{cfg.mask_fraction, cfg.seed}.validate();
  const DatasetBundle bundle = build_dataset(cfg);
  write_dataset(bundle, fs::path(a.out));
  out << "train=" << bundle.train.size() << "\n";
  out << "valid=" << bundle.validation.size() << "\n";
  out << "test=" << bundle.test.size() << "\n";
  out << "dataset_hash=" << dataset_content_hash(fs::path(a.out)) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string loss = "al";
  bool symmetric = false;
  double lr = 1e-4;
  std::size_t epochs = 1000;
  std::size_t patience = 10;
  std::size_t batch = 256;
  std::size_t depth = 2;
  std::string activation = "relu";
  std::optional<double> mask_fraction;
  std::uint64_t seed = 0;
  std::string out;
  std::string history;
  std::size_t threads = 0;
  bool quiet = false;
};

json config_json(const TrainConfig& c, const TrainArgs& a, const DatasetBundle& b) {
  return json{{"config",
               {{"data", a.data},
                {"n", b.n},
                {"loss", to_string(c.loss)},
                {"symmetric_al", c.symmetric_al},
                {"learning_rate", c.learning_rate},
                {"max_epochs", c.max_epochs},
                {"patience", c.patience},
                {"batch_size", c.batch_size},
                {"depth", c.depth},
                {"activation", to_string(c.activation)},
                {"mask_fraction", c.mask_fraction},
                {"seed", a.seed},
                {"seeds",
                 {{"init", c.seeds.init}, {"mask", c.seeds.mask}, {"shuffle", c.seeds.shuffle}}},
                {"dataset_seed", b.meta.seed}}}};
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg;
  cfg.loss = parse_loss_name(a.loss);
  cfg.symmetric_al = a.symmetric;
  cfg.learning_rate = a.lr;
  cfg.max_epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.batch_size = a.batch;
  cfg.depth = a.depth;
  cfg.activation = parse_activation(a.activation);
  cfg.seeds = TrainSeeds::from_master(a.seed);
  cfg.threads = resolve_threads(a.threads);
  cfg.validate();

  const DatasetBundle bundle = read_dataset(fs::path(a.data));
  cfg.mask_fraction = a.mask_fraction.value_or(bundle.meta.mask_fraction);
  cfg.validate();

  auto on_epoch = [&](const EpochRecord& r) {
    if (a.quiet) return;
    out << "epoch=" << r.epoch << " train_loss=" << fmt(r.train_loss)
        << " validation_loss=" << fmt(r.validation_loss) << "\n";
    out.flush();
  };
  const TrainResult result = train(cfg, bundle, on_epoch);

  const fs::path ckpt(a.out);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(result.model, ckpt);
  const fs::path history = a.history.empty() ? fs::path(a.out + ".history.jsonl")
                                             : fs::path(a.history);
  write_text(history, config_json(cfg, a, bundle).dump() + "\n" +
                          history_jsonl(result.history));

  const auto& best = result.history.epochs.at(result.history.best_epoch);
  out << "initial_validation_loss=" << fmt(result.history.initial_validation_loss) << "\n";
  out << "best_epoch=" << result.history.best_epoch << "\n";
  out << "best_validation_loss=" << fmt(best.validation_loss) << "\n";
  out << "stop_reason=" << to_string(result.history.stop_reason) << "\n";
  out << "checkpoint=" << ckpt.string() << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string data;
  std::string checkpoint;
  std::string split = "test";
  std::string out;
  std::size_t batch = 256;
  std::size_t threads = 0;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  if (a.split != "test" && a.split != "valid") {
    throw InvalidArgument("--split must be test or valid");
  }
  const fs::path dir(a.data);
  const DatasetBundle bundle = read_dataset(dir);
  const ModelParams model = load_checkpoint(fs::path(a.checkpoint));
  check_compatible(model, bundle.n);

  EvaluateOptions opts;
  opts.batch_size = a.batch;
  opts.threads = resolve_threads(a.threads);
  const auto& pairs = a.split == "test" ? bundle.test : bundle.validation;
  const Evaluation eval = evaluate_detailed(model, pairs, opts);
  MetricsReport report = eval.report;
  report.checkpoint_id = hash_file(fs::path(a.checkpoint));
  report.dataset_hash = dataset_content_hash(dir);
  report.mask_fraction = bundle.meta.mask_fraction;
  report.seed = model.seed;

  if (!a.out.empty()) write_text(fs::path(a.out), to_json(report) + "\n");
  out << "split=" << a.split << "\n";
  out << "n_tables=" << report.n_tables << "\n";
  out << "guess_rate=" << fmt(report.guess_rate) << "\n";
  out << "associative_rate=" << fmt(report.associative_rate) << "\n";
  out << "invalid_cubes=" << eval.invalid_cubes << "\n";
  out << "known_cell_violations=" << eval.known_cell_violations << "\n";
  return kExitOk;
}

struct CompleteArgs {
  std::string input;
  std::optional<std::size_t> limit;
  std::string out;
};

int cmd_complete(const CompleteArgs& a, std::ostream& out) {
  if (a.limit && *a.limit == 0) throw InvalidArgument("--limit must be positive");
  const PartialFile file = read_partials(fs::path(a.input));
  if (file.tables.empty()) throw InvalidArgument(a.input + " holds no tables");
  std::vector<CayleyTable> all;
  for (std::size_t t = 0; t < file.tables.size(); ++t) {
    CompletionQuery q{file.tables[t], a.limit};
    const auto found = complete_partial(q);
    out << "table=" << t << " completions=" << found.size() << "\n";
    for (const auto& c : found) out << to_string(c) << "\n";
    all.insert(all.end(), found.begin(), found.end());
  }
  if (!a.out.empty()) write_tables(fs::path(a.out), file.n, all);
  return kExitOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 7;
  std::size_t points = 10;
  bool network = true;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  GradCheckSuiteOptions opts;
  opts.seed = a.seed;
  opts.points = a.points;
  opts.include_network = a.network;
  if (opts.points == 0) throw InvalidArgument("--points must be positive");
  const auto report = run_gradcheck_suite(opts);
  for (const auto& e : report.entries) {
    out << e.name << " max_relative_error=" << fmt(e.max_relative_error)
        << " checked=" << e.checked << "\n";
  }
  for (const auto& z : report.zero_entries) {
    out << z.name << " max_abs_analytic=" << fmt(z.max_abs_analytic)
        << " max_abs_numeric=" << fmt(z.max_abs_numeric) << " checked=" << z.checked << "\n";
  }
  out << "max_relative_error=" << fmt(report.max_relative_error()) << "\n";
  out << (report.passed() ? "gradcheck passed" : "gradcheck FAILED") << "\n";
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural completion of finite semigroup tables", "nsg"};
  app.require_subcommand(1);

  EnumerateArgs en;
  auto* enumerate = app.add_subcommand("enumerate", "Count (and list) semigroups of order n");
  enumerate->add_option("-n", en.n, "Cardinality")->required();
  enumerate->add_flag("--classes", en.classes, "Also reduce to equivalence classes");
  enumerate->add_option("--out", en.out, "Write the tables (or class representatives)");
  enumerate->add_option("--threads", en.threads, "Worker threads");

  BuildArgs bd;
  auto* build = app.add_subcommand("build-dataset", "Split classes, augment and mask");
  build->add_option("-n", bd.n, "Cardinality")->required();
  build->add_option("--ratios", bd.ratios, "train,valid,test class fractions");
  build->add_option("--mask-fraction", bd.mask_fraction, "Fraction of cells hidden");
  build->add_option("--seed", bd.seed, "Master seed");
  build->add_option("--out", bd.out, "Dataset directory")->required();
  build->add_option("--threads", bd.threads, "Worker threads");

  TrainArgs tr;
  auto* training = app.add_subcommand("train", "Train the denoising autoencoder");
  training->add_option("--data", tr.data, "Dataset directory")->required();
  training->add_option("--loss", tr.loss, "kl or al")->check(CLI::IsMember({"kl", "al"}));
  training->add_flag("--symmetric-al", tr.symmetric, "Average both KL directions in AL");
  training->add_option("--lr", tr.lr, "Adam learning rate");
  training->add_option("--epochs", tr.epochs, "Maximum epochs");
  training->add_option("--patience", tr.patience, "Early-stopping patience");
  training->add_option("--batch", tr.batch, "Batch size");
  training->add_option("--depth", tr.depth, "Hidden layers");
  training->add_option("--activation", tr.activation, "relu or tanh")
      ->check(CLI::IsMember({"relu", "tanh"}));
  training->add_option("--mask-fraction", tr.mask_fraction,
                       "Training mask fraction (default: the dataset's)");
  training->add_option("--seed", tr.seed, "Master seed");
  training->add_option("--out", tr.out, "Checkpoint path")->required();
  training->add_option("--history", tr.history, "History path (default: CKPT.history.jsonl)");
  training->add_option("--threads", tr.threads, "Worker threads");
  training->add_flag("--quiet", tr.quiet, "No per-epoch lines");

  EvaluateArgs ev;
  auto* evaluating = app.add_subcommand("evaluate", "Score a checkpoint on a dataset split");
  evaluating->add_option("--data", ev.data, "Dataset directory")->required();
  evaluating->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  evaluating->add_option("--split", ev.split, "test or valid");
  evaluating->add_option("--out", ev.out, "Report path (JSON)");
  evaluating->add_option("--batch", ev.batch, "Batch size");
  evaluating->add_option("--threads", ev.threads, "Worker threads");

  CompleteArgs co;
  auto* complete = app.add_subcommand("complete", "List associative completions");
  complete->add_option("--input", co.input, "Partial table file")->required();
  complete->add_option("--limit", co.limit, "Stop after this many completions");
  complete->add_option("--out", co.out, "Write the completions");

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--seed", gc.seed, "Seed");
  gradcheck->add_option("--points", gc.points, "Random points per case");
  gradcheck->add_flag("!--no-network", gc.network, "Skip the composed network check");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*enumerate) return cmd_enumerate(en, out, err);
    if (*build) return cmd_build(bd, out);
    if (*training) return cmd_train(tr, out);
    if (*evaluating) return cmd_evaluate(ev, out);
    if (*complete) return cmd_complete(co, out);
    if (*gradcheck) return cmd_gradcheck(gc, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace nsg::cli
