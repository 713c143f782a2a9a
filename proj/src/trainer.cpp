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

#include "nsg/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "nsg/error.hpp"
#include "nsg/random.hpp"

namespace nsg {

namespace {

using Clock = std::chrono::steady_clock;

// Calls fn(c) for every chunk index; chunks are independent so the result
// does not depend on the thread count.
void for_each_chunk(std::size_t chunks, std::size_t threads,
                    const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, chunks));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) fn(c);
    });
  }
  for (auto& th : pool) th.join();
}

ad::Tensor stack_tables(std::span<const CayleyTable> tables) {
  const std::size_t n = tables.front().size();
  const std::size_t cube = n * n * n;
  ad::Tensor out({tables.size(), cube});
  for (std::size_t r = 0; r < tables.size(); ++r) {
    const auto c = table_to_cube(tables[r]);
    std::copy(c.values().begin(), c.values().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(r * cube));
  }
  return out;
}

ad::Var batch_loss(ad::Tape& tape, ad::Var output, const ad::Tensor& targets,
                   LossName loss, std::size_t n, bool symmetric_al) {
  if (loss == LossName::kKl) {
    return ad_ops::kl_divergence(tape.constant(targets), output);
  }
  return ad_ops::associator_loss(output, n, symmetric_al);
}

struct Chunk {
  std::vector<PartialTable> partials;
  std::vector<CayleyTable> originals;
};

Chunk chunk_of(std::span<const MaskedPair> pairs) {
  Chunk c;
  for (const auto& [p, t] : pairs) {
    c.partials.push_back(p);
    c.originals.push_back(t);
  }
  return c;
}

}  // namespace

TrainSeeds TrainSeeds::from_master(std::uint64_t seed) {
  return {derive_seed(seed, "init"), derive_seed(seed, "train-mask"),
          derive_seed(seed, "shuffle")};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (max_epochs == 0) throw InvalidArgument("max_epochs must be positive");
  if (patience == 0) throw InvalidArgument("patience must be positive");
  if (batch_size < 2) throw InvalidArgument("batch size must be at least 2");
  if (depth == 0) throw InvalidArgument("depth must be positive");
  if (!(mask_fraction >= 0.0 && mask_fraction <= 1.0)) {
    throw InvalidArgument("mask fraction must lie in [0,1]");
  }
}

std::string to_string(StopReason reason) {
  return reason == StopReason::kMaxEpochs ? "max-epochs" : "early-stop";
}

double mean_loss(const ModelParams& model, std::span<const MaskedPair> pairs,
                 LossName loss, bool symmetric_al, std::size_t batch_size,
                 std::size_t threads) {
  if (pairs.empty()) throw InvalidArgument("mean_loss over no pairs");
  const std::size_t chunks = (pairs.size() + batch_size - 1) / batch_size;
  std::vector<double> sums(chunks, 0.0);
  for_each_chunk(chunks, threads, [&](std::size_t c) {
    const auto part = pairs.subspan(c * batch_size,
                                    std::min(batch_size, pairs.size() - c * batch_size));
    const Chunk chunk = chunk_of(part);
    check_compatible(model, chunk.partials.front().size());
    const ad::Tensor input = stack_cubes(chunk.partials);
    const auto masks = masks_of(chunk.partials);
    ad::Tape tape;
    auto& view = const_cast<ModelParams&>(model);
    const auto fwd = forward_pass(tape, view, input, masks, ad::Mode::kEval);
    const ad::Tensor targets =
        loss == LossName::kKl ? stack_tables(chunk.originals) : ad::Tensor();
    const ad::Var l = batch_loss(tape, fwd.output, targets, loss, model.n, symmetric_al);
    sums[c] = l.value().item() * static_cast<double>(part.size());
  });
  double total = 0.0;
  for (double s : sums) total += s;
  return total / static_cast<double>(pairs.size());
}

TrainResult train(const TrainConfig& cfg, const DatasetBundle& bundle,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (bundle.train.empty()) throw InvalidArgument("training set is empty");
  const std::size_t n = bundle.n;
  for (const auto& t : bundle.train) {
    if (t.size() != n) throw DimensionMismatch("training table of wrong cardinality");
  }

  ModelParams model = init_network(n, cfg.depth, cfg.seeds.init, cfg.activation);
  model.loss_name = to_string(cfg.loss);
  ad::AdamState adam;
  adam.learning_rate = cfg.learning_rate;
  Rng shuffle_rng(cfg.seeds.shuffle);
  Rng mask_rng(cfg.seeds.mask);
  const NoiseConfig noise{cfg.mask_fraction, cfg.seeds.mask};

  const bool has_validation = !bundle.validation.empty();
  TrainResult result{model, {}};
  if (has_validation) {
    result.history.initial_validation_loss =
        mean_loss(model, bundle.validation, cfg.loss, cfg.symmetric_al,
                  cfg.batch_size, cfg.threads);
  }
  double best = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(bundle.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto start = Clock::now();
    shuffle_rng.shuffle(std::span(order));

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      if (count < 2) continue;
      std::vector<PartialTable> partials;
      std::vector<CayleyTable> originals;
      partials.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        const CayleyTable& t = bundle.train[order[first + i]];
        partials.push_back(mask_random(t, noise, mask_rng));
        originals.push_back(t);
      }
      const ad::Tensor input = stack_cubes(partials);
      const auto masks = masks_of(partials);
      const ad::Tensor targets =
          cfg.loss == LossName::kKl ? stack_tables(originals) : ad::Tensor();

      ad::Tape tape;
      const auto fwd = forward_pass(tape, model, input, masks, ad::Mode::kTrain);
      const ad::Var loss =
          batch_loss(tape, fwd.output, targets, cfg.loss, n, cfg.symmetric_al);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " +
                             std::to_string(epoch) + ", batch starting at " +
                             std::to_string(first));
      }
      tape.backward(loss);
      std::vector<const ad::Tensor*> grads;
      for (ad::Var p : fwd.params) grads.push_back(&p.grad());
      const auto params = model.trainable();
      ad::adam_step(params, grads, adam);

      loss_sum += value * static_cast<double>(count);
      seen += count;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    record.validation_loss =
        has_validation ? mean_loss(model, bundle.validation, cfg.loss,
                                   cfg.symmetric_al, cfg.batch_size, cfg.threads)
                       : record.train_loss;
    if (!std::isfinite(record.validation_loss)) {
      throw NumericalError("non-finite validation loss at epoch " +
                           std::to_string(epoch));
    }
    record.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.validation_loss < best) {
      best = record.validation_loss;
      result.history.best_epoch = epoch;
      result.model = model;
    }
    if (epoch - result.history.best_epoch >= cfg.patience) {
      result.history.stop_reason = StopReason::kEarlyStop;
      break;
    }
  }
  return result;
}

Evaluation evaluate_detailed(const ModelParams& model,
                             std::span<const MaskedPair> pairs,
                             const EvaluateOptions& options) {
  if (pairs.empty()) throw InvalidArgument("evaluation set is empty");
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t n = model.n;
  const std::size_t chunks = (pairs.size() + batch - 1) / batch;

  Evaluation eval;
  std::vector<std::vector<CayleyTable>> outputs(chunks);
  std::vector<std::size_t> invalid(chunks, 0);
  std::vector<std::size_t> violations(chunks, 0);
  for_each_chunk(chunks, options.threads, [&](std::size_t c) {
    const auto part =
        pairs.subspan(c * batch, std::min(batch, pairs.size() - c * batch));
    const Chunk chunk = chunk_of(part);
    for (const auto& p : chunk.partials) check_compatible(model, p.size());
    const ad::Tensor out =
        predict(model, stack_cubes(chunk.partials), masks_of(chunk.partials));
    const std::size_t cube = n * n * n;
    for (std::size_t r = 0; r < part.size(); ++r) {
      const auto row = out.data().subspan(r * cube, cube);
      if (!satisfies_cube_invariants(n, row)) ++invalid[c];
      CayleyTable table = cube_to_table(n, row);
      if (!chunk.partials[r].agrees_with(table)) ++violations[c];
      outputs[c].push_back(std::move(table));
    }
  });

  std::vector<CayleyTable> originals;
  originals.reserve(pairs.size());
  for (const auto& [p, t] : pairs) originals.push_back(t);
  for (std::size_t c = 0; c < chunks; ++c) {
    eval.outputs.insert(eval.outputs.end(), outputs[c].begin(), outputs[c].end());
    eval.invalid_cubes += invalid[c];
    eval.known_cell_violations += violations[c];
  }
  eval.report.guess_rate = guess_rate(eval.outputs, originals);
  eval.report.associative_rate = associative_rate(eval.outputs);
  eval.report.n_tables = pairs.size();
  eval.report.loss_name = model.loss_name;
  return eval;
}

MetricsReport evaluate(const ModelParams& model, std::span<const MaskedPair> pairs,
                       const EvaluateOptions& options) {
  return evaluate_detailed(model, pairs, options).report;
}

std::string history_jsonl(const TrainHistory& history) {
  std::ostringstream out;
  for (const auto& e : history.epochs) {
    nlohmann::ordered_json j;
    j["type"] = "epoch";
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["validation_loss"] = e.validation_loss;
    j["seconds"] = e.seconds;
    out << j.dump() << '\n';
  }
  nlohmann::ordered_json s;
  s["type"] = "summary";
  s["epochs"] = history.epochs.size();
  s["best_epoch"] = history.best_epoch;
  s["stop_reason"] = to_string(history.stop_reason);
  s["initial_validation_loss"] = history.initial_validation_loss;
  out << s.dump() << '\n';
  return out.str();
}

RateSummary summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("summarize of an empty list");
  RateSummary s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace nsg
