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

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nsg/dataset.hpp"
#include "nsg/network.hpp"
#include "nsg/objective.hpp"

namespace nsg {

struct TrainSeeds {
  std::uint64_t init = 0;
  std::uint64_t mask = 1;
  std::uint64_t shuffle = 2;

  static TrainSeeds from_master(std::uint64_t seed);
};

struct TrainConfig {
  LossName loss = LossName::kAssociator;
  bool symmetric_al = false;
  double learning_rate = 1e-4;
  std::size_t max_epochs = 1000;
  std::size_t patience = 10;
  std::size_t batch_size = 256;
  double mask_fraction = 0.5;
  std::size_t depth = 2;
  Activation activation = Activation::kRelu;
  TrainSeeds seeds;
  std::size_t threads = 1;  // validation only; the update loop is sequential

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double seconds = 0.0;
};

enum class StopReason { kMaxEpochs, kEarlyStop };
std::string to_string(StopReason reason);

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  StopReason stop_reason = StopReason::kMaxEpochs;
  std::size_t best_epoch = 0;
  double initial_validation_loss = 0.0;  // untrained model
};

struct TrainResult {
  ModelParams model;  // parameters of the best validation epoch
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Per epoch: seeded shuffle, fresh masks per batch, Adam updates; then the
// validation loss on fixed masks in eval mode. Stops after `patience` epochs
// without improvement. Without validation pairs the training loss is
// monitored instead. A trailing batch of one table is skipped since batch
// norm needs two rows.
TrainResult train(const TrainConfig& cfg, const DatasetBundle& bundle,
                  const EpochCallback& on_epoch = {});

// Mean loss over pairs in eval mode, in chunks of `batch_size`.
double mean_loss(const ModelParams& model, std::span<const MaskedPair> pairs,
                 LossName loss, bool symmetric_al = false,
                 std::size_t batch_size = 256, std::size_t threads = 1);

struct EvaluateOptions {
  std::size_t batch_size = 256;
  std::size_t threads = 1;
};

struct Evaluation {
  MetricsReport report;
  std::vector<CayleyTable> outputs;
  std::size_t invalid_cubes = 0;         // rows breaking cube invariants
  std::size_t known_cell_violations = 0; // outputs changing a known cell
};

Evaluation evaluate_detailed(const ModelParams& model,
                             std::span<const MaskedPair> pairs,
                             const EvaluateOptions& options = {});
MetricsReport evaluate(const ModelParams& model, std::span<const MaskedPair> pairs,
                       const EvaluateOptions& options = {});

std::string history_jsonl(const TrainHistory& history);

struct RateSummary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double stddev = 0.0;  // sample standard deviation
};
RateSummary summarize(std::span<const double> values);

}  // namespace nsg
