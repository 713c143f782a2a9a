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

// Denoising autoencoder over flattened probability cubes: n^3 inputs, `depth`
// hidden layers of width n^5 (linear, batch norm, activation) and a grouped
// softmax output whose known cells are overwritten by the input's one-hot
// groups.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nsg/algebra.hpp"
#include "nsg/autodiff.hpp"

namespace nsg {

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

struct ModelParams {
  std::size_t n = 0;
  std::size_t depth = 0;
  std::uint64_t seed = 0;
  Activation activation = Activation::kRelu;
  std::string loss_name;  // provenance only, empty when untrained

  // Layer l maps dims[l] -> dims[l + 1]; weights[l] is [dims[l], dims[l+1]].
  std::vector<std::size_t> dims;
  std::vector<ad::Tensor> weights;
  std::vector<ad::Tensor> biases;
  // One entry per hidden layer.
  std::vector<ad::Tensor> gammas;
  std::vector<ad::Tensor> betas;
  std::vector<ad::BatchNormState> norms;

  // Trainable tensors in a fixed order: per layer weight and bias, then per
  // hidden layer gamma and beta.
  std::vector<ad::Tensor*> trainable();
  std::vector<const ad::Tensor*> trainable() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Cells of the input partial table that are filled.
struct KnownMask {
  std::size_t n = 0;
  std::vector<std::uint8_t> cells;  // n*n, row-major, 1 = known

  static KnownMask from_partial(const PartialTable& p);
  static KnownMask none(std::size_t n);
};

// Glorot-uniform weights, zero biases, unit gammas, fresh running statistics.
// Requires n >= 2 and depth >= 1.
ModelParams init_network(std::size_t n, std::size_t depth, std::uint64_t seed,
                         Activation activation = Activation::kRelu);

struct ForwardResult {
  ad::Var output;               // [batch, n^3]
  std::vector<ad::Var> params;  // leaves in ModelParams::trainable() order
};

// Records the forward pass on `tape`. Train mode updates running statistics.
ForwardResult forward_pass(ad::Tape& tape, ModelParams& model,
                           const ad::Tensor& batch,
                           std::span<const KnownMask> masks, ad::Mode mode);

// Same graph with caller-provided leaves (ModelParams::trainable() order) and
// batch-norm statistics; `model` supplies only the architecture.
ad::Var forward_from_leaves(ad::Tape& tape, const ModelParams& model,
                            std::span<const ad::Var> params,
                            std::vector<ad::BatchNormState>& norms,
                            const ad::Tensor& batch,
                            std::span<const KnownMask> masks, ad::Mode mode);

// Eval-mode output without touching the model.
ad::Tensor predict(const ModelParams& model, const ad::Tensor& batch,
                   std::span<const KnownMask> masks);

// Stack cubes of partial tables into a [batch, n^3] tensor with their masks.
ad::Tensor stack_cubes(std::span<const PartialTable> partials);
std::vector<KnownMask> masks_of(std::span<const PartialTable> partials);

// Throws DimensionMismatch unless the model was built for cardinality n.
void check_compatible(const ModelParams& model, std::size_t n);

// File: "NSGM1\n", one-line JSON header, raw little-endian doubles.
void save_checkpoint(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace nsg
