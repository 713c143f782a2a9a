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

// A small reverse-mode automatic differentiation engine over dense row-major
// tensors of doubles. Only the primitives the autoencoder and its losses need
// are provided; other modules add their own through Tape::record.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <new>
#include <span>
#include <utility>
#include <vector>

namespace nsg::ad {

// Vectorised kernels pick their split points from the buffer address, so
// storage is over-aligned to keep results bit-identical from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlignment = 64;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  // Plain operator new plus padding; glibc's aligned allocation path
  // fragments the heap badly under the tape's allocate/free pattern.
  T* allocate(std::size_t count) {
    char* raw = static_cast<char*>(::operator new(count * sizeof(T) + kAlignment + sizeof(void*)));
    const auto addr = reinterpret_cast<std::uintptr_t>(raw) + sizeof(void*);
    char* aligned = raw + (sizeof(void*) + (kAlignment - addr % kAlignment) % kAlignment);
    reinterpret_cast<void**>(aligned)[-1] = raw;
    return reinterpret_cast<T*>(aligned);
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(reinterpret_cast<void**>(p)[-1]);
  }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  // Leading dimension, and the product of the remaining ones.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return rows() == 0 ? 0 : size() / rows(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double, AlignedAllocator<double>> data_;
};

enum class Mode { kTrain, kEval };

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // grads[i] is null when input i needs no gradient, otherwise a zeroed (or
  // partially accumulated) buffer of the input's shape to add into.
  using BackwardFn =
      std::function<void(const Tensor& grad_out, std::span<Tensor* const> grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Leaf that refers to `value` without copying; it must outlive the tape.
  Var parameter(const Tensor& value);

  // Append the result of a primitive. `backward` is dropped when no input
  // requires a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  // Reverse sweep from a scalar loss. Gradients of earlier sweeps are reset.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;

    const Tensor& value() const { return borrowed ? *borrowed : owned; }
  };

  void check_owned(Var v) const;
  Tensor& grad_buffer(std::size_t id);

  std::vector<Node> nodes_;
};

// x[batch, d_in] * W[d_in, d_out] + b[d_out]
Var linear(Var x, Var weight, Var bias);
Var relu(Var x);
Var tanh(Var x);

struct BatchNormState {
  static constexpr double kMomentum = 0.1;
  static constexpr double kEpsilon = 1e-5;

  Tensor running_mean;  // starts at 0
  Tensor running_var;   // starts at 1

  static BatchNormState fresh(std::size_t features);
  friend bool operator==(const BatchNormState&, const BatchNormState&) = default;
};

// Train mode normalises by batch statistics (biased variance) and updates the
// running statistics with momentum 0.1 (unbiased variance). Eval mode uses the
// running statistics. Throws InvalidArgument for batch < 2 in train mode.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode);

// Softmax over each consecutive block of `group` entries of every row.
Var softmax_groups(Var x, std::size_t group);

// For every row r and group g with known[r * groups + g] set, the output
// group is replaced by source's group and carries no gradient.
Var overwrite_groups(Var x, const Tensor& source, std::span<const std::uint8_t> known,
                     std::size_t group);

Var add(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
// sum_i weights[i] * x[i]
Var weighted_sum(Var x, const Tensor& weights);

struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update. Moments are allocated on the first call.
void adam_step(std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, AdamState& state);

// Builds a scalar on `tape` from leaves holding the parameters.
using Objective = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct Coordinate {
  std::size_t tensor = 0;
  std::size_t index = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Empty checks every coordinate of every tensor.
  std::vector<Coordinate> coordinates;
  // When positive, a coordinate whose analytic and numeric gradients are both
  // below these bounds counts as an exact zero and skips the relative test,
  // which is undefined there.
  double zero_analytic = 0.0;
  double zero_numeric = 0.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  Coordinate worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Largest magnitudes seen over all checked coordinates.
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
  // Coordinates classified as exact zeros, and the largest magnitudes on them.
  std::size_t zeros = 0;
  double zero_max_analytic = 0.0;
  double zero_max_numeric = 0.0;
};

// Central differences against the reverse sweep; per coordinate error is
// |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|). Throws NumericalError on
// non-finite values.
GradCheckResult grad_check(const Objective& f, const std::vector<Tensor>& point,
                           const GradCheckOptions& options = {});

// Gradients of f at `point` by one reverse sweep.
std::vector<Tensor> gradients(const Objective& f, const std::vector<Tensor>& point,
                              double* value = nullptr);

}  // namespace nsg::ad
