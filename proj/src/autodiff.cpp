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

#include "nsg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include <Eigen/Core>

#include "nsg/error.hpp"

namespace nsg::ad {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;
using MutVecMap = Eigen::Map<Eigen::RowVectorXd>;

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

void require_same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw InvalidArgument("operands belong to different tapes");
  }
}

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

}  // namespace

// --- Tensor ----------------------------------------------------------------

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (data_.size() != product(shape_)) {
    throw DimensionMismatch("tensor data of length " +
                            std::to_string(data_.size()) +
                            " does not fit shape " + shape_str(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionMismatch("item() on non-scalar tensor " + shape_str(shape_));
  }
  return data_[0];
}

// --- Var / Tape --------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(*this); }
const Tensor& Var::grad() const { return tape_->grad(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw InvalidArgument("variable is not part of this tape");
  }
}

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Tensor& value) {
  Node node;
  node.borrowed = &value;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  for (Var in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor(node.value().shape(), 0.0);
    node.has_grad = true;
  }
  return node.grad;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (value(loss).size() != 1) {
    throw InvalidArgument("backward() needs a scalar loss, got shape " +
                          shape_str(value(loss).shape()));
  }
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad = Tensor();
  }
  grad_buffer(loss.id_)[0] = 1.0;

  std::vector<Tensor*> grads;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    grads.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (nodes_[node.inputs[i]].requires_grad) {
        grads[i] = &grad_buffer(node.inputs[i]);
      }
    }
    node.backward(node.grad, grads);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].requires_grad) grad_buffer(id);
  }
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id_].value();
}

const Tensor& Tape::grad(Var v) const {
  check_owned(v);
  const Node& node = nodes_[v.id_];
  if (!node.has_grad) {
    throw InvalidArgument("no gradient recorded for this variable");
  }
  return node.grad;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id_].requires_grad;
}

// --- Primitives --------------------------------------------------------------

Var linear(Var x, Var weight, Var bias) {
  require_same_tape(x, weight);
  require_same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require(xv.shape().size() == 2 && wv.shape().size() == 2 &&
              bv.shape().size() == 1,
          "linear expects x[batch,d_in], W[d_in,d_out], b[d_out]");
  require(xv.shape()[1] == wv.shape()[0] && bv.shape()[0] == wv.shape()[1],
          "linear shape mismatch: x" + shape_str(xv.shape()) + " W" +
              shape_str(wv.shape()) + " b" + shape_str(bv.shape()));

  Tensor out({xv.rows(), wv.shape()[1]});
  auto o = as_matrix(out);
  o.noalias() = as_matrix(xv) * as_matrix(wv);
  o.rowwise() += ConstVecMap(bv.data().data(), static_cast<Eigen::Index>(bv.size()));

  return x.tape()->record(
      std::move(out), {x, weight, bias},
      [x, weight](const Tensor& g, std::span<Tensor* const> grads) {
        const auto gm = as_matrix(g);
        if (grads[0]) {
          as_matrix(*grads[0]).noalias() +=
              gm * as_matrix(weight.value()).transpose();
        }
        if (grads[1]) {
          as_matrix(*grads[1]).noalias() +=
              as_matrix(x.value()).transpose() * gm;
        }
        if (grads[2]) {
          MutVecMap(grads[2]->data().data(),
                    static_cast<Eigen::Index>(grads[2]->size())) +=
              gm.colwise().sum();
        }
      });
}

Var relu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::max(0.0, xv[i]);
  return x.tape()->record(
      std::move(out), {x}, [x](const Tensor& g, std::span<Tensor* const> grads) {
        const Tensor& xv = x.value();
        Tensor& dx = *grads[0];
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (xv[i] > 0.0) dx[i] += g[i];
        }
      });
}

Var tanh(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
  Tensor saved = out;
  return x.tape()->record(
      std::move(out), {x},
      [saved = std::move(saved)](const Tensor& g, std::span<Tensor* const> grads) {
        Tensor& dx = *grads[0];
        for (std::size_t i = 0; i < g.size(); ++i) {
          dx[i] += g[i] * (1.0 - saved[i] * saved[i]);
        }
      });
}

BatchNormState BatchNormState::fresh(std::size_t features) {
  return {Tensor({features}, 0.0), Tensor({features}, 1.0)};
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode) {
  require_same_tape(x, gamma);
  require_same_tape(x, beta);
  const Tensor& xv = x.value();
  require(xv.shape().size() == 2, "batch_norm expects x[batch,features]");
  const std::size_t batch = xv.rows();
  const std::size_t d = xv.cols();
  require(gamma.value().size() == d && beta.value().size() == d &&
              state.running_mean.size() == d && state.running_var.size() == d,
          "batch_norm parameter size does not match feature count");
  if (mode == Mode::kTrain && batch < 2) {
    throw InvalidArgument("batch_norm in train mode needs a batch of at least 2");
  }

  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  std::vector<double> mean(d, 0.0);
  std::vector<double> inv_std(d, 0.0);
  if (mode == Mode::kTrain) {
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t j = 0; j < d; ++j) mean[j] += xv[r * d + j];
    }
    for (auto& m : mean) m /= static_cast<double>(batch);
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        const double c = xv[r * d + j] - mean[j];
        var[j] += c * c;
      }
    }
    const double m = BatchNormState::kMomentum;
    const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
    for (std::size_t j = 0; j < d; ++j) {
      var[j] /= static_cast<double>(batch);
      inv_std[j] = 1.0 / std::sqrt(var[j] + BatchNormState::kEpsilon);
      state.running_mean[j] = (1.0 - m) * state.running_mean[j] + m * mean[j];
      state.running_var[j] =
          (1.0 - m) * state.running_var[j] + m * var[j] * unbias;
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] = state.running_mean[j];
      inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + BatchNormState::kEpsilon);
    }
  }

  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t i = r * d + j;
      xhat[i] = (xv[i] - mean[j]) * inv_std[j];
      out[i] = gv[j] * xhat[i] + bv[j];
    }
  }

  return x.tape()->record(
      std::move(out), {x, gamma, beta},
      [gamma, mode, batch, d, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](const Tensor& g,
                                     std::span<Tensor* const> grads) {
        const Tensor& gv = gamma.value();
        std::vector<double> sum_g(d, 0.0);
        std::vector<double> sum_gx(d, 0.0);
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            sum_g[j] += g[r * d + j];
            sum_gx[j] += g[r * d + j] * xhat[r * d + j];
          }
        }
        if (grads[1]) {
          for (std::size_t j = 0; j < d; ++j) (*grads[1])[j] += sum_gx[j];
        }
        if (grads[2]) {
          for (std::size_t j = 0; j < d; ++j) (*grads[2])[j] += sum_g[j];
        }
        if (!grads[0]) return;
        Tensor& dx = *grads[0];
        if (mode == Mode::kEval) {
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
              dx[r * d + j] += g[r * d + j] * gv[j] * inv_std[j];
            }
          }
          return;
        }
        const double nb = static_cast<double>(batch);
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t i = r * d + j;
            dx[i] += gv[j] * inv_std[j] / nb *
                     (nb * g[i] - sum_g[j] - xhat[i] * sum_gx[j]);
          }
        }
      });
}

Var softmax_groups(Var x, std::size_t group) {
  const Tensor& xv = x.value();
  require(group > 0 && xv.shape().size() == 2 && xv.cols() % group == 0,
          "softmax_groups: last dimension of " + shape_str(xv.shape()) +
              " is not divisible by group " + std::to_string(group));
  Tensor out(xv.shape());
  for (std::size_t start = 0; start < xv.size(); start += group) {
    double top = xv[start];
    for (std::size_t k = 1; k < group; ++k) top = std::max(top, xv[start + k]);
    double total = 0.0;
    for (std::size_t k = 0; k < group; ++k) {
      out[start + k] = std::exp(xv[start + k] - top);
      total += out[start + k];
    }
    for (std::size_t k = 0; k < group; ++k) out[start + k] /= total;
  }
  Tensor saved = out;
  return x.tape()->record(
      std::move(out), {x},
      [group, y = std::move(saved)](const Tensor& g,
                                    std::span<Tensor* const> grads) {
        Tensor& dx = *grads[0];
        for (std::size_t start = 0; start < g.size(); start += group) {
          double dot = 0.0;
          for (std::size_t k = 0; k < group; ++k) {
            dot += g[start + k] * y[start + k];
          }
          for (std::size_t k = 0; k < group; ++k) {
            dx[start + k] += y[start + k] * (g[start + k] - dot);
          }
        }
      });
}

Var overwrite_groups(Var x, const Tensor& source,
                     std::span<const std::uint8_t> known, std::size_t group) {
  const Tensor& xv = x.value();
  require(source.shape() == xv.shape(),
          "overwrite_groups: source shape differs from input");
  require(group > 0 && xv.size() % group == 0 &&
              known.size() == xv.size() / group,
          "overwrite_groups: mask length does not match the group count");
  Tensor out = xv;
  std::vector<std::uint8_t> mask(known.begin(), known.end());
  for (std::size_t g = 0; g < mask.size(); ++g) {
    if (!mask[g]) continue;
    for (std::size_t k = 0; k < group; ++k) {
      out[g * group + k] = source[g * group + k];
    }
  }
  return x.tape()->record(
      std::move(out), {x},
      [group, mask = std::move(mask)](const Tensor& g,
                                      std::span<Tensor* const> grads) {
        Tensor& dx = *grads[0];
        for (std::size_t grp = 0; grp < mask.size(); ++grp) {
          if (mask[grp]) continue;
          for (std::size_t k = 0; k < group; ++k) {
            dx[grp * group + k] += g[grp * group + k];
          }
        }
      });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.shape() == bv.shape(), "add: shape mismatch " +
                                        shape_str(av.shape()) + " vs " +
                                        shape_str(bv.shape()));
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape()->record(
      std::move(out), {a, b},
      [](const Tensor& g, std::span<Tensor* const> grads) {
        for (Tensor* dst : grads) {
          if (!dst) continue;
          for (std::size_t i = 0; i < g.size(); ++i) (*dst)[i] += g[i];
        }
      });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= factor;
  return x.tape()->record(
      std::move(out), {x},
      [factor](const Tensor& g, std::span<Tensor* const> grads) {
        for (std::size_t i = 0; i < g.size(); ++i) (*grads[0])[i] += factor * g[i];
      });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double total = 0.0;
  for (double v : xv.data()) total += v;
  return x.tape()->record(
      Tensor::scalar(total), {x},
      [](const Tensor& g, std::span<Tensor* const> grads) {
        for (auto& v : grads[0]->data()) v += g[0];
      });
}

Var weighted_sum(Var x, const Tensor& weights) {
  const Tensor& xv = x.value();
  require(weights.size() == xv.size(), "weighted_sum: weight count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += weights[i] * xv[i];
  return x.tape()->record(
      Tensor::scalar(total), {x},
      [weights](const Tensor& g, std::span<Tensor* const> grads) {
        for (std::size_t i = 0; i < weights.size(); ++i) {
          (*grads[0])[i] += g[0] * weights[i];
        }
      });
}

// --- Adam ------------------------------------------------------------------

void adam_step(std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, AdamState& state) {
  require(params.size() == grads.size(),
          "adam_step: parameter and gradient counts differ");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape(), 0.0);
      state.second_moment.emplace_back(p->shape(), 0.0);
    }
  }
  require(state.first_moment.size() == params.size(),
          "adam_step: optimizer state tracks a different parameter count");
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(params[t]->shape() == grads[t]->shape() &&
                params[t]->shape() == state.first_moment[t].shape(),
            "adam_step: shape mismatch for parameter " + std::to_string(t));
  }

  ++state.step;
  const double step = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, step);
  const double c2 = 1.0 - std::pow(state.beta2, step);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    const Tensor& g = *grads[t];
    Tensor& m = state.first_moment[t];
    Tensor& v = state.second_moment[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

// --- Gradient checking -----------------------------------------------------

namespace {

double evaluate(const Objective& f, const std::vector<Tensor>& point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& t : point) leaves.push_back(tape.parameter(t));
  const double v = tape.value(f(tape, leaves)).item();
  if (!std::isfinite(v)) throw NumericalError("objective is not finite");
  return v;
}

}  // namespace

std::vector<Tensor> gradients(const Objective& f, const std::vector<Tensor>& point,
                              double* value) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& t : point) leaves.push_back(tape.parameter(t));
  const Var loss = f(tape, leaves);
  tape.backward(loss);
  if (value) *value = tape.value(loss).item();
  std::vector<Tensor> out;
  out.reserve(leaves.size());
  for (Var v : leaves) {
    const Tensor& g = tape.grad(v);
    for (double x : g.data()) {
      if (!std::isfinite(x)) throw NumericalError("gradient is not finite");
    }
    out.push_back(g);
  }
  return out;
}

GradCheckResult grad_check(const Objective& f, const std::vector<Tensor>& point,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgument("step must be positive");
  const std::vector<Tensor> analytic = gradients(f, point);

  std::vector<Coordinate> coords = options.coordinates;
  if (coords.empty()) {
    for (std::size_t t = 0; t < point.size(); ++t) {
      for (std::size_t i = 0; i < point[t].size(); ++i) coords.push_back({t, i});
    }
  }

  std::vector<Tensor> probe = point;
  GradCheckResult result;
  for (const Coordinate& c : coords) {
    if (c.tensor >= probe.size() || c.index >= probe[c.tensor].size()) {
      throw InvalidArgument("grad_check coordinate out of range");
    }
    double& slot = probe[c.tensor][c.index];
    const double original = slot;
    slot = original + options.step;
    const double up = evaluate(f, probe);
    slot = original - options.step;
    const double down = evaluate(f, probe);
    slot = original;

    const double numeric = (up - down) / (2.0 * options.step);
    const double exact = analytic[c.tensor][c.index];
    if (options.zero_analytic > 0.0 && std::abs(exact) <= options.zero_analytic &&
        std::abs(numeric) <= options.zero_numeric) {
      ++result.zeros;
      result.zero_max_analytic = std::max(result.zero_max_analytic, std::abs(exact));
      result.zero_max_numeric = std::max(result.zero_max_numeric, std::abs(numeric));
      continue;
    }
    const double err = std::abs(exact - numeric) /
                       std::max(1e-12, std::abs(exact) + std::abs(numeric));
    ++result.checked;
    result.max_abs_analytic = std::max(result.max_abs_analytic, std::abs(exact));
    result.max_abs_numeric = std::max(result.max_abs_numeric, std::abs(numeric));
    if (result.checked == 1 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst = c;
      result.worst_analytic = exact;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace nsg::ad
