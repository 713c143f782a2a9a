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

#include "nsg/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>

#include "nsg/dataset.hpp"
#include "nsg/enumerate.hpp"
#include "nsg/network.hpp"
#include "nsg/objective.hpp"
#include "nsg/random.hpp"

namespace nsg {

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so central differences never straddle a kink.
Tensor away_from_zero(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) {
    const double mag = rng.uniform(0.1, 1.0);
    v = rng.below(2) ? mag : -mag;
  }
  return t;
}

Tensor random_cube_rows(Rng& rng, std::size_t rows, std::size_t n) {
  Tensor t({rows, n * n * n});
  for (std::size_t g = 0; g < rows * n * n; ++g) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      t[g * n + k] = rng.uniform(0.05, 1.0);
      total += t[g * n + k];
    }
    for (std::size_t k = 0; k < n; ++k) t[g * n + k] /= total;
  }
  return t;
}

struct Case {
  std::string name;
  std::function<void(Rng&, std::vector<Tensor>&, ad::Objective&,
                     ad::GradCheckOptions&)>
      setup;
};

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  cases.push_back({"linear", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {4, 5}, -1, 1),
                              random_tensor(rng, {5, 3}, -1, 1),
                              random_tensor(rng, {3}, -1, 1)};
                     Tensor w = random_tensor(rng, {4, 3}, -1, 1);
                     f = [w](Tape&, std::span<const Var> p) {
                       return ad::weighted_sum(ad::linear(p[0], p[1], p[2]), w);
                     };
                   }});
  cases.push_back({"relu", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {away_from_zero(rng, {4, 6})};
                     Tensor w = random_tensor(rng, {4, 6}, -1, 1);
                     f = [w](Tape&, std::span<const Var> p) {
                       return ad::weighted_sum(ad::relu(p[0]), w);
                     };
                   }});
  cases.push_back({"tanh", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {3, 5}, -2, 2)};
                     Tensor w = random_tensor(rng, {3, 5}, -1, 1);
                     f = [w](Tape&, std::span<const Var> p) {
                       return ad::weighted_sum(ad::tanh(p[0]), w);
                     };
                   }});
  cases.push_back({"batch_norm/train", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {6, 4}, -2, 2),
                              random_tensor(rng, {4}, 0.5, 1.5),
                              random_tensor(rng, {4}, -1, 1)};
                     Tensor w = random_tensor(rng, {6, 4}, -1, 1);
                     f = [w](Tape&, std::span<const Var> p) {
                       auto state = ad::BatchNormState::fresh(4);
                       return ad::weighted_sum(
                           ad::batch_norm(p[0], p[1], p[2], state, ad::Mode::kTrain), w);
                     };
                   }});
  cases.push_back({"batch_norm/eval", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {3, 4}, -2, 2),
                              random_tensor(rng, {4}, 0.5, 1.5),
                              random_tensor(rng, {4}, -1, 1)};
                     Tensor w = random_tensor(rng, {3, 4}, -1, 1);
                     ad::BatchNormState frozen{random_tensor(rng, {4}, -1, 1),
                                               random_tensor(rng, {4}, 0.5, 2)};
                     f = [w, frozen](Tape&, std::span<const Var> p) {
                       auto state = frozen;
                       return ad::weighted_sum(
                           ad::batch_norm(p[0], p[1], p[2], state, ad::Mode::kEval), w);
                     };
                   }});
  cases.push_back({"softmax_groups", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {3, 12}, -2, 2)};
                     Tensor w = random_tensor(rng, {3, 12}, -1, 1);
                     f = [w](Tape&, std::span<const Var> p) {
                       return ad::weighted_sum(ad::softmax_groups(p[0], 3), w);
                     };
                   }});
  cases.push_back({"overwrite_groups", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {2, 8}, -1, 1)};
                     Tensor source = random_tensor(rng, {2, 8}, 0, 1);
                     Tensor w = random_tensor(rng, {2, 8}, -1, 1);
                     std::vector<std::uint8_t> known(8);
                     for (auto& k : known) k = static_cast<std::uint8_t>(rng.below(2));
                     f = [w, source, known](Tape&, std::span<const Var> p) {
                       return ad::weighted_sum(
                           ad::overwrite_groups(p[0], source, known, 2), w);
                     };
                   }});
  cases.push_back({"kl_divergence", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {2, 6}, 0.05, 1),
                              random_tensor(rng, {2, 6}, 0.05, 1)};
                     f = [](Tape&, std::span<const Var> p) {
                       return ad_ops::kl_divergence(p[0], p[1]);
                     };
                   }});
  cases.push_back({"left_products", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {2, 27}, 0, 1)};
                     Tensor w = random_tensor(rng, {2, 81}, -1, 1);
                     f = [w](Tape&, std::span<const Var> p) {
                       return ad::weighted_sum(ad_ops::left_products(p[0], 3), w);
                     };
                   }});
  cases.push_back({"right_products", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {2, 27}, 0, 1)};
                     Tensor w = random_tensor(rng, {2, 81}, -1, 1);
                     f = [w](Tape&, std::span<const Var> p) {
                       return ad::weighted_sum(ad_ops::right_products(p[0], 3), w);
                     };
                   }});
  cases.push_back({"softmax+kl", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {3, 27}, -2, 2)};
                     Tensor target = random_cube_rows(rng, 3, 3);
                     f = [target](Tape& tape, std::span<const Var> p) {
                       return ad_ops::kl_divergence(tape.constant(target),
                                                    ad::softmax_groups(p[0], 3));
                     };
                   }});
  cases.push_back({"softmax+associator", [](Rng& rng, auto& point, auto& f, auto&) {
                     point = {random_tensor(rng, {3, 27}, -2, 2)};
                     f = [](Tape&, std::span<const Var> p) {
                       return ad_ops::associator_loss(ad::softmax_groups(p[0], 3), 3);
                     };
                   }});
  return cases;
}

}  // namespace

double GradCheckSuiteReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_relative_error);
  return worst;
}

bool GradCheckSuiteReport::passed() const {
  if (max_relative_error() > kRelativeTolerance) return false;
  for (const auto& z : zero_entries) {
    if (z.max_abs_analytic > kZeroAnalyticTolerance ||
        z.max_abs_numeric > kZeroNumericTolerance) {
      return false;
    }
  }
  return true;
}

GradCheckSuiteReport run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  GradCheckSuiteReport report;
  for (const auto& c : primitive_cases()) {
    GradCheckEntry entry;
    entry.name = c.name;
    for (std::size_t pt = 0; pt < options.points; ++pt) {
      Rng rng(derive_seed(options.seed, c.name, pt));
      std::vector<Tensor> point;
      ad::Objective f;
      ad::GradCheckOptions gc;
      gc.step = options.step;
      c.setup(rng, point, f, gc);
      const auto r = ad::grad_check(f, point, gc);
      entry.checked += r.checked;
      if (r.max_relative_error >= entry.max_relative_error) {
        entry.max_relative_error = r.max_relative_error;
        entry.worst = r;
      }
    }
    report.entries.push_back(std::move(entry));
  }
  if (!options.include_network) return report;

  // Full autoencoder on masked random semigroups with the associator loss.
  const std::size_t n = options.network_n;
  const auto tables = enumerate_tables(n);
  GradCheckEntry train_entry;
  train_entry.name = "network+associator/train";
  GradCheckEntry eval_entry;
  eval_entry.name = "network+associator/eval";
  ZeroGradientEntry zero_entry;
  zero_entry.name = "network+associator/train-zeros";

  auto merge = [](GradCheckEntry& e, const ad::GradCheckResult& r) {
    e.checked += r.checked;
    if (r.max_relative_error >= e.max_relative_error) {
      e.max_relative_error = r.max_relative_error;
      e.worst = r;
    }
  };

  for (std::size_t pt = 0; pt < options.points; ++pt) {
    Rng rng(derive_seed(options.seed, "network", pt));
    ModelParams model = init_network(n, options.network_depth,
                                     derive_seed(options.seed, "network-init", pt));
    // Move off the initial point (zero biases, unit gammas).
    for (auto* t : model.trainable()) {
      for (auto& v : t->data()) v += rng.uniform(-0.05, 0.05);
    }
    for (auto& norm : model.norms) {
      for (auto& v : norm.running_mean.data()) v = rng.uniform(-0.5, 0.5);
      for (auto& v : norm.running_var.data()) v = rng.uniform(0.5, 2.0);
    }
    std::vector<PartialTable> partials;
    const NoiseConfig noise{0.5, 0};
    for (std::size_t b = 0; b < options.network_batch; ++b) {
      partials.push_back(mask_random(tables[rng.below(tables.size())], noise, rng));
    }
    const Tensor input = stack_cubes(partials);
    const auto masks = masks_of(partials);

    std::vector<Tensor> point;
    for (const auto* t : model.trainable()) point.push_back(*t);

    // In train mode the batch norm cancels anything constant across the
    // batch: hidden biases, and first-layer weights reading an input cell that
    // every table in the batch shares. Those gradients are exactly zero.
    ad::GradCheckOptions gc;
    gc.step = options.step;
    gc.zero_analytic = kZeroAnalyticTolerance;
    gc.zero_numeric = kZeroNumericTolerance;
    for (std::size_t t = 0; t < point.size(); ++t) {
      const std::size_t take = std::min(options.network_coordinates, point[t].size());
      for (std::size_t i = 0; i < take; ++i) {
        gc.coordinates.push_back({t, static_cast<std::size_t>(rng.below(point[t].size()))});
      }
    }

    auto objective = [&](ad::Mode mode) -> ad::Objective {
      return [&, mode](Tape& tape, std::span<const Var> params) {
        auto norms = model.norms;
        const Var out = forward_from_leaves(tape, model, params, norms, input,
                                            masks, mode);
        return ad_ops::associator_loss(out, n);
      };
    };
    const auto train = ad::grad_check(objective(ad::Mode::kTrain), point, gc);
    merge(train_entry, train);
    zero_entry.checked += train.zeros;
    zero_entry.max_abs_analytic = std::max(zero_entry.max_abs_analytic, train.zero_max_analytic);
    zero_entry.max_abs_numeric = std::max(zero_entry.max_abs_numeric, train.zero_max_numeric);

    ad::GradCheckOptions eval_gc = gc;
    eval_gc.zero_analytic = eval_gc.zero_numeric = 0.0;
    merge(eval_entry, ad::grad_check(objective(ad::Mode::kEval), point, eval_gc));
  }
  report.entries.push_back(std::move(train_entry));
  report.entries.push_back(std::move(eval_entry));
  report.zero_entries.push_back(std::move(zero_entry));
  return report;
}

}  // namespace nsg
