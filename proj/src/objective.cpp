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

#include "nsg/objective.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "nsg/error.hpp"

namespace nsg {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t ipow(std::size_t n, int e) {
  std::size_t r = 1;
  while (e-- > 0) r *= n;
  return r;
}

// left[(i,j),(k,l)] = sum_m y[(i,j),m] y[m,(k,l)]: the same buffer read as an
// n^2 x n and an n x n^2 matrix.
void left_kernel(std::size_t n, const double* y, double* left) {
  const auto n1 = static_cast<Eigen::Index>(n);
  const auto n2 = static_cast<Eigen::Index>(n * n);
  Eigen::Map<const RowMatrix> a(y, n2, n1);
  Eigen::Map<const RowMatrix> b(y, n1, n2);
  Eigen::Map<RowMatrix>(left, n2, n2).noalias() = a * b;
}

void right_kernel(std::size_t n, const double* y, double* right) {
  const std::size_t n2 = n * n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        const double* yjk = y + (j * n + k) * n;
        double* out = right + ((i * n + j) * n + k) * n;
        for (std::size_t l = 0; l < n; ++l) {
          double s = 0.0;
          for (std::size_t m = 0; m < n; ++m) {
            s += y[i * n2 + m * n + l] * yjk[m];
          }
          out[l] = s;
        }
      }
    }
  }
}

double kl_row(const double* x, const double* y, std::size_t len) {
  double total = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    if (x[i] > 0.0) total += x[i] * std::log(x[i] / std::max(y[i], kLogFloor));
  }
  return total;
}

void check_cube_rows(const ad::Tensor& t, std::size_t n, const char* what) {
  if (t.shape().size() != 2 || t.cols() != n * n * n) {
    throw DimensionMismatch(std::string(what) +
                            ": rows must be flattened n^3 cubes");
  }
}

}  // namespace

std::string to_string(LossName loss) {
  return loss == LossName::kKl ? "kl" : "al";
}

LossName parse_loss_name(const std::string& text) {
  if (text == "kl") return LossName::kKl;
  if (text == "al") return LossName::kAssociator;
  throw InvalidArgument("unknown loss '" + text + "', expected kl or al");
}

double kl_divergence(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("kl_divergence: arguments differ in length");
  }
  return kl_row(x.data(), y.data(), x.size());
}

double kl_divergence(const ProbabilityCube& x, const ProbabilityCube& y) {
  if (x.size() != y.size()) {
    throw DimensionMismatch("kl_divergence: cubes of different cardinality");
  }
  return kl_divergence(x.values(), y.values());
}

TripleDistributions triple_products(std::size_t n, std::span<const double> y) {
  if (y.size() != n * n * n) {
    throw DimensionMismatch("triple_products: cube length mismatch");
  }
  TripleDistributions d{n, std::vector<double>(ipow(n, 4)),
                        std::vector<double>(ipow(n, 4))};
  left_kernel(n, y.data(), d.left.data());
  right_kernel(n, y.data(), d.right.data());
  return d;
}

TripleDistributions triple_products(const ProbabilityCube& y) {
  return triple_products(y.size(), y.values());
}

double associator_loss(std::size_t n, std::span<const double> y,
                       bool symmetric) {
  const auto d = triple_products(n, y);
  const double forward = kl_divergence(d.left, d.right);
  if (!symmetric) return forward;
  return 0.5 * (forward + kl_divergence(d.right, d.left));
}

double associator_loss(const ProbabilityCube& y, bool symmetric) {
  return associator_loss(y.size(), y.values(), symmetric);
}

double guess_rate(std::span<const CayleyTable> outputs,
                  std::span<const CayleyTable> originals) {
  if (outputs.size() != originals.size()) {
    throw DimensionMismatch("guess_rate: " + std::to_string(outputs.size()) +
                            " outputs vs " + std::to_string(originals.size()) +
                            " originals");
  }
  if (outputs.empty()) throw InvalidArgument("guess_rate of an empty list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i] == originals[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

double associative_rate(std::span<const CayleyTable> outputs) {
  if (outputs.empty()) throw InvalidArgument("associative_rate of an empty list");
  const auto good = std::count_if(outputs.begin(), outputs.end(),
                                  [](const CayleyTable& t) { return is_associative(t); });
  return static_cast<double>(good) / static_cast<double>(outputs.size());
}

namespace ad_ops {

ad::Var kl_divergence(ad::Var x, ad::Var y) {
  const ad::Tensor& xv = x.value();
  const ad::Tensor& yv = y.value();
  if (xv.shape() != yv.shape() || xv.shape().size() != 2) {
    throw DimensionMismatch("kl_divergence: operands must be equal [batch,d]");
  }
  if (x.tape() != y.tape()) throw InvalidArgument("operands on different tapes");
  const std::size_t batch = xv.rows();
  const std::size_t d = xv.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    total += kl_row(xv.data().data() + r * d, yv.data().data() + r * d, d);
  }
  const double inv_b = 1.0 / static_cast<double>(batch);
  return x.tape()->record(
      ad::Tensor::scalar(total * inv_b), {x, y},
      [x, y, inv_b](const ad::Tensor& g, std::span<ad::Tensor* const> grads) {
        const ad::Tensor& xv = x.value();
        const ad::Tensor& yv = y.value();
        const double scale = g[0] * inv_b;
        for (std::size_t i = 0; i < xv.size(); ++i) {
          if (!(xv[i] > 0.0)) continue;
          const bool clamped = yv[i] <= kLogFloor;
          const double yc = clamped ? kLogFloor : yv[i];
          if (grads[0]) (*grads[0])[i] += scale * (std::log(xv[i] / yc) + 1.0);
          if (grads[1] && !clamped) (*grads[1])[i] -= scale * xv[i] / yc;
        }
      });
}

ad::Var left_products(ad::Var y, std::size_t n) {
  const ad::Tensor& yv = y.value();
  check_cube_rows(yv, n, "left_products");
  const std::size_t batch = yv.rows();
  const std::size_t c3 = ipow(n, 3);
  const std::size_t c4 = ipow(n, 4);
  ad::Tensor out({batch, c4});
  for (std::size_t r = 0; r < batch; ++r) {
    left_kernel(n, yv.data().data() + r * c3, out.data().data() + r * c4);
  }
  return y.tape()->record(
      std::move(out), {y},
      [y, n, batch, c3, c4](const ad::Tensor& g,
                            std::span<ad::Tensor* const> grads) {
        // left = A * B with A = y as [n^2, n] and B = y as [n, n^2].
        const auto n1 = static_cast<Eigen::Index>(n);
        const auto n2 = static_cast<Eigen::Index>(n * n);
        const ad::Tensor& yv = y.value();
        ad::Tensor& dy = *grads[0];
        for (std::size_t r = 0; r < batch; ++r) {
          const double* yr = yv.data().data() + r * c3;
          double* dr = dy.data().data() + r * c3;
          Eigen::Map<const RowMatrix> gm(g.data().data() + r * c4, n2, n2);
          Eigen::Map<const RowMatrix> a(yr, n2, n1);
          Eigen::Map<const RowMatrix> b(yr, n1, n2);
          Eigen::Map<RowMatrix>(dr, n2, n1).noalias() += gm * b.transpose();
          Eigen::Map<RowMatrix>(dr, n1, n2).noalias() += a.transpose() * gm;
        }
      });
}

ad::Var right_products(ad::Var y, std::size_t n) {
  const ad::Tensor& yv = y.value();
  check_cube_rows(yv, n, "right_products");
  const std::size_t batch = yv.rows();
  const std::size_t c3 = ipow(n, 3);
  const std::size_t c4 = ipow(n, 4);
  ad::Tensor out({batch, c4});
  for (std::size_t r = 0; r < batch; ++r) {
    right_kernel(n, yv.data().data() + r * c3, out.data().data() + r * c4);
  }
  return y.tape()->record(
      std::move(out), {y},
      [y, n, batch, c3, c4](const ad::Tensor& g,
                            std::span<ad::Tensor* const> grads) {
        // right(i,j,k,l) = sum_m y(i,m,l) y(j,k,m)
        const ad::Tensor& yv = y.value();
        ad::Tensor& dy = *grads[0];
        const std::size_t n2 = n * n;
        for (std::size_t r = 0; r < batch; ++r) {
          const double* yr = yv.data().data() + r * c3;
          const double* gr = g.data().data() + r * c4;
          double* dr = dy.data().data() + r * c3;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              for (std::size_t k = 0; k < n; ++k) {
                const std::size_t jk = (j * n + k) * n;
                const double* gijk = gr + ((i * n + j) * n + k) * n;
                for (std::size_t l = 0; l < n; ++l) {
                  const double gv = gijk[l];
                  if (gv == 0.0) continue;
                  for (std::size_t m = 0; m < n; ++m) {
                    const std::size_t iml = i * n2 + m * n + l;
                    dr[iml] += gv * yr[jk + m];
                    dr[jk + m] += gv * yr[iml];
                  }
                }
              }
            }
          }
        }
      });
}

ad::Var associator_loss(ad::Var y, std::size_t n, bool symmetric) {
  const ad::Var left = left_products(y, n);
  const ad::Var right = right_products(y, n);
  const ad::Var forward = kl_divergence(left, right);
  if (!symmetric) return forward;
  return ad::scale(ad::add(forward, kl_divergence(right, left)), 0.5);
}

}  // namespace ad_ops

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["guess_rate"] = r.guess_rate;
  j["associative_rate"] = r.associative_rate;
  j["n_tables"] = r.n_tables;
  j["loss_name"] = r.loss_name;
  j["checkpoint_id"] = r.checkpoint_id;
  j["mask_fraction"] = r.mask_fraction;
  j["seed"] = r.seed;
  j["dataset_hash"] = r.dataset_hash;
  return j.dump(2);
}

MetricsReport metrics_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.guess_rate = j.at("guess_rate").get<double>();
    r.associative_rate = j.at("associative_rate").get<double>();
    r.n_tables = j.at("n_tables").get<std::size_t>();
    r.loss_name = j.at("loss_name").get<std::string>();
    r.checkpoint_id = j.at("checkpoint_id").get<std::string>();
    r.mask_fraction = j.at("mask_fraction").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.dataset_hash = j.value("dataset_hash", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(std::string("metrics report: ") + e.what());
  }
}

}  // namespace nsg
