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

#include "nsg/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "nsg/error.hpp"
#include "nsg/hash.hpp"
#include "nsg/random.hpp"

namespace nsg {

namespace {

constexpr std::string_view kMagic = "NSGM1\n";
constexpr int kCheckpointVersion = 1;

std::size_t ipow(std::size_t n, int e) {
  std::size_t r = 1;
  while (e-- > 0) r *= n;
  return r;
}

ad::Var activate(Activation a, ad::Var x) {
  return a == Activation::kRelu ? ad::relu(x) : ad::tanh(x);
}

// Every named array of a model in checkpoint order.
template <typename Model>
auto arrays_of(Model& m) {
  using T = std::conditional_t<std::is_const_v<Model>, const ad::Tensor, ad::Tensor>;
  std::vector<std::pair<std::string, T*>> out;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    out.emplace_back("layer" + std::to_string(l) + ".weight", &m.weights[l]);
    out.emplace_back("layer" + std::to_string(l) + ".bias", &m.biases[l]);
  }
  for (std::size_t h = 0; h < m.gammas.size(); ++h) {
    const std::string p = "norm" + std::to_string(h);
    out.emplace_back(p + ".gamma", &m.gammas[h]);
    out.emplace_back(p + ".beta", &m.betas[h]);
    out.emplace_back(p + ".running_mean", &m.norms[h].running_mean);
    out.emplace_back(p + ".running_var", &m.norms[h].running_var);
  }
  return out;
}

void append_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) {
    bits = (bits << 8) | static_cast<unsigned char>(p[b]);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::kRelu;
  if (text == "tanh") return Activation::kTanh;
  throw InvalidArgument("unknown activation '" + text + "'");
}

std::vector<ad::Tensor*> ModelParams::trainable() {
  std::vector<ad::Tensor*> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(&weights[l]);
    out.push_back(&biases[l]);
  }
  for (std::size_t h = 0; h < gammas.size(); ++h) {
    out.push_back(&gammas[h]);
    out.push_back(&betas[h]);
  }
  return out;
}

std::vector<const ad::Tensor*> ModelParams::trainable() const {
  auto mut = const_cast<ModelParams*>(this)->trainable();
  return {mut.begin(), mut.end()};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const ad::Tensor* t : trainable()) total += t->size();
  return total;
}

KnownMask KnownMask::from_partial(const PartialTable& p) {
  KnownMask m{p.size(), std::vector<std::uint8_t>(p.size() * p.size())};
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    m.cells[c] = p.cells()[c] != kUnknown ? 1 : 0;
  }
  return m;
}

KnownMask KnownMask::none(std::size_t n) {
  return {n, std::vector<std::uint8_t>(n * n, 0)};
}

ModelParams init_network(std::size_t n, std::size_t depth, std::uint64_t seed,
                         Activation activation) {
  if (n < 2) throw InvalidArgument("network needs cardinality n >= 2");
  if (depth < 1) throw InvalidArgument("network needs at least one hidden layer");
  ModelParams m;
  m.n = n;
  m.depth = depth;
  m.seed = seed;
  m.activation = activation;
  const std::size_t io = ipow(n, 3);
  const std::size_t hidden = ipow(n, 5);
  m.dims.push_back(io);
  for (std::size_t h = 0; h < depth; ++h) m.dims.push_back(hidden);
  m.dims.push_back(io);

  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    const std::size_t fan_in = m.dims[l];
    const std::size_t fan_out = m.dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(derive_seed(seed, "init", l));
    ad::Tensor w({fan_in, fan_out});
    for (auto& v : w.data()) v = rng.uniform(-limit, limit);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(std::vector<std::size_t>{fan_out}, 0.0);
  }
  for (std::size_t h = 0; h < depth; ++h) {
    m.gammas.emplace_back(std::vector<std::size_t>{hidden}, 1.0);
    m.betas.emplace_back(std::vector<std::size_t>{hidden}, 0.0);
    m.norms.push_back(ad::BatchNormState::fresh(hidden));
  }
  return m;
}

ad::Var forward_from_leaves(ad::Tape& tape, const ModelParams& model,
                            std::span<const ad::Var> params,
                            std::vector<ad::BatchNormState>& norms,
                            const ad::Tensor& batch,
                            std::span<const KnownMask> masks, ad::Mode mode) {
  const std::size_t n = model.n;
  const std::size_t cube = ipow(n, 3);
  const std::size_t layers = model.weights.size();
  if (batch.shape().size() != 2 || batch.cols() != cube) {
    throw DimensionMismatch("forward_pass: batch rows must have length n^3 = " +
                            std::to_string(cube));
  }
  if (masks.size() != batch.rows()) {
    throw DimensionMismatch("forward_pass: one mask per batch row required");
  }
  if (params.size() != 2 * layers + 2 * model.gammas.size() ||
      norms.size() != model.gammas.size()) {
    throw DimensionMismatch("forward_pass: parameter list does not match model");
  }
  std::vector<std::uint8_t> known;
  known.reserve(batch.rows() * n * n);
  for (const auto& m : masks) {
    if (m.n != n || m.cells.size() != n * n) {
      throw DimensionMismatch("forward_pass: mask cardinality mismatch");
    }
    known.insert(known.end(), m.cells.begin(), m.cells.end());
  }

  auto weight = [&](std::size_t l) { return params[2 * l]; };
  auto bias = [&](std::size_t l) { return params[2 * l + 1]; };
  auto gamma = [&](std::size_t h) { return params[2 * layers + 2 * h]; };
  auto beta = [&](std::size_t h) { return params[2 * layers + 2 * h + 1]; };

  ad::Var h = tape.constant(batch);
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    h = ad::linear(h, weight(l), bias(l));
    h = ad::batch_norm(h, gamma(l), beta(l), norms[l], mode);
    h = activate(model.activation, h);
  }
  h = ad::linear(h, weight(layers - 1), bias(layers - 1));
  h = ad::softmax_groups(h, n);
  return ad::overwrite_groups(h, batch, known, n);
}

ForwardResult forward_pass(ad::Tape& tape, ModelParams& model,
                           const ad::Tensor& batch,
                           std::span<const KnownMask> masks, ad::Mode mode) {
  ForwardResult result;
  for (ad::Tensor* t : model.trainable()) result.params.push_back(tape.parameter(*t));
  result.output = forward_from_leaves(tape, model, result.params, model.norms,
                                      batch, masks, mode);
  return result;
}

ad::Tensor predict(const ModelParams& model, const ad::Tensor& batch,
                   std::span<const KnownMask> masks) {
  // Eval mode only reads the running statistics.
  ModelParams& view = const_cast<ModelParams&>(model);
  ad::Tape tape;
  const auto result = forward_pass(tape, view, batch, masks, ad::Mode::kEval);
  return result.output.value();
}

ad::Tensor stack_cubes(std::span<const PartialTable> partials) {
  if (partials.empty()) throw InvalidArgument("stack_cubes of an empty list");
  const std::size_t n = partials.front().size();
  const std::size_t cube = ipow(n, 3);
  ad::Tensor out({partials.size(), cube});
  for (std::size_t r = 0; r < partials.size(); ++r) {
    if (partials[r].size() != n) {
      throw DimensionMismatch("stack_cubes: mixed cardinalities");
    }
    const auto c = partial_to_cube(partials[r]);
    std::copy(c.values().begin(), c.values().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(r * cube));
  }
  return out;
}

std::vector<KnownMask> masks_of(std::span<const PartialTable> partials) {
  std::vector<KnownMask> out;
  out.reserve(partials.size());
  for (const auto& p : partials) out.push_back(KnownMask::from_partial(p));
  return out;
}

void check_compatible(const ModelParams& model, std::size_t n) {
  if (model.n != n) {
    throw DimensionMismatch("model was built for n=" + std::to_string(model.n) +
                            " but the data has n=" + std::to_string(n));
  }
}

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path) {
  std::string payload;
  nlohmann::ordered_json arrays = nlohmann::ordered_json::array();
  for (const auto& [name, t] : arrays_of(model)) {
    arrays.push_back({{"name", name}, {"length", t->size()}});
    for (double v : t->data()) append_le(payload, v);
  }
  Fnv1a64 h;
  h.update(payload);

  nlohmann::ordered_json header;
  header["version"] = kCheckpointVersion;
  header["n"] = model.n;
  header["depth"] = model.depth;
  header["seed"] = model.seed;
  header["dims"] = model.dims;
  header["activation"] = to_string(model.activation);
  header["loss"] = model.loss_name;
  header["arrays"] = arrays;
  header["payload_bytes"] = payload.size();
  header["payload_fnv1a64"] = h.hex();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << kMagic << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());

  if (bytes.compare(0, 4, "NSGM") != 0) {
    throw CorruptFile("'" + path.string() + "' is not a model checkpoint");
  }
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) {
    throw VersionMismatch("unsupported checkpoint version in '" +
                          path.string() + "'");
  }
  const std::size_t eol = bytes.find('\n', kMagic.size());
  if (eol == std::string::npos) throw CorruptFile("checkpoint header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kMagic.size(), eol - kMagic.size()));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile(std::string("checkpoint header: ") + e.what());
  }

  ModelParams m;
  try {
    if (header.at("version").get<int>() != kCheckpointVersion) {
      throw VersionMismatch("unsupported checkpoint version");
    }
    const auto n = header.at("n").get<std::size_t>();
    const auto depth = header.at("depth").get<std::size_t>();
    const auto activation = parse_activation(header.at("activation").get<std::string>());
    // Rebuild the skeleton, then overwrite every array from the payload.
    m = init_network(n, depth, header.at("seed").get<std::uint64_t>(), activation);
    m.loss_name = header.at("loss").get<std::string>();
    if (header.at("dims").get<std::vector<std::size_t>>() != m.dims) {
      throw CorruptFile("checkpoint dims disagree with n and depth");
    }

    const std::size_t declared = header.at("payload_bytes").get<std::size_t>();
    const std::string_view payload(bytes.data() + eol + 1, bytes.size() - eol - 1);
    if (payload.size() != declared) {
      throw CorruptFile("checkpoint payload is " + std::to_string(payload.size()) +
                        " bytes, header declares " + std::to_string(declared));
    }
    Fnv1a64 h;
    h.update(payload);
    if (h.hex() != header.at("payload_fnv1a64").get<std::string>()) {
      throw CorruptFile("checkpoint payload checksum mismatch");
    }

    const auto& arrays = header.at("arrays");
    auto targets = arrays_of(m);
    if (arrays.size() != targets.size()) {
      throw CorruptFile("checkpoint array list does not match the architecture");
    }
    std::size_t offset = 0;
    for (std::size_t a = 0; a < targets.size(); ++a) {
      auto& [name, t] = targets[a];
      if (arrays[a].at("name").get<std::string>() != name ||
          arrays[a].at("length").get<std::size_t>() != t->size()) {
        throw CorruptFile("checkpoint array '" + name + "' has unexpected layout");
      }
      if (offset + 8 * t->size() > payload.size()) {
        throw CorruptFile("checkpoint payload truncated");
      }
      for (auto& v : t->data()) {
        v = read_le(payload.data() + offset);
        offset += 8;
      }
    }
    if (offset != payload.size()) throw CorruptFile("trailing checkpoint bytes");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile(std::string("checkpoint header: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CorruptFile(std::string("checkpoint header: ") + e.what());
  }
  return m;
}

}  // namespace nsg
