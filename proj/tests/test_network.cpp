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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nsg/dataset.hpp"
#include "nsg/enumerate.hpp"
#include "nsg/error.hpp"
#include "nsg/network.hpp"
#include "test_util.hpp"

namespace nsg {
namespace {

namespace fs = std::filesystem;

std::vector<PartialTable> masked_semigroups(std::size_t n, std::size_t count, double fraction,
                                            std::uint64_t seed) {
  Rng rng(seed);
  const auto tables = enumerate_tables(n);
  std::vector<PartialTable> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(mask_random(tables[rng.below(tables.size())], {fraction, 0}, rng));
  }
  return out;
}

TEST(Init, LayerWidths) {
  const auto m = init_network(2, 1, 0);
  EXPECT_EQ(m.dims, (std::vector<std::size_t>{8, 32, 8}));
  EXPECT_EQ(m.weights[0].shape(), (std::vector<std::size_t>{8, 32}));
  EXPECT_EQ(m.weights[1].shape(), (std::vector<std::size_t>{32, 8}));
  EXPECT_EQ(init_network(3, 3, 0).dims, (std::vector<std::size_t>{27, 243, 243, 243, 27}));
}

TEST(Init, ParameterCountForDefaultArchitecture) {
  // 125 -> 3125 -> 3125 -> 125 with gamma and beta per hidden unit.
  const std::size_t expected = (125 * 3125 + 3125) + (3125 * 3125 + 3125) +
                               (3125 * 125 + 125) + 2 * (2 * 3125);
  EXPECT_EQ(expected, 10565750u);
  EXPECT_EQ(init_network(5, 2, 1).parameter_count(), expected);
}

TEST(Init, GlorotBoundsFreshStatsAndSeeding) {
  const auto m = init_network(3, 2, 11);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const double limit = std::sqrt(6.0 / double(m.dims[l] + m.dims[l + 1]));
    double lo = 0, hi = 0;
    for (double v : m.weights[l].data()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_GE(lo, -limit);
    EXPECT_LE(hi, limit);
    // Spread reaches most of the interval.
    EXPECT_GT(hi - lo, 1.8 * limit);
    for (double v : m.biases[l].data()) EXPECT_EQ(v, 0.0);
  }
  for (std::size_t h = 0; h < 2; ++h) {
    for (double v : m.gammas[h].data()) EXPECT_EQ(v, 1.0);
    EXPECT_EQ(m.norms[h], ad::BatchNormState::fresh(243));
  }
  EXPECT_EQ(init_network(3, 2, 11), m);
  EXPECT_NE(init_network(3, 2, 12).weights[0], m.weights[0]);
}

TEST(Init, RejectsDegenerateShapes) {
  EXPECT_THROW(init_network(1, 1, 0), InvalidArgument);
  EXPECT_THROW(init_network(3, 0, 0), InvalidArgument);
  EXPECT_THROW(parse_activation("sigmoid"), InvalidArgument);
  EXPECT_EQ(parse_activation("tanh"), Activation::kTanh);
}

TEST(Forward, OutputsAreCubesAndKnownCellsSurvive) {
  for (Activation act : {Activation::kRelu, Activation::kTanh}) {
    auto model = init_network(3, 2, 5, act);
    const auto partials = masked_semigroups(3, 6, 0.5, 9);
    const auto input = stack_cubes(partials);
    const auto masks = masks_of(partials);
    for (ad::Mode mode : {ad::Mode::kTrain, ad::Mode::kEval}) {
      ad::Tape tape;
      const auto out = forward_pass(tape, model, input, masks, mode).output.value();
      ASSERT_EQ(out.shape(), (std::vector<std::size_t>{6, 27}));
      for (std::size_t r = 0; r < 6; ++r) {
        const auto row = out.data().subspan(r * 27, 27);
        EXPECT_TRUE(satisfies_cube_invariants(3, row));
        const auto& p = partials[r];
        for (Element i = 1; i <= 3; ++i)
          for (Element j = 1; j <= 3; ++j) {
            if (!p.is_known(i, j)) continue;
            for (Element k = 1; k <= 3; ++k) {
              EXPECT_EQ(row[((i - 1) * 3 + (j - 1)) * 3 + (k - 1)], *p.at(i, j) == k ? 1.0 : 0.0);
            }
          }
      }
    }
  }
}

TEST(Forward, TrainModeMovesRunningStatsEvalDoesNot) {
  auto model = init_network(2, 1, 3);
  const auto partials = masked_semigroups(2, 4, 0.5, 1);
  const auto input = stack_cubes(partials);
  const auto masks = masks_of(partials);
  const auto fresh = model.norms;
  {
    ad::Tape tape;
    forward_pass(tape, model, input, masks, ad::Mode::kEval);
  }
  EXPECT_EQ(model.norms, fresh);
  const auto before = predict(model, input, masks);
  EXPECT_EQ(model.norms, fresh);
  {
    ad::Tape tape;
    forward_pass(tape, model, input, masks, ad::Mode::kTrain);
  }
  EXPECT_NE(model.norms, fresh);
  EXPECT_NE(predict(model, input, masks), before);
}

TEST(Forward, FullyKnownInputIsReturnedUnchanged) {
  const auto model = init_network(3, 1, 2);
  const auto t = enumerate_tables(3)[40];
  const std::vector<PartialTable> partials{PartialTable::from_table(t)};
  const auto out = predict(model, stack_cubes(partials), masks_of(partials));
  const auto cube = table_to_cube(t);
  EXPECT_TRUE(std::ranges::equal(out.data(), cube.values()));
}

TEST(Forward, ShapeErrors) {
  auto model = init_network(3, 1, 2);
  const auto partials = masked_semigroups(2, 2, 0.5, 1);
  ad::Tape tape;
  EXPECT_THROW(forward_pass(tape, model, stack_cubes(partials), masks_of(partials),
                            ad::Mode::kEval),
               DimensionMismatch);
  const auto ok = masked_semigroups(3, 2, 0.5, 1);
  const std::vector<KnownMask> one{KnownMask::from_partial(ok[0])};
  EXPECT_THROW(forward_pass(tape, model, stack_cubes(ok), one, ad::Mode::kEval),
               DimensionMismatch);
  EXPECT_THROW(check_compatible(model, 4), DimensionMismatch);
  EXPECT_NO_THROW(check_compatible(model, 3));
  EXPECT_THROW(stack_cubes(std::vector<PartialTable>{}), InvalidArgument);
}

TEST(StackCubes, RowsAreCubesOfThePartials) {
  const auto partials = masked_semigroups(3, 3, 0.5, 4);
  const auto t = stack_cubes(partials);
  const auto masks = masks_of(partials);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto c = partial_to_cube(partials[r]);
    EXPECT_TRUE(std::ranges::equal(t.data().subspan(r * 27, 27), c.values()));
    for (std::size_t cell = 0; cell < 9; ++cell) {
      EXPECT_EQ(masks[r].cells[cell], partials[r].cells()[cell] != kUnknown ? 1 : 0);
    }
  }
}

class CheckpointFile : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = fs::temp_directory_path() / "nsg_test_model.ckpt";
    model_ = init_network(3, 2, 21, Activation::kTanh);
    model_.loss_name = "al";
    model_.norms[1].running_mean[4] = 0.25;
    save_checkpoint(model_, path_);
  }
  void TearDown() override { fs::remove(path_); }
  std::string bytes() const {
    std::ifstream in(path_, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }
  void write(const std::string& b) const {
    std::ofstream out(path_, std::ios::binary);
    out << b;
  }
  fs::path path_;
  ModelParams model_;
};

TEST_F(CheckpointFile, RoundTripsExactly) {
  EXPECT_EQ(load_checkpoint(path_), model_);
  const auto b = bytes();
  EXPECT_EQ(b.substr(0, 6), "NSGM1\n");
  save_checkpoint(load_checkpoint(path_), path_);
  EXPECT_EQ(bytes(), b);
}

TEST_F(CheckpointFile, FlippedPayloadByteIsCorrupt) {
  auto b = bytes();
  b[b.size() - 3] ^= 0x40;
  write(b);
  EXPECT_THROW(load_checkpoint(path_), CorruptFile);
}

TEST_F(CheckpointFile, TruncationIsCorrupt) {
  write(bytes().substr(0, bytes().size() - 8));
  EXPECT_THROW(load_checkpoint(path_), CorruptFile);
  write(bytes().substr(0, 20));
  EXPECT_THROW(load_checkpoint(path_), CorruptFile);
}

TEST_F(CheckpointFile, ForeignFilesAndOtherVersions) {
  auto b = bytes();
  write("not a checkpoint");
  EXPECT_THROW(load_checkpoint(path_), CorruptFile);
  b[4] = '2';
  write(b);
  EXPECT_THROW(load_checkpoint(path_), VersionMismatch);
  EXPECT_THROW(load_checkpoint(fs::path("/nonexistent/x.ckpt")), Error);
}

}  // namespace
}  // namespace nsg
