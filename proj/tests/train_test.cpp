// Copyright 2026 The CV-MIML Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "cvmiml/cli.hpp"
#include "cvmiml/train.hpp"
#include "cvmiml/weakdata.hpp"
#include "oracles.hpp"

namespace cvmiml {
namespace {

const Dataset& SmallData() {
  static const Dataset ds = [] {
    GeneratorConfig g;
    g.num_known_classes = 6;
    g.feature_dim = 8;
    g.seq_len_min = 3;
    g.seq_len_max = 5;
    return SimulateDataset(g).dataset;
  }();
  return ds;
}

TrainConfig Quick(int epochs = 4) {
  TrainConfig c;
  c.epochs = epochs;
  c.hp.ramp_length = 3;
  return c;
}

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.epochs = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = {};
  c.momentum = 1.0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = {};
  c.clip_norm = -1.0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
}

TEST(TrainConfigTest, JsonRoundTrip) {
  TrainConfig c;
  c.epochs = 7;
  c.lr = 0.125;
  c.mask = {true, false, true};
  c.hp.knn = 4;
  c.hidden_dim = 3;
  TrainConfig back;
  back.UpdateFromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
}

TEST(TrainTest, Deterministic) {
  const auto a = Train(SmallData(), Quick());
  const auto b = Train(SmallData(), Quick());
  EXPECT_EQ(SerializeCheckpoint(a.state, SmallData().meta, Quick()),
            SerializeCheckpoint(b.state, SmallData().meta, Quick()));
  TrainConfig other = Quick();
  other.seed = 1;
  EXPECT_FALSE(Train(SmallData(), other).state.params == a.state.params);
}

TEST(TrainTest, ResumeIsBitExact) {
  for (double momentum : {0.0, 0.9}) {
    TrainConfig c = Quick(5);
    c.momentum = momentum;
    const auto straight = Train(SmallData(), c);

    TrainConfig first = c;
    first.epochs = 2;
    TrainState state = Train(SmallData(), first).state;
    const std::string saved = SerializeCheckpoint(state, SmallData().meta, c);
    Checkpoint ck = CheckpointFromJson(Json::parse(saved));
    EXPECT_EQ(ck.state, state);
    Train(ck.state, SmallData(), ck.config);
    EXPECT_EQ(ck.state, straight.state) << "momentum " << momentum;
    EXPECT_EQ(SerializeCheckpoint(ck.state, SmallData().meta, c),
              SerializeCheckpoint(straight.state, SmallData().meta, c));
  }
}

TEST(TrainTest, OneEpochEqualsTrainEpoch) {
  const TrainConfig c = Quick(1);
  TrainState manual = InitTrainState(SmallData().meta, c);
  const EpochReport r = TrainEpoch(manual, SmallData(), c);
  const auto result = Train(SmallData(), c);
  EXPECT_EQ(result.state, manual);
  ASSERT_EQ(result.history.size(), 1u);
  EXPECT_EQ(result.history[0].total, r.total);
}

// Hand-rolled classification-only loop with the same shuffle, batching,
// clipping and SGD step.
TEST(TrainTest, MaskNoneIsClassificationOnlyBitwise) {
  TrainConfig c = Quick(3);
  c.mask = TermMask::None();
  const Dataset& ds = SmallData();
  const auto result = Train(ds, c);

  std::mt19937_64 rng(c.seed);
  ModelParams params = InitParams(c.Shape(ds.meta), rng);
  const int np = static_cast<int>(ds.probe.size());
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    std::vector<int> order(ds.probe.size() + ds.gallery.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(c.bags_per_step)) {
      std::vector<const Bag*> probe, gallery;
      for (std::size_t k = s; k < std::min(order.size(), s + c.bags_per_step); ++k) {
        if (order[k] < np) probe.push_back(&ds.probe[static_cast<std::size_t>(order[k])]);
        else gallery.push_back(&ds.gallery[static_cast<std::size_t>(order[k] - np)]);
      }
      const BatchPass pass = RunBatch(params, probe, gallery);
      const LossValue lc = ClassificationLoss(ProbeLoss(pass.probe), GalleryLoss(pass.gallery));
      Gradients g = ZeroGradients(params);
      Backward(params, *pass.cache, lc.grad_logits, g);
      ClipByGlobalNorm(g, c.clip_norm);
      params = SgdStep(params, g, c.lr, c.weight_decay);
    }
  }
  EXPECT_EQ(result.state.params, params);
  for (const auto& r : result.history) {
    EXPECT_EQ(r.total, r.classification);
    EXPECT_EQ(r.intra_bag, 0.0);
    EXPECT_EQ(r.cross_view, 0.0);
    EXPECT_EQ(r.entropy, 0.0);
  }
}

TEST(TrainTest, PrototypesRefreshOncePerEpochBeforeUpdates) {
  const TrainConfig c = Quick(3);
  TrainState state = InitTrainState(SmallData().meta, c);
  for (int epoch = 0; epoch < 3; ++epoch) {
    TrainState before = state;
    const ModelParams params_before = state.params;
    PrepareEpoch(before, SmallData(), c);
    EXPECT_EQ(before.params, params_before);
    TrainEpoch(state, SmallData(), c);
    EXPECT_EQ(state.bank, before.bank) << "epoch " << epoch;
    EXPECT_EQ(state.bank.epoch, epoch);
  }
}

TEST(TrainTest, FirstEpochPrototypesHaveNoHistory) {
  const TrainConfig c = Quick(1);
  TrainState state = InitTrainState(SmallData().meta, c);
  PrepareEpoch(state, SmallData(), c);
  const BatchPass pass = RunDataset(state.params, SmallData());
  const auto groups = FormGroups(pass.gallery, pass.cache->features, c.hp);
  const auto idx = BuildAssignments(pass.probe, pass.gallery, groups,
                                    SmallData().meta.num_total_classes());
  for (int cls = 1; cls <= SmallData().meta.num_known_classes; ++cls) {
    ASSERT_TRUE(state.bank.has(cls));
    EXPECT_EQ(state.bank.at(cls), *EpochPrototype(idx, pass.cache->probs, cls));
  }
}

TEST(TrainTest, ClassificationLossDecreases) {
  TrainConfig c;
  c.epochs = 20;
  const auto result = Train(SmallData(), c);
  ASSERT_EQ(result.history.size(), 20u);
  EXPECT_LT(result.history[19].classification, result.history[0].classification);
  for (const auto& r : result.history) EXPECT_TRUE(std::isfinite(r.total));
}

TEST(TrainTest, NonFiniteLossNamesTerm) {
  Dataset ds = SmallData();
  ds.probe[0].instances[0].features[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig c = Quick(1);
  c.mask = TermMask::None();
  try {
    Train(ds, c);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("probe"), std::string::npos) << e.what();
  }
}

TEST(TrainTest, MomentumAndRegroupOptionsRun) {
  TrainConfig c = Quick(2);
  c.momentum = 0.9;
  c.regroup_each_step = true;
  c.hidden_dim = 6;
  c.feature_dim = 5;
  const auto r = Train(SmallData(), c);
  EXPECT_EQ(r.state.params.shape().hidden_dim, 6);
  EXPECT_TRUE(AllFinite(r.state.params));
  EXPECT_FALSE(r.state.velocity == ZeroParams(r.state.params.shape()));
}

TEST(TrainTest, ShapeMismatchRejected) {
  TrainConfig c = Quick(2);
  TrainState state = InitTrainState(SmallData().meta, c);
  c.feature_dim = 3;
  EXPECT_THROW(Train(state, SmallData(), c), ShapeError);
}

TEST(CheckpointTest, FileRoundTrip) {
  testing::TempDir dir;
  TrainConfig c = Quick(2);
  c.mask = {false, true, true};
  const auto r = Train(SmallData(), c);
  SaveCheckpoint(dir.file("ck.json"), r.state, SmallData().meta, c);
  const Checkpoint ck = LoadCheckpoint(dir.file("ck.json"));
  EXPECT_EQ(ck.state, r.state);
  EXPECT_EQ(ck.meta, SmallData().meta);
  EXPECT_EQ(ck.config.ToJson(), c.ToJson());
  const Json j = Json::parse(ReadFile(dir.file("ck.json")));
  for (const char* key : {"theta", "W", "biases", "epoch", "rng_state", "prototypes"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(CheckpointTest, MalformedInputIsFormatError) {
  testing::TempDir dir;
  const TrainConfig c = Quick(1);
  const TrainState state = InitTrainState(SmallData().meta, c);
  Json j = CheckpointToJson(state, SmallData().meta, c);
  j["W"].erase(0);
  EXPECT_THROW(CheckpointFromJson(j), FormatError);
  WriteFile(dir.file("bad.json"), "{\"theta\": [");
  EXPECT_THROW(LoadCheckpoint(dir.file("bad.json")), FormatError);
  EXPECT_THROW(LoadCheckpoint(dir.file("missing.json")), IoError);
}

TEST(GradcheckTest, ZeroParametersPass) {
  const Dataset slice = cli::GradcheckFixture(3);
  const ModelParams zero = ZeroParams(TrainConfig{}.Shape(slice.meta));
  const auto report = Gradcheck(slice, zero, Hyperparams{});
  EXPECT_TRUE(report.pass);
  EXPECT_EQ(report.rows.size(), GradcheckTerms().size() * 4);
}

TEST(GradcheckTest, SeedThreeFixturePasses) {
  const Dataset slice = cli::GradcheckFixture(3);
  EXPECT_EQ(slice.probe.size() + slice.gallery.size(), 4u);
  std::mt19937_64 rng(3);
  const ModelParams params = InitParams(TrainConfig{}.Shape(slice.meta), rng);
  const auto report = Gradcheck(slice, params, Hyperparams{});
  EXPECT_TRUE(report.pass) << report.ToJson().dump(2);
  EXPECT_LT(report.max_rel_error(), 1e-4);
  EXPECT_TRUE(report.failed_blocks().empty());
}

TEST(GradcheckTest, TwoLayerExtractorPasses) {
  const Dataset slice = cli::GradcheckFixture(5);
  TrainConfig c;
  c.hidden_dim = 4;
  c.feature_dim = 3;
  std::mt19937_64 rng(5);
  const ModelParams params = InitParams(c.Shape(slice.meta), rng);
  const auto report = Gradcheck(slice, params, Hyperparams{});
  EXPECT_TRUE(report.pass) << report.ToJson().dump(2);
}

TEST(GradcheckTest, CorruptionFailsAndNamesBlock) {
  const Dataset slice = cli::GradcheckFixture(3);
  std::mt19937_64 rng(3);
  const ModelParams params = InitParams(TrainConfig{}.Shape(slice.meta), rng);
  GradcheckOptions opt;
  opt.terms = {"ia"};
  opt.corrupt_block = "classifier.weight";
  const auto report = Gradcheck(slice, params, Hyperparams{}, opt);
  EXPECT_FALSE(report.pass);
  EXPECT_EQ(report.failed_blocks(), std::vector<std::string>{"ia:classifier.weight"});
}

TEST(GradcheckTest, UnknownTermRejected) {
  const Dataset slice = cli::GradcheckFixture(3);
  GradcheckOptions opt;
  opt.terms = {"xx"};
  EXPECT_THROW(Gradcheck(slice, ZeroParams(TrainConfig{}.Shape(slice.meta)), Hyperparams{}, opt),
               std::invalid_argument);
}

}  // namespace
}  // namespace cvmiml
