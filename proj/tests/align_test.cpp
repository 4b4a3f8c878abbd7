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
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "cvmiml/align.hpp"
#include "oracles.hpp"

namespace cvmiml {
namespace {

using testing::LibFixture;
using testing::OBag;
using testing::OFixture;

OBag MakeOBag(int view, std::vector<int> tags, std::vector<testing::Dist> probs,
              std::vector<testing::Vec> feats = {}) {
  OBag b;
  b.view = view;
  b.tags = std::move(tags);
  b.probs = std::move(probs);
  if (feats.empty())
    for (std::size_t i = 0; i < b.probs.size(); ++i) feats.push_back({double(i)});
  b.feats = std::move(feats);
  return b;
}

OFixture Fixture(int classes, std::vector<OBag> probe, std::vector<OBag> gallery) {
  OFixture f;
  f.classes = classes;
  f.views = 3;
  f.probe = std::move(probe);
  f.gallery = std::move(gallery);
  return f;
}

std::vector<testing::OGroup> ToOracle(const std::vector<Group>& groups) {
  std::vector<testing::OGroup> out;
  for (const auto& g : groups) out.push_back({g.bag, g.cls, g.seed, g.members});
  return out;
}

testing::OAssign ToOracle(const AssignmentIndex& idx, const LibFixture& lib) {
  // Map matrix rows back to (is_gallery, bag, instance).
  std::map<Eigen::Index, std::tuple<int, int, int>> where;
  for (std::size_t b = 0; b < lib.probe.size(); ++b)
    for (int i = 0; i < lib.probe[b].size(); ++i)
      where[lib.probe[b].row_of(i)] = {0, static_cast<int>(b), i};
  for (std::size_t b = 0; b < lib.gallery.size(); ++b)
    for (int i = 0; i < lib.gallery[b].size(); ++i)
      where[lib.gallery[b].row_of(i)] = {1, static_cast<int>(b), i};
  testing::OAssign out;
  for (int c = 0; c < idx.num_classes(); ++c)
    for (const auto& [v, rows] : idx.by_class[static_cast<std::size_t>(c)])
      for (auto r : rows) out[{c, v}].insert(where.at(r));
  return out;
}

TEST(KlTest, KnownValue) {
  const std::vector<double> p{0.5, 0.5}, q{0.9, 0.1};
  EXPECT_NEAR(KlDivergence(std::span<const double>(p), std::span<const double>(q)),
              0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1), 1e-15);
  EXPECT_NEAR(KlDivergence(p, q), 0.510826, 1e-6);
}

TEST(KlTest, OneHotAgainstUniform) {
  const std::vector<double> p{1.0, 0.0}, q{0.5, 0.5};
  EXPECT_NEAR(KlDivergence(p, q), std::log(2.0), 1e-15);
}

TEST(KlTest, NonNegativeAndZeroOnEquality) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto p = testing::RandomSimplex(rng, 5), q = testing::RandomSimplex(rng, 5);
    EXPECT_GE(KlDivergence(p, q), -1e-15);
    EXPECT_NEAR(KlDivergence(p, p), 0.0, 1e-15);
    EXPECT_NEAR(KlDivergence(p, q), testing::OracleKl(p, q), 1e-13);
  }
}

TEST(KlTest, LengthMismatchIsShapeError) {
  const std::vector<double> p{1.0}, q{0.5, 0.5};
  EXPECT_THROW(KlDivergence(std::span<const double>(p), std::span<const double>(q)),
               ShapeError);
}

TEST(FormGroupTest, SingleInstanceHasNoMembers) {
  LibFixture lib(Fixture(3, {}, {MakeOBag(1, {1}, {{0.2, 0.5, 0.3}})}));
  const Group g = FormGroup(lib.gallery[0], lib.feats, 1, Hyperparams{});
  EXPECT_EQ(g.seed, 0);
  EXPECT_TRUE(g.members.empty());
}

TEST(FormGroupTest, GammaThreshold) {
  // Seed has p_c = 0.5, so the threshold is 0.1.
  LibFixture lib(Fixture(
      3, {},
      {MakeOBag(1, {1}, {{0.5, 0.5, 0.0}, {0.91, 0.09, 0.0}, {0.89, 0.11, 0.0}},
                {{0.0}, {1.0}, {2.0}})}));
  const Group g = FormGroup(lib.gallery[0], lib.feats, 1, Hyperparams{});
  EXPECT_EQ(g.seed, 0);
  EXPECT_EQ(g.members, std::vector<int>{2});
}

TEST(FormGroupTest, KeepsOnlyKNearest) {
  Hyperparams hp;
  hp.knn = 2;
  LibFixture lib(Fixture(
      2, {},
      {MakeOBag(1, {1},
                {{0.1, 0.9}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}},
                {{0.0}, {4.0}, {-1.0}, {3.0}, {0.5}})}));
  const Group g = FormGroup(lib.gallery[0], lib.feats, 1, hp);
  EXPECT_EQ(g.members, (std::vector<int>{2, 4}));
}

TEST(FormGroupTest, DistanceTiesBrokenByIndex) {
  Hyperparams hp;
  hp.knn = 1;
  LibFixture lib(Fixture(
      2, {},
      {MakeOBag(1, {1}, {{0.1, 0.9}, {0.5, 0.5}, {0.5, 0.5}}, {{0.0}, {1.0}, {-1.0}})}));
  EXPECT_EQ(FormGroup(lib.gallery[0], lib.feats, 1, hp).members, std::vector<int>{1});
}

TEST(FormGroupTest, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = testing::RandomFixture(seed);
    LibFixture lib(f);
    for (int knn : {1, 2, 15}) {
      Hyperparams hp;
      hp.knn = knn;
      const auto groups = FormGroups(lib.gallery, lib.feats, hp);
      const auto oracle = testing::OracleGroups(f.gallery, knn, hp.gamma);
      ASSERT_EQ(groups.size(), oracle.size());
      for (std::size_t k = 0; k < groups.size(); ++k) {
        EXPECT_EQ(groups[k].bag, oracle[k].bag);
        EXPECT_EQ(groups[k].cls, oracle[k].cls);
        EXPECT_EQ(groups[k].seed, oracle[k].seed);
        EXPECT_EQ(groups[k].members, oracle[k].members) << "seed " << seed;
      }
    }
  }
}

// Invariants on every formed group: seed is the argmax, members exclude the
// seed, there are at most K of them and each clears the relaxed threshold.
TEST(FormGroupTest, GroupPredicates) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = testing::RandomFixture(seed);
    LibFixture lib(f);
    Hyperparams hp;
    hp.knn = 3;
    for (const auto& g : FormGroups(lib.gallery, lib.feats, hp)) {
      const auto& bd = lib.gallery[static_cast<std::size_t>(g.bag)];
      for (int i = 0; i < bd.size(); ++i) EXPECT_LE(bd.prob(i, g.cls), bd.prob(g.seed, g.cls));
      EXPECT_LE(g.members.size(), static_cast<std::size_t>(std::min(hp.knn, bd.size() - 1)));
      EXPECT_TRUE(std::is_sorted(g.members.begin(), g.members.end()));
      for (int m : g.members) {
        EXPECT_NE(m, g.seed);
        EXPECT_GE(bd.prob(m, g.cls), hp.gamma * bd.prob(g.seed, g.cls));
      }
    }
  }
}

TEST(IntraBagLossTest, SingleMember) {
  LibFixture lib(Fixture(
      2, {}, {MakeOBag(1, {0}, {{0.9, 0.1}, {0.5, 0.5}}, {{0.0}, {1.0}})}));
  const auto groups = FormGroups(lib.gallery, lib.feats, Hyperparams{});
  ASSERT_EQ(groups.size(), 1u);
  ASSERT_EQ(groups[0].members, std::vector<int>{1});
  const LossValue v = IntraBagLoss(lib.gallery, groups);
  EXPECT_NEAR(v.value, 0.510826, 1e-6);
  EXPECT_EQ(v.normalizer, 1.0);
}

TEST(IntraBagLossTest, NoMembersIsZero) {
  LibFixture lib(Fixture(2, {}, {MakeOBag(1, {0}, {{0.9, 0.1}})}));
  const auto groups = FormGroups(lib.gallery, lib.feats, Hyperparams{});
  const LossValue v = IntraBagLoss(lib.gallery, groups);
  EXPECT_EQ(v.value, 0.0);
  EXPECT_EQ(v.normalizer, 0.0);
}

TEST(IntraBagLossTest, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = testing::RandomFixture(seed);
    LibFixture lib(f);
    const auto groups = FormGroups(lib.gallery, lib.feats, Hyperparams{});
    EXPECT_NEAR(IntraBagLoss(lib.gallery, groups).value,
                testing::OracleIntraBag(f.gallery, ToOracle(groups)), 1e-12);
  }
}

TEST(AssignmentTest, ProbeOnly) {
  LibFixture lib(Fixture(3, {MakeOBag(2, {1}, {{0.2, 0.7, 0.1}, {0.3, 0.3, 0.4}})}, {}));
  const auto idx = BuildAssignments(lib.probe, {}, {}, 3);
  EXPECT_EQ(idx.views(1), std::vector<int>{2});
  EXPECT_EQ(idx.by_class[1].at(2), (std::vector<Eigen::Index>{0, 1}));
  EXPECT_EQ(idx.total_size(), 2u);
  EXPECT_EQ(idx.empty_classes(), (std::vector<int>{0, 2}));
}

TEST(AssignmentTest, SeedIncludedWithoutMembers) {
  LibFixture lib(Fixture(3, {}, {MakeOBag(3, {2}, {{0.9, 0.05, 0.05}, {0.1, 0.1, 0.8}})}));
  Hyperparams hp;
  hp.gamma = 0.99;
  const auto groups = FormGroups(lib.gallery, lib.feats, hp);
  ASSERT_TRUE(groups[0].members.empty());
  const auto idx = BuildAssignments({}, lib.gallery, groups, 3);
  EXPECT_EQ(idx.by_class[2].at(3), std::vector<Eigen::Index>{1});
  EXPECT_EQ(idx.class_size(2), 1u);
}

TEST(AssignmentTest, TwoViews) {
  LibFixture lib(Fixture(3, {MakeOBag(1, {1}, {{0.1, 0.8, 0.1}})},
                         {MakeOBag(2, {1, 2}, {{0.1, 0.6, 0.3}, {0.1, 0.5, 0.4}},
                                   {{0.0}, {1.0}})}));
  const auto groups = FormGroups(lib.gallery, lib.feats, Hyperparams{});
  const auto idx = BuildAssignments(lib.probe, lib.gallery, groups, 3);
  EXPECT_EQ(idx.views(1), (std::vector<int>{1, 2}));
  EXPECT_EQ(idx.by_class[1].at(1), std::vector<Eigen::Index>{0});
  EXPECT_EQ(idx.by_class[1].at(2), (std::vector<Eigen::Index>{1, 2}));
  EXPECT_EQ(idx.views(2), std::vector<int>{2});
}

TEST(AssignmentTest, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = testing::RandomFixture(seed);
    LibFixture lib(f);
    const auto groups = FormGroups(lib.gallery, lib.feats, Hyperparams{});
    const auto idx = BuildAssignments(lib.probe, lib.gallery, groups, f.classes);
    EXPECT_EQ(ToOracle(idx, lib),
              testing::OracleAssignments(f.probe, f.gallery, ToOracle(groups)))
        << "seed " << seed;
  }
}

TEST(PrototypeTest, SingleViewMean) {
  LibFixture lib(Fixture(2, {MakeOBag(1, {1}, {{0.6, 0.4}, {0.8, 0.2}})}, {}));
  const auto idx = BuildAssignments(lib.probe, {}, {}, 2);
  const auto proto = EpochPrototype(idx, lib.probs, 1);
  ASSERT_TRUE(proto.has_value());
  EXPECT_NEAR((*proto)[0], 0.7, 1e-15);
  EXPECT_NEAR((*proto)[1], 0.3, 1e-15);
  EXPECT_FALSE(EpochPrototype(idx, lib.probs, 0).has_value());
}

// View 1 holds three instances at [1,0], view 2 one at [0,1]. A pooled mean
// would give [0.75, 0.25].
TEST(PrototypeTest, ViewBalanced) {
  LibFixture lib(Fixture(2,
                         {MakeOBag(1, {1}, {{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}}),
                          MakeOBag(2, {1}, {{0.0, 1.0}})},
                         {}));
  const auto idx = BuildAssignments(lib.probe, {}, {}, 2);
  const auto proto = EpochPrototype(idx, lib.probs, 1);
  EXPECT_EQ(*proto, (std::vector<double>{0.5, 0.5}));
}

TEST(PrototypeTest, InvariantToDuplicatingInstancesInOneView) {
  std::mt19937_64 rng(3);
  const auto a = testing::RandomSimplex(rng, 4), b = testing::RandomSimplex(rng, 4);
  LibFixture once(Fixture(4, {MakeOBag(1, {1}, {a}), MakeOBag(2, {1}, {b})}, {}));
  LibFixture twice(Fixture(4, {MakeOBag(1, {1}, {a, a, a}), MakeOBag(2, {1}, {b})}, {}));
  const auto p1 = *EpochPrototype(BuildAssignments(once.probe, {}, {}, 4), once.probs, 1);
  const auto p2 = *EpochPrototype(BuildAssignments(twice.probe, {}, {}, 4), twice.probs, 1);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(p1[k], p2[k], 1e-15);
}

TEST(PrototypeTest, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = testing::RandomFixture(seed);
    LibFixture lib(f);
    const auto groups = FormGroups(lib.gallery, lib.feats, Hyperparams{});
    const auto idx = BuildAssignments(lib.probe, lib.gallery, groups, f.classes);
    const auto oa = testing::OracleAssignments(f.probe, f.gallery, ToOracle(groups));
    for (int c = 0; c < f.classes; ++c) {
      const auto got = EpochPrototype(idx, lib.probs, c);
      const auto want = testing::OraclePrototype(oa, f.probe, f.gallery, c, f.classes);
      ASSERT_EQ(got.has_value(), !want.empty());
      if (!got) continue;
      for (int k = 0; k < f.classes; ++k)
        EXPECT_NEAR((*got)[static_cast<std::size_t>(k)], want[static_cast<std::size_t>(k)],
                    1e-14);
    }
  }
}

TEST(PrototypeBankTest, FirstSightingCopies) {
  PrototypeBank bank(3);
  EXPECT_FALSE(bank.has(1));
  UpdatePrototype(bank, 1, {0.2, 0.3, 0.5}, 0.5);
  EXPECT_TRUE(bank.has(1));
  EXPECT_EQ(bank.at(1), (std::vector<double>{0.2, 0.3, 0.5}));
  UpdatePrototype(bank, 1, {0.4, 0.5, 0.1}, 0.5);
  EXPECT_NEAR(bank.at(1)[0], 0.3, 1e-15);
  EXPECT_NEAR(bank.at(1)[1], 0.4, 1e-15);
  EXPECT_NEAR(bank.at(1)[2], 0.3, 1e-15);
}

class EmaSimplexTest : public ::testing::TestWithParam<double> {};

TEST_P(EmaSimplexTest, StaysOnSimplex) {
  const double alpha = GetParam();
  std::mt19937_64 rng(21);
  PrototypeBank bank(2);
  std::vector<double> last;
  for (int step = 0; step < 50; ++step) {
    last = testing::RandomSimplex(rng, 6);
    const auto before = bank.has(0) ? bank.at(0) : last;
    UpdatePrototype(bank, 0, last, alpha);
    double s = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_GE(bank.at(0)[k], 0.0);
      EXPECT_NEAR(bank.at(0)[k], alpha * before[k] + (1 - alpha) * last[k], 1e-15);
      s += bank.at(0)[k];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  if (alpha == 0.0) {
    EXPECT_EQ(bank.at(0), last);
  }
}

INSTANTIATE_TEST_SUITE_P(Alphas, EmaSimplexTest, ::testing::Values(0.0, 0.5, 1.0));

TEST(PrototypeBankTest, AlphaOneFreezesFirstValue) {
  PrototypeBank bank(1);
  UpdatePrototype(bank, 0, {0.25, 0.75}, 1.0);
  UpdatePrototype(bank, 0, {0.9, 0.1}, 1.0);
  EXPECT_EQ(bank.at(0), (std::vector<double>{0.25, 0.75}));
  EXPECT_THROW(UpdatePrototype(bank, 0, {1.0}, 1.0), ShapeError);
}

TEST(CrossViewLossTest, SingleInstance) {
  LibFixture lib(Fixture(2, {MakeOBag(1, {1}, {{0.5, 0.5}})}, {}));
  const auto idx = BuildAssignments(lib.probe, {}, {}, 2);
  PrototypeBank bank(2);
  UpdatePrototype(bank, 1, {0.9, 0.1}, 0.5);
  const LossValue v = CrossViewLoss(idx, lib.probs, bank);
  EXPECT_NEAR(v.value, 0.510826, 1e-6);
  EXPECT_EQ(v.normalizer, 1.0);
}

TEST(CrossViewLossTest, MissingPrototypeIsLogicError) {
  LibFixture lib(Fixture(2, {MakeOBag(1, {1}, {{0.5, 0.5}})}, {}));
  const auto idx = BuildAssignments(lib.probe, {}, {}, 2);
  EXPECT_THROW(CrossViewLoss(idx, lib.probs, PrototypeBank(2)), std::logic_error);
}

TEST(CrossViewLossTest, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = testing::RandomFixture(seed);
    LibFixture lib(f);
    const auto groups = FormGroups(lib.gallery, lib.feats, Hyperparams{});
    const auto idx = BuildAssignments(lib.probe, lib.gallery, groups, f.classes);
    const auto oa = testing::OracleAssignments(f.probe, f.gallery, ToOracle(groups));
    // Stale prototypes from an independent draw blended with this epoch's.
    std::mt19937_64 rng(seed + 1000);
    PrototypeBank bank(f.classes);
    std::map<int, testing::Dist> protos;
    for (int c = 0; c < f.classes; ++c) {
      const auto cur = EpochPrototype(idx, lib.probs, c);
      if (!cur) continue;
      const auto old = testing::RandomSimplex(rng, f.classes);
      UpdatePrototype(bank, c, old, 0.5);
      UpdatePrototype(bank, c, *cur, 0.5);
      testing::Dist want(static_cast<std::size_t>(f.classes));
      for (std::size_t k = 0; k < want.size(); ++k) want[k] = 0.5 * old[k] + 0.5 * (*cur)[k];
      protos[c] = want;
    }
    EXPECT_NEAR(CrossViewLoss(idx, lib.probs, bank).value,
                testing::OracleCrossView(oa, f.probe, f.gallery, protos), 1e-12);
  }
}

TEST(EntropyLossTest, UniformAndOneHot) {
  LibFixture uniform(Fixture(4, {}, {MakeOBag(1, {1}, {{0.25, 0.25, 0.25, 0.25}})}));
  EXPECT_NEAR(EntropyLoss(uniform.gallery).value, std::log(4.0), 1e-15);
  EXPECT_NEAR(EntropyLoss(uniform.gallery).value, 1.386294, 1e-6);
  LibFixture onehot(Fixture(4, {}, {MakeOBag(1, {1}, {{0.0, 1.0, 0.0, 0.0}})}));
  EXPECT_EQ(EntropyLoss(onehot.gallery).value, 0.0);
}

TEST(EntropyLossTest, MatchesOracleOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = testing::RandomFixture(seed);
    LibFixture lib(f);
    EXPECT_NEAR(EntropyLoss(lib.gallery).value, testing::OracleEntropy(f.gallery), 1e-12);
  }
}

LossTerms ConstantTerms() {
  LossTerms t;
  t.classification.value = 1.0;
  t.intra_bag.value = 0.5;
  t.cross_view.value = 0.25;
  t.entropy.value = 0.25;
  return t;
}

TEST(TotalLossTest, WeightedSum) {
  EXPECT_DOUBLE_EQ(TotalLoss(ConstantTerms(), 1.0).value, 2.0);
  EXPECT_DOUBLE_EQ(TotalLoss(ConstantTerms(), 0.5).value, 1.5);
  EXPECT_DOUBLE_EQ(TotalLoss(ConstantTerms(), 1.0, {true, false, false}).value, 1.5);
  EXPECT_THROW(TotalLoss(ConstantTerms(), 1.5), std::invalid_argument);
}

TEST(TotalLossTest, ZeroDeltaOrEmptyMaskIsClassificationBitwise) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto f = testing::RandomFixture(seed);
    LibFixture lib(f);
    const auto groups = FormGroups(lib.gallery, lib.feats, Hyperparams{});
    const auto idx = BuildAssignments(lib.probe, lib.gallery, groups, f.classes);
    PrototypeBank bank(f.classes);
    for (int c = 0; c < f.classes; ++c)
      if (auto p = EpochPrototype(idx, lib.probs, c)) UpdatePrototype(bank, c, *p, 0.5);
    LossTerms t;
    t.probe = ProbeLoss(lib.probe);
    t.gallery = GalleryLoss(lib.gallery);
    t.classification = ClassificationLoss(t.probe, t.gallery);
    t.intra_bag = IntraBagLoss(lib.gallery, groups);
    t.cross_view = CrossViewLoss(idx, lib.probs, bank);
    t.entropy = EntropyLoss(lib.gallery);
    const LossValue none = TotalLoss(t, 0.7, TermMask::None());
    EXPECT_EQ(none.value, t.classification.value);
    EXPECT_EQ(none.grad_logits, t.classification.grad_logits);
    const LossValue zero = TotalLoss(t, 0.0);
    EXPECT_EQ(zero.value, t.classification.value);
    EXPECT_EQ(zero.grad_logits, t.classification.grad_logits);
    const LossValue all = TotalLoss(t, 0.3);
    EXPECT_NEAR(all.value,
                t.classification.value +
                    0.3 * (t.intra_bag.value + t.cross_view.value + t.entropy.value),
                1e-12);
  }
}

TEST(RampTest, KnownValues) {
  Hyperparams hp;
  EXPECT_NEAR(RampWeight(0, hp), std::exp(-5.0), 1e-15);
  EXPECT_NEAR(RampWeight(0, hp), 0.006738, 1e-6);
  EXPECT_EQ(RampWeight(30, hp), 1.0);
  EXPECT_EQ(RampWeight(45, hp), 1.0);
  hp.delta_max = 0.4;
  EXPECT_DOUBLE_EQ(RampWeight(30, hp), 0.4);
  EXPECT_THROW(RampWeight(-1, hp), std::invalid_argument);
}

TEST(RampTest, MonotoneAndMatchesOracle) {
  Hyperparams hp;
  hp.ramp_length = 17;
  hp.delta_max = 0.8;
  double prev = 0.0;
  for (int t = 0; t <= 40; ++t) {
    const double d = RampWeight(t, hp);
    EXPECT_GE(d, prev);
    EXPECT_NEAR(d, testing::OracleRamp(t, 17, 0.8), 1e-15);
    prev = d;
  }
}

TEST(HyperparamsTest, Validate) {
  Hyperparams hp;
  EXPECT_NO_THROW(hp.Validate());
  hp.gamma = 1.0;
  EXPECT_THROW(hp.Validate(), std::invalid_argument);
  hp = {};
  hp.knn = 0;
  EXPECT_THROW(hp.Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace cvmiml
