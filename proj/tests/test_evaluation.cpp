#include <gtest/gtest.h>

#include <fstream>

#include "hmof/error.hpp"
#include "hmof/evaluation.hpp"
#include "hmof/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hmof;
using hmof::testing::TempDir;

namespace {

constexpr Label A = Label::abnormal;
constexpr Label N = Label::normal;

BinaryMask box(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.set(x, y);
  return m;
}

}  // namespace

TEST(Roc, PerfectSeparation) {
  const std::vector<double> s{-10, -9, 5, 6};
  const std::vector<Label> l{A, A, N, N};
  const RocCurve c = roc(s, l);
  bool corner = false;
  for (const auto& p : c.points) corner |= p.fpr == 0.0 && p.tpr == 1.0;
  EXPECT_TRUE(corner);
  EXPECT_EQ(auc(c), 1.0);
  EXPECT_EQ(eer(c), 0.0);
}

TEST(Roc, SwappedLabels) {
  const std::vector<double> s{-10, -9, 5, 6};
  const std::vector<Label> l{N, N, A, A};
  const RocCurve c = roc(s, l);
  bool corner = false;
  for (const auto& p : c.points) corner |= p.fpr == 1.0 && p.tpr == 0.0;
  EXPECT_TRUE(corner);
  EXPECT_EQ(auc(c), 0.0);
  EXPECT_EQ(eer(c), 1.0);
}

TEST(Roc, IdenticalScores) {
  const std::vector<double> s(6, 2.5);
  const std::vector<Label> l{A, N, N, A, N, N};
  const RocCurve c = roc(s, l);
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_EQ(c.points[0].fpr, 0.0);
  EXPECT_EQ(c.points[0].tpr, 0.0);
  EXPECT_EQ(c.points[1].fpr, 1.0);
  EXPECT_EQ(c.points[1].tpr, 1.0);
  EXPECT_EQ(auc(c), 0.5);
  EXPECT_EQ(eer(c), 0.5);
}

TEST(Roc, Errors) {
  EXPECT_THROW(roc(std::vector<double>{1, 2}, std::vector<Label>{A, A}), DataError);
  EXPECT_THROW(roc(std::vector<double>{1, 2}, std::vector<Label>{A}), DataError);
}

TEST(Roc, RandomScoresMatchOracles) {
  Rng rng(1000);
  std::vector<double> s(1000);
  std::vector<Label> l(1000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal();
    l[i] = rng.uniform() < 0.3 ? A : N;
  }
  const RocCurve c = roc(s, l);
  const double a = auc(c);
  EXPECT_NEAR(a, 0.5, 0.05);
  EXPECT_NEAR(a, oracle::pairwise_auc(s, l), 1e-12);
  const double e = eer(c);
  EXPECT_NEAR(e, 0.5, 0.05);
  EXPECT_NEAR(e, oracle::dense_scan_eer(oracle::direct_operating_points(s, l)), 1e-6);
}

TEST(Roc, CurveMatchesDirectCounting) {
  Rng rng(7);
  std::vector<double> s(200);
  std::vector<Label> l(200);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = static_cast<double>(rng.below(15));  // heavy ties
    l[i] = rng.uniform() < 0.5 ? A : N;
  }
  const RocCurve c = roc(s, l);
  const auto direct = oracle::direct_operating_points(s, l);
  ASSERT_EQ(c.points.size(), direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    EXPECT_DOUBLE_EQ(c.points[i].fpr, direct[i].fpr);
    EXPECT_DOUBLE_EQ(c.points[i].tpr, direct[i].tpr);
  }
  EXPECT_NEAR(auc(c), oracle::pairwise_auc(s, l), 1e-12);
}

TEST(Roc, SwappedLabelsComplementAuc) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(80);
    std::vector<Label> l(80), swapped(80);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::round(rng.normal() * 3) + (i % 2 ? 0.5 : 0.0);
      l[i] = i % 3 == 0 ? A : N;
      swapped[i] = l[i] == A ? N : A;
    }
    EXPECT_NEAR(auc(roc(s, l)) + auc(roc(s, swapped)), 1.0, 1e-9);
  }
}

TEST(Roc, InvariantUnderMonotoneTransform) {
  Rng rng(9);
  std::vector<double> s(300), t(300);
  std::vector<Label> l(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = std::round(rng.normal() * 4) / 4 + (i < 60 ? -1.0 : 0.0);
    t[i] = std::exp(s[i]) * 3.0 - 7.0;
    l[i] = i < 60 || rng.uniform() < 0.1 ? A : N;
  }
  const RocCurve a = roc(s, l), b = roc(t, l);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_NEAR(a.points[i].fpr, b.points[i].fpr, 1e-9);
    EXPECT_NEAR(a.points[i].tpr, b.points[i].tpr, 1e-9);
  }
  EXPECT_NEAR(auc(a), auc(b), 1e-9);
  EXPECT_NEAR(eer(a), eer(b), 1e-9);
}

TEST(Roc, InfiniteFrameScoresSortLast) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> s{-3, inf, inf, -1, 2};
  const std::vector<Label> l{A, N, A, N, N};
  const RocCurve c = roc(s, l);
  EXPECT_EQ(c.points.back().tpr, 1.0);
  EXPECT_EQ(c.points.back().fpr, 1.0);
  EXPECT_NEAR(auc(c), oracle::pairwise_auc(s, l), 1e-12);
}

TEST(PixelVerdict, FortyPercentRule) {
  const BinaryMask truth = box(10, 10, 0, 0, 10, 10);  // 100 pixels
  EXPECT_EQ(pixel_level_verdict(box(10, 10, 0, 0, 10, 4), truth), PixelVerdict::true_positive);
  BinaryMask thirty_nine = box(10, 10, 0, 0, 10, 3);
  for (int x = 0; x < 9; ++x) thirty_nine.set(x, 3);
  EXPECT_EQ(thirty_nine.count(), 39u);
  EXPECT_EQ(pixel_level_verdict(thirty_nine, truth), PixelVerdict::miss);
  EXPECT_EQ(pixel_level_verdict(box(10, 10, 0, 0, 2, 2), BinaryMask(10, 10)),
            PixelVerdict::false_alarm);
  EXPECT_EQ(pixel_level_verdict(BinaryMask(10, 10), BinaryMask(10, 10)),
            PixelVerdict::true_negative);
  EXPECT_THROW(pixel_level_verdict(BinaryMask(10, 10), BinaryMask(9, 10)), DataError);
  EXPECT_TRUE(covers_enough(2, 5));
  EXPECT_FALSE(covers_enough(1, 3));
}

TEST(PixelVerdict, GrowingDetectionNeverLosesTruePositive) {
  Rng rng(10);
  const BinaryMask truth = box(16, 16, 3, 3, 11, 9);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask d(16, 16);
    bool was_tp = false;
    for (int step = 0; step < 120; ++step) {
      d.set(static_cast<int>(rng.below(16)), static_cast<int>(rng.below(16)));
      const bool tp = pixel_level_verdict(d, truth) == PixelVerdict::true_positive;
      EXPECT_TRUE(tp || !was_tp);
      was_tp = tp;
    }
  }
}

TEST(PixelRoc, PerfectAndDisjointDetections) {
  // Two frames with a square anomaly in patch 0 and two clean frames, 2x2 grid of 4px patches.
  const PatchGrid grid = partition(8, 8, 4);
  const std::vector<BinaryMask> truth{box(8, 8, 0, 0, 4, 4), box(8, 8, 0, 0, 4, 4), BinaryMask(8, 8),
                                      BinaryMask(8, 8)};
  std::vector<FramePatchScores> perfect{{0, {{0, -9}, {1, 5}}}, {1, {{0, -8}, {3, 4}}},
                                        {2, {{1, 3}, {2, 6}}}, {3, {}}};
  const RocCurve good = pixel_roc(perfect, truth, grid, 1);
  EXPECT_EQ(auc(good), 1.0);
  EXPECT_EQ(eer(good), 0.0);

  std::vector<FramePatchScores> disjoint{{0, {{3, -9}}}, {1, {{2, -8}}}, {2, {{1, 3}}}, {3, {}}};
  const RocCurve bad = pixel_roc(disjoint, truth, grid, 1);
  for (const auto& p : bad.points) {
    if (std::isfinite(p.threshold)) EXPECT_EQ(p.tpr, 0.0);
  }
  EXPECT_THROW(pixel_roc(perfect, {}, grid, 1), DataError);
}

TEST(PixelRoc, MatchesPerThresholdVerdicts) {
  Rng rng(55);
  const PatchGrid grid = partition(12, 12, 4);
  std::vector<BinaryMask> truth;
  std::vector<FramePatchScores> frames;
  for (std::size_t f = 0; f < 30; ++f) {
    BinaryMask m(12, 12);
    if (f % 3 == 0) {
      const int x = static_cast<int>(rng.below(8)), y = static_cast<int>(rng.below(8));
      m = box(12, 12, x, y, x + 4, y + 4);
    }
    truth.push_back(m);
    FramePatchScores fs{f, {}};
    for (std::size_t id = 0; id < grid.patch_count(); ++id)
      if (rng.uniform() < 0.6) fs.patches.push_back({id, std::round(rng.uniform(-4, 4))});
    frames.push_back(fs);
  }
  const int beta = 2;
  const RocCurve c = pixel_roc(frames, truth, grid, beta);
  for (const auto& p : c.points) {
    if (!std::isfinite(p.threshold)) continue;
    double tp = 0, fp = 0, pos = 0, neg = 0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const PixelVerdict v = pixel_level_verdict(detection_mask(grid, frames[f], p.threshold, beta), truth[f]);
      (truth[f].empty() ? neg : pos) += 1;
      tp += v == PixelVerdict::true_positive;
      fp += v == PixelVerdict::false_alarm;
    }
    EXPECT_DOUBLE_EQ(p.tpr, tp / pos) << p.threshold;
    EXPECT_DOUBLE_EQ(p.fpr, fp / neg) << p.threshold;
  }
  EXPECT_EQ(c.points.front().tpr, 0.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
  EXPECT_EQ(c.points.back().fpr, 1.0);
}

TEST(DetectionMask, RequiresBeta) {
  const PatchGrid grid = partition(8, 8, 4);
  const FramePatchScores f{0, {{0, -1}, {3, -2}, {1, 5}}};
  EXPECT_EQ(detection_mask(grid, f, 0.0, 2).count(), 32u);
  EXPECT_TRUE(detection_mask(grid, f, 0.0, 3).empty());
  EXPECT_EQ(patch_mask(grid, std::vector<std::size_t>{1}), box(8, 8, 4, 0, 8, 4));
}

TEST(GroundTruthIo, RoundTripAndFormats) {
  TempDir tmp("gt");
  GroundTruth gt;
  gt.labels = {N, A, N};
  gt.masks = std::vector<BinaryMask>{BinaryMask(6, 4), box(6, 4, 1, 1, 3, 3), BinaryMask(6, 4)};
  save_ground_truth(tmp / "gt.csv", tmp / "masks", gt);
  const GroundTruth back = load_ground_truth(tmp / "gt.csv", tmp / "masks");
  EXPECT_EQ(back.labels, gt.labels);
  ASSERT_TRUE(back.masks.has_value());
  EXPECT_EQ(*back.masks, *gt.masks);
  EXPECT_FALSE(load_ground_truth(tmp / "gt.csv", tmp / "absent").masks.has_value());
  EXPECT_FALSE(load_ground_truth(tmp / "gt.csv", std::nullopt).masks.has_value());

  std::ofstream(tmp / "numeric.csv") << "0,0\n1,1\n";
  EXPECT_EQ(load_ground_truth(tmp / "numeric.csv", std::nullopt).labels, (std::vector<Label>{N, A}));
  std::ofstream(tmp / "bad.csv") << "0,maybe\n";
  EXPECT_THROW(load_ground_truth(tmp / "bad.csv", std::nullopt), DataError);
  EXPECT_THROW(load_ground_truth(tmp / "missing.csv", std::nullopt), DataError);
}

TEST(GroundTruth, ValidateRejectsMaskOnNormalFrame) {
  GroundTruth gt;
  gt.labels = {N};
  gt.masks = std::vector<BinaryMask>{box(4, 4, 0, 0, 1, 1)};
  EXPECT_THROW(gt.validate(), DataError);
}
