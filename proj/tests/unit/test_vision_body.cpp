#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "imime/error.hpp"
#include "imime/rng.hpp"
#include "imime/viewer_sim.hpp"
#include "imime/vision_body.hpp"
#include "oracles.hpp"

using namespace imime;
using namespace imime::body;

namespace {

std::vector<Frame> noisy_frames(int w, int h, double mean, double sigma, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Frame> out;
  for (int k = 0; k < n; ++k) {
    Frame f(w, h);
    for (auto& p : f.pixels()) {
      p = static_cast<std::uint8_t>(std::clamp(std::lround(mean + sigma * rng.normal()), 0L, 255L));
    }
    out.push_back(std::move(f));
  }
  return out;
}

ForegroundMask box_mask(int w, int h, std::initializer_list<PixelRect> boxes) {
  ForegroundMask m(w, h);
  for (const auto& b : boxes)
    for (int y = b.y; y < b.bottom(); ++y)
      for (int x = b.x; x < b.right(); ++x) m.set(x, y, true);
  return m;
}

}  // namespace

TEST(TrainBackground, IdenticalFramesClampToFloor) {
  const std::vector<Frame> frames(10, Frame(20, 20, 100));
  const auto m = train_background(frames);
  for (std::size_t i = 0; i < m.mean.size(); ++i) {
    EXPECT_EQ(m.mean[i], 100.0);
    EXPECT_EQ(m.variance[i], 4.0);
  }
}

TEST(TrainBackground, PopulationVariance) {
  std::vector<Frame> frames;
  for (int k = 0; k < 6; ++k) {
    Frame f(16, 16, 50);
    f(3, 4) = k % 2 ? 110 : 90;
    frames.push_back(f);
  }
  const auto m = train_background(frames);
  EXPECT_EQ(m.mean[4 * 16 + 3], 100.0);
  EXPECT_EQ(m.variance[4 * 16 + 3], 100.0);
  EXPECT_EQ(m.variance[0], 4.0);
}

TEST(TrainBackground, Errors) {
  const std::vector<Frame> one{Frame(16, 16)};
  try {
    (void)train_background(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewFrames);
  }
  const std::vector<Frame> mixed{Frame(16, 16), Frame(16, 20)};
  try {
    (void)train_background(mixed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(SegmentForeground, MeanFrameIsEmpty) {
  const auto frames = noisy_frames(48, 40, 60, 2, 20, 1);
  const auto m = train_background(frames);
  Frame mean(48, 40);
  for (std::size_t i = 0; i < m.mean.size(); ++i) {
    mean.pixels()[i] = static_cast<std::uint8_t>(std::lround(m.mean[i]));
  }
  EXPECT_EQ(segment_foreground(m, mean).count(), 0);
}

TEST(SegmentForeground, TrainingFrameUnderOnePercent) {
  const auto frames = noisy_frames(96, 72, 40, 2, 20, 2);
  const auto m = train_background(frames);
  for (const auto& f : frames) EXPECT_LT(segment_foreground(m, f).count(), 96 * 72 / 100);
}

TEST(SegmentForeground, PastedSilhouetteRecovered) {
  const int W = 96;
  const int H = 72;
  const auto frames = noisy_frames(W, H, 40, 2, 20, 3);
  const auto m = train_background(frames);
  ForegroundMask truth(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const bool torso = x >= 34 && x < 62 && y >= 36;
      const bool head = std::hypot(x - 48, y - 22) <= 8;
      truth.set(x, y, torso || head);
    }
  }
  Frame f = frames[7];
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!truth(x, y)) continue;
      const auto i = static_cast<std::size_t>(y * W + x);
      f(x, y) = static_cast<std::uint8_t>(std::lround(m.mean[i] + 10 * std::sqrt(m.variance[i])));
    }
  }
  const auto mask = segment_foreground(m, f);
  long inter = 0;
  long uni = 0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      inter += mask(x, y) && truth(x, y);
      uni += mask(x, y) || truth(x, y);
    }
  }
  EXPECT_GE(static_cast<double>(inter) / static_cast<double>(uni), 0.95);
}

TEST(SegmentForeground, ZeroThresholdMarksEveryDifferingPixel) {
  const std::vector<Frame> frames(4, Frame(20, 20, 100));
  const auto m = train_background(frames);
  const Frame f(20, 20, 101);
  EXPECT_EQ(segment_foreground(m, f, 0.0).count(), 400);
  EXPECT_EQ(segment_foreground(m, Frame(20, 20, 100), 0.0).count(), 0);
}

TEST(SegmentForeground, MajorityVoteRemovesSaltNoise) {
  const std::vector<Frame> frames(4, Frame(20, 20, 100));
  const auto m = train_background(frames);
  Frame f(20, 20, 100);
  f(5, 5) = 250;
  f(12, 3) = 0;
  EXPECT_EQ(segment_foreground(m, f).count(), 0);
}

TEST(SegmentForeground, DimensionMismatch) {
  const std::vector<Frame> frames(2, Frame(20, 20, 100));
  try {
    (void)segment_foreground(train_background(frames), Frame(20, 21));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Drape, EmptyMaskFallsToFloor) {
  const auto r = drape_heights(ForegroundMask(40, 30));
  for (double h : r.heights) EXPECT_EQ(h, 30.0);
  EXPECT_TRUE(r.converged);
  for (double v : drape(ForegroundMask(40, 30))) EXPECT_EQ(v, 0.0);
}

TEST(Drape, FlatSupportNormalizesToZero) {
  const auto mask = box_mask(40, 30, {{0, 15, 40, 15}});
  const auto r = drape_heights(mask);
  for (double h : r.heights) EXPECT_EQ(h, 15.0);
  for (double v : drape(mask)) EXPECT_EQ(v, 0.0);
}

TEST(Drape, RaisedArmPlateauAndShoulders) {
  const auto mask = box_mask(96, 72, {{30, 40, 36, 32}, {58, 6, 6, 34}});
  const auto r = drape_heights(mask);
  ASSERT_TRUE(r.converged);
  for (int x = 58; x < 64; ++x) EXPECT_EQ(r.heights[static_cast<std::size_t>(x)], 6.0);
  // left shoulder: heights never decrease moving away from the arm toward the torso top
  for (int x = 57; x > 30; --x) {
    EXPECT_GE(r.heights[static_cast<std::size_t>(x - 1)], r.heights[static_cast<std::size_t>(x)] - 1e-9);
    EXPECT_LE(r.heights[static_cast<std::size_t>(x)], 40.0);
  }
  EXPECT_GT(r.heights[57], 6.0);
  EXPECT_LT(r.heights[57], 40.0);
  const auto profile = normalize_profile(r.heights);
  EXPECT_EQ(*std::min_element(profile.begin(), profile.end()), 0.0);
  EXPECT_EQ(*std::max_element(profile.begin(), profile.end()), 1.0);
  EXPECT_EQ(profile[60], 0.0);

  // shoulder width depends on the spring coupling
  DrapeParams stiff;
  stiff.coupling = 0.6;
  EXPECT_NE(drape_heights(mask, stiff).heights[55], r.heights[55]);
}

TEST(Drape, OccludedPixelsDoNotMatter) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    ForegroundMask m(48, 36);
    for (int x = 0; x < 48; ++x) {
      if (rng.bernoulli(0.7)) m.set(x, static_cast<int>(rng.index(36)), true);
    }
    ForegroundMask more = m;
    for (int x = 0; x < 48; ++x) {
      int top = -1;
      for (int y = 0; y < 36 && top < 0; ++y)
        if (m(x, y)) top = y;
      if (top < 0) continue;
      for (int y = top + 1; y < 36; ++y) more.set(x, y, rng.bernoulli(0.5));
    }
    EXPECT_EQ(drape_heights(m).heights, drape_heights(more).heights);
  }
}

TEST(Drape, MonotoneUnderMaskInclusion) {
  Rng rng(6);
  DrapeParams fixed;
  fixed.tolerance = 0;  // same iteration count for both masks
  fixed.max_iterations = 400;
  for (int trial = 0; trial < 40; ++trial) {
    ForegroundMask small(40, 30);
    for (int i = 0; i < 30; ++i) small.set(static_cast<int>(rng.index(40)), static_cast<int>(rng.index(30)), true);
    ForegroundMask big = small;
    for (int i = 0; i < 30; ++i) big.set(static_cast<int>(rng.index(40)), static_cast<int>(rng.index(30)), true);
    const auto a = drape_heights(small, fixed).heights;
    const auto b = drape_heights(big, fixed).heights;
    for (std::size_t c = 0; c < a.size(); ++c) EXPECT_LE(b[c], a[c]);
    // default stopping rule: monotone up to the stopping residual
    const auto ad = drape_heights(small).heights;
    const auto bd = drape_heights(big).heights;
    for (std::size_t c = 0; c < ad.size(); ++c) EXPECT_LE(bd[c], ad[c] + 0.5);
  }
}

TEST(Drape, TerminatesWithinMaxIterations) {
  DrapeParams p;
  p.max_iterations = 3;
  const auto r = drape_heights(ForegroundMask(40, 30), p);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_FALSE(r.converged);
}

TEST(ClassifyPose, ExactOffsetAndAffine) {
  const auto refs = sim::pose_references(sim::SceneConfig{});
  ASSERT_EQ(refs.size(), 5u);
  for (const auto& ref : refs) {
    EXPECT_EQ(classify_pose(ref.profile, refs), ref.label);
    auto shifted = ref.profile;
    for (auto& v : shifted) v += 0.3;
    EXPECT_EQ(classify_pose(shifted, refs), ref.label);
    auto affine = ref.profile;
    for (auto& v : affine) v = 3.5 * v - 2;
    EXPECT_EQ(classify_pose(affine, refs), ref.label);
  }
}

TEST(ClassifyPose, NovelPoseIsUnknown) {
  const auto refs = sim::pose_references(sim::SceneConfig{});
  DrapeProfile novel(refs.front().profile.size());
  for (std::size_t i = 0; i < novel.size(); ++i) novel[i] = 0.5 + 0.5 * std::sin(static_cast<double>(i) * 0.7);
  double best = -1;
  for (const auto& r : refs) best = std::max(best, pearson(novel, r.profile));
  ASSERT_LT(best, 0.9);
  EXPECT_EQ(classify_pose(novel, refs), kUnknownPose);
}

TEST(ClassifyPose, ConstantProfileCorrelatesZero) {
  const std::vector<double> flat(10, 0.0);
  const std::vector<double> ramp{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_EQ(pearson(flat, ramp), 0.0);
  const std::vector<PoseReference> refs{{"Ramp", ramp}};
  EXPECT_EQ(classify_pose(flat, refs), kUnknownPose);
}

TEST(ClassifyPose, TiesFollowReferenceOrder) {
  const std::vector<double> ramp{0, 1, 2, 3};
  const std::vector<PoseReference> refs{{"A", ramp}, {"B", ramp}};
  EXPECT_EQ(classify_pose(ramp, refs), "A");
}

TEST(ClassifyPose, Errors) {
  const std::vector<double> p{0, 1};
  try {
    (void)classify_pose(p, std::vector<PoseReference>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyReferenceSet);
  }
  const std::vector<PoseReference> refs{{"A", {0, 1, 2}}};
  try {
    (void)classify_pose(p, refs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LengthMismatch);
  }
}

TEST(BodyCsv, RoundTrips) {
  const auto dir = imime::testing::scratch_dir("body-csv");
  const auto m = train_background(noisy_frames(20, 16, 70, 3, 5, 9));
  write_background_csv(dir / "bg.csv", m);
  const auto back = read_background_csv(dir / "bg.csv");
  EXPECT_EQ(back.width, m.width);
  EXPECT_EQ(back.height, m.height);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.variance, m.variance);

  const auto refs = sim::pose_references(sim::SceneConfig{});
  write_pose_references_csv(dir / "poses.csv", refs);
  const auto loaded = read_pose_references_csv(dir / "poses.csv");
  ASSERT_EQ(loaded.size(), refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    EXPECT_EQ(loaded[i].label, refs[i].label);
    EXPECT_EQ(loaded[i].profile, refs[i].profile);
  }
}
