#include <gtest/gtest.h>

#include <cmath>

#include "imime/error.hpp"
#include "imime/rng.hpp"
#include "imime/viewer_sim.hpp"
#include "imime/vision_face.hpp"

using namespace imime;
using namespace imime::face;

namespace {

Frame textured(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Frame f(w, h);
  for (auto& p : f.pixels()) p = static_cast<std::uint8_t>(rng.index(256));
  return f;
}

Frame shifted(const Frame& src, int dx, int dy, std::uint8_t pad) {
  Frame out(src.width(), src.height(), pad);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const int sx = x - dx;
      const int sy = y - dy;
      if (sx >= 0 && sy >= 0 && sx < src.width() && sy < src.height()) out(x, y) = src(sx, sy);
    }
  }
  return out;
}

FlowField uniform_field(const PixelRect& region, double dx, double dy) {
  FlowField f{region, 8, 7, {}};
  for (int y = region.y; y < region.bottom(); y += 8)
    for (int x = region.x; x < region.right(); x += 8)
      f.blocks.push_back({PixelRect{x, y, 8, 8}, {dx, dy}});
  return f;
}

std::array<FlowField, kRegionCount> region_fields(const PixelRect& face, const RegionLayout& layout) {
  std::array<FlowField, kRegionCount> out;
  const auto rects = partition_regions(face, layout);
  for (std::size_t r = 0; r < kRegionCount; ++r) out[r] = uniform_field(rects[r], 0, 0);
  return out;
}

}  // namespace

TEST(PartitionRegions, MouthCentredInLowerThird) {
  const auto r = partition_regions({0, 0, 140, 140}, RegionLayout::standard());
  const auto mouth = r[static_cast<std::size_t>(Region::Mouth)];
  EXPECT_EQ(mouth.x + mouth.w / 2.0, 70.0);
  EXPECT_GE(mouth.y, 140 * 2 / 3 - 1);
  EXPECT_LE(mouth.bottom(), 140);
}

TEST(PartitionRegions, CanonicalOrderDisjointInside) {
  const PixelRect face{5, 7, 61, 83};
  const auto r = partition_regions(face, RegionLayout::standard());
  for (std::size_t i = 0; i < kRegionCount; ++i) {
    EXPECT_GE(r[i].area(), 4);
    EXPECT_GE(r[i].x, face.x);
    EXPECT_GE(r[i].y, face.y);
    EXPECT_LE(r[i].right(), face.right());
    EXPECT_LE(r[i].bottom(), face.bottom());
    for (std::size_t j = i + 1; j < kRegionCount; ++j) EXPECT_FALSE(r[i].intersects(r[j]));
  }
  EXPECT_LT(r[0].x, r[1].x);  // LeftEyebrow before RightEyebrow
  EXPECT_LT(r[0].y, r[2].y);  // eyebrows above eyes
  EXPECT_LT(r[2].y, r[4].y);  // eyes above cheeks
}

TEST(PartitionRegions, SmallestLegalRect) {
  const auto r = partition_regions({10, 10, 14, 14}, RegionLayout::standard());
  for (const auto& rect : r) EXPECT_GE(rect.area(), 4);
}

TEST(PartitionRegions, TooSmallRejected) {
  try {
    (void)partition_regions({0, 0, 13, 13}, RegionLayout::standard());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RectTooSmall);
  }
}

TEST(RegionLayout, ValidateRejectsOverlapAndAsymmetry) {
  EXPECT_NO_THROW(RegionLayout::standard().validate());
  auto overlap = RegionLayout::standard();
  overlap.regions[static_cast<std::size_t>(Region::Mouth)].y0 = 0.6;
  EXPECT_THROW(overlap.validate(), Error);
  auto lopsided = RegionLayout::standard();
  lopsided.regions[static_cast<std::size_t>(Region::LeftEye)].x0 = 0.12;
  EXPECT_THROW(lopsided.validate(), Error);
  auto outside = RegionLayout::standard();
  outside.regions[static_cast<std::size_t>(Region::Mouth)].y1 = 1.2;
  EXPECT_THROW(outside.validate(), Error);
}

TEST(BlockFlow, IdenticalFramesGiveZeroFlow) {
  const Frame f = textured(64, 64, 3);
  const auto field = block_flow(f, f, {8, 8, 48, 48});
  ASSERT_EQ(field.blocks.size(), 36u);
  for (const auto& b : field.blocks) {
    EXPECT_EQ(b.flow.dx, 0);
    EXPECT_EQ(b.flow.dy, 0);
  }
}

TEST(BlockFlow, RightShiftByThree) {
  const Frame prev = textured(80, 64, 11);
  const Frame cur = shifted(prev, 3, 0, 128);
  const auto field = block_flow(prev, cur, {0, 0, 80, 64});
  int interior = 0;
  for (const auto& b : field.blocks) {
    // source block and full search window inside the frame
    if (b.block.x < 7 || b.block.right() + 7 > 80 || b.block.y < 7 || b.block.bottom() + 7 > 64) continue;
    ++interior;
    EXPECT_EQ(b.flow.dx, 3);
    EXPECT_EQ(b.flow.dy, 0);
  }
  EXPECT_GT(interior, 0);
}

TEST(BlockFlow, ExactOnRandomIntegerTranslations) {
  Rng rng(99);
  const Frame prev = textured(72, 72, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const int dx = static_cast<int>(rng.index(15)) - 7;
    const int dy = static_cast<int>(rng.index(15)) - 7;
    const Frame cur = shifted(prev, dx, dy, 0);
    const auto field = block_flow(prev, cur, {16, 16, 40, 40});
    for (const auto& b : field.blocks) {
      EXPECT_EQ(b.flow.dx, dx);
      EXPECT_EQ(b.flow.dy, dy);
      EXPECT_LE(std::abs(b.flow.dx), 7);
      EXPECT_LE(std::abs(b.flow.dy), 7);
    }
  }
}

TEST(BlockFlow, LocalMouthEditStaysInMouthBlocks) {
  const PixelRect face{20, 10, 80, 96};
  const Frame prev = textured(120, 120, 21);
  const auto mouth = partition_regions(face, RegionLayout::standard())[static_cast<std::size_t>(Region::Mouth)];
  Frame cur = prev;
  for (int y = mouth.y; y < mouth.bottom(); ++y)
    for (int x = mouth.x; x < mouth.right(); ++x) cur(x, y) = prev(x, y - 2);
  const auto field = block_flow(prev, cur, face);
  const PixelRect touched{mouth.x, mouth.y, mouth.w, mouth.h};
  int moving = 0;
  for (const auto& b : field.blocks) {
    if (b.flow.dx != 0 || b.flow.dy != 0) {
      ++moving;
      EXPECT_TRUE(b.block.intersects(touched));
    }
  }
  EXPECT_GT(moving, 0);
}

TEST(BlockFlow, TieBreakPrefersSmallestDisplacement) {
  const Frame flat(40, 40, 77);
  const auto field = block_flow(flat, flat, {8, 8, 24, 24});
  for (const auto& b : field.blocks) {
    EXPECT_EQ(b.flow.dx, 0);
    EXPECT_EQ(b.flow.dy, 0);
  }
}

TEST(BlockFlow, DimensionMismatch) {
  try {
    (void)block_flow(Frame(32, 32), Frame(32, 40), {0, 0, 16, 16});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(CharacteristicFlow, ZeroFields) {
  const auto fields = region_fields({0, 0, 64, 64}, RegionLayout::standard());
  const auto cf = characteristic_flow(fields);
  for (double v : cf) EXPECT_EQ(v, 0);
}

TEST(CharacteristicFlow, MouthOnly) {
  auto fields = region_fields({0, 0, 64, 64}, RegionLayout::standard());
  for (auto& b : fields[6].blocks) b.flow = {0, 2};
  const auto cf = characteristic_flow(fields);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(cf[i], 0);
  EXPECT_EQ(cf[12], 0);
  EXPECT_EQ(cf[13], 2);
}

TEST(CharacteristicFlow, MixedRegionIsArithmeticMean) {
  auto fields = region_fields({0, 0, 64, 64}, RegionLayout::standard());
  fields[3].blocks = {{{0, 0, 8, 8}, {1, 0}}, {{8, 0, 8, 8}, {3, 0}}};
  const auto cf = characteristic_flow(fields);
  EXPECT_EQ(cf[6], 2);
  EXPECT_EQ(cf[7], 0);
}

TEST(CharacteristicFlow, LinearInScaledFields) {
  Rng rng(4);
  auto fields = region_fields({0, 0, 96, 96}, RegionLayout::standard());
  for (auto& f : fields)
    for (auto& b : f.blocks) b.flow = {rng.uniform() * 6 - 3, rng.uniform() * 6 - 3};
  const double alpha = 2.5;
  auto scaled = fields;
  for (auto& f : scaled)
    for (auto& b : f.blocks) b.flow = {alpha * b.flow.dx, alpha * b.flow.dy};
  const auto a = characteristic_flow(fields);
  const auto b = characteristic_flow(scaled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], alpha * a[i], 1e-12);
}

TEST(ClassifyExpression, SelfSimilarity) {
  const auto refs = standard_expression_references();
  EXPECT_EQ(classify_expression(refs[0].flow, refs), "Smile");
  EXPECT_EQ(classify_expression(CharacteristicFlow{}, refs), kNeutral);
}

TEST(ClassifyExpression, ScaledFrownWithOrthogonalRefs) {
  CharacteristicFlow frown{};
  frown[1] = 2;
  frown[3] = 2;
  frown[13] = 2;
  CharacteristicFlow other{};
  other[8] = 3;
  other[10] = -3;
  const std::vector<ExpressionReference> refs{{"Other", other}, {"Frown", frown}};
  CharacteristicFlow half{};
  for (std::size_t i = 0; i < half.size(); ++i) half[i] = 0.5 * frown[i];
  // cosine of half with frown is 1, with other 0
  EXPECT_EQ(classify_expression(half, refs), "Frown");
}

TEST(ClassifyExpression, ScaleInvariantAboveMagnitudeGate) {
  const auto refs = standard_expression_references();
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    CharacteristicFlow cf{};
    // bias toward a reference so both labelled and Neutral outcomes occur
    for (std::size_t i = 0; i < cf.size(); ++i) {
      cf[i] = refs[trial % 3].flow[i] + (rng.uniform() - 0.5) * (trial % 2 ? 0.4 : 2.0);
    }
    double n = 0;
    for (double v : cf) n += v * v;
    n = std::sqrt(n);
    auto scaled = [&](double alpha) {
      CharacteristicFlow s{};
      for (std::size_t i = 0; i < cf.size(); ++i) s[i] = alpha * cf[i];
      return classify_expression(s, refs);
    };
    const auto base = scaled(2.0 / n);
    for (double alpha : {1.01 / n, 5.0 / n, 40.0 / n, 1e3 / n}) EXPECT_EQ(scaled(alpha), base);
  }
}

TEST(ClassifyExpression, TiesFollowReferenceOrder) {
  CharacteristicFlow v{};
  v[0] = 3;
  const std::vector<ExpressionReference> refs{{"First", v}, {"Second", v}};
  EXPECT_EQ(classify_expression(v, refs), "First");
}

TEST(ClassifyExpression, Errors) {
  try {
    (void)classify_expression({}, std::vector<ExpressionReference>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyReferenceSet);
  }
}

TEST(ClassifyMotion, StillRigidNonRigid) {
  const PixelRect face{0, 0, 96, 96};
  const auto layout = RegionLayout::standard();
  const auto zero = uniform_field(face, 0, 0);
  const auto zero_cf = characteristic_flow(region_fields(face, layout));
  EXPECT_EQ(classify_motion(zero, zero_cf), MotionClass::Still);

  const auto moving = uniform_field(face, 4, 0);
  CharacteristicFlow rigid_cf{};
  for (std::size_t r = 0; r < kRegionCount; ++r) rigid_cf[2 * r] = 4;
  EXPECT_GT(peak_spread(moving), MotionThresholds{}.spread);
  EXPECT_EQ(classify_motion(moving, rigid_cf), MotionClass::Rigid);

  // flow only inside the mouth and eyebrow regions
  const auto rects = partition_regions(face, layout);
  auto local = uniform_field(face, 0, 0);
  CharacteristicFlow local_cf{};
  for (auto& b : local.blocks) {
    for (auto r : {Region::Mouth, Region::LeftEyebrow, Region::RightEyebrow}) {
      if (b.block.intersects(rects[static_cast<std::size_t>(r)])) b.flow = {0, 3};
    }
  }
  for (auto r : {Region::Mouth, Region::LeftEyebrow, Region::RightEyebrow}) {
    local_cf[2 * static_cast<std::size_t>(r) + 1] = 3;
  }
  EXPECT_EQ(classify_motion(local, local_cf), MotionClass::NonRigid);
}

TEST(SymmetryScore, MirrorIdentityAndExtremes) {
  Frame f(40, 40, 0);
  Rng rng(2);
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 20; ++x) {
      const auto v = static_cast<std::uint8_t>(rng.index(256));
      f(x, y) = v;
      f(39 - x, y) = v;
    }
  }
  EXPECT_EQ(symmetry_score(f, {0, 0, 40, 40}), 0.0);

  Frame split(40, 40, 0);
  for (int y = 0; y < 40; ++y)
    for (int x = 20; x < 40; ++x) split(x, y) = 255;
  // the 3x3 median leaves a sharp vertical step untouched
  EXPECT_DOUBLE_EQ(symmetry_score(split, {0, 0, 40, 40}), 1.0);
}

TEST(SymmetryScore, InvariantUnderMirroring) {
  const Frame f = textured(50, 40, 17);
  const PixelRect rect{5, 4, 30, 28};
  Frame mirrored = f;
  for (int y = rect.y; y < rect.bottom(); ++y)
    for (int x = 0; x < rect.w; ++x) mirrored(rect.x + x, y) = f(rect.right() - 1 - x, y);
  EXPECT_DOUBLE_EQ(symmetry_score(f, rect), symmetry_score(mirrored, rect));
}

TEST(SymmetryScore, YawedFaceLessSymmetric) {
  sim::SceneConfig scene;
  sim::ViewerState frontal;
  frontal.yaw_degrees = 0;
  sim::ViewerState yawed = frontal;
  yawed.yaw_degrees = 30;
  Rng a(1);
  Rng b(1);
  const auto f0 = sim::synthesize_face_frame(frontal, scene, a);
  const auto f1 = sim::synthesize_face_frame(yawed, scene, b);
  EXPECT_LT(symmetry_score(f0.frame, f0.rect), symmetry_score(f1.frame, f1.rect));
}

TEST(EdgeCogOffset, UniformRectHasNoEdges) {
  EXPECT_EQ(edge_cog_offset(Frame(40, 40, 90), {0, 0, 40, 40}), 0.0);
}

TEST(EdgeCogOffset, VerticalEdgeAtLeftQuarter) {
  // step between columns 9 and 10 of a 40-wide rect: significant gradient at
  // columns 9 and 10, centres 9.5 and 10.5, centre of gravity 10 = quarter line
  Frame f(40, 30, 0);
  for (int y = 0; y < 30; ++y)
    for (int x = 10; x < 40; ++x) f(x, y) = 200;
  EXPECT_DOUBLE_EQ(edge_cog_offset(f, {0, 0, 40, 30}), -0.5);
}

TEST(EdgeCogOffset, SymmetricFrontalFace) {
  sim::SceneConfig scene;
  scene.noise_sigma = 0;
  sim::ViewerState st;
  st.yaw_degrees = 0;
  Rng rng(1);
  const auto f = sim::synthesize_face_frame(st, scene, rng);
  EXPECT_LT(std::abs(edge_cog_offset(f.frame, f.rect)), 0.1);
  EXPECT_LT(symmetry_score(f.frame, f.rect), 0.06);
}

TEST(FuseOrientation, DecisionTable) {
  const auto f = fuse_orientation(0, 0);
  EXPECT_EQ(f.label, Orientation::Frontal);
  EXPECT_DOUBLE_EQ(f.confidence, 1.0);
  EXPECT_EQ(fuse_orientation(0.9, 0.8).label, Orientation::Right);
  EXPECT_EQ(fuse_orientation(0.02, 0.9).label, Orientation::Right);
  EXPECT_EQ(fuse_orientation(0.02, -0.9).label, Orientation::Left);
  EXPECT_EQ(fuse_orientation(0.5, -0.1).label, Orientation::Left);
  // no lateral evidence: previous turned label kept
  EXPECT_EQ(fuse_orientation(0.5, 0.0, {}, Orientation::Right).label, Orientation::Right);
  EXPECT_EQ(fuse_orientation(0.5, 0.0, {}, Orientation::Left).label, Orientation::Left);
}

TEST(FuseOrientation, FrontalImpliesBothCuesBelowThreshold) {
  Rng rng(12);
  const OrientationThresholds t;
  for (int i = 0; i < 2000; ++i) {
    const double s = rng.uniform() * 0.2;
    const double e = rng.uniform() * 1.0 - 0.5;
    const auto est = fuse_orientation(s, e, t);
    if (est.label == Orientation::Frontal) {
      EXPECT_LT(s, t.symmetry);
      EXPECT_LT(std::abs(e), t.edge);
      EXPECT_NEAR(est.confidence, (1 - s / t.symmetry) * (1 - std::abs(e) / t.edge), 1e-12);
    }
    EXPECT_GE(est.confidence, 0);
    EXPECT_LE(est.confidence, 1);
    const auto again = fuse_orientation(s, e, t);
    EXPECT_EQ(again.label, est.label);
    EXPECT_EQ(again.confidence, est.confidence);
  }
}

TEST(EstimateJerk, PolynomialSequences) {
  auto run = [](auto fx) {
    HeadTrack track;
    for (int t = 0; t < 5; ++t) track.push({fx(t), 0});
    return estimate_jerk(track);
  };
  EXPECT_EQ(run([](int) { return 7.0; }), 0.0);
  EXPECT_EQ(run([](int t) { return std::pow(t, 3); }), 0.0);
  EXPECT_EQ(run([](int t) { return std::pow(t, 4); }), 24.0);
}

TEST(EstimateJerk, CubicsVanishAfterWraparound) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    double c[4];
    double d[4];
    for (int i = 0; i < 4; ++i) {
      c[i] = rng.uniform() * 2 - 1;
      d[i] = rng.uniform() * 2 - 1;
    }
    HeadTrack track;
    for (int t = 0; t < 9; ++t) {
      const double x = c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
      const double y = d[0] + d[1] * t + d[2] * t * t + d[3] * t * t * t;
      track.push({x, y});
    }
    EXPECT_NEAR(estimate_jerk(track), 0.0, 1e-9);
  }
}

TEST(EstimateJerk, InsufficientHistory) {
  HeadTrack track;
  for (int i = 0; i < 4; ++i) track.push({0, 0});
  try {
    (void)estimate_jerk(track);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientHistory);
  }
}

TEST(HeadTrack, ChronologicalFixedCapacity) {
  HeadTrack track(5);
  for (int i = 0; i < 8; ++i) track.push({static_cast<double>(i), 0});
  EXPECT_EQ(track.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(track.at(i).x, 3.0 + static_cast<double>(i));
  EXPECT_EQ(track.latest().x, 7.0);
}

TEST(DetectBrightBlob, LargestComponent) {
  Frame f(40, 40, 10);
  for (int y = 5; y < 9; ++y)
    for (int x = 5; x < 9; ++x) f(x, y) = 200;
  for (int y = 20; y < 36; ++y)
    for (int x = 12; x < 30; ++x) f(x, y) = 220;
  const auto blob = detect_bright_blob(f, 150, 20);
  ASSERT_TRUE(blob);
  EXPECT_EQ(*blob, (PixelRect{12, 20, 18, 16}));
  EXPECT_FALSE(detect_bright_blob(Frame(40, 40, 10), 150, 20));
}

TEST(Pgm, RoundTrip) {
  const Frame f = textured(17, 19, 6);
  EXPECT_EQ(decode_pgm(encode_pgm(f)), f);
}
