#include <set>

#include <gtest/gtest.h>

#include "skeletor/datagen.hpp"
#include "support.hpp"

namespace skeletor {
namespace {

using testing::expect_error_kind;

TEST(Sinusoid, SumOfTerms) {
  std::vector<Sinusoid> terms{{2.0, 0.5, 0.0}, {1.0, 0.0, M_PI / 2}};
  EXPECT_NEAR(evaluate(terms, 0.5), 2.0 * std::sin(2 * M_PI * 0.25) + 1.0, 1e-12);
  EXPECT_EQ(evaluate({}, 3.0), 0.0);
}

TEST(Generate, ZeroAmplitudeIsStaticRestPose) {
  const KinematicTree tree = upper_body_tree();
  SkeletonSequence seq = generate(rest_motion(tree, 5), tree);
  ASSERT_EQ(seq.frame_count(), 5u);
  for (const Skeleton& f : seq.frames) EXPECT_EQ(f, seq.frames[0]);
  for (std::size_t j = 1; j < tree.joint_count(); ++j) {
    const Joint3D offset = seq.frames[0].joints[j] - seq.frames[0].joints[tree.parent(j)];
    EXPECT_NEAR(offset.x, tree.rest_offsets()[j].x, 1e-12);
    EXPECT_NEAR(offset.y, tree.rest_offsets()[j].y, 1e-12);
    EXPECT_NEAR(offset.z, tree.rest_offsets()[j].z, 1e-12);
  }
  for (double c : seq.frames[0].confidences) EXPECT_EQ(c, 1.0);
}

TEST(Generate, BoneLengthsExactEveryFrame) {
  const KinematicTree tree = upper_body_tree();
  for (bool planar : {false, true}) {
    CorpusSpec spec;
    spec.planar = planar;
    spec.seed = 4;
    for (std::size_t i = 0; i < 3; ++i) {
      MotionSpec motion = sample_motion(spec, tree, i);
      SkeletonSequence seq = generate(motion, tree);
      for (const Skeleton& f : seq.frames)
        for (std::size_t j = 1; j < tree.joint_count(); ++j)
          ASSERT_NEAR(distance(f.joints[j], f.joints[tree.parent(j)]), motion.bone_lengths[j], 1e-9);
      if (planar)
        for (const Skeleton& f : seq.frames)
          for (const Joint3D& j : f.joints) ASSERT_EQ(j.z, 0.0);
    }
  }
}

TEST(Generate, SmoothAndInFrontOfTorso) {
  const KinematicTree tree = upper_body_tree();
  CorpusSpec spec;
  spec.count = 10;
  spec.seed = 8;
  for (std::size_t i = 0; i < spec.count; ++i) {
    MotionSpec motion = sample_motion(spec, tree, i);
    SkeletonSequence seq = generate(motion, tree);
    EXPECT_LT(max_frame_displacement(seq), smoothness_limit(motion, tree));
    for (const Skeleton& f : seq.frames)
      for (std::size_t j = 0; j < tree.joint_count(); ++j)
        if (tree.rest_offsets()[j].z >= 1.0) EXPECT_GE(f.joints[j].z, f.joints[0].z);
  }
}

TEST(Generate, RejectsInvalidSpecs) {
  const KinematicTree tree = upper_body_tree();
  MotionSpec fast = rest_motion(tree, 50);
  fast.angles[3].y = {{1.0, 12.0, 0.0}};  // elbow whipping at 12 Hz
  expect_error_kind([&] { generate(fast, tree); }, ErrorKind::config);
  MotionSpec bad = rest_motion(tree, 5);
  bad.bone_lengths[4] = -1.0;
  expect_error_kind([&] { generate(bad, tree); }, ErrorKind::config);
  MotionSpec planar = rest_motion(tree, 5);
  planar.planar = true;
  planar.angles[2].x = {{0.1, 0.1, 0.0}};
  expect_error_kind([&] { generate(planar, tree); }, ErrorKind::config);
  expect_error_kind([&] { generate(rest_motion(tree, 5), KinematicTree({-1, 0}, 0)); },
                    ErrorKind::config);
}

TEST(Generate, ConfidenceJitterStaysInRange) {
  const KinematicTree tree = upper_body_tree();
  MotionSpec m = rest_motion(tree, 100);
  m.confidence_jitter = 0.4;
  m.seed = 3;
  SkeletonSequence seq = generate(m, tree);
  double lo = 1.0;
  for (const Skeleton& f : seq.frames)
    for (double c : f.confidences) {
      EXPECT_GE(c, 0.6 - 1e-12);
      EXPECT_LE(c, 1.0);
      lo = std::min(lo, c);
    }
  EXPECT_LT(lo, 0.95);
  EXPECT_EQ(generate(m, tree), seq);
}

TEST(Project, DropsDepth) {
  const KinematicTree tree = upper_body_tree();
  MotionSpec m = rest_motion(tree, 2);
  m.planar = true;
  SkeletonSequence seq = generate(m, tree);
  Sequence2D flat = project_orthographic(seq);
  for (std::size_t j = 0; j < tree.joint_count(); ++j) {
    EXPECT_EQ(flat.frames[0].joints[j].u, seq.frames[0].joints[j].x);
    EXPECT_EQ(flat.frames[0].joints[j].v, seq.frames[0].joints[j].y);
  }
  SkeletonSequence deeper = generate(rest_motion(tree, 2), tree);
  Sequence2D base = project_orthographic(deeper);
  for (Skeleton& f : deeper.frames)
    for (Joint3D& j : f.joints) j.z += 5.0;
  EXPECT_EQ(project_orthographic(deeper), base);
}

TEST(Corpus, DeterministicAndSeedSensitive) {
  const KinematicTree tree = upper_body_tree();
  CorpusSpec spec;
  spec.count = 4;
  spec.frames = 30;
  spec.seed = 12;
  auto a = generate_corpus(spec, tree), b = generate_corpus(spec, tree);
  EXPECT_EQ(a, b);
  spec.seed = 13;
  EXPECT_NE(generate_corpus(spec, tree)[0], a[0]);
  std::set<std::string> ids;
  for (const auto& s : a) ids.insert(s.id);
  EXPECT_EQ(ids.size(), a.size());
  EXPECT_EQ(a[2].id, "seq_0002");
  EXPECT_EQ(corpus_spec_from_json(to_json(spec)).seed, 13u);
  EXPECT_EQ(to_json(corpus_spec_from_json(to_json(spec))), to_json(spec));
}

TEST(MotionSpec, JsonRoundTrip) {
  const KinematicTree tree = upper_body_tree();
  MotionSpec m = sample_motion(CorpusSpec{}, tree, 1);
  MotionSpec back = motion_spec_from_json(to_json(m));
  EXPECT_EQ(generate(back, tree), generate(m, tree));
}

TEST(Splits, DisjointDeterministicSeventyFifteenFifteen) {
  auto s = assign_splits(200, 5);
  EXPECT_EQ(s, assign_splits(200, 5));
  EXPECT_NE(s, assign_splits(200, 6));
  std::size_t counts[3] = {0, 0, 0};
  for (Split x : s) ++counts[static_cast<int>(x)];
  EXPECT_EQ(counts[0], 140u);
  EXPECT_EQ(counts[1], 30u);
  EXPECT_EQ(counts[2], 30u);
  EXPECT_EQ(parse_split("dev"), Split::dev);
  expect_error_kind([] { parse_split("holdout"); }, ErrorKind::config);
}

}  // namespace
}  // namespace skeletor
