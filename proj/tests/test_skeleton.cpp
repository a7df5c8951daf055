#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "skeletor/io.hpp"
#include "skeletor/skeleton.hpp"
#include "support.hpp"

namespace skeletor {
namespace {

using testing::expect_error_kind;

// root 0 -> 1 -> 2, plus 3 hanging off the root.
KinematicTree small_tree() { return KinematicTree({-1, 0, 1, 0}, 0); }

SkeletonSequence random_sequence(std::size_t frames, std::size_t joints, Rng& rng) {
  SkeletonSequence seq;
  seq.id = "random";
  for (std::size_t t = 0; t < frames; ++t) {
    Skeleton s;
    for (std::size_t j = 0; j < joints; ++j) {
      s.joints.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)});
      s.confidences.push_back(rng.uniform(0.05, 1.0));
    }
    seq.frames.push_back(std::move(s));
  }
  return seq;
}

SkeletonSequence two_joint_sequence(std::initializer_list<Joint3D> children) {
  SkeletonSequence seq;
  for (const Joint3D& c : children) seq.frames.push_back({{{0, 0, 0}, c}, {1, 1}});
  return seq;
}

double max_relative_difference(const SkeletonSequence& a, const SkeletonSequence& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.frame_count(); ++t)
    for (std::size_t j = 0; j < a.joint_count(); ++j) {
      const Joint3D d = a.frames[t].joints[j] - b.frames[t].joints[j];
      const double ref = std::max(1.0, a.frames[t].joints[j].norm());
      worst = std::max(worst, d.norm() / ref);
    }
  return worst;
}

TEST(LimbLengths, Examples) {
  KinematicTree tree({-1, 0}, 0);
  EXPECT_DOUBLE_EQ(limb_lengths(two_joint_sequence({{3, 4, 0}}), tree)[1], 5.0);
  EXPECT_DOUBLE_EQ(limb_lengths(two_joint_sequence({{4, 0, 0}, {0, 6, 0}}), tree)[1], 5.0);
  EXPECT_EQ(limb_lengths(two_joint_sequence({{3, 4, 0}}), tree)[0], 0.0);
}

TEST(LimbLengths, SkipsUnobservedFramesAndRejectsMismatch) {
  KinematicTree tree({-1, 0}, 0);
  SkeletonSequence seq = two_joint_sequence({{4, 0, 0}, {0, 60, 0}});
  seq.frames[1].confidences[1] = 0.0;
  EXPECT_DOUBLE_EQ(limb_lengths(seq, tree)[1], 4.0);
  expect_error_kind([&] { limb_lengths(seq, small_tree()); }, ErrorKind::structural);
}

TEST(LimbLengths, TranslationInvariant) {
  Rng rng(1);
  SkeletonSequence seq = random_sequence(6, 4, rng), moved = seq;
  for (Skeleton& f : moved.frames)
    for (Joint3D& j : f.joints) j += Joint3D{10, -3, 7};
  auto a = limb_lengths(seq, small_tree()), b = limb_lengths(moved, small_tree());
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
}

TEST(Normalize, FixedPointOnNormalizedInput) {
  Rng rng(2);
  auto [once, s1] = normalize(random_sequence(5, 4, rng), small_tree());
  auto [twice, s2] = normalize(once, small_tree());
  EXPECT_LT(max_relative_difference(once, twice), 1e-12);
  EXPECT_NEAR(s2.scale, 1.0, 1e-12);
  EXPECT_NEAR(s2.center.norm(), 0.0, 1e-12);
}

TEST(Normalize, TranslationAndScaleInvariant) {
  Rng rng(3);
  SkeletonSequence seq = random_sequence(5, 4, rng), moved = seq, scaled = seq;
  for (Skeleton& f : moved.frames)
    for (Joint3D& j : f.joints) j += Joint3D{10, 0, 0};
  for (Skeleton& f : scaled.frames)
    for (Joint3D& j : f.joints) j = j * 2.0;
  auto base = normalize(seq, small_tree()).first;
  EXPECT_LT(max_relative_difference(base, normalize(moved, small_tree()).first), 1e-12);
  EXPECT_LT(max_relative_difference(base, normalize(scaled, small_tree()).first), 1e-12);
}

TEST(Normalize, MeanLimbBecomesOneAndMaskedJointsAreZero) {
  Rng rng(4);
  SkeletonSequence seq = random_sequence(5, 4, rng);
  seq.frames[2].confidences[3] = 0.0;
  auto [norm, state] = normalize(seq, small_tree());
  EXPECT_NEAR(mean_limb_length(limb_lengths(norm, small_tree()), small_tree()), 1.0, 1e-12);
  EXPECT_EQ(norm.frames[2].joints[3], (Joint3D{0, 0, 0}));
  EXPECT_EQ(norm.frames[0].joints[0], (Joint3D{0, 0, 0}));
}

TEST(Normalize, DegenerateInputs) {
  SkeletonSequence zero = two_joint_sequence({{0, 0, 0}});
  expect_error_kind([&] { normalize(zero, KinematicTree({-1, 0}, 0)); },
                    ErrorKind::degenerate_geometry);
  expect_error_kind([] { denormalize(two_joint_sequence({{1, 0, 0}}), {{}, 0.0}); },
                    ErrorKind::invalid_state);
  expect_error_kind([] { denormalize(two_joint_sequence({{1, 0, 0}}), {{}, -2.0}); },
                    ErrorKind::invalid_state);
}

TEST(Denormalize, Examples) {
  SkeletonSequence seq = two_joint_sequence({{0.5, -1, 2}});
  EXPECT_EQ(denormalize(seq, {}), seq);
  SkeletonSequence origin = two_joint_sequence({{0, 0, 0}});
  EXPECT_EQ(denormalize(origin, {{1, 2, 3}, 2.0}).frames[0].joints[0], (Joint3D{1, 2, 3}));
}

TEST(Denormalize, RoundTripsBothWays) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    SkeletonSequence seq = random_sequence(1 + rng.below(8), 4, rng);
    auto [norm, state] = normalize(seq, small_tree());
    EXPECT_LT(max_relative_difference(seq, denormalize(norm, state)), 1e-9);

    NormalizationState other{{rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9)},
                             rng.uniform(0.1, 10)};
    auto [again, recovered] = normalize(denormalize(norm, other), small_tree());
    EXPECT_LT(max_relative_difference(norm, again), 1e-9);
    EXPECT_NEAR(recovered.scale, other.scale, 1e-9 * other.scale);
  }
}

TEST(Tree, RejectsCyclesAndBadRoots) {
  expect_error_kind([] { KinematicTree({-1, 2, 1}, 0); }, ErrorKind::structural);
  expect_error_kind([] { KinematicTree({1, 0}, 0); }, ErrorKind::structural);
  expect_error_kind([] { KinematicTree({-1, -1}, 0); }, ErrorKind::structural);
  expect_error_kind([] { KinematicTree({-1, 5}, 0); }, ErrorKind::structural);
  expect_error_kind([] { KinematicTree({-1, 0}, 3); }, ErrorKind::structural);
  expect_error_kind([] { KinematicTree({}, 0); }, ErrorKind::structural);
}

TEST(Tree, RandomCyclesAreRejected) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    std::vector<int> parents(n);
    parents[0] = -1;
    for (std::size_t j = 1; j < n; ++j) parents[j] = static_cast<int>(rng.below(j));
    KinematicTree ok(parents, 0);
    // Re-parent some joint a onto one of its descendants (or itself).
    const std::size_t a = 1 + rng.below(n - 1);
    std::size_t b = n - 1;
    for (; b > 0; --b) {
      std::size_t k = b;
      while (k != 0 && k != a) k = static_cast<std::size_t>(parents[k]);
      if (k == a) break;
    }
    parents[a] = static_cast<int>(b);
    expect_error_kind([&] { KinematicTree(parents, 0); }, ErrorKind::structural);
  }
}

TEST(Tree, TopologicalOrderPutsParentsFirst) {
  KinematicTree tree = upper_body_tree();
  std::vector<std::size_t> position(tree.joint_count());
  const auto& order = tree.topological_order();
  ASSERT_EQ(order.size(), tree.joint_count());
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  for (std::size_t j = 0; j < tree.joint_count(); ++j)
    if (j != tree.root()) EXPECT_LT(position[tree.parent(j)], position[j]);
}

TEST(Tree, UpperBodyLayout) {
  KinematicTree tree = upper_body_tree();
  EXPECT_EQ(tree.joint_count(), kUpperBodyJoints);
  EXPECT_EQ(tree.root(), 0u);
  EXPECT_EQ(tree.parent(1), 0);
  EXPECT_EQ(tree.parent(8), 4);   // right hand hangs off the right wrist
  EXPECT_EQ(tree.parent(29), 7);  // left hand off the left wrist
  for (std::size_t j = 1; j < tree.joint_count(); ++j) EXPECT_GT(tree.rest_length(j), 0.0);
  // Each hand root has five finger chains of four joints.
  EXPECT_EQ(tree.children(8).size(), 5u);
  EXPECT_EQ(tree.children(29).size(), 5u);
}

TEST(Tree, ShippedDataFileMatchesBuiltIn) {
  const auto path = std::filesystem::path(SKELETOR_DATA_DIR) / "upper_body_50.json";
  EXPECT_EQ(read_tree(path), upper_body_tree());
  EXPECT_EQ(read_json(path).at("names").size(), kUpperBodyJoints);
}

TEST(Validate, RejectsBadSequences) {
  SkeletonSequence empty;
  expect_error_kind([&] { validate(empty); }, ErrorKind::structural);
  SkeletonSequence ragged = two_joint_sequence({{1, 0, 0}, {1, 0, 0}});
  ragged.frames[1].joints.pop_back();
  ragged.frames[1].confidences.pop_back();
  expect_error_kind([&] { validate(ragged); }, ErrorKind::structural);
  SkeletonSequence conf = two_joint_sequence({{1, 0, 0}});
  conf.frames[0].confidences[0] = 1.5;
  expect_error_kind([&] { validate(conf); }, ErrorKind::structural);
  SkeletonSequence nan = two_joint_sequence({{std::nan(""), 0, 0}});
  expect_error_kind([&] { validate(nan); }, ErrorKind::structural);
}

TEST(Io, SequenceJsonRoundTrip) {
  Rng rng(7);
  SkeletonSequence seq = random_sequence(3, 4, rng);
  seq.frame_rate = 25.0;
  EXPECT_EQ(sequence_from_json(to_json(seq)), seq);
  seq.frame_rate.reset();
  EXPECT_EQ(sequence_from_json(to_json(seq)), seq);
}

TEST(Io, MissingConfidenceMeansOnes) {
  Json doc = Json::parse(R"({"id":"a","frame_rate":null,"joints":[[[1,2,3],[4,5,6]]]})");
  SkeletonSequence seq = sequence_from_json(doc);
  EXPECT_EQ(seq.frames[0].confidences, (std::vector<double>{1.0, 1.0}));
  EXPECT_FALSE(seq.frame_rate.has_value());
}

TEST(Io, MalformedDocuments) {
  expect_error_kind([] { sequence_from_json(Json::parse(R"({"id":"a"})")); }, ErrorKind::parse);
  expect_error_kind([] { sequence_from_json(Json::parse(R"({"joints":[[[1,2]]]})")); },
                    ErrorKind::parse);
  expect_error_kind([] { tree_from_json(Json::parse(R"({"parents":[-1,0]})")); },
                    ErrorKind::parse);
  expect_error_kind([] { tree_from_json(Json::parse(R"({"parents":[1,0],"root":0})")); },
                    ErrorKind::structural);
  const auto dir = std::filesystem::temp_directory_path() / "skeletor_test_io";
  std::filesystem::create_directories(dir);
  write_text(dir / "bad.json", "{not json");
  expect_error_kind([&] { read_json(dir / "bad.json"); }, ErrorKind::parse);
  expect_error_kind([&] { read_json(dir / "missing.json"); }, ErrorKind::io);
}

TEST(Io, TreeJsonRoundTrip) {
  KinematicTree tree = upper_body_tree();
  EXPECT_EQ(tree_from_json(to_json(tree)), tree);
  EXPECT_EQ(tree_from_json(to_json(small_tree())), small_tree());
}

TEST(Io, KeypointFramesFollowIndexMap) {
  const auto dir = std::filesystem::temp_directory_path() / "skeletor_test_keypoints";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "frames");
  write_text(dir / "frames" / "000001.json",
             R"({"people":[{"pose_keypoints_2d":[1,2,0.9, 3,4,0.8],"hand":[5,6,0.7]}]})");
  write_text(dir / "frames" / "000000.json", R"({"pose_keypoints_2d":[9,9,1, 7,8,0.5],"hand":[0,0,0]})");
  write_text(dir / "map.json",
             R"({"joints":[{"array":"pose_keypoints_2d","index":1},{"array":"hand","index":0}]})");
  Sequence2D seq = read_keypoint_frames(dir / "frames", dir / "map.json");
  ASSERT_EQ(seq.frame_count(), 2u);
  EXPECT_EQ(seq.frames[0].joints[0], (Joint2D{7, 8}));
  EXPECT_EQ(seq.frames[0].confidences[1], 0.0);
  EXPECT_EQ(seq.frames[1].joints[0], (Joint2D{3, 4}));
  EXPECT_EQ(seq.frames[1].joints[1], (Joint2D{5, 6}));
  EXPECT_DOUBLE_EQ(seq.frames[1].confidences[1], 0.7);
}

}  // namespace
}  // namespace skeletor
