#include "skeletor/skeleton.hpp"

#include <array>
#include <deque>

#include "skeletor/error.hpp"

namespace skeletor {

double Skeleton::mean_confidence() const {
  if (confidences.empty()) return 0.0;
  double total = 0.0;
  for (double c : confidences) total += c;
  return total / static_cast<double>(confidences.size());
}

void validate(const SkeletonSequence& seq) {
  require(!seq.frames.empty(), ErrorKind::structural, "sequence '" + seq.id + "' has no frames");
  const std::size_t n = seq.joint_count();
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const Skeleton& f = seq.frames[t];
    require(f.joints.size() == n && f.confidences.size() == n, ErrorKind::structural,
            "frame " + std::to_string(t) + " has " + std::to_string(f.joints.size()) +
                " joints, expected " + std::to_string(n));
    for (std::size_t j = 0; j < n; ++j) {
      require(f.joints[j].finite(), ErrorKind::structural,
              "non-finite coordinate at frame " + std::to_string(t) + " joint " + std::to_string(j));
      require(f.confidences[j] >= 0.0 && f.confidences[j] <= 1.0, ErrorKind::structural,
              "confidence outside [0,1] at frame " + std::to_string(t));
    }
  }
}

void validate(const Sequence2D& seq) {
  require(!seq.frames.empty(), ErrorKind::structural, "2D sequence '" + seq.id + "' has no frames");
  const std::size_t n = seq.joint_count();
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const Skeleton2D& f = seq.frames[t];
    require(f.joints.size() == n && f.confidences.size() == n, ErrorKind::structural,
            "2D frame " + std::to_string(t) + " has inconsistent joint count");
    for (std::size_t j = 0; j < n; ++j) {
      require(std::isfinite(f.joints[j].u) && std::isfinite(f.joints[j].v), ErrorKind::structural,
              "non-finite 2D coordinate at frame " + std::to_string(t));
      require(f.confidences[j] >= 0.0 && f.confidences[j] <= 1.0, ErrorKind::structural,
              "confidence outside [0,1] at 2D frame " + std::to_string(t));
    }
  }
}

// ---------------------------------------------------------------------------
// KinematicTree

KinematicTree::KinematicTree(std::vector<int> parents, std::size_t root,
                             std::vector<Joint3D> rest_offsets)
    : parents_(std::move(parents)), root_(root), rest_offsets_(std::move(rest_offsets)) {
  const std::size_t n = parents_.size();
  require(n > 0, ErrorKind::structural, "kinematic tree has no joints");
  require(root_ < n, ErrorKind::structural, "root index out of range");
  require(rest_offsets_.empty() || rest_offsets_.size() == n, ErrorKind::structural,
          "rest offsets must cover every joint");
  children_.assign(n, {});
  for (std::size_t j = 0; j < n; ++j) {
    const int p = parents_[j];
    if (j == root_) {
      require(p == kNoParent, ErrorKind::structural, "root joint must not have a parent");
      continue;
    }
    require(p != kNoParent, ErrorKind::structural,
            "joint " + std::to_string(j) + " has no parent but is not the root");
    require(p >= 0 && static_cast<std::size_t>(p) < n, ErrorKind::structural,
            "parent of joint " + std::to_string(j) + " out of range");
    children_[static_cast<std::size_t>(p)].push_back(j);
  }
  std::deque<std::size_t> queue{root_};
  while (!queue.empty()) {
    const std::size_t j = queue.front();
    queue.pop_front();
    order_.push_back(j);
    for (std::size_t c : children_[j]) queue.push_back(c);
  }
  // Joints on a cycle are never reached from the root.
  require(order_.size() == n, ErrorKind::structural,
          "parent links contain a cycle or a disconnected joint");
}

double KinematicTree::rest_length(std::size_t joint) const {
  if (rest_offsets_.empty() || joint == root_) return 0.0;
  return rest_offsets_.at(joint).norm();
}

KinematicTree upper_body_tree() {
  std::vector<int> parents(kUpperBodyJoints, 0);
  std::vector<Joint3D> offsets(kUpperBodyJoints);
  parents[0] = KinematicTree::kNoParent;
  parents[1] = 0;
  offsets[1] = {0.0, -1.0, 0.0};

  // side = -1 for the right arm (image left), +1 for the left arm.
  auto add_arm = [&](std::size_t shoulder, std::size_t hand_root, double side) {
    parents[shoulder] = 1;
    offsets[shoulder] = {1.5 * side, -0.3, 0.0};
    parents[shoulder + 1] = static_cast<int>(shoulder);
    offsets[shoulder + 1] = {0.6 * side, -2.5, 0.3};
    parents[shoulder + 2] = static_cast<int>(shoulder + 1);
    offsets[shoulder + 2] = {-0.7 * side, 1.2, 1.6};

    parents[hand_root] = static_cast<int>(shoulder + 2);
    offsets[hand_root] = {-0.1 * side, 0.3, 0.1};
    // Thumb, index, middle, ring, little: spread angle from the hand axis
    // (towards the body midline for negative values) and bone lengths.
    constexpr std::array<double, 5> spread = {-0.9, -0.3, 0.0, 0.25, 0.5};
    constexpr std::array<std::array<double, 4>, 5> lengths = {{
        {0.45, 0.35, 0.30, 0.25},
        {0.80, 0.45, 0.30, 0.25},
        {0.80, 0.50, 0.32, 0.25},
        {0.75, 0.45, 0.30, 0.25},
        {0.70, 0.35, 0.27, 0.25},
    }};
    for (std::size_t f = 0; f < 5; ++f) {
      const double a = spread[f];
      Joint3D dir{-std::sin(a) * side, std::cos(a), 0.3};
      dir = dir * (1.0 / dir.norm());
      for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t j = hand_root + 1 + 4 * f + k;
        parents[j] = static_cast<int>(k == 0 ? hand_root : j - 1);
        offsets[j] = dir * lengths[f][k];
      }
    }
  };
  add_arm(2, 8, -1.0);
  add_arm(5, 29, 1.0);
  return KinematicTree(std::move(parents), 0, std::move(offsets));
}

// ---------------------------------------------------------------------------
// Limbs and normalisation

namespace {

void check_tree(const SkeletonSequence& seq, const KinematicTree& tree) {
  require(!seq.frames.empty(), ErrorKind::structural, "empty sequence");
  require(seq.joint_count() == tree.joint_count(), ErrorKind::structural,
          "sequence has " + std::to_string(seq.joint_count()) + " joints but tree has " +
              std::to_string(tree.joint_count()));
}

}  // namespace

std::vector<double> limb_lengths(const SkeletonSequence& seq, const KinematicTree& tree) {
  check_tree(seq, tree);
  const std::size_t n = tree.joint_count();
  std::vector<double> total(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const Skeleton& f : seq.frames) {
    require(f.size() == n, ErrorKind::structural, "frame joint count differs from tree");
    for (std::size_t j = 0; j < n; ++j) {
      const int p = tree.parent(j);
      if (p == KinematicTree::kNoParent) continue;
      const auto pj = static_cast<std::size_t>(p);
      if (f.confidences[j] <= 0.0 || f.confidences[pj] <= 0.0) continue;
      total[j] += distance(f.joints[j], f.joints[pj]);
      ++count[j];
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    total[j] = count[j] ? total[j] / static_cast<double>(count[j]) : 0.0;
  return total;
}

double mean_limb_length(const std::vector<double>& limbs, const KinematicTree& tree) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < limbs.size(); ++j) {
    if (j == tree.root() || limbs[j] <= 0.0) continue;
    total += limbs[j];
    ++count;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

std::pair<SkeletonSequence, NormalizationState> normalize(const SkeletonSequence& seq,
                                                          const KinematicTree& tree) {
  check_tree(seq, tree);
  NormalizationState state;
  const std::size_t root = tree.root();
  bool found = false;
  for (const Skeleton& f : seq.frames) {
    if (f.confidences[root] > 0.0) {
      state.center = f.joints[root];
      found = true;
      break;
    }
  }
  require(found, ErrorKind::degenerate_geometry, "root joint is never observed");
  state.scale = mean_limb_length(limb_lengths(seq, tree), tree);
  require(state.scale > 0.0 && std::isfinite(state.scale), ErrorKind::degenerate_geometry,
          "all limbs have zero length");

  SkeletonSequence out = seq;
  const double inv = 1.0 / state.scale;
  for (Skeleton& f : out.frames)
    for (std::size_t j = 0; j < f.size(); ++j)
      f.joints[j] = f.confidences[j] > 0.0 ? (f.joints[j] - state.center) * inv : Joint3D{};
  return {std::move(out), state};
}

SkeletonSequence denormalize(const SkeletonSequence& seq, const NormalizationState& state) {
  require(state.scale > 0.0 && std::isfinite(state.scale), ErrorKind::invalid_state,
          "normalization scale must be positive");
  SkeletonSequence out = seq;
  for (Skeleton& f : out.frames)
    for (Joint3D& j : f.joints) j = j * state.scale + state.center;
  return out;
}

}  // namespace skeletor
