#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace skeletor {

struct Joint3D {
  double x = 0.0, y = 0.0, z = 0.0;

  Joint3D& operator+=(const Joint3D& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Joint3D& operator-=(const Joint3D& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  friend Joint3D operator+(Joint3D a, const Joint3D& b) { return a += b; }
  friend Joint3D operator-(Joint3D a, const Joint3D& b) { return a -= b; }
  friend Joint3D operator*(Joint3D a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Joint3D operator*(double s, Joint3D a) { return a * s; }
  bool operator==(const Joint3D&) const = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const Joint3D& a, const Joint3D& b) { return (a - b).norm(); }

struct Skeleton {
  std::vector<Joint3D> joints;
  std::vector<double> confidences;

  std::size_t size() const noexcept { return joints.size(); }
  double mean_confidence() const;
  bool operator==(const Skeleton&) const = default;
};

struct SkeletonSequence {
  std::vector<Skeleton> frames;
  std::optional<double> frame_rate;
  std::string id;

  std::size_t frame_count() const noexcept { return frames.size(); }
  std::size_t joint_count() const { return frames.empty() ? 0 : frames.front().size(); }
  bool operator==(const SkeletonSequence&) const = default;
};

// Throws ErrorKind::structural unless T >= 1, every frame has the same N,
// confidences are in [0, 1] and coordinates are finite.
void validate(const SkeletonSequence& seq);

struct Joint2D {
  double u = 0.0, v = 0.0;
  bool operator==(const Joint2D&) const = default;
};

struct Skeleton2D {
  std::vector<Joint2D> joints;
  std::vector<double> confidences;
  std::size_t size() const noexcept { return joints.size(); }
  bool operator==(const Skeleton2D&) const = default;
};

struct Sequence2D {
  std::vector<Skeleton2D> frames;
  std::optional<double> frame_rate;
  std::string id;

  std::size_t frame_count() const noexcept { return frames.size(); }
  std::size_t joint_count() const { return frames.empty() ? 0 : frames.front().size(); }
  bool operator==(const Sequence2D&) const = default;
};

void validate(const Sequence2D& seq);

// Parent links over N joints. The root's parent is kNoParent. Optional rest
// offsets (child minus parent, in the parent's rest frame) give default
// bone lengths and drive motion synthesis.
class KinematicTree {
 public:
  static constexpr int kNoParent = -1;

  KinematicTree() = default;
  // Validates: exactly one root equal to `root`, parents in range, acyclic.
  KinematicTree(std::vector<int> parents, std::size_t root,
                std::vector<Joint3D> rest_offsets = {});

  std::size_t joint_count() const noexcept { return parents_.size(); }
  std::size_t root() const noexcept { return root_; }
  int parent(std::size_t joint) const { return parents_.at(joint); }
  const std::vector<int>& parents() const noexcept { return parents_; }
  const std::vector<std::size_t>& children(std::size_t joint) const { return children_.at(joint); }

  // Breadth-first from the root; every parent precedes its children.
  const std::vector<std::size_t>& topological_order() const noexcept { return order_; }

  bool has_rest_pose() const noexcept { return !rest_offsets_.empty(); }
  const std::vector<Joint3D>& rest_offsets() const noexcept { return rest_offsets_; }
  // Length of the rest-pose bone ending at `joint` (0 for the root or when
  // there is no rest pose).
  double rest_length(std::size_t joint) const;

  bool operator==(const KinematicTree& o) const {
    return parents_ == o.parents_ && root_ == o.root_ && rest_offsets_ == o.rest_offsets_;
  }

 private:
  std::vector<int> parents_;
  std::size_t root_ = 0;
  std::vector<Joint3D> rest_offsets_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> order_;
};

// Default 50-joint upper-body layout:
//   0 head (root), 1 neck,
//   2-4 right shoulder/elbow/wrist, 5-7 left shoulder/elbow/wrist,
//   8-28 right hand, 29-49 left hand.
// Each hand follows the 21-keypoint convention: hand root, then thumb,
// index, middle, ring and little finger with four joints each.
KinematicTree upper_body_tree();

inline constexpr std::size_t kUpperBodyJoints = 50;

// Per-joint limb length: distance to the parent averaged over frames in which
// both endpoints have non-zero confidence. Root entry is 0, as is any limb
// that is never observed.
std::vector<double> limb_lengths(const SkeletonSequence& seq, const KinematicTree& tree);

// Mean over the non-root limbs that were observed at least once.
double mean_limb_length(const std::vector<double>& limbs, const KinematicTree& tree);

struct NormalizationState {
  Joint3D center;
  double scale = 1.0;
  bool operator==(const NormalizationState&) const = default;
};

// Root of the first frame with an observed root maps to the origin and the
// mean limb length becomes 1. Zero-confidence joints are written as (0,0,0).
std::pair<SkeletonSequence, NormalizationState> normalize(const SkeletonSequence& seq,
                                                          const KinematicTree& tree);

SkeletonSequence denormalize(const SkeletonSequence& seq, const NormalizationState& state);

}  // namespace skeletor
