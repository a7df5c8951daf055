#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "skeletor/corruption.hpp"
#include "skeletor/io.hpp"
#include "skeletor/skeleton.hpp"

namespace skeletor {

struct UpliftConfig {
  double lambda_projection = 1.0;
  double lambda_trajectory = 0.1;
  double lambda_bone = 0.5;
  std::size_t steps = 200;  // per joint per frame
  double step_size = 1e-2;  // halved whenever a step would raise the loss
  std::size_t patience = 8;  // consecutive rejected steps before giving up

  void validate() const;
};

Json to_json(const UpliftConfig& config);
UpliftConfig uplift_config_from_json(const Json& doc);

struct BoneEstimate {
  std::vector<double> lengths;      // per joint, root entry 0
  std::vector<bool> used_fallback;  // bone never observed; tree default used
};

// Mean 2D parent-child distance over frames where both ends have non-zero
// confidence.
BoneEstimate estimate_bone_lengths(const Sequence2D& seq, const KinematicTree& tree);

// Loss for a single joint position:
//   lp * |proj(J) - target|^2 + lt * |J - previous|^2 + lb * (|J - parent| - length)^2
// with proj(x, y, z) = (x, y). The trajectory term is skipped without a
// previous position and the projection term when the target is unobserved.
struct JointObjective {
  Joint3D parent;
  Joint2D target;
  bool observed = true;
  std::optional<Joint3D> previous;
  double length = 0.0;
};

double joint_loss(const Joint3D& j, const JointObjective& o, const UpliftConfig& c);
Joint3D joint_gradient(const Joint3D& j, const JointObjective& o, const UpliftConfig& c);

struct LossTerms {
  double projection = 0.0, trajectory = 0.0, bone = 0.0;
  double total() const { return projection + trajectory + bone; }
};

// The three terms summed over every joint of one frame (weights applied).
LossTerms frame_loss(const Skeleton& frame, const Skeleton2D& target, const Skeleton* previous,
                     const std::vector<double>& lengths, const KinematicTree& tree,
                     const UpliftConfig& config);

struct UpliftResult {
  SkeletonSequence sequence;
  std::vector<Cell> failures;  // joints that fell back to parent + previous offset
  BoneEstimate bones;
};

// Head at (u, v, 0); every other joint solved parent-first by gradient descent,
// starting from (u, v, z of the previous frame). Throws
// ErrorKind::degenerate_geometry when the head is unobserved in the first frame.
UpliftResult uplift(const Sequence2D& seq, const KinematicTree& tree, const UpliftConfig& config);

}  // namespace skeletor
