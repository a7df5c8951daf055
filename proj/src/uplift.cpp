#include "skeletor/uplift.hpp"

#include <cmath>

#include "skeletor/error.hpp"

namespace skeletor {

void UpliftConfig::validate() const {
  require(lambda_projection > 0.0, ErrorKind::config, "lambda_projection must be > 0");
  require(lambda_trajectory >= 0.0 && lambda_bone >= 0.0, ErrorKind::config,
          "uplift weights must be >= 0");
  require(std::isfinite(step_size) && step_size > 0.0, ErrorKind::config, "step size must be > 0");
  require(patience >= 1, ErrorKind::config, "patience must be >= 1");
}

Json to_json(const UpliftConfig& c) {
  return Json{{"lambda_projection", c.lambda_projection},
              {"lambda_trajectory", c.lambda_trajectory},
              {"lambda_bone", c.lambda_bone},
              {"steps", c.steps},
              {"step_size", c.step_size},
              {"patience", c.patience}};
}

UpliftConfig uplift_config_from_json(const Json& doc) {
  require(doc.is_object(), ErrorKind::config, "uplift config must be a JSON object");
  UpliftConfig c;
  try {
    c.lambda_projection = doc.value("lambda_projection", c.lambda_projection);
    c.lambda_trajectory = doc.value("lambda_trajectory", c.lambda_trajectory);
    c.lambda_bone = doc.value("lambda_bone", c.lambda_bone);
    c.steps = doc.value("steps", c.steps);
    c.step_size = doc.value("step_size", c.step_size);
    c.patience = doc.value("patience", c.patience);
  } catch (const Json::exception& e) {
    fail(ErrorKind::config, std::string("uplift config: ") + e.what());
  }
  c.validate();
  return c;
}

BoneEstimate estimate_bone_lengths(const Sequence2D& seq, const KinematicTree& tree) {
  validate(seq);
  require(seq.joint_count() == tree.joint_count(), ErrorKind::structural,
          "2D sequence has " + std::to_string(seq.joint_count()) + " joints but the tree has " +
              std::to_string(tree.joint_count()));
  const std::size_t n = tree.joint_count();
  BoneEstimate est{std::vector<double>(n, 0.0), std::vector<bool>(n, false)};
  std::vector<std::size_t> seen(n, 0);
  for (const auto& f : seq.frames)
    for (std::size_t j = 0; j < n; ++j) {
      if (j == tree.root()) continue;
      const auto p = static_cast<std::size_t>(tree.parent(j));
      if (f.confidences[j] <= 0.0 || f.confidences[p] <= 0.0) continue;
      est.lengths[j] += std::hypot(f.joints[j].u - f.joints[p].u, f.joints[j].v - f.joints[p].v);
      ++seen[j];
    }
  for (std::size_t j = 0; j < n; ++j) {
    if (j == tree.root()) continue;
    if (seen[j]) {
      est.lengths[j] /= static_cast<double>(seen[j]);
    } else {
      est.used_fallback[j] = true;
      est.lengths[j] = tree.rest_length(j);
    }
  }
  return est;
}

double joint_loss(const Joint3D& j, const JointObjective& o, const UpliftConfig& c) {
  double loss = 0.0;
  if (o.observed) {
    const double du = j.x - o.target.u, dv = j.y - o.target.v;
    loss += c.lambda_projection * (du * du + dv * dv);
  }
  if (o.previous) {
    const Joint3D d = j - *o.previous;
    loss += c.lambda_trajectory * (d.x * d.x + d.y * d.y + d.z * d.z);
  }
  const double r = distance(j, o.parent) - o.length;
  return loss + c.lambda_bone * r * r;
}

Joint3D joint_gradient(const Joint3D& j, const JointObjective& o, const UpliftConfig& c) {
  Joint3D g;
  if (o.observed) {
    g.x += 2.0 * c.lambda_projection * (j.x - o.target.u);
    g.y += 2.0 * c.lambda_projection * (j.y - o.target.v);
  }
  if (o.previous) g += (2.0 * c.lambda_trajectory) * (j - *o.previous);
  const Joint3D d = j - o.parent;
  const double len = d.norm();
  if (len > 0.0) g += (2.0 * c.lambda_bone * (len - o.length) / len) * d;
  return g;
}

LossTerms frame_loss(const Skeleton& frame, const Skeleton2D& target, const Skeleton* previous,
                     const std::vector<double>& lengths, const KinematicTree& tree,
                     const UpliftConfig& c) {
  LossTerms terms;
  for (std::size_t j = 0; j < tree.joint_count(); ++j) {
    const Joint3D& p = frame.joints[j];
    if (target.confidences[j] > 0.0) {
      const double du = p.x - target.joints[j].u, dv = p.y - target.joints[j].v;
      terms.projection += c.lambda_projection * (du * du + dv * dv);
    }
    if (previous) {
      const Joint3D d = p - previous->joints[j];
      terms.trajectory += c.lambda_trajectory * (d.x * d.x + d.y * d.y + d.z * d.z);
    }
    if (j != tree.root()) {
      const double r = distance(p, frame.joints[static_cast<std::size_t>(tree.parent(j))]) - lengths[j];
      terms.bone += c.lambda_bone * r * r;
    }
  }
  return terms;
}

namespace {

struct Solve {
  Joint3D position;
  bool failed = false;
};

Solve descend(Joint3D j, const JointObjective& o, const UpliftConfig& c) {
  double loss = joint_loss(j, o, c);
  double eta = c.step_size;
  std::size_t rejected = 0;
  for (std::size_t step = 0; step < c.steps && std::isfinite(loss); ++step) {
    const Joint3D g = joint_gradient(j, o, c);
    const double gnorm = g.norm();
    if (gnorm < 1e-12) break;
    const Joint3D candidate = j - eta * g;
    const double next = joint_loss(candidate, o, c);
    if (next <= loss) {
      j = candidate;
      loss = next;
      rejected = 0;
      continue;
    }
    eta *= 0.5;
    if (++rejected >= c.patience) {
      // Stuck with a large gradient: the objective is not behaving.
      if (gnorm > 1e-3 * (1.0 + o.length)) return {j, true};
      break;
    }
  }
  if (!std::isfinite(loss) || !j.finite()) return {j, true};
  return {j, false};
}

}  // namespace

UpliftResult uplift(const Sequence2D& seq, const KinematicTree& tree, const UpliftConfig& config) {
  config.validate();
  UpliftResult result;
  result.bones = estimate_bone_lengths(seq, tree);
  const std::size_t n = tree.joint_count(), root = tree.root();
  require(seq.frames.front().confidences[root] > 0.0, ErrorKind::degenerate_geometry,
          "head joint is not observed in the first frame");

  SkeletonSequence& out = result.sequence;
  out.id = seq.id;
  out.frame_rate = seq.frame_rate;
  out.frames.resize(seq.frames.size());
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const Skeleton2D& target = seq.frames[t];
    const Skeleton* previous = t > 0 ? &out.frames[t - 1] : nullptr;
    Skeleton& frame = out.frames[t];
    frame.joints.resize(n);
    frame.confidences = target.confidences;

    frame.joints[root] = target.confidences[root] > 0.0
                             ? Joint3D{target.joints[root].u, target.joints[root].v, 0.0}
                             : previous->joints[root];
    for (std::size_t j : tree.topological_order()) {
      if (j == root) continue;
      const auto p = static_cast<std::size_t>(tree.parent(j));
      JointObjective o;
      o.parent = frame.joints[p];
      o.target = target.joints[j];
      o.observed = target.confidences[j] > 0.0;
      if (previous) o.previous = previous->joints[j];
      o.length = result.bones.lengths[j];

      // Fallback placement: parent plus the previous frame's offset, or the
      // rest direction scaled to the bone length in the first frame.
      Joint3D fallback;
      if (previous) {
        fallback = o.parent + (previous->joints[j] - previous->joints[p]);
      } else {
        Joint3D dir = tree.has_rest_pose() ? tree.rest_offsets()[j] : Joint3D{0.0, 1.0, 0.0};
        const double len = dir.norm();
        fallback = o.parent + (len > 0.0 ? dir * (o.length / len) : Joint3D{});
      }

      Joint3D start;
      if (o.observed)
        start = {o.target.u, o.target.v, previous ? previous->joints[j].z : 0.0};
      else
        start = fallback;
      const Solve s = descend(start, o, config);
      if (s.failed) {
        frame.joints[j] = fallback;
        result.failures.push_back({t, j});
      } else {
        frame.joints[j] = s.position;
      }
    }
  }
  return result;
}

}  // namespace skeletor
