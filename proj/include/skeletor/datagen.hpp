#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "skeletor/io.hpp"
#include "skeletor/skeleton.hpp"

namespace skeletor {

struct Sinusoid {
  double amplitude = 0.0;  // radians (angles) or scene units (translation)
  double frequency = 0.0;  // Hz
  double phase = 0.0;      // radians
  bool operator==(const Sinusoid&) const = default;
};

// Sum of sinusoids evaluated at time t seconds.
double evaluate(const std::vector<Sinusoid>& terms, double t);

struct AxisTracks {
  std::vector<Sinusoid> x, y, z;
  bool operator==(const AxisTracks&) const = default;
};

struct MotionSpec {
  std::vector<AxisTracks> angles;  // per joint; rotates the bone ending at it
  AxisTracks root_translation;
  std::vector<double> bone_lengths;  // per joint, root entry ignored
  std::size_t frames = 200;
  double frame_rate = 25.0;
  std::uint64_t seed = 0;  // drives confidence jitter
  // Rest offsets flattened into z = 0 and rotation about z only.
  bool planar = false;
  // 0 gives unit confidences; otherwise a smooth per-frame dip plus per-cell
  // noise, at most `confidence_jitter` below 1.
  double confidence_jitter = 0.0;
  // Per-joint angle amplitude sum per axis may not exceed this.
  double max_angle = 1.2;
  std::string id = "synthetic";
};

Json to_json(const MotionSpec& spec);
MotionSpec motion_spec_from_json(const Json& doc);

// Static rest pose: zero amplitudes, tree rest lengths.
MotionSpec rest_motion(const KinematicTree& tree, std::size_t frames);

// Forward kinematics. Throws ErrorKind::config when the spec is malformed or
// the result breaks the smoothness or front-of-torso limits.
SkeletonSequence generate(const MotionSpec& spec, const KinematicTree& tree);

// Limit on per-frame joint displacement: half the shortest bone.
double smoothness_limit(const MotionSpec& spec, const KinematicTree& tree);
double max_frame_displacement(const SkeletonSequence& seq);

Sequence2D project_orthographic(const SkeletonSequence& seq);

struct CorpusSpec {
  std::size_t count = 200;
  std::size_t frames = 200;
  double frame_rate = 25.0;
  std::uint64_t seed = 0;
  bool planar = false;
  double confidence_jitter = 0.3;
  std::size_t terms = 2;  // sinusoids per axis
  double min_frequency = 0.05;
  double max_frequency = 0.4;
  // Angle amplitude (radians) by tree depth; the last entry repeats.
  std::vector<double> amplitude_by_depth{0.1, 0.15, 0.2, 0.5, 0.35, 0.2, 0.3};
  double translation_amplitude = 0.3;
  double bone_length_jitter = 0.1;  // relative, per sequence

  void validate() const;
};

Json to_json(const CorpusSpec& spec);
CorpusSpec corpus_spec_from_json(const Json& doc);

// Motion for sequence `index`; retries with slower or smaller motion until the
// smoothness and front-of-torso checks pass.
MotionSpec sample_motion(const CorpusSpec& spec, const KinematicTree& tree, std::size_t index);
std::vector<SkeletonSequence> generate_corpus(const CorpusSpec& spec, const KinematicTree& tree);

enum class Split { train, dev, test };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

// Seeded 70/15/15 assignment over sequence indices.
std::vector<Split> assign_splits(std::size_t count, std::uint64_t seed);

}  // namespace skeletor
