#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skeletor/io.hpp"
#include "skeletor/rng.hpp"
#include "skeletor/skeleton.hpp"

namespace skeletor {

enum class CorruptionMode { mask_frames, mask_joints, noise_frames, noise_joints };
enum class Selection { by_confidence, random };

std::string_view to_string(CorruptionMode mode);
std::string_view to_string(Selection selection);
CorruptionMode parse_corruption_mode(std::string_view text);
Selection parse_selection(std::string_view text);

struct CorruptionSpec {
  CorruptionMode mode = CorruptionMode::mask_frames;
  double p = 0.15;  // fraction of frames (frame modes) or cells (joint modes)
  double s = 0.0;   // noise strength; ignored by mask modes
  std::uint64_t seed = 0;
  Selection selection = Selection::by_confidence;

  bool is_mask() const {
    return mode == CorruptionMode::mask_frames || mode == CorruptionMode::mask_joints;
  }
  bool is_frame_level() const {
    return mode == CorruptionMode::mask_frames || mode == CorruptionMode::noise_frames;
  }
  // p in [0,1]; s >= 0 for noise modes.
  void validate() const;
  bool operator==(const CorruptionSpec&) const = default;
};

Json to_json(const CorruptionSpec& spec);
CorruptionSpec corruption_spec_from_json(const Json& doc);

struct Cell {
  std::size_t frame = 0;
  std::size_t joint = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

struct NoiseOffset {
  Cell cell;
  Joint3D offset;
  bool operator==(const NoiseOffset&) const = default;
};

struct CorruptionRecord {
  CorruptionSpec spec;
  std::size_t frame_count = 0;
  std::size_t joint_count = 0;
  std::vector<std::size_t> masked_frames;  // ascending
  std::vector<Cell> masked_cells;          // ascending
  std::vector<std::size_t> noisy_frames;   // ascending, noise_frames only
  std::vector<NoiseOffset> noise;          // ascending by cell

  // Row-major T x N flags: 1 where the cell was masked or perturbed.
  std::vector<std::uint8_t> cell_mask() const;
  std::size_t corrupted_cell_count() const;
  bool operator==(const CorruptionRecord&) const = default;
};

Json to_json(const CorruptionRecord& record);
CorruptionRecord corruption_record_from_json(const Json& doc);

// round(p * total) with halves rounded up.
std::size_t target_count(double p, std::size_t total);

// Highest mean-joint-confidence frames; ties go to the lower frame index.
// Returned ascending.
std::vector<std::size_t> select_frames_by_confidence(const SkeletonSequence& seq, double p);
std::vector<std::size_t> select_frames(const SkeletonSequence& seq, double p, Selection selection,
                                       Rng& rng);
// Highest-confidence (frame, joint) cells, ties to the lower row-major index;
// or a uniform sample without replacement. Returned ascending.
std::vector<Cell> select_cells(const SkeletonSequence& seq, double p, Selection selection,
                               Rng& rng);

using Corrupted = std::pair<SkeletonSequence, CorruptionRecord>;

// Masked cells get coordinates (0,0,0) and confidence 0.
Corrupted mask_frames(const SkeletonSequence& seq, const CorruptionSpec& spec);
Corrupted mask_joints(const SkeletonSequence& seq, const CorruptionSpec& spec);
// Each coordinate of a selected cell moves by U[-s*limb_i, s*limb_i], with
// limb_i the sequence-averaged length of the bone ending at joint i. The root
// (and any limb never observed) uses the mean limb length.
Corrupted add_joint_noise(const SkeletonSequence& seq, const CorruptionSpec& spec,
                          const KinematicTree& tree);
Corrupted add_joint_noise(const SkeletonSequence& seq, const CorruptionSpec& spec,
                          const std::vector<double>& limbs, std::size_t root);

// Dispatches on spec.mode.
Corrupted corrupt(const SkeletonSequence& seq, const CorruptionSpec& spec,
                  const KinematicTree& tree);

}  // namespace skeletor
