#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "skeletor/corruption.hpp"
#include "skeletor/inference.hpp"
#include "skeletor/training.hpp"

namespace skeletor {

struct Aggregate {
  double min = 0.0, ave = 0.0, max = 0.0;
};

// Fixed-order summation; throws ErrorKind::config on an empty list.
Aggregate aggregate(const std::vector<double>& values);

struct EvalReport {
  CorruptionSpec spec;
  LossScope scope = LossScope::all_frames;
  std::string model;  // identifier of the evaluated model or baseline
  std::string label;  // grid point label, empty outside sweeps
  std::vector<std::string> ids;
  std::vector<double> mse;
  Aggregate summary;
};

Json to_json(const EvalReport& report);

// Maps a corrupted, normalised sequence to its reconstruction.
using Refiner = std::function<SkeletonSequence(const SkeletonSequence& corrupted,
                                               const CorruptionRecord& record)>;

// Seed used to corrupt one sequence: the protocol seed mixed with the id, so
// every model in a comparison sees identical corruption.
std::uint64_t sequence_seed(std::uint64_t protocol_seed, const std::string& id);

// Normalise each sequence with the tree, corrupt it, reconstruct, and score
// against the clean normalised sequence. MSE is in normalised units (mean
// limb length 1).
EvalReport evaluate(const std::vector<SkeletonSequence>& corpus, const KinematicTree& tree,
                    const CorruptionSpec& spec, LossScope scope, const Refiner& refiner,
                    const std::string& model_name);

EvalReport evaluate(const Model& model, const std::vector<SkeletonSequence>& corpus,
                    const CorruptionSpec& spec, const InferenceConfig& inference, LossScope scope,
                    const std::string& model_name = "model");

Refiner model_refiner(const Model& model, const InferenceConfig& inference);
Refiner identity_refiner();

// Replaces each corrupted cell by the same joint in the nearest earlier frame
// where it is intact (the nearest later one when there is none).
SkeletonSequence copy_previous(const SkeletonSequence& corrupted, const CorruptionRecord& record);
Refiner copy_previous_refiner();

enum class SweepAxis { noise_s, train_mask_p, joint_vs_frame };
std::string_view to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepPoint {
  std::string label;
  std::string model;  // key into the grid's model table
  CorruptionSpec spec;
};

struct SweepGrid {
  SweepAxis axis = SweepAxis::noise_s;
  LossScope scope = LossScope::all_frames;
  std::vector<std::pair<std::string, std::string>> models;  // name -> checkpoint path
  std::vector<SweepPoint> points;
};

// Either explicit "points", or a shorthand:
//   noise_s:        {"model", "mode", "p", "seed", "values": [s...]}
//   train_mask_p:   {"models": {"label": path, ...}, "p", "seed"} masked frames
//   joint_vs_frame: {"model", "p", "s", "seed"} -> frame and joint points
SweepGrid sweep_grid_from_json(const Json& doc);

using ModelLookup = std::function<const Model&(const std::string& name)>;

std::vector<EvalReport> sweep(const SweepGrid& grid, const std::vector<SkeletonSequence>& corpus,
                              const ModelLookup& lookup, const InferenceConfig& inference);

// Plain-text table: one row per report with its label, protocol and
// min/ave/max.
std::string format_table(SweepAxis axis, const std::vector<EvalReport>& reports);
Json to_json(SweepAxis axis, const std::vector<EvalReport>& reports);

}  // namespace skeletor
