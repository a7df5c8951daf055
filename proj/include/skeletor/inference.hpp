#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "skeletor/model.hpp"
#include "skeletor/skeleton.hpp"

namespace skeletor {

struct InferenceConfig {
  std::size_t window = 32;
  std::size_t radius = 2;  // average over 2r+1 windows
  std::size_t batch = 16;  // windows per forward call

  // 2r+1 <= window, so every averaged window contains the frame.
  void validate() const;
};

// ceil(r + n/2) frames added at each end.
std::size_t padding_amount(std::size_t window, std::size_t radius);

// Repeats the first frame before and the last frame after the sequence.
SkeletonSequence pad_sequence(const SkeletonSequence& seq, std::size_t window, std::size_t radius);

// Maps a batch of windows [B, n, D_in] to predictions [B, n, D_out]; starts
// are the windows' first frame indices in the padded sequence.
using WindowPredictor =
    std::function<Tensor(const Tensor& windows, std::span<const std::size_t> starts)>;

WindowPredictor model_predictor(const Model& model);

// Sliding-window refinement over encoded rows [T, D_in] -> [T, D_out]. Frame i
// is the mean of the predictions at its position in the 2r+1 stride-1
// windows whose centres (start + floor(n/2)) are nearest to it.
Tensor refine_rows(const Tensor& rows, const WindowPredictor& predict, const InferenceConfig& config);

// Refines a sequence that is already in normalised coordinates.
SkeletonSequence refine_normalized(const SkeletonSequence& normalized, const WindowPredictor& predict,
                                   bool use_confidence, const InferenceConfig& config);

// Normalises with the model's tree, refines, and maps back. Confidences are
// carried over from the input.
SkeletonSequence refine(const SkeletonSequence& seq, const Model& model, const InferenceConfig& config);

}  // namespace skeletor
