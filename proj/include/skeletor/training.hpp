#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "skeletor/corruption.hpp"
#include "skeletor/model.hpp"

namespace skeletor {

enum class LossScope { all_frames, corrupted_only };

std::string_view to_string(LossScope scope);
LossScope parse_loss_scope(std::string_view text);

struct TrainConfig {
  std::size_t window = 32;
  std::size_t stride = 1;
  std::size_t batch_size = 8;
  std::size_t iterations = 5000;
  double learning_rate = 1e-5;
  // Each training window is masked with probability mask_ratio and noised
  // otherwise. The specs' own seeds are ignored; per-window seeds come from
  // the run seed.
  CorruptionSpec mask{CorruptionMode::mask_frames, 0.10, 0.0, 0, Selection::by_confidence};
  CorruptionSpec noise{CorruptionMode::noise_frames, 0.15, 0.3, 0, Selection::by_confidence};
  double mask_ratio = 0.5;
  LossScope scope = LossScope::all_frames;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 1000;  // 0 disables
  std::size_t eval_every = 1000;        // 0 evaluates only at the start and end
  double dev_mask_p = 0.15;

  void validate() const;
};

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& doc);

struct DevPoint {
  std::size_t iteration = 0;
  double mse = 0.0;
  bool operator==(const DevPoint&) const = default;
};

struct TestSummary {
  double min = 0.0, ave = 0.0, max = 0.0;
};

struct TrainReport {
  TrainConfig config;
  ModelConfig model;
  std::vector<DevPoint> dev;  // ascending iteration
  std::size_t best_iteration = 0;
  double best_dev_mse = 0.0;
  double final_loss = 0.0;
  std::optional<TestSummary> test;
};

Json to_json(const TrainReport& report);

// Windows of exactly `window` frames starting every `stride` frames. A
// sequence shorter than the window yields one window, extended by repeating
// its last frame.
std::vector<SkeletonSequence> make_windows(const SkeletonSequence& seq, std::size_t window,
                                           std::size_t stride);

// Per-coordinate weights [T, 3N]: all ones, or ones on the cells the record
// marks as corrupted. Throws ErrorKind::config if the scope selects nothing.
Tensor scope_weights(const CorruptionRecord& record, LossScope scope);

// Mean squared coordinate difference over the scoped cells. pred and target
// are [T, 3N].
double mse_loss(const Tensor& pred, const Tensor& target, const CorruptionRecord& record,
                LossScope scope);

struct TrainProgress {
  std::size_t iteration = 0;
  double loss = 0.0;
  std::optional<double> dev_mse;
};

using ProgressFn = std::function<void(const TrainProgress&)>;

struct TrainResult {
  Model model;  // parameters with the lowest dev MSE seen
  TrainReport report;
};

// Sequences are in raw coordinates; each one is normalised with the tree.
// When dev is empty the training sequences are monitored instead. Checkpoints
// (when checkpoint_dir is set) are written as ckpt_<iteration>.bin.
TrainResult train(const std::vector<SkeletonSequence>& corpus,
                  const std::vector<SkeletonSequence>& dev, const ModelConfig& model_config,
                  const KinematicTree& tree, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt,
                  const ProgressFn& progress = {});

// Dev-set monitor: each normalised sequence masked at p by confidence, cut
// into non-overlapping windows (the last one extended), MSE over real frames.
class DevMonitor {
 public:
  DevMonitor(const std::vector<SkeletonSequence>& normalized, std::size_t window, double mask_p,
             bool use_confidence);
  double evaluate(const Parameters& params, const ModelConfig& config) const;
  std::size_t window_count() const noexcept { return inputs_.size(); }

 private:
  std::vector<Tensor> inputs_, targets_, weights_;
};

}  // namespace skeletor
