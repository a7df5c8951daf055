#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "skeletor/autodiff.hpp"
#include "skeletor/checkpoint.hpp"
#include "skeletor/io.hpp"
#include "skeletor/rng.hpp"
#include "skeletor/skeleton.hpp"

namespace skeletor {

struct ModelConfig {
  std::size_t joints = kUpperBodyJoints;
  std::size_t d_model = 128;
  std::size_t n_layers = 8;
  std::size_t heads = 4;
  std::size_t d_k = 32;
  std::size_t d_v = 32;
  std::size_t d_ff = 512;
  std::size_t window = 32;
  // Append per-joint confidences to the 3N coordinates (input width 4N).
  bool use_confidence = true;
  bool use_positional_encoding = true;
  double layer_norm_epsilon = 1e-5;
  std::size_t max_positions = 4096;

  std::size_t input_dim() const { return (use_confidence ? 4 : 3) * joints; }
  std::size_t output_dim() const { return 3 * joints; }

  // Throws ErrorKind::config (odd d_model, zero sizes, ...).
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

Json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& doc);

// One encoder layer. T is Tensor for storage and Var when bound to a tape.
template <typename T>
struct LayerWeights {
  std::vector<T> query, key, value;  // per head: d_model x d_k (d_v)
  T output;                          // heads*d_v x d_model
  T ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  T norm1_gain, norm1_bias, norm2_gain, norm2_bias;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < query.size(); ++i) f(prefix + "attn.query." + std::to_string(i), query[i]);
    for (std::size_t i = 0; i < key.size(); ++i) f(prefix + "attn.key." + std::to_string(i), key[i]);
    for (std::size_t i = 0; i < value.size(); ++i) f(prefix + "attn.value." + std::to_string(i), value[i]);
    f(prefix + "attn.output", output);
    f(prefix + "ffn.w1", ffn_w1);
    f(prefix + "ffn.b1", ffn_b1);
    f(prefix + "ffn.w2", ffn_w2);
    f(prefix + "ffn.b2", ffn_b2);
    f(prefix + "norm1.gain", norm1_gain);
    f(prefix + "norm1.bias", norm1_bias);
    f(prefix + "norm2.gain", norm2_gain);
    f(prefix + "norm2.bias", norm2_bias);
  }
};

template <typename T>
struct Weights {
  T embed_weight, embed_bias, embed_norm_gain, embed_norm_bias;
  std::vector<LayerWeights<T>> layers;
  T head_weight, head_bias;

  // Visits every parameter in a fixed order with a stable dotted name.
  template <typename F>
  void visit(F&& f) {
    f(std::string("embed.weight"), embed_weight);
    f(std::string("embed.bias"), embed_bias);
    f(std::string("embed.norm.gain"), embed_norm_gain);
    f(std::string("embed.norm.bias"), embed_norm_bias);
    for (std::size_t l = 0; l < layers.size(); ++l)
      layers[l].visit("layers." + std::to_string(l) + ".", f);
    f(std::string("head.weight"), head_weight);
    f(std::string("head.bias"), head_bias);
  }
};

using Parameters = Weights<Tensor>;
using BoundParameters = Weights<Var>;

// Xavier-uniform matrices, zero biases, unit LayerNorm gains.
Parameters init_parameters(const ModelConfig& config, Rng& rng);
// Checks every tensor's shape against the config; ErrorKind::shape otherwise.
void check_parameters(const Parameters& params, const ModelConfig& config);

std::vector<NamedTensor> flatten(const Parameters& params);
std::size_t parameter_count(const Parameters& params);

BoundParameters bind(Tape& tape, const Parameters& params, bool trainable);
// Gradients of the last backward() pass, laid out like the parameters.
Parameters gradients(const Tape& tape, const BoundParameters& bound);

// LayerNorm(ReLU(X W_e + b_e)); frames: [..., input_dim].
Var embed(Var frames, const BoundParameters& p, double epsilon);

// PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(...).
std::vector<double> positional_encoding(std::size_t pos, std::size_t d_model);
Tensor positional_encoding_table(std::size_t length, std::size_t d_model);

// softmax(Q K^T / sqrt(d_k)) V over [T, d] or batched [B, T, d]; no mask.
Var attention(Var query, Var key, Var value);
Var multi_head(Var query, Var key, Var value, const LayerWeights<Var>& layer);
Var feed_forward(Var x, const LayerWeights<Var>& layer);
// Post-norm: LayerNorm(x + MHA(x)), then LayerNorm(y + FFN(y)).
Var encoder_layer(Var x, const LayerWeights<Var>& layer, double epsilon);

// input: [T, input_dim] or [B, T, input_dim] -> [.., T, 3N].
Var forward(Var input, const BoundParameters& p, const ModelConfig& config);
Tensor forward(const Tensor& input, const Parameters& params, const ModelConfig& config);

// Frame rows as the network sees them: [x,y,z] per joint, then (optionally)
// one confidence per joint. Shape [T, 3N] or [T, 4N].
Tensor encode_frames(const SkeletonSequence& seq, bool use_confidence);
// Coordinates only, [T, 3N].
Tensor encode_targets(const SkeletonSequence& seq);
// Overwrites the coordinates of seq with rows of a [T, 3N] tensor.
void decode_frames(const Tensor& rows, SkeletonSequence& seq);

// A trained (or initialised) network plus the tree used to normalise its
// inputs.
struct Model {
  ModelConfig config;
  KinematicTree tree;
  Parameters params;
};

Model make_model(const ModelConfig& config, const KinematicTree& tree, std::uint64_t seed);
Checkpoint to_checkpoint(const Model& model);
Model from_checkpoint(const Checkpoint& checkpoint);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace skeletor
