#include "skeletor/model.hpp"

#include <cmath>
#include <map>

#include "skeletor/error.hpp"
#include "skeletor/optim.hpp"

namespace skeletor {

void ModelConfig::validate() const {
  SKELETOR_CHECK(joints > 0, ErrorKind::config, "model needs at least one joint");
  SKELETOR_CHECK(d_model > 0 && d_model % 2 == 0, ErrorKind::config,
          "d_model must be positive and even for the sinusoidal encoding");
  SKELETOR_CHECK(n_layers > 0 && heads > 0 && d_k > 0 && d_v > 0 && d_ff > 0, ErrorKind::config,
          "layer sizes must be positive");
  SKELETOR_CHECK(window > 0, ErrorKind::config, "window must be positive");
  SKELETOR_CHECK(layer_norm_epsilon >= 0.0, ErrorKind::config, "layer_norm_epsilon must be >= 0");
}

Json to_json(const ModelConfig& c) {
  return Json{{"joints", c.joints},     {"d_model", c.d_model},
              {"n_layers", c.n_layers}, {"heads", c.heads},
              {"d_k", c.d_k},           {"d_v", c.d_v},
              {"d_ff", c.d_ff},         {"window", c.window},
              {"use_confidence", c.use_confidence},
              {"use_positional_encoding", c.use_positional_encoding},
              {"layer_norm_epsilon", c.layer_norm_epsilon},
              {"max_positions", c.max_positions}};
}

ModelConfig model_config_from_json(const Json& doc) {
  ModelConfig c;
  try {
    c.joints = doc.value("joints", c.joints);
    c.d_model = doc.value("d_model", c.d_model);
    c.n_layers = doc.value("n_layers", c.n_layers);
    c.heads = doc.value("heads", c.heads);
    // Per-head widths default to d_model / heads when only those are given.
    c.d_k = doc.value("d_k", c.d_model / std::max<std::size_t>(c.heads, 1));
    c.d_v = doc.value("d_v", c.d_k);
    c.d_ff = doc.value("d_ff", c.d_ff);
    c.window = doc.value("window", c.window);
    c.use_confidence = doc.value("use_confidence", c.use_confidence);
    c.use_positional_encoding = doc.value("use_positional_encoding", c.use_positional_encoding);
    c.layer_norm_epsilon = doc.value("layer_norm_epsilon", c.layer_norm_epsilon);
    c.max_positions = doc.value("max_positions", c.max_positions);
  } catch (const Json::exception& e) {
    fail(ErrorKind::parse, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

Parameters shaped_parameters(const ModelConfig& c) {
  Parameters p;
  p.embed_weight = Tensor({c.input_dim(), c.d_model});
  p.embed_bias = Tensor({c.d_model});
  p.embed_norm_gain = Tensor({c.d_model}, 1.0);
  p.embed_norm_bias = Tensor({c.d_model});
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    LayerWeights<Tensor> w;
    for (std::size_t h = 0; h < c.heads; ++h) {
      w.query.emplace_back(Shape{c.d_model, c.d_k});
      w.key.emplace_back(Shape{c.d_model, c.d_k});
      w.value.emplace_back(Shape{c.d_model, c.d_v});
    }
    w.output = Tensor({c.heads * c.d_v, c.d_model});
    w.ffn_w1 = Tensor({c.d_model, c.d_ff});
    w.ffn_b1 = Tensor({c.d_ff});
    w.ffn_w2 = Tensor({c.d_ff, c.d_model});
    w.ffn_b2 = Tensor({c.d_model});
    w.norm1_gain = Tensor({c.d_model}, 1.0);
    w.norm1_bias = Tensor({c.d_model});
    w.norm2_gain = Tensor({c.d_model}, 1.0);
    w.norm2_bias = Tensor({c.d_model});
    p.layers.push_back(std::move(w));
  }
  p.head_weight = Tensor({c.d_model, c.output_dim()});
  p.head_bias = Tensor({c.output_dim()});
  return p;
}

}  // namespace

Parameters init_parameters(const ModelConfig& config, Rng& rng) {
  config.validate();
  Parameters p = shaped_parameters(config);
  p.visit([&](const std::string&, Tensor& t) {
    if (t.rank() == 2) t = xavier_init(t.shape(), rng);
  });
  return p;
}

void check_parameters(const Parameters& params, const ModelConfig& config) {
  Parameters expected = shaped_parameters(config);
  std::vector<std::pair<std::string, Shape>> want;
  expected.visit([&](const std::string& name, Tensor& t) { want.emplace_back(name, t.shape()); });
  std::size_t k = 0;
  Parameters copy = params;
  SKELETOR_CHECK(copy.layers.size() == config.n_layers, ErrorKind::shape,
          "parameter set has " + std::to_string(copy.layers.size()) + " layers, config says " +
              std::to_string(config.n_layers));
  copy.visit([&](const std::string& name, Tensor& t) {
    SKELETOR_CHECK(k < want.size() && want[k].first == name && want[k].second == t.shape(),
            ErrorKind::shape, "parameter '" + name + "' has shape " + shape_string(t.shape()));
    ++k;
  });
  SKELETOR_CHECK(k == want.size(), ErrorKind::shape, "parameter set is incomplete");
}

std::vector<NamedTensor> flatten(const Parameters& params) {
  std::vector<NamedTensor> out;
  Parameters copy = params;
  copy.visit([&](const std::string& name, Tensor& t) { out.push_back({name, std::move(t)}); });
  return out;
}

std::size_t parameter_count(const Parameters& params) {
  std::size_t n = 0;
  for (const auto& p : flatten(params)) n += p.value.size();
  return n;
}

BoundParameters bind(Tape& tape, const Parameters& params, bool trainable) {
  BoundParameters b;
  auto leaf = [&](const Tensor& t) { return tape.leaf(t, trainable); };
  b.embed_weight = leaf(params.embed_weight);
  b.embed_bias = leaf(params.embed_bias);
  b.embed_norm_gain = leaf(params.embed_norm_gain);
  b.embed_norm_bias = leaf(params.embed_norm_bias);
  for (const auto& w : params.layers) {
    LayerWeights<Var> v;
    for (const auto& t : w.query) v.query.push_back(leaf(t));
    for (const auto& t : w.key) v.key.push_back(leaf(t));
    for (const auto& t : w.value) v.value.push_back(leaf(t));
    v.output = leaf(w.output);
    v.ffn_w1 = leaf(w.ffn_w1);
    v.ffn_b1 = leaf(w.ffn_b1);
    v.ffn_w2 = leaf(w.ffn_w2);
    v.ffn_b2 = leaf(w.ffn_b2);
    v.norm1_gain = leaf(w.norm1_gain);
    v.norm1_bias = leaf(w.norm1_bias);
    v.norm2_gain = leaf(w.norm2_gain);
    v.norm2_bias = leaf(w.norm2_bias);
    b.layers.push_back(std::move(v));
  }
  b.head_weight = leaf(params.head_weight);
  b.head_bias = leaf(params.head_bias);
  return b;
}

Parameters gradients(const Tape& tape, const BoundParameters& bound) {
  Parameters g;
  auto grad = [&](const Var& v) { return tape.grad(v); };
  g.embed_weight = grad(bound.embed_weight);
  g.embed_bias = grad(bound.embed_bias);
  g.embed_norm_gain = grad(bound.embed_norm_gain);
  g.embed_norm_bias = grad(bound.embed_norm_bias);
  for (const auto& v : bound.layers) {
    LayerWeights<Tensor> w;
    for (const auto& x : v.query) w.query.push_back(grad(x));
    for (const auto& x : v.key) w.key.push_back(grad(x));
    for (const auto& x : v.value) w.value.push_back(grad(x));
    w.output = grad(v.output);
    w.ffn_w1 = grad(v.ffn_w1);
    w.ffn_b1 = grad(v.ffn_b1);
    w.ffn_w2 = grad(v.ffn_w2);
    w.ffn_b2 = grad(v.ffn_b2);
    w.norm1_gain = grad(v.norm1_gain);
    w.norm1_bias = grad(v.norm1_bias);
    w.norm2_gain = grad(v.norm2_gain);
    w.norm2_bias = grad(v.norm2_bias);
    g.layers.push_back(std::move(w));
  }
  g.head_weight = grad(bound.head_weight);
  g.head_bias = grad(bound.head_bias);
  return g;
}

// ---------------------------------------------------------------------------
// Network

Var embed(Var frames, const BoundParameters& p, double epsilon) {
  const std::size_t expected = p.embed_weight.shape()[0];
  SKELETOR_CHECK(frames.shape().back() == expected, ErrorKind::shape,
          "embedding expects input width " + std::to_string(expected) + ", got " +
              std::to_string(frames.shape().back()));
  Var projected = add(matmul(frames, p.embed_weight), p.embed_bias);
  return layer_norm(relu(projected), p.embed_norm_gain, p.embed_norm_bias, epsilon);
}

std::vector<double> positional_encoding(std::size_t pos, std::size_t d_model) {
  SKELETOR_CHECK(d_model % 2 == 0, ErrorKind::config, "positional encoding needs an even d_model");
  std::vector<double> pe(d_model);
  for (std::size_t i = 0; 2 * i < d_model; ++i) {
    const double angle = static_cast<double>(pos) /
                         std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
    pe[2 * i] = std::sin(angle);
    pe[2 * i + 1] = std::cos(angle);
  }
  return pe;
}

Tensor positional_encoding_table(std::size_t length, std::size_t d_model) {
  Tensor table({length, d_model});
  for (std::size_t pos = 0; pos < length; ++pos) {
    const auto row = positional_encoding(pos, d_model);
    std::copy(row.begin(), row.end(), table.data().begin() + static_cast<std::ptrdiff_t>(pos * d_model));
  }
  return table;
}

Var attention(Var query, Var key, Var value) {
  const Shape& qs = query.shape();
  const Shape& ks = key.shape();
  SKELETOR_CHECK(qs.size() >= 2 && ks.size() == qs.size() && qs.back() == ks.back(), ErrorKind::shape,
          "attention: query " + shape_string(qs) + " and key " + shape_string(ks) +
              " disagree on d_k");
  const double d_k = static_cast<double>(qs.back());
  Var scores = scale(matmul(query, transpose(key)), 1.0 / std::sqrt(d_k));
  Var weights = softmax(scores, scores.shape().size() - 1);
  return matmul(weights, value);
}

Var multi_head(Var query, Var key, Var value, const LayerWeights<Var>& layer) {
  const std::size_t heads = layer.query.size();
  SKELETOR_CHECK(heads > 0 && layer.key.size() == heads && layer.value.size() == heads, ErrorKind::shape,
          "multi_head: inconsistent head count");
  std::size_t concat_width = 0;
  for (const Var& w : layer.value) concat_width += w.shape().back();
  SKELETOR_CHECK(layer.output.shape()[0] == concat_width, ErrorKind::shape,
          "multi_head: h*d_v = " + std::to_string(concat_width) + " but W^O has " +
              std::to_string(layer.output.shape()[0]) + " rows");
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h)
    outputs.push_back(attention(matmul(query, layer.query[h]), matmul(key, layer.key[h]),
                                matmul(value, layer.value[h])));
  return matmul(concat_last(outputs), layer.output);
}

Var feed_forward(Var x, const LayerWeights<Var>& layer) {
  Var hidden = relu(add(matmul(x, layer.ffn_w1), layer.ffn_b1));
  return add(matmul(hidden, layer.ffn_w2), layer.ffn_b2);
}

Var encoder_layer(Var x, const LayerWeights<Var>& layer, double epsilon) {
  Var attended = layer_norm(add(x, multi_head(x, x, x, layer)), layer.norm1_gain, layer.norm1_bias,
                            epsilon);
  return layer_norm(add(attended, feed_forward(attended, layer)), layer.norm2_gain,
                    layer.norm2_bias, epsilon);
}

Var forward(Var input, const BoundParameters& p, const ModelConfig& config) {
  const Shape& s = input.shape();
  SKELETOR_CHECK(s.size() == 2 || s.size() == 3, ErrorKind::shape,
          "forward expects [T, D] or [B, T, D], got " + shape_string(s));
  const std::size_t length = s[s.size() - 2];
  SKELETOR_CHECK(length <= config.max_positions, ErrorKind::shape,
          "window of " + std::to_string(length) + " frames exceeds the positional limit");
  Var x = embed(input, p, config.layer_norm_epsilon);
  if (config.use_positional_encoding)
    x = add(x, input.tape()->constant(positional_encoding_table(length, config.d_model)));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    x = encoder_layer(x, p.layers[l], config.layer_norm_epsilon);
    SKELETOR_CHECK(x.value().all_finite(), ErrorKind::numerical,
            "non-finite activation after encoder layer " + std::to_string(l));
  }
  Var out = add(matmul(x, p.head_weight), p.head_bias);
  SKELETOR_CHECK(out.value().all_finite(), ErrorKind::numerical, "non-finite model output");
  return out;
}

Tensor forward(const Tensor& input, const Parameters& params, const ModelConfig& config) {
  Tape tape;
  const BoundParameters bound = bind(tape, params, false);
  return forward(tape.constant(input), bound, config).value();
}

Tensor encode_frames(const SkeletonSequence& seq, bool use_confidence) {
  const std::size_t n = seq.joint_count();
  const std::size_t width = (use_confidence ? 4 : 3) * n;
  Tensor rows({seq.frame_count(), width});
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    const Skeleton& f = seq.frames[t];
    double* r = rows.data().data() + t * width;
    for (std::size_t j = 0; j < n; ++j) {
      r[3 * j] = f.joints[j].x;
      r[3 * j + 1] = f.joints[j].y;
      r[3 * j + 2] = f.joints[j].z;
    }
    if (use_confidence)
      for (std::size_t j = 0; j < n; ++j) r[3 * n + j] = f.confidences[j];
  }
  return rows;
}

Tensor encode_targets(const SkeletonSequence& seq) { return encode_frames(seq, false); }

void decode_frames(const Tensor& rows, SkeletonSequence& seq) {
  const std::size_t n = seq.joint_count();
  SKELETOR_CHECK(rows.rank() == 2 && rows.dim(0) == seq.frame_count() && rows.dim(1) == 3 * n,
          ErrorKind::shape, "decode_frames: got " + shape_string(rows.shape()));
  for (std::size_t t = 0; t < seq.frame_count(); ++t)
    for (std::size_t j = 0; j < n; ++j)
      seq.frames[t].joints[j] = {rows.at(t, 3 * j), rows.at(t, 3 * j + 1), rows.at(t, 3 * j + 2)};
}

// ---------------------------------------------------------------------------
// Persistence

Model make_model(const ModelConfig& config, const KinematicTree& tree, std::uint64_t seed) {
  SKELETOR_CHECK(config.joints == tree.joint_count(), ErrorKind::structural,
          "model joint count does not match the tree");
  Rng rng = Rng::substream(seed, "init");
  return Model{config, tree, init_parameters(config, rng)};
}

Checkpoint to_checkpoint(const Model& model) {
  Json meta{{"format", "skeletor-model"}, {"model", to_json(model.config)}, {"tree", to_json(model.tree)}};
  return Checkpoint{meta.dump(), flatten(model.params)};
}

Model from_checkpoint(const Checkpoint& checkpoint) {
  Json meta;
  try {
    meta = Json::parse(checkpoint.metadata_json);
  } catch (const Json::exception& e) {
    fail(ErrorKind::parse, std::string("checkpoint metadata: ") + e.what());
  }
  SKELETOR_CHECK(meta.contains("model") && meta.contains("tree"), ErrorKind::parse,
          "checkpoint metadata lacks model config or tree");
  Model m;
  m.config = model_config_from_json(meta.at("model"));
  m.tree = tree_from_json(meta.at("tree"));
  m.params = shaped_parameters(m.config);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& p : checkpoint.parameters) by_name[p.name] = &p.value;
  SKELETOR_CHECK(by_name.size() == checkpoint.parameters.size(), ErrorKind::parse,
          "duplicate parameter names in checkpoint");
  std::size_t used = 0;
  m.params.visit([&](const std::string& name, Tensor& t) {
    auto it = by_name.find(name);
    SKELETOR_CHECK(it != by_name.end(), ErrorKind::parse, "checkpoint lacks parameter '" + name + "'");
    SKELETOR_CHECK(it->second->shape() == t.shape(), ErrorKind::shape,
            "checkpoint parameter '" + name + "' has shape " + shape_string(it->second->shape()));
    t = *it->second;
    ++used;
  });
  SKELETOR_CHECK(used == checkpoint.parameters.size(), ErrorKind::parse,
          "checkpoint has parameters the config does not describe");
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  save_checkpoint(path, to_checkpoint(model));
}

Model load_model(const std::filesystem::path& path) { return from_checkpoint(load_checkpoint(path)); }

}  // namespace skeletor
