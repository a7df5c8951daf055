#include "skeletor/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "skeletor/error.hpp"
#include "skeletor/optim.hpp"

namespace skeletor {

std::string_view to_string(LossScope scope) {
  return scope == LossScope::corrupted_only ? "corrupted_only" : "all_frames";
}

LossScope parse_loss_scope(std::string_view text) {
  if (text == "all_frames" || text == "all") return LossScope::all_frames;
  if (text == "corrupted_only" || text == "corrupted") return LossScope::corrupted_only;
  fail(ErrorKind::config, "unknown loss scope '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  require(window >= 1, ErrorKind::config, "window must be >= 1");
  require(stride >= 1, ErrorKind::config, "stride must be >= 1");
  require(batch_size >= 1, ErrorKind::config, "batch_size must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorKind::config,
          "learning_rate must be positive");
  require(mask.is_mask(), ErrorKind::config, "mask spec must use a mask mode");
  require(!noise.is_mask(), ErrorKind::config, "noise spec must use a noise mode");
  mask.validate();
  noise.validate();
  require(mask_ratio >= 0.0 && mask_ratio <= 1.0, ErrorKind::config, "mask_ratio must be in [0, 1]");
  require(dev_mask_p >= 0.0 && dev_mask_p <= 1.0, ErrorKind::config, "dev_mask_p must be in [0, 1]");
}

Json to_json(const TrainConfig& c) {
  return Json{{"window", c.window},
              {"stride", c.stride},
              {"batch_size", c.batch_size},
              {"iterations", c.iterations},
              {"learning_rate", c.learning_rate},
              {"mask", to_json(c.mask)},
              {"noise", to_json(c.noise)},
              {"mask_ratio", c.mask_ratio},
              {"scope", to_string(c.scope)},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"eval_every", c.eval_every},
              {"dev_mask_p", c.dev_mask_p}};
}

TrainConfig train_config_from_json(const Json& doc) {
  require(doc.is_object(), ErrorKind::config, "training config must be a JSON object");
  TrainConfig c;
  try {
    c.window = doc.value("window", c.window);
    c.stride = doc.value("stride", c.stride);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.iterations = doc.value("iterations", c.iterations);
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    if (doc.contains("mask")) c.mask = corruption_spec_from_json(doc.at("mask"));
    if (doc.contains("noise")) c.noise = corruption_spec_from_json(doc.at("noise"));
    c.mask_ratio = doc.value("mask_ratio", c.mask_ratio);
    c.scope = parse_loss_scope(doc.value("scope", std::string("all_frames")));
    c.seed = doc.value("seed", c.seed);
    c.checkpoint_every = doc.value("checkpoint_every", c.checkpoint_every);
    c.eval_every = doc.value("eval_every", c.eval_every);
    c.dev_mask_p = doc.value("dev_mask_p", c.dev_mask_p);
  } catch (const Json::exception& e) {
    fail(ErrorKind::config, std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const TrainReport& r) {
  Json dev = Json::array();
  for (const DevPoint& p : r.dev) dev.push_back({{"iteration", p.iteration}, {"dev_mse", p.mse}});
  Json doc{{"config", to_json(r.config)},
           {"model", to_json(r.model)},
           {"dev", dev},
           {"best_iteration", r.best_iteration},
           {"best_dev_mse", r.best_dev_mse},
           {"final_loss", r.final_loss}};
  if (r.test) doc["test"] = {{"min", r.test->min}, {"ave", r.test->ave}, {"max", r.test->max}};
  return doc;
}

std::vector<SkeletonSequence> make_windows(const SkeletonSequence& seq, std::size_t window,
                                           std::size_t stride) {
  require(!seq.frames.empty(), ErrorKind::structural, "cannot window an empty sequence");
  require(window >= 1 && stride >= 1, ErrorKind::config, "window and stride must be >= 1");
  auto slice = [&](std::size_t start) {
    SkeletonSequence w;
    w.id = seq.id;
    w.frame_rate = seq.frame_rate;
    w.frames.reserve(window);
    for (std::size_t k = 0; k < window; ++k)
      w.frames.push_back(seq.frames[std::min(start + k, seq.frames.size() - 1)]);
    return w;
  };
  std::vector<SkeletonSequence> out;
  if (seq.frames.size() <= window) {
    out.push_back(slice(0));
    return out;
  }
  for (std::size_t start = 0; start + window <= seq.frames.size(); start += stride)
    out.push_back(slice(start));
  return out;
}

Tensor scope_weights(const CorruptionRecord& record, LossScope scope) {
  const std::size_t frames = record.frame_count, joints = record.joint_count;
  if (scope == LossScope::all_frames) {
    require(frames * joints > 0, ErrorKind::config, "loss scope is empty");
    return Tensor({frames, 3 * joints}, 1.0);
  }
  Tensor w({frames, 3 * joints});
  const auto mask = record.cell_mask();
  std::size_t selected = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      ++selected;
      for (std::size_t a = 0; a < 3; ++a) w[3 * i + a] = 1.0;
    }
  require(selected > 0, ErrorKind::config, "loss scope 'corrupted_only' selects no cells");
  return w;
}

double mse_loss(const Tensor& pred, const Tensor& target, const CorruptionRecord& record,
                LossScope scope) {
  require(pred.shape() == target.shape(), ErrorKind::shape,
          "mse_loss: prediction " + shape_string(pred.shape()) + " vs target " +
              shape_string(target.shape()));
  const Tensor w = scope_weights(record, scope);
  require(w.size() == pred.size(), ErrorKind::shape, "mse_loss: record does not match the tensors");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    num += w[i] * d * d;
    den += w[i];
  }
  return num / den;
}

namespace {

Tensor stack(const std::vector<Tensor>& rows, std::size_t begin, std::size_t count) {
  const Shape& s = rows[begin].shape();
  Tensor out({count, s[0], s[1]});
  const std::size_t block = s[0] * s[1];
  for (std::size_t b = 0; b < count; ++b) {
    require(rows[begin + b].shape() == s, ErrorKind::shape, "stacked windows differ in shape");
    std::copy_n(rows[begin + b].data().data(), block, out.data().data() + b * block);
  }
  return out;
}

struct PreparedSequence {
  SkeletonSequence normalized;
  std::vector<double> limbs;
};

std::vector<PreparedSequence> prepare(const std::vector<SkeletonSequence>& seqs,
                                      const KinematicTree& tree) {
  std::vector<PreparedSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    validate(s);
    require(s.joint_count() == tree.joint_count(), ErrorKind::structural,
            "sequence '" + s.id + "' has " + std::to_string(s.joint_count()) +
                " joints but the tree has " + std::to_string(tree.joint_count()));
    PreparedSequence p;
    p.normalized = normalize(s, tree).first;
    p.limbs = limb_lengths(p.normalized, tree);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ParamSlot> slots(Parameters& params, Parameters& grads) {
  std::vector<ParamSlot> out;
  params.visit([&](const std::string& name, Tensor& t) { out.push_back({name, &t, nullptr}); });
  std::size_t i = 0;
  grads.visit([&](const std::string&, Tensor& g) { out[i++].grad = &g; });
  return out;
}

}  // namespace

DevMonitor::DevMonitor(const std::vector<SkeletonSequence>& normalized, std::size_t window,
                       double mask_p, bool use_confidence) {
  for (const auto& seq : normalized) {
    CorruptionSpec spec{CorruptionMode::mask_frames, mask_p, 0.0, 0, Selection::by_confidence};
    const SkeletonSequence masked = mask_frames(seq, spec).first;
    const std::size_t frames = seq.frames.size();
    for (std::size_t start = 0; start < frames; start += window) {
      SkeletonSequence in, target;
      Tensor w({window, 3 * seq.joint_count()});
      for (std::size_t k = 0; k < window; ++k) {
        const std::size_t t = std::min(start + k, frames - 1);
        in.frames.push_back(masked.frames[t]);
        target.frames.push_back(seq.frames[t]);
        if (start + k < frames)
          std::fill_n(w.data().data() + k * w.cols(), w.cols(), 1.0);
      }
      inputs_.push_back(encode_frames(in, use_confidence));
      targets_.push_back(encode_targets(target));
      weights_.push_back(std::move(w));
    }
  }
}

double DevMonitor::evaluate(const Parameters& params, const ModelConfig& config) const {
  require(!inputs_.empty(), ErrorKind::config, "dev monitor has no windows");
  constexpr std::size_t kBatch = 16;
  double num = 0.0, den = 0.0;
  for (std::size_t begin = 0; begin < inputs_.size(); begin += kBatch) {
    const std::size_t count = std::min(kBatch, inputs_.size() - begin);
    const Tensor pred = forward(stack(inputs_, begin, count), params, config);
    const std::size_t block = inputs_[begin].dim(0) * config.output_dim();
    for (std::size_t b = 0; b < count; ++b) {
      const Tensor& t = targets_[begin + b];
      const Tensor& w = weights_[begin + b];
      for (std::size_t i = 0; i < block; ++i) {
        const double d = pred[b * block + i] - t[i];
        num += w[i] * d * d;
        den += w[i];
      }
    }
  }
  return num / den;
}

TrainResult train(const std::vector<SkeletonSequence>& corpus,
                  const std::vector<SkeletonSequence>& dev, const ModelConfig& model_config,
                  const KinematicTree& tree, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& checkpoint_dir,
                  const ProgressFn& progress) {
  config.validate();
  model_config.validate();
  require(!corpus.empty(), ErrorKind::config, "training corpus is empty");
  require(model_config.joints == tree.joint_count(), ErrorKind::config,
          "model joint count does not match the tree");

  const auto train_set = prepare(corpus, tree);
  std::vector<SkeletonSequence> dev_normalized;
  for (auto& p : dev.empty() ? train_set : prepare(dev, tree)) dev_normalized.push_back(p.normalized);
  const DevMonitor monitor(dev_normalized, config.window, config.dev_mask_p,
                           model_config.use_confidence);

  struct WindowRef {
    std::size_t sequence;
    SkeletonSequence frames;
  };
  std::vector<WindowRef> windows;
  for (std::size_t i = 0; i < train_set.size(); ++i)
    for (auto& w : make_windows(train_set[i].normalized, config.window, config.stride))
      windows.push_back({i, std::move(w)});

  Model model = make_model(model_config, tree, config.seed);
  Model best = model;
  TrainReport report;
  report.config = config;
  report.model = model_config;

  Rng batch_rng = Rng::substream(config.seed, "batching");
  Rng corruption_rng = Rng::substream(config.seed, "corruption");
  AdamState adam;
  adam.config.learning_rate = config.learning_rate;

  auto record_dev = [&](std::size_t iteration) {
    const double mse = monitor.evaluate(model.params, model_config);
    require(std::isfinite(mse), ErrorKind::numerical,
            "non-finite dev MSE at iteration " + std::to_string(iteration));
    report.dev.push_back({iteration, mse});
    if (report.dev.size() == 1 || mse < report.best_dev_mse) {
      report.best_dev_mse = mse;
      report.best_iteration = iteration;
      best.params = model.params;
    }
    return mse;
  };
  auto save = [&](std::size_t iteration) {
    if (!checkpoint_dir) return;
    std::filesystem::create_directories(*checkpoint_dir);
    save_model(*checkpoint_dir / ("ckpt_" + std::to_string(iteration) + ".bin"), model);
  };

  {
    const double mse = record_dev(0);
    if (progress) progress({0, 0.0, mse});
  }

  std::vector<Tensor> inputs(config.batch_size), targets(config.batch_size),
      weights(config.batch_size);
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const WindowRef& w = windows[batch_rng.below(windows.size())];
      const bool use_mask = corruption_rng.uniform() < config.mask_ratio;
      CorruptionSpec spec = use_mask ? config.mask : config.noise;
      spec.seed = corruption_rng.derive_seed();
      auto [corrupted, record] =
          use_mask ? corrupt(w.frames, spec, tree)
                   : add_joint_noise(w.frames, spec, train_set[w.sequence].limbs, tree.root());
      inputs[b] = encode_frames(corrupted, model_config.use_confidence);
      targets[b] = encode_targets(w.frames);
      weights[b] = scope_weights(record, config.scope);
    }

    Tape tape;
    const BoundParameters bound = bind(tape, model.params, true);
    Var loss;
    try {
      Var pred = forward(tape.constant(stack(inputs, 0, config.batch_size)), bound, model_config);
      loss = mse(pred, tape.constant(stack(targets, 0, config.batch_size)),
                 stack(weights, 0, config.batch_size));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numerical) throw;
      fail(ErrorKind::numerical, "iteration " + std::to_string(it) + ": " + e.what());
    }
    const double value = loss.value().item();
    require(std::isfinite(value), ErrorKind::numerical,
            "non-finite training loss at iteration " + std::to_string(it));
    tape.backward(loss);
    Parameters grads = gradients(tape, bound);
    const auto param_slots = slots(model.params, grads);
    try {
      adam_step(adam, param_slots);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::numerical) throw;
      fail(ErrorKind::numerical, "iteration " + std::to_string(it) + ": " + e.what());
    }
    report.final_loss = value;

    std::optional<double> dev_mse;
    const bool eval_now =
        it == config.iterations || (config.eval_every > 0 && it % config.eval_every == 0);
    if (eval_now) dev_mse = record_dev(it);
    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) save(it);
    if (progress) progress({it, value, dev_mse});
  }
  if (config.iterations == 0) best.params = model.params;
  return {std::move(best), std::move(report)};
}

}  // namespace skeletor
