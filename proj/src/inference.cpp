#include "skeletor/inference.hpp"

#include <algorithm>
#include <vector>

#include "skeletor/error.hpp"

namespace skeletor {

void InferenceConfig::validate() const {
  SKELETOR_CHECK(window >= 1, ErrorKind::config, "inference window must be >= 1");
  SKELETOR_CHECK(2 * radius + 1 <= window, ErrorKind::config,
          "averaging radius " + std::to_string(radius) + " needs a window of at least " +
              std::to_string(2 * radius + 1) + " frames");
  SKELETOR_CHECK(batch >= 1, ErrorKind::config, "inference batch must be >= 1");
}

std::size_t padding_amount(std::size_t window, std::size_t radius) {
  return radius + (window + 1) / 2;
}

SkeletonSequence pad_sequence(const SkeletonSequence& seq, std::size_t window, std::size_t radius) {
  SKELETOR_CHECK(!seq.frames.empty(), ErrorKind::structural, "cannot pad an empty sequence");
  const std::size_t pad = padding_amount(window, radius);
  SkeletonSequence out;
  out.id = seq.id;
  out.frame_rate = seq.frame_rate;
  out.frames.reserve(seq.frames.size() + 2 * pad);
  out.frames.insert(out.frames.end(), pad, seq.frames.front());
  out.frames.insert(out.frames.end(), seq.frames.begin(), seq.frames.end());
  out.frames.insert(out.frames.end(), pad, seq.frames.back());
  return out;
}

WindowPredictor model_predictor(const Model& model) {
  return [&model](const Tensor& windows, std::span<const std::size_t>) {
    return forward(windows, model.params, model.config);
  };
}

Tensor refine_rows(const Tensor& rows, const WindowPredictor& predict, const InferenceConfig& config) {
  config.validate();
  SKELETOR_CHECK(rows.rank() == 2 && rows.dim(0) > 0, ErrorKind::shape,
          "refine expects [T, D] rows, got " + shape_string(rows.shape()));
  const std::size_t frames = rows.dim(0), width = rows.dim(1);
  const std::size_t n = config.window, r = config.radius, half = n / 2;
  const std::size_t pad = padding_amount(n, r);
  const std::size_t padded = frames + 2 * pad;

  auto padded_row = [&](std::size_t q) {
    const std::size_t src = q < pad ? 0 : std::min(q - pad, frames - 1);
    return rows.data().data() + src * width;
  };

  // Window s is centred on padded frame s + half and serves padded frames
  // within r of its centre; only windows serving a real frame are evaluated.
  const std::size_t first_start = pad - r - half;
  const std::size_t last_start = pad + frames - 1 + r - half;
  SKELETOR_CHECK(last_start + n <= padded, ErrorKind::invalid_state, "window exceeds padded bounds");

  // Mean of the 2r+1 predictions for a frame, taken as first + mean(x - first).
  // Windows arrive in start order, so a frame's first prediction comes from the
  // window centred r before it. Agreeing predictions reproduce bit-exactly.
  Tensor anchor, deviation;
  std::size_t out_width = 0;
  for (std::size_t begin = first_start; begin <= last_start; begin += config.batch) {
    const std::size_t count = std::min(config.batch, last_start + 1 - begin);
    Tensor batch({count, n, width});
    std::vector<std::size_t> starts(count);
    for (std::size_t b = 0; b < count; ++b) {
      starts[b] = begin + b;
      for (std::size_t k = 0; k < n; ++k)
        std::copy_n(padded_row(starts[b] + k), width, batch.data().data() + (b * n + k) * width);
    }
    const Tensor pred = predict(batch, starts);
    SKELETOR_CHECK(pred.rank() == 3 && pred.dim(0) == count && pred.dim(1) == n, ErrorKind::shape,
            "predictor returned " + shape_string(pred.shape()));
    if (anchor.empty()) {
      out_width = pred.dim(2);
      anchor = Tensor({frames, out_width});
      deviation = Tensor({frames, out_width});
    }
    SKELETOR_CHECK(pred.dim(2) == out_width, ErrorKind::shape, "predictor output width changed");
    for (std::size_t b = 0; b < count; ++b) {
      const std::size_t centre = starts[b] + half;
      for (std::size_t q = centre - r; q <= centre + r; ++q) {
        if (q < pad || q >= pad + frames) continue;
        const std::size_t i = q - pad, pos = q - starts[b];
        const double* src = pred.data().data() + (b * n + pos) * out_width;
        double* first = anchor.data().data() + i * out_width;
        if (q == centre + r) {
          std::copy_n(src, out_width, first);
        } else {
          double* dst = deviation.data().data() + i * out_width;
          for (std::size_t c = 0; c < out_width; ++c) dst[c] += src[c] - first[c];
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(2 * r + 1);
  for (std::size_t k = 0; k < anchor.size(); ++k) anchor[k] += deviation[k] * inv;
  return anchor;
}

SkeletonSequence refine_normalized(const SkeletonSequence& normalized, const WindowPredictor& predict,
                                   bool use_confidence, const InferenceConfig& config) {
  validate(normalized);
  const Tensor out = refine_rows(encode_frames(normalized, use_confidence), predict, config);
  SkeletonSequence refined = normalized;
  decode_frames(out, refined);
  return refined;
}

SkeletonSequence refine(const SkeletonSequence& seq, const Model& model, const InferenceConfig& config) {
  SKELETOR_CHECK(seq.joint_count() == model.config.joints, ErrorKind::structural,
          "sequence has " + std::to_string(seq.joint_count()) + " joints, model expects " +
              std::to_string(model.config.joints));
  auto [normalized, state] = normalize(seq, model.tree);
  SkeletonSequence refined =
      refine_normalized(normalized, model_predictor(model), model.config.use_confidence, config);
  SkeletonSequence out = denormalize(refined, state);
  for (std::size_t t = 0; t < out.frames.size(); ++t) out.frames[t].confidences = seq.frames[t].confidences;
  return out;
}

}  // namespace skeletor
