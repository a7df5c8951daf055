#include "skeletor/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "skeletor/error.hpp"
#include "skeletor/rng.hpp"

namespace skeletor {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Joint3D rotate(const Mat3& m, const Joint3D& v) {
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
          m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

// Rz(z) * Ry(y) * Rx(x)
Mat3 rotation(double x, double y, double z) {
  const double cx = std::cos(x), sx = std::sin(x);
  const double cy = std::cos(y), sy = std::sin(y);
  const double cz = std::cos(z), sz = std::sin(z);
  const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  return multiply(rz, multiply(ry, rx));
}

double amplitude_sum(const std::vector<Sinusoid>& terms) {
  double s = 0.0;
  for (const auto& t : terms) s += std::abs(t.amplitude);
  return s;
}

Json to_json(const std::vector<Sinusoid>& terms) {
  Json out = Json::array();
  for (const auto& t : terms) out.push_back({t.amplitude, t.frequency, t.phase});
  return out;
}

std::vector<Sinusoid> sinusoids_from_json(const Json& doc) {
  std::vector<Sinusoid> out;
  for (const auto& t : doc) out.push_back({t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()});
  return out;
}

Json to_json(const AxisTracks& a) { return Json{{"x", to_json(a.x)}, {"y", to_json(a.y)}, {"z", to_json(a.z)}}; }

AxisTracks axis_tracks_from_json(const Json& doc) {
  AxisTracks a;
  if (doc.contains("x")) a.x = sinusoids_from_json(doc.at("x"));
  if (doc.contains("y")) a.y = sinusoids_from_json(doc.at("y"));
  if (doc.contains("z")) a.z = sinusoids_from_json(doc.at("z"));
  return a;
}

Joint3D bone_direction(const KinematicTree& tree, std::size_t joint, bool planar) {
  Joint3D d = tree.rest_offsets()[joint];
  if (planar) d.z = 0.0;
  const double n = d.norm();
  require(n > 0.0, ErrorKind::config,
          "joint " + std::to_string(joint) + " has no usable rest direction");
  return d * (1.0 / n);
}

// Rest-pose positions relative to the root, used for the front-of-torso check.
std::vector<Joint3D> rest_positions(const KinematicTree& tree) {
  std::vector<Joint3D> pos(tree.joint_count());
  for (std::size_t j : tree.topological_order())
    if (j != tree.root()) pos[j] = pos[static_cast<std::size_t>(tree.parent(j))] + tree.rest_offsets()[j];
  return pos;
}

enum class Violation { none, smoothness, behind_torso };

Violation check_motion(const SkeletonSequence& seq, const MotionSpec& spec,
                       const KinematicTree& tree) {
  if (max_frame_displacement(seq) >= smoothness_limit(spec, tree)) return Violation::smoothness;
  if (spec.planar) return Violation::none;
  const auto rest = rest_positions(tree);
  for (const auto& f : seq.frames)
    for (std::size_t j = 0; j < rest.size(); ++j)
      if (rest[j].z >= 1.0 && f.joints[j].z <= f.joints[tree.root()].z) return Violation::behind_torso;
  return Violation::none;
}

SkeletonSequence forward_kinematics(const MotionSpec& spec, const KinematicTree& tree) {
  require(tree.has_rest_pose(), ErrorKind::config, "motion synthesis needs a tree with rest offsets");
  const std::size_t n = tree.joint_count();
  require(spec.angles.size() == n && spec.bone_lengths.size() == n, ErrorKind::config,
          "motion spec does not match the tree's joint count");
  require(spec.frames >= 1, ErrorKind::config, "motion spec needs at least one frame");
  require(std::isfinite(spec.frame_rate) && spec.frame_rate > 0.0, ErrorKind::config,
          "frame rate must be positive");
  require(spec.confidence_jitter >= 0.0 && spec.confidence_jitter <= 1.0, ErrorKind::config,
          "confidence jitter must be in [0, 1]");
  for (std::size_t j = 0; j < n; ++j) {
    if (j != tree.root())
      require(std::isfinite(spec.bone_lengths[j]) && spec.bone_lengths[j] > 0.0, ErrorKind::config,
              "bone length of joint " + std::to_string(j) + " must be positive");
    const auto& a = spec.angles[j];
    for (const auto* axis : {&a.x, &a.y, &a.z})
      require(amplitude_sum(*axis) <= spec.max_angle, ErrorKind::config,
              "angle amplitude of joint " + std::to_string(j) + " exceeds the limit");
    if (spec.planar)
      require(a.x.empty() && a.y.empty(), ErrorKind::config, "planar motion rotates about z only");
  }
  if (spec.planar)
    require(spec.root_translation.z.empty(), ErrorKind::config, "planar motion cannot translate in z");

  std::vector<Joint3D> directions(n);
  for (std::size_t j = 0; j < n; ++j)
    if (j != tree.root()) directions[j] = bone_direction(tree, j, spec.planar);

  // Detector-like confidence: a dip that drifts over a second or two, frame
  // to frame flicker, and a little per-joint noise.
  Rng conf_rng = Rng::substream(spec.seed, "confidence");
  std::array<Sinusoid, 3> dip{};
  for (auto& d : dip)
    d = {1.0 / 6.0, conf_rng.uniform(0.3, 1.0), conf_rng.uniform(0.0, 2.0 * std::numbers::pi)};

  SkeletonSequence seq;
  seq.id = spec.id;
  seq.frame_rate = spec.frame_rate;
  seq.frames.resize(spec.frames);
  std::vector<Mat3> global(n);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const double t = static_cast<double>(f) / spec.frame_rate;
    Skeleton& frame = seq.frames[f];
    frame.joints.resize(n);
    frame.confidences.assign(n, 1.0);
    for (std::size_t j : tree.topological_order()) {
      const auto& a = spec.angles[j];
      const Mat3 local = rotation(evaluate(a.x, t), evaluate(a.y, t), evaluate(a.z, t));
      if (j == tree.root()) {
        global[j] = local;
        const auto& tr = spec.root_translation;
        frame.joints[j] = {evaluate(tr.x, t), evaluate(tr.y, t), evaluate(tr.z, t)};
        continue;
      }
      const std::size_t p = static_cast<std::size_t>(tree.parent(j));
      global[j] = multiply(global[p], local);
      frame.joints[j] = frame.joints[p] + rotate(global[j], directions[j] * spec.bone_lengths[j]);
    }
    if (spec.confidence_jitter > 0.0) {
      const double slow = 0.5 + evaluate({dip.begin(), dip.end()}, t);
      const double flicker = conf_rng.uniform();
      for (double& c : frame.confidences)
        c = std::clamp(1.0 - spec.confidence_jitter * (0.6 * slow + 0.3 * flicker + 0.1 * conf_rng.uniform()),
                       0.0, 1.0);
    }
  }
  return seq;
}

}  // namespace

double evaluate(const std::vector<Sinusoid>& terms, double t) {
  double v = 0.0;
  for (const auto& s : terms)
    v += s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * t + s.phase);
  return v;
}

Json to_json(const MotionSpec& spec) {
  Json angles = Json::array();
  for (const auto& a : spec.angles) angles.push_back(to_json(a));
  return Json{{"angles", angles},
              {"root_translation", to_json(spec.root_translation)},
              {"bone_lengths", spec.bone_lengths},
              {"frames", spec.frames},
              {"frame_rate", spec.frame_rate},
              {"seed", spec.seed},
              {"planar", spec.planar},
              {"confidence_jitter", spec.confidence_jitter},
              {"max_angle", spec.max_angle},
              {"id", spec.id}};
}

MotionSpec motion_spec_from_json(const Json& doc) {
  MotionSpec spec;
  try {
    for (const auto& a : doc.at("angles")) spec.angles.push_back(axis_tracks_from_json(a));
    if (doc.contains("root_translation"))
      spec.root_translation = axis_tracks_from_json(doc.at("root_translation"));
    spec.bone_lengths = doc.at("bone_lengths").get<std::vector<double>>();
    spec.frames = doc.value("frames", spec.frames);
    spec.frame_rate = doc.value("frame_rate", spec.frame_rate);
    spec.seed = doc.value("seed", spec.seed);
    spec.planar = doc.value("planar", spec.planar);
    spec.confidence_jitter = doc.value("confidence_jitter", spec.confidence_jitter);
    spec.max_angle = doc.value("max_angle", spec.max_angle);
    spec.id = doc.value("id", spec.id);
  } catch (const Json::exception& e) {
    fail(ErrorKind::config, std::string("motion spec: ") + e.what());
  }
  return spec;
}

MotionSpec rest_motion(const KinematicTree& tree, std::size_t frames) {
  MotionSpec spec;
  spec.angles.resize(tree.joint_count());
  spec.bone_lengths.resize(tree.joint_count());
  for (std::size_t j = 0; j < tree.joint_count(); ++j) spec.bone_lengths[j] = tree.rest_length(j);
  spec.frames = frames;
  return spec;
}

double smoothness_limit(const MotionSpec& spec, const KinematicTree& tree) {
  double shortest = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < spec.bone_lengths.size(); ++j)
    if (j != tree.root()) shortest = std::min(shortest, spec.bone_lengths[j]);
  return 0.5 * shortest;
}

double max_frame_displacement(const SkeletonSequence& seq) {
  double worst = 0.0;
  for (std::size_t t = 1; t < seq.frames.size(); ++t)
    for (std::size_t j = 0; j < seq.frames[t].size(); ++j)
      worst = std::max(worst, distance(seq.frames[t].joints[j], seq.frames[t - 1].joints[j]));
  return worst;
}

SkeletonSequence generate(const MotionSpec& spec, const KinematicTree& tree) {
  SkeletonSequence seq = forward_kinematics(spec, tree);
  switch (check_motion(seq, spec, tree)) {
    case Violation::smoothness:
      fail(ErrorKind::config, "motion '" + spec.id + "' moves a joint by more than half the shortest bone per frame");
    case Violation::behind_torso:
      fail(ErrorKind::config, "motion '" + spec.id + "' swings a forward joint behind the torso plane");
    case Violation::none: break;
  }
  return seq;
}

Sequence2D project_orthographic(const SkeletonSequence& seq) {
  Sequence2D out;
  out.id = seq.id;
  out.frame_rate = seq.frame_rate;
  out.frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) {
    Skeleton2D s;
    s.joints.reserve(f.size());
    for (const auto& j : f.joints) s.joints.push_back({j.x, j.y});
    s.confidences = f.confidences;
    out.frames.push_back(std::move(s));
  }
  return out;
}

void CorpusSpec::validate() const {
  require(frames >= 1, ErrorKind::config, "corpus frames must be >= 1");
  require(frame_rate > 0.0, ErrorKind::config, "corpus frame rate must be positive");
  require(terms >= 1, ErrorKind::config, "at least one sinusoid per axis");
  require(min_frequency >= 0.0 && max_frequency >= min_frequency, ErrorKind::config,
          "frequency range is invalid");
  require(!amplitude_by_depth.empty(), ErrorKind::config, "amplitude_by_depth is empty");
  for (double a : amplitude_by_depth) require(a >= 0.0, ErrorKind::config, "amplitudes must be >= 0");
  require(confidence_jitter >= 0.0 && confidence_jitter <= 1.0, ErrorKind::config,
          "confidence jitter must be in [0, 1]");
  require(bone_length_jitter >= 0.0 && bone_length_jitter < 1.0, ErrorKind::config,
          "bone length jitter must be in [0, 1)");
}

Json to_json(const CorpusSpec& s) {
  return Json{{"count", s.count},
              {"frames", s.frames},
              {"frame_rate", s.frame_rate},
              {"seed", s.seed},
              {"planar", s.planar},
              {"confidence_jitter", s.confidence_jitter},
              {"terms", s.terms},
              {"min_frequency", s.min_frequency},
              {"max_frequency", s.max_frequency},
              {"amplitude_by_depth", s.amplitude_by_depth},
              {"translation_amplitude", s.translation_amplitude},
              {"bone_length_jitter", s.bone_length_jitter}};
}

CorpusSpec corpus_spec_from_json(const Json& doc) {
  require(doc.is_object(), ErrorKind::config, "corpus spec must be a JSON object");
  CorpusSpec s;
  try {
    s.count = doc.value("count", s.count);
    s.frames = doc.value("frames", s.frames);
    s.frame_rate = doc.value("frame_rate", s.frame_rate);
    s.seed = doc.value("seed", s.seed);
    s.planar = doc.value("planar", s.planar);
    s.confidence_jitter = doc.value("confidence_jitter", s.confidence_jitter);
    s.terms = doc.value("terms", s.terms);
    s.min_frequency = doc.value("min_frequency", s.min_frequency);
    s.max_frequency = doc.value("max_frequency", s.max_frequency);
    s.amplitude_by_depth = doc.value("amplitude_by_depth", s.amplitude_by_depth);
    s.translation_amplitude = doc.value("translation_amplitude", s.translation_amplitude);
    s.bone_length_jitter = doc.value("bone_length_jitter", s.bone_length_jitter);
  } catch (const Json::exception& e) {
    fail(ErrorKind::config, std::string("corpus spec: ") + e.what());
  }
  s.validate();
  return s;
}

MotionSpec sample_motion(const CorpusSpec& spec, const KinematicTree& tree, std::size_t index) {
  spec.validate();
  Rng rng = Rng::substream(spec.seed, "motion." + std::to_string(index));
  const std::size_t n = tree.joint_count();
  std::vector<std::size_t> depth(n, 0);
  for (std::size_t j : tree.topological_order())
    if (j != tree.root()) depth[j] = depth[static_cast<std::size_t>(tree.parent(j))] + 1;

  auto track = [&](double amplitude) {
    std::vector<Sinusoid> terms(spec.terms);
    for (auto& s : terms)
      s = {amplitude * rng.uniform(0.3, 1.0) / static_cast<double>(spec.terms),
           rng.uniform(spec.min_frequency, spec.max_frequency),
           rng.uniform(0.0, 2.0 * std::numbers::pi)};
    return terms;
  };

  MotionSpec m;
  m.frames = spec.frames;
  m.frame_rate = spec.frame_rate;
  m.planar = spec.planar;
  m.confidence_jitter = spec.confidence_jitter;
  char id[32];
  std::snprintf(id, sizeof id, "seq_%04zu", index);
  m.id = id;
  m.bone_lengths.resize(n);
  m.angles.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != tree.root())
      m.bone_lengths[j] = tree.rest_length(j) * (1.0 + spec.bone_length_jitter * rng.uniform(-1.0, 1.0));
    const double amp = spec.amplitude_by_depth[std::min(depth[j], spec.amplitude_by_depth.size() - 1)];
    if (!spec.planar) {
      m.angles[j].x = track(amp);
      m.angles[j].y = track(amp);
    }
    m.angles[j].z = track(amp);
  }
  m.root_translation.x = track(spec.translation_amplitude);
  m.root_translation.y = track(spec.translation_amplitude);
  if (!spec.planar) m.root_translation.z = track(spec.translation_amplitude);
  m.seed = rng.derive_seed();

  auto scale_all = [&](auto&& f) {
    for (auto& a : m.angles)
      for (auto* axis : {&a.x, &a.y, &a.z})
        for (auto& s : *axis) f(s);
    for (auto* axis : {&m.root_translation.x, &m.root_translation.y, &m.root_translation.z})
      for (auto& s : *axis) f(s);
  };
  constexpr int kAttempts = 40;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const SkeletonSequence seq = forward_kinematics(m, tree);
    switch (check_motion(seq, m, tree)) {
      case Violation::none: return m;
      case Violation::smoothness: scale_all([](Sinusoid& s) { s.frequency *= 0.8; }); break;
      case Violation::behind_torso: scale_all([](Sinusoid& s) { s.amplitude *= 0.8; }); break;
    }
  }
  fail(ErrorKind::config, "could not sample a valid motion for sequence " + std::to_string(index));
}

std::vector<SkeletonSequence> generate_corpus(const CorpusSpec& spec, const KinematicTree& tree) {
  std::vector<SkeletonSequence> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) out.push_back(generate(sample_motion(spec, tree, i), tree));
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  for (auto s : {Split::train, Split::dev, Split::test})
    if (text == to_string(s)) return s;
  fail(ErrorKind::config, "unknown split '" + std::string(text) + "'");
}

std::vector<Split> assign_splits(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng = Rng::substream(seed, "split");
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const std::size_t dev = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(count)));
  const std::size_t test = dev;
  const std::size_t train = count - dev - test;
  std::vector<Split> out(count, Split::train);
  for (std::size_t k = train; k < count; ++k) out[order[k]] = k < train + dev ? Split::dev : Split::test;
  return out;
}

}  // namespace skeletor
