#include "skeletor/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "skeletor/error.hpp"

namespace skeletor {

std::string_view to_string(CorruptionMode mode) {
  switch (mode) {
    case CorruptionMode::mask_frames: return "mask_frames";
    case CorruptionMode::mask_joints: return "mask_joints";
    case CorruptionMode::noise_frames: return "noise_frames";
    case CorruptionMode::noise_joints: return "noise_joints";
  }
  return "mask_frames";
}

std::string_view to_string(Selection selection) {
  return selection == Selection::random ? "random" : "by_confidence";
}

CorruptionMode parse_corruption_mode(std::string_view text) {
  for (auto m : {CorruptionMode::mask_frames, CorruptionMode::mask_joints,
                 CorruptionMode::noise_frames, CorruptionMode::noise_joints})
    if (text == to_string(m)) return m;
  fail(ErrorKind::config, "unknown corruption mode '" + std::string(text) + "'");
}

Selection parse_selection(std::string_view text) {
  if (text == "by_confidence" || text == "confidence") return Selection::by_confidence;
  if (text == "random") return Selection::random;
  fail(ErrorKind::config, "unknown selection '" + std::string(text) + "'");
}

void CorruptionSpec::validate() const {
  require(p >= 0.0 && p <= 1.0, ErrorKind::config, "corruption fraction p must be in [0, 1]");
  require(std::isfinite(s), ErrorKind::config, "noise strength must be finite");
  if (!is_mask()) require(s >= 0.0, ErrorKind::config, "noise strength s must be >= 0");
}

Json to_json(const CorruptionSpec& spec) {
  return Json{{"mode", to_string(spec.mode)},
              {"p", spec.p},
              {"s", spec.s},
              {"seed", spec.seed},
              {"selection", to_string(spec.selection)}};
}

CorruptionSpec corruption_spec_from_json(const Json& doc) {
  CorruptionSpec spec;
  try {
    spec.mode = parse_corruption_mode(doc.value("mode", std::string("mask_frames")));
    spec.p = doc.value("p", spec.p);
    spec.s = doc.value("s", spec.s);
    spec.seed = doc.value("seed", spec.seed);
    spec.selection = parse_selection(doc.value("selection", std::string("by_confidence")));
  } catch (const Json::exception& e) {
    fail(ErrorKind::parse, std::string("corruption spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Records

std::vector<std::uint8_t> CorruptionRecord::cell_mask() const {
  std::vector<std::uint8_t> mask(frame_count * joint_count, 0);
  for (std::size_t t : masked_frames)
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(t * joint_count), joint_count, 1);
  for (const Cell& c : masked_cells) mask[c.frame * joint_count + c.joint] = 1;
  for (const NoiseOffset& n : noise) mask[n.cell.frame * joint_count + n.cell.joint] = 1;
  return mask;
}

std::size_t CorruptionRecord::corrupted_cell_count() const {
  const auto mask = cell_mask();
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

Json to_json(const CorruptionRecord& r) {
  Json cells = Json::array();
  for (const Cell& c : r.masked_cells) cells.push_back({c.frame, c.joint});
  Json noise = Json::array();
  for (const NoiseOffset& n : r.noise)
    noise.push_back({{"frame", n.cell.frame},
                     {"joint", n.cell.joint},
                     {"offset", {n.offset.x, n.offset.y, n.offset.z}}});
  return Json{{"spec", to_json(r.spec)},
              {"frame_count", r.frame_count},
              {"joint_count", r.joint_count},
              {"masked_frames", r.masked_frames},
              {"masked_cells", std::move(cells)},
              {"noisy_frames", r.noisy_frames},
              {"noise", std::move(noise)}};
}

CorruptionRecord corruption_record_from_json(const Json& doc) {
  try {
    CorruptionRecord r;
    r.spec = corruption_spec_from_json(doc.at("spec"));
    r.frame_count = doc.at("frame_count").get<std::size_t>();
    r.joint_count = doc.at("joint_count").get<std::size_t>();
    r.masked_frames = doc.at("masked_frames").get<std::vector<std::size_t>>();
    for (const Json& c : doc.at("masked_cells"))
      r.masked_cells.push_back({c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>()});
    r.noisy_frames = doc.at("noisy_frames").get<std::vector<std::size_t>>();
    for (const Json& n : doc.at("noise")) {
      const Json& o = n.at("offset");
      r.noise.push_back({{n.at("frame").get<std::size_t>(), n.at("joint").get<std::size_t>()},
                         {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()}});
    }
    auto in_bounds = [&](std::size_t t, std::size_t j) { return t < r.frame_count && j < r.joint_count; };
    for (std::size_t t : r.masked_frames) require(in_bounds(t, 0), ErrorKind::parse, "record frame out of range");
    for (const Cell& c : r.masked_cells)
      require(in_bounds(c.frame, c.joint), ErrorKind::parse, "record cell out of range");
    for (const NoiseOffset& n : r.noise)
      require(in_bounds(n.cell.frame, n.cell.joint), ErrorKind::parse, "record cell out of range");
    return r;
  } catch (const Json::exception& e) {
    fail(ErrorKind::parse, std::string("corruption record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Selection

std::size_t target_count(double p, std::size_t total) {
  require(p >= 0.0 && p <= 1.0, ErrorKind::config, "fraction must be in [0, 1]");
  // The small slack keeps exact halves such as 0.35 * 10 from rounding down
  // through representation error.
  const double exact = p * static_cast<double>(total);
  const auto count = static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9));
  return std::min(count, total);
}

namespace {

template <typename Score>
std::vector<std::size_t> top_by_score(std::size_t total, std::size_t count, Score score) {
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> sample_without_replacement(std::size_t total, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool(total);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

CorruptionRecord empty_record(const SkeletonSequence& seq, const CorruptionSpec& spec) {
  CorruptionRecord r;
  r.spec = spec;
  r.frame_count = seq.frame_count();
  r.joint_count = seq.joint_count();
  return r;
}

void check_mode(const CorruptionSpec& spec, std::initializer_list<CorruptionMode> allowed) {
  spec.validate();
  require(std::find(allowed.begin(), allowed.end(), spec.mode) != allowed.end(), ErrorKind::config,
          "corruption mode " + std::string(to_string(spec.mode)) + " not valid for this operation");
}

}  // namespace

std::vector<std::size_t> select_frames_by_confidence(const SkeletonSequence& seq, double p) {
  const std::size_t count = target_count(p, seq.frame_count());
  std::vector<double> score(seq.frame_count());
  for (std::size_t t = 0; t < score.size(); ++t) score[t] = seq.frames[t].mean_confidence();
  return top_by_score(score.size(), count, [&](std::size_t t) { return score[t]; });
}

std::vector<std::size_t> select_frames(const SkeletonSequence& seq, double p, Selection selection,
                                       Rng& rng) {
  if (selection == Selection::by_confidence) return select_frames_by_confidence(seq, p);
  return sample_without_replacement(seq.frame_count(), target_count(p, seq.frame_count()), rng);
}

std::vector<Cell> select_cells(const SkeletonSequence& seq, double p, Selection selection, Rng& rng) {
  const std::size_t n = seq.joint_count();
  const std::size_t total = seq.frame_count() * n;
  const std::size_t count = target_count(p, total);
  std::vector<std::size_t> flat;
  if (selection == Selection::by_confidence) {
    flat = top_by_score(total, count,
                        [&](std::size_t k) { return seq.frames[k / n].confidences[k % n]; });
  } else {
    flat = sample_without_replacement(total, count, rng);
  }
  std::vector<Cell> cells;
  cells.reserve(flat.size());
  for (std::size_t k : flat) cells.push_back({k / n, k % n});
  return cells;
}

// ---------------------------------------------------------------------------
// Protocols

Corrupted mask_frames(const SkeletonSequence& seq, const CorruptionSpec& spec) {
  check_mode(spec, {CorruptionMode::mask_frames});
  Rng rng = Rng::substream(spec.seed, "corruption.select");
  CorruptionRecord record = empty_record(seq, spec);
  record.masked_frames = select_frames(seq, spec.p, spec.selection, rng);
  SkeletonSequence out = seq;
  for (std::size_t t : record.masked_frames) {
    Skeleton& f = out.frames[t];
    std::fill(f.joints.begin(), f.joints.end(), Joint3D{});
    std::fill(f.confidences.begin(), f.confidences.end(), 0.0);
  }
  return {std::move(out), std::move(record)};
}

Corrupted mask_joints(const SkeletonSequence& seq, const CorruptionSpec& spec) {
  check_mode(spec, {CorruptionMode::mask_joints});
  Rng rng = Rng::substream(spec.seed, "corruption.select");
  CorruptionRecord record = empty_record(seq, spec);
  record.masked_cells = select_cells(seq, spec.p, spec.selection, rng);
  SkeletonSequence out = seq;
  for (const Cell& c : record.masked_cells) {
    out.frames[c.frame].joints[c.joint] = Joint3D{};
    out.frames[c.frame].confidences[c.joint] = 0.0;
  }
  return {std::move(out), std::move(record)};
}

Corrupted add_joint_noise(const SkeletonSequence& seq, const CorruptionSpec& spec,
                          const KinematicTree& tree) {
  return add_joint_noise(seq, spec, limb_lengths(seq, tree), tree.root());
}

Corrupted add_joint_noise(const SkeletonSequence& seq, const CorruptionSpec& spec,
                          const std::vector<double>& limbs, std::size_t root) {
  check_mode(spec, {CorruptionMode::noise_frames, CorruptionMode::noise_joints});
  require(limbs.size() == seq.joint_count(), ErrorKind::structural,
          "limb list does not match the sequence joint count");
  double mean = 0.0;
  std::size_t observed = 0;
  for (std::size_t j = 0; j < limbs.size(); ++j)
    if (j != root && limbs[j] > 0.0) {
      mean += limbs[j];
      ++observed;
    }
  mean = observed ? mean / static_cast<double>(observed) : 0.0;
  std::vector<double> bound(limbs.size());
  for (std::size_t j = 0; j < limbs.size(); ++j)
    bound[j] = spec.s * ((j == root || limbs[j] <= 0.0) ? mean : limbs[j]);

  Rng select_rng = Rng::substream(spec.seed, "corruption.select");
  Rng noise_rng = Rng::substream(spec.seed, "corruption.noise");
  CorruptionRecord record = empty_record(seq, spec);
  std::vector<Cell> cells;
  if (spec.mode == CorruptionMode::noise_frames) {
    record.noisy_frames = select_frames(seq, spec.p, spec.selection, select_rng);
    for (std::size_t t : record.noisy_frames)
      for (std::size_t j = 0; j < seq.joint_count(); ++j) cells.push_back({t, j});
  } else {
    cells = select_cells(seq, spec.p, spec.selection, select_rng);
  }

  SkeletonSequence out = seq;
  for (const Cell& c : cells) {
    const double b = bound[c.joint];
    Joint3D offset{noise_rng.uniform(-b, b), noise_rng.uniform(-b, b), noise_rng.uniform(-b, b)};
    out.frames[c.frame].joints[c.joint] += offset;
    record.noise.push_back({c, offset});
  }
  return {std::move(out), std::move(record)};
}

Corrupted corrupt(const SkeletonSequence& seq, const CorruptionSpec& spec,
                  const KinematicTree& tree) {
  switch (spec.mode) {
    case CorruptionMode::mask_frames: return mask_frames(seq, spec);
    case CorruptionMode::mask_joints: return mask_joints(seq, spec);
    case CorruptionMode::noise_frames:
    case CorruptionMode::noise_joints: return add_joint_noise(seq, spec, tree);
  }
  fail(ErrorKind::config, "unknown corruption mode");
}

}  // namespace skeletor
