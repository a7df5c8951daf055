#include "skeletor/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "skeletor/error.hpp"
#include "skeletor/rng.hpp"

namespace skeletor {

Aggregate aggregate(const std::vector<double>& values) {
  require(!values.empty(), ErrorKind::config, "cannot aggregate an empty MSE list");
  Aggregate a{values.front(), 0.0, values.front()};
  double sum = 0.0;
  for (double v : values) {
    a.min = std::min(a.min, v);
    a.max = std::max(a.max, v);
    sum += v;
  }
  a.ave = sum / static_cast<double>(values.size());
  return a;
}

Json to_json(const EvalReport& r) {
  Json seqs = Json::array();
  for (std::size_t i = 0; i < r.ids.size(); ++i) seqs.push_back({{"id", r.ids[i]}, {"mse", r.mse[i]}});
  Json protocol = to_json(r.spec);
  protocol["scope"] = to_string(r.scope);
  Json doc{{"model", r.model},
           {"protocol", protocol},
           {"sequences", seqs},
           {"min", r.summary.min},
           {"ave", r.summary.ave},
           {"max", r.summary.max}};
  if (!r.label.empty()) doc["label"] = r.label;
  return doc;
}

std::uint64_t sequence_seed(std::uint64_t protocol_seed, const std::string& id) {
  return mix_seed(protocol_seed, id);
}

EvalReport evaluate(const std::vector<SkeletonSequence>& corpus, const KinematicTree& tree,
                    const CorruptionSpec& spec, LossScope scope, const Refiner& refiner,
                    const std::string& model_name) {
  require(!corpus.empty(), ErrorKind::config, "evaluation corpus is empty");
  spec.validate();
  EvalReport report;
  report.spec = spec;
  report.scope = scope;
  report.model = model_name;
  for (const auto& seq : corpus) {
    validate(seq);
    const SkeletonSequence clean = normalize(seq, tree).first;
    CorruptionSpec local = spec;
    local.seed = sequence_seed(spec.seed, seq.id);
    const auto [corrupted, record] = corrupt(clean, local, tree);
    const SkeletonSequence refined = refiner(corrupted, record);
    require(refined.frames.size() == clean.frames.size(), ErrorKind::invalid_state,
            "refiner changed the length of '" + seq.id + "'");
    report.ids.push_back(seq.id);
    report.mse.push_back(mse_loss(encode_targets(refined), encode_targets(clean), record, scope));
  }
  report.summary = aggregate(report.mse);
  return report;
}

Refiner model_refiner(const Model& model, const InferenceConfig& inference) {
  return [&model, inference](const SkeletonSequence& corrupted, const CorruptionRecord&) {
    return refine_normalized(corrupted, model_predictor(model), model.config.use_confidence, inference);
  };
}

Refiner identity_refiner() {
  return [](const SkeletonSequence& corrupted, const CorruptionRecord&) { return corrupted; };
}

EvalReport evaluate(const Model& model, const std::vector<SkeletonSequence>& corpus,
                    const CorruptionSpec& spec, const InferenceConfig& inference, LossScope scope,
                    const std::string& model_name) {
  return evaluate(corpus, model.tree, spec, scope, model_refiner(model, inference), model_name);
}

SkeletonSequence copy_previous(const SkeletonSequence& corrupted, const CorruptionRecord& record) {
  const std::size_t frames = corrupted.frames.size(), joints = corrupted.joint_count();
  require(record.frame_count == frames && record.joint_count == joints, ErrorKind::structural,
          "corruption record does not match the sequence");
  const auto mask = record.cell_mask();
  SkeletonSequence out = corrupted;
  for (std::size_t j = 0; j < joints; ++j) {
    std::ptrdiff_t last = -1;
    for (std::size_t t = 0; t < frames; ++t) {
      if (!mask[t * joints + j]) {
        last = static_cast<std::ptrdiff_t>(t);
        continue;
      }
      if (last >= 0) {
        out.frames[t].joints[j] = corrupted.frames[static_cast<std::size_t>(last)].joints[j];
        continue;
      }
      for (std::size_t u = t + 1; u < frames; ++u)
        if (!mask[u * joints + j]) {
          out.frames[t].joints[j] = corrupted.frames[u].joints[j];
          break;
        }
    }
  }
  return out;
}

Refiner copy_previous_refiner() {
  return [](const SkeletonSequence& corrupted, const CorruptionRecord& record) {
    return copy_previous(corrupted, record);
  };
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::noise_s: return "noise_s";
    case SweepAxis::train_mask_p: return "train_mask_p";
    case SweepAxis::joint_vs_frame: return "joint_vs_frame";
  }
  return "noise_s";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (auto a : {SweepAxis::noise_s, SweepAxis::train_mask_p, SweepAxis::joint_vs_frame})
    if (text == to_string(a)) return a;
  fail(ErrorKind::config, "unknown sweep axis '" + std::string(text) + "'");
}

namespace {

std::string number_label(const char* prefix, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%g", prefix, v);
  return buf;
}

}  // namespace

SweepGrid sweep_grid_from_json(const Json& doc) {
  require(doc.is_object(), ErrorKind::config, "sweep grid must be a JSON object");
  SweepGrid grid;
  try {
    grid.axis = parse_sweep_axis(doc.at("axis").get<std::string>());
    grid.scope = parse_loss_scope(doc.value("scope", std::string("all_frames")));
    const std::uint64_t seed = doc.value("seed", std::uint64_t{0});
    const double p = doc.value("p", 0.15);
    if (doc.contains("model")) grid.models.emplace_back("model", doc.at("model").get<std::string>());
    if (doc.contains("models"))
      for (const auto& [name, path] : doc.at("models").items())
        grid.models.emplace_back(name, path.get<std::string>());

    if (doc.contains("points")) {
      for (const auto& pt : doc.at("points")) {
        SweepPoint point;
        point.label = pt.value("label", std::string());
        point.model = pt.value("model", std::string("model"));
        point.spec = corruption_spec_from_json(pt.at("spec"));
        grid.points.push_back(std::move(point));
      }
    } else if (grid.axis == SweepAxis::noise_s) {
      const auto mode = parse_corruption_mode(doc.value("mode", std::string("noise_frames")));
      for (double s : doc.at("values").get<std::vector<double>>())
        grid.points.push_back({number_label("s", s), "model", {mode, p, s, seed, Selection::by_confidence}});
    } else if (grid.axis == SweepAxis::train_mask_p) {
      for (const auto& [name, path] : grid.models)
        grid.points.push_back({name, name, {CorruptionMode::mask_frames, p, 0.0, seed, Selection::by_confidence}});
    } else {
      const double s = doc.value("s", 0.0);
      const bool noise = s > 0.0;
      grid.points.push_back({"frame", "model",
                             {noise ? CorruptionMode::noise_frames : CorruptionMode::mask_frames, p, s,
                              seed, Selection::by_confidence}});
      grid.points.push_back({"joint", "model",
                             {noise ? CorruptionMode::noise_joints : CorruptionMode::mask_joints, p, s,
                              seed, Selection::by_confidence}});
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::config, std::string("sweep grid: ") + e.what());
  }
  for (const auto& pt : grid.points) {
    pt.spec.validate();
    const bool known = std::any_of(grid.models.begin(), grid.models.end(),
                                   [&](const auto& m) { return m.first == pt.model; });
    require(known, ErrorKind::config, "sweep point '" + pt.label + "' names unknown model '" + pt.model + "'");
  }
  return grid;
}

std::vector<EvalReport> sweep(const SweepGrid& grid, const std::vector<SkeletonSequence>& corpus,
                              const ModelLookup& lookup, const InferenceConfig& inference) {
  std::vector<EvalReport> reports;
  for (const auto& pt : grid.points) {
    EvalReport r = evaluate(lookup(pt.model), corpus, pt.spec, inference, grid.scope, pt.model);
    r.label = pt.label;
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string format_table(SweepAxis axis, const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-14s %6s %6s %10s %10s %10s\n", to_string(axis).data(),
                "mode", "p", "s", "min", "ave", "max");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-16s %-14s %6.3f %6.3f %10.5f %10.5f %10.5f\n",
                  r.label.c_str(), to_string(r.spec.mode).data(), r.spec.p, r.spec.s, r.summary.min,
                  r.summary.ave, r.summary.max);
    out << line;
  }
  return out.str();
}

Json to_json(SweepAxis axis, const std::vector<EvalReport>& reports) {
  Json rows = Json::array();
  for (const auto& r : reports) rows.push_back(to_json(r));
  return Json{{"axis", to_string(axis)}, {"reports", rows}};
}

}  // namespace skeletor
