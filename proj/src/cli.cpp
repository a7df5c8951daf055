#include "skeletor/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "skeletor/datagen.hpp"
#include "skeletor/eval.hpp"
#include "skeletor/inference.hpp"
#include "skeletor/manifest.hpp"
#include "skeletor/training.hpp"
#include "skeletor/uplift.hpp"

namespace skeletor::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::parse: return 3;
    case ErrorKind::io: return 4;
    case ErrorKind::config: return 5;
    case ErrorKind::structural: return 6;
    case ErrorKind::shape: return 7;
    case ErrorKind::numerical: return 8;
    case ErrorKind::degenerate_geometry: return 9;
    case ErrorKind::invalid_state: return 10;
  }
  return 1;
}

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::stderr_color_mt("skeletor");
    const char* level = std::getenv("SKELETOR_LOG");
    l->set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
    l->set_pattern("[%l] %v");
    return l;
  }();
  return log;
}

void write_error(std::ostream& err, std::string_view category, const std::string& message) {
  err << Json{{"error", {{"category", category}, {"message", message}}}}.dump() << '\n';
}

// Shared state of one invocation: the manifest under construction and the
// clock.
struct Run {
  RunManifest manifest;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  Run(std::string command, const std::vector<std::string>& args) {
    manifest.command = std::move(command);
    manifest.argv = args;
    manifest.working_directory = fs::current_path().string();
  }
  void input(const fs::path& p) { manifest.inputs.push_back(hash_artifact(p)); }
  void output(const fs::path& p) { manifest.outputs.push_back(hash_artifact(p)); }
  void finish(const fs::path& manifest_path) {
    manifest.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(manifest_path, to_json(manifest));
  }
};

KinematicTree load_tree(const std::string& path, Run* run) {
  if (path.empty()) return upper_body_tree();
  if (run) run->input(path);
  return read_tree(path);
}

bool is_data_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return p.extension() == ".json" && name != "manifest.json" && name != "tree.json" &&
         !name.ends_with(".manifest.json");
}

struct LabelledCorpus {
  std::vector<SkeletonSequence> sequences;
  std::vector<Split> splits;
  std::vector<fs::path> files;

  std::vector<SkeletonSequence> select(Split s) const {
    std::vector<SkeletonSequence> out;
    for (std::size_t i = 0; i < sequences.size(); ++i)
      if (splits[i] == s) out.push_back(sequences[i]);
    return out;
  }
};

// Sequences in lexicographic file order. Split labels come from the
// directory's manifest when it has them; otherwise everything is train.
LabelledCorpus load_corpus(const fs::path& dir, Run* run) {
  require(fs::is_directory(dir), ErrorKind::io, "data directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_data_file(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::config, "data directory '" + dir.string() + "' has no sequences");

  std::map<std::string, Split> labels;
  if (fs::exists(dir / "manifest.json")) {
    const Json m = read_json(dir / "manifest.json");
    if (m.contains("extra") && m["extra"].contains("splits"))
      for (const auto& [id, s] : m["extra"]["splits"].items()) labels[id] = parse_split(s.get<std::string>());
  }
  LabelledCorpus corpus;
  for (const auto& f : files) {
    if (run) run->input(f);
    corpus.sequences.push_back(read_sequence(f));
    auto it = labels.find(corpus.sequences.back().id);
    corpus.splits.push_back(it == labels.end() ? Split::train : it->second);
    corpus.files.push_back(f);
  }
  return corpus;
}

std::vector<SkeletonSequence> pick(const LabelledCorpus& c, const std::string& split) {
  if (split == "all") return c.sequences;
  auto out = c.select(parse_split(split));
  require(!out.empty(), ErrorKind::config, "no sequences in split '" + split + "'");
  return out;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// ---- synth ----

struct SynthOptions {
  std::string spec, out;
  std::optional<std::size_t> count, frames;
  std::optional<std::uint64_t> seed;
  bool planar = false;
};

int run_synth(const SynthOptions& o, Run& run, std::ostream& out) {
  CorpusSpec spec;
  if (!o.spec.empty()) {
    run.input(o.spec);
    spec = corpus_spec_from_json(read_json(o.spec));
  }
  if (o.count) spec.count = *o.count;
  if (o.frames) spec.frames = *o.frames;
  if (o.seed) spec.seed = *o.seed;
  if (o.planar) spec.planar = true;
  spec.validate();
  const KinematicTree tree = upper_body_tree();
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const auto splits = assign_splits(spec.count, spec.seed);
  Json split_map = Json::object();
  for (std::size_t i = 0; i < spec.count; ++i) {
    const SkeletonSequence seq = generate(sample_motion(spec, tree, i), tree);
    const fs::path file = dir / (seq.id + ".json");
    write_sequence(file, seq);
    run.output(file);
    split_map[seq.id] = to_string(splits[i]);
    if (spec.planar) {
      const fs::path flat = dir / "2d" / (seq.id + ".json");
      fs::create_directories(flat.parent_path());
      write_sequence2d(flat, project_orthographic(seq));
      run.output(flat);
    }
  }
  write_json(dir / "tree.json", to_json(tree));
  run.output(dir / "tree.json");
  run.manifest.config = to_json(spec);
  run.manifest.seed = spec.seed;
  run.manifest.substreams = {"motion.<index>", "confidence", "split"};
  run.manifest.extra["splits"] = split_map;
  run.finish(manifest_path_for(dir, true));
  out << "wrote " << spec.count << " sequences to " << dir.string() << '\n';
  return 0;
}

// ---- corrupt ----

struct CorruptOptions {
  std::string in, out, record, tree, mode = "mask_frames", selection = "by_confidence";
  double p = 0.15, s = 0.0;
  std::uint64_t seed = 0;
};

int run_corrupt(const CorruptOptions& o, Run& run, std::ostream& out) {
  const CorruptionSpec spec{parse_corruption_mode(o.mode), o.p, o.s, o.seed, parse_selection(o.selection)};
  spec.validate();
  const KinematicTree tree = load_tree(o.tree, &run);
  run.input(o.in);
  const SkeletonSequence seq = read_sequence(o.in);
  validate(seq);
  const auto [corrupted, record] = corrupt(seq, spec, tree);
  ensure_parent(o.out);
  write_sequence(o.out, corrupted);
  const fs::path record_path = o.record.empty() ? with_suffix(o.out, ".record.json") : fs::path(o.record);
  write_json(record_path, to_json(record));
  run.output(o.out);
  run.output(record_path);
  run.manifest.config = to_json(spec);
  run.manifest.seed = o.seed;
  run.manifest.substreams = {"corruption.select", "corruption.noise"};
  run.finish(manifest_path_for(o.out, false));
  out << "corrupted " << record.corrupted_cell_count() << " cells\n";
  return 0;
}

// ---- uplift ----

struct UpliftOptions {
  std::string in, keypoints, index_map, tree, out, config;
};

int run_uplift(const UpliftOptions& o, Run& run, std::ostream& out) {
  require(o.in.empty() != o.keypoints.empty(), ErrorKind::usage,
          "uplift needs exactly one of --in or --keypoints");
  UpliftConfig cfg;
  if (!o.config.empty()) {
    run.input(o.config);
    cfg = uplift_config_from_json(read_json(o.config));
  }
  const KinematicTree tree = load_tree(o.tree, &run);
  Sequence2D seq;
  if (!o.in.empty()) {
    run.input(o.in);
    seq = read_sequence2d(o.in);
  } else {
    require(!o.index_map.empty(), ErrorKind::usage, "--keypoints needs --index-map");
    run.input(o.index_map);
    seq = read_keypoint_frames(o.keypoints, o.index_map, fs::path(o.keypoints).filename().string());
  }
  const UpliftResult result = uplift(seq, tree, cfg);
  ensure_parent(o.out);
  write_sequence(o.out, result.sequence);
  run.output(o.out);
  run.manifest.config = to_json(cfg);
  Json failures = Json::array();
  for (const Cell& c : result.failures) failures.push_back({c.frame, c.joint});
  run.manifest.extra["failures"] = failures;
  Json fallback = Json::array();
  for (std::size_t j = 0; j < result.bones.used_fallback.size(); ++j)
    if (result.bones.used_fallback[j]) fallback.push_back(j);
  run.manifest.extra["bone_fallbacks"] = fallback;
  run.finish(manifest_path_for(o.out, false));
  for (const Cell& c : result.failures)
    logger()->warn("joint {} in frame {} did not converge; placed from the previous frame", c.joint, c.frame);
  out << "lifted " << seq.frame_count() << " frames, " << result.failures.size() << " joint failures\n";
  return 0;
}

// ---- train ----

struct TrainOptions {
  std::string data, config, out, tree, checkpoint_dir;
  std::optional<std::uint64_t> seed;
  std::size_t radius = 2;
  bool skip_test = false;
};

struct ResolvedTraining {
  ModelConfig model;
  TrainConfig train;
};

ResolvedTraining resolve_training(const Json& doc) {
  ResolvedTraining r;
  if (doc.contains("model")) r.model = model_config_from_json(doc.at("model"));
  if (doc.contains("training")) {
    const Json& t = doc.at("training");
    r.train = train_config_from_json(t);
    if (!t.contains("window")) r.train.window = r.model.window;
  } else {
    r.train.window = r.model.window;
  }
  r.model.validate();
  require(r.train.window == r.model.window, ErrorKind::config,
          "training window must match the model window");
  return r;
}

int run_train(const TrainOptions& o, Run& run, std::ostream& out) {
  Json doc = Json::object();
  if (!o.config.empty()) {
    run.input(o.config);
    doc = read_json(o.config);
  }
  ResolvedTraining r = resolve_training(doc);
  if (o.seed) r.train.seed = *o.seed;
  const KinematicTree tree = load_tree(o.tree, &run);
  r.model.joints = tree.joint_count();
  const LabelledCorpus corpus = load_corpus(o.data, &run);
  const auto train_set = corpus.select(Split::train);
  const auto dev_set = corpus.select(Split::dev);
  std::optional<fs::path> ckpt_dir;
  if (!o.checkpoint_dir.empty()) ckpt_dir = o.checkpoint_dir;

  auto log = logger();
  TrainResult result = train(train_set, dev_set, r.model, tree, r.train, ckpt_dir,
                             [&](const TrainProgress& p) {
                               if (p.dev_mse) log->info("iteration {}: loss {:.6f} dev {:.6f}", p.iteration, p.loss, *p.dev_mse);
                             });
  const InferenceConfig inference{r.model.window, o.radius, 16};
  const auto test_set = corpus.select(Split::test);
  if (!o.skip_test && !test_set.empty()) {
    const CorruptionSpec protocol{CorruptionMode::mask_frames, r.train.dev_mask_p, 0.0, r.train.seed,
                                  Selection::by_confidence};
    const EvalReport rep = evaluate(result.model, test_set, protocol, inference, LossScope::all_frames);
    result.report.test = TestSummary{rep.summary.min, rep.summary.ave, rep.summary.max};
  }
  ensure_parent(o.out);
  save_model(o.out, result.model);
  const fs::path report_path = with_suffix(o.out, ".report.json");
  write_json(report_path, to_json(result.report));
  run.output(o.out);
  run.output(report_path);
  if (ckpt_dir && r.train.checkpoint_every > 0)
    for (std::size_t it = r.train.checkpoint_every; it <= r.train.iterations; it += r.train.checkpoint_every)
      run.output(*ckpt_dir / ("ckpt_" + std::to_string(it) + ".bin"));
  run.manifest.config = {{"model", to_json(r.model)}, {"training", to_json(r.train)}, {"radius", o.radius}};
  run.manifest.seed = r.train.seed;
  run.manifest.substreams = {"init", "batching", "corruption"};
  run.finish(manifest_path_for(o.out, false));
  out << "best dev MSE " << result.report.best_dev_mse << " at iteration " << result.report.best_iteration << '\n';
  return 0;
}

// ---- refine ----

struct RefineOptions {
  std::string model, in, out;
  std::size_t radius = 2;
};

int run_refine(const RefineOptions& o, Run& run, std::ostream& out) {
  run.input(o.model);
  run.input(o.in);
  const Model model = load_model(o.model);
  const InferenceConfig cfg{model.config.window, o.radius, 16};
  const SkeletonSequence refined = refine(read_sequence(o.in), model, cfg);
  ensure_parent(o.out);
  write_sequence(o.out, refined);
  run.output(o.out);
  run.manifest.config = {{"window", cfg.window}, {"radius", cfg.radius}};
  run.finish(manifest_path_for(o.out, false));
  out << "refined " << refined.frame_count() << " frames\n";
  return 0;
}

// ---- eval ----

struct EvalOptions {
  std::string model, data, out, mode = "mask_frames", selection = "by_confidence", scope = "all_frames",
                                split = "test", baseline = "model";
  double p = 0.15, s = 0.0;
  std::uint64_t seed = 0;
  std::size_t radius = 2;
};

int run_eval(const EvalOptions& o, Run& run, std::ostream& out) {
  const CorruptionSpec spec{parse_corruption_mode(o.mode), o.p, o.s, o.seed, parse_selection(o.selection)};
  const LossScope scope = parse_loss_scope(o.scope);
  const LabelledCorpus corpus = load_corpus(o.data, &run);
  const auto seqs = pick(corpus, o.split);
  EvalReport report;
  std::size_t window = 0;
  if (o.baseline == "model") {
    require(!o.model.empty(), ErrorKind::usage, "eval needs --model (or --baseline)");
    run.input(o.model);
    const Model model = load_model(o.model);
    window = model.config.window;
    report = evaluate(model, seqs, spec, InferenceConfig{window, o.radius, 16}, scope, fs::path(o.model).filename().string());
  } else if (o.baseline == "copy_previous") {
    report = evaluate(seqs, upper_body_tree(), spec, scope, copy_previous_refiner(), "copy_previous");
  } else if (o.baseline == "identity") {
    report = evaluate(seqs, upper_body_tree(), spec, scope, identity_refiner(), "identity");
  } else {
    fail(ErrorKind::usage, "unknown baseline '" + o.baseline + "'");
  }
  const Json doc = to_json(report);
  if (!o.out.empty()) {
    ensure_parent(o.out);
    write_json(o.out, doc);
    run.output(o.out);
    run.manifest.config = {{"protocol", to_json(spec)}, {"scope", o.scope}, {"split", o.split},
                           {"radius", o.radius}, {"baseline", o.baseline}};
    run.manifest.seed = o.seed;
    run.manifest.substreams = {"corruption.select", "corruption.noise"};
    run.finish(manifest_path_for(o.out, false));
  }
  char line[160];
  std::snprintf(line, sizeof line, "min %.6f  ave %.6f  max %.6f  (%zu sequences)\n", report.summary.min,
                report.summary.ave, report.summary.max, report.mse.size());
  out << line;
  return 0;
}

// ---- sweep ----

struct SweepOptions {
  std::string grid, data, out, split = "test";
  std::size_t radius = 2;
};

int run_sweep(const SweepOptions& o, Run& run, std::ostream& out) {
  run.input(o.grid);
  const SweepGrid grid = sweep_grid_from_json(read_json(o.grid));
  const LabelledCorpus corpus = load_corpus(o.data, &run);
  const auto seqs = pick(corpus, o.split);
  std::map<std::string, Model> models;
  for (const auto& [name, path] : grid.models) {
    run.input(path);
    models.emplace(name, load_model(path));
  }
  std::size_t window = models.empty() ? 32 : models.begin()->second.config.window;
  for (const auto& [name, m] : models)
    require(m.config.window == window, ErrorKind::config, "sweep models must share a window length");
  const auto reports = sweep(grid, seqs, [&](const std::string& name) -> const Model& { return models.at(name); },
                             InferenceConfig{window, o.radius, 16});
  const std::string table = format_table(grid.axis, reports);
  out << table;
  if (!o.out.empty()) {
    const fs::path json_path = with_suffix(o.out, ".json"), text_path = with_suffix(o.out, ".txt");
    ensure_parent(json_path);
    write_json(json_path, to_json(grid.axis, reports));
    write_text(text_path, table);
    run.output(json_path);
    run.output(text_path);
    run.manifest.config = read_json(o.grid);
    run.finish(with_suffix(o.out, ".manifest.json"));
  }
  return 0;
}

// ---- dump ----

struct DumpOptions {
  std::string in, out;
  bool two_d = false;
};

int run_dump(const DumpOptions& o, Run& run, std::ostream& out) {
  run.input(o.in);
  std::string csv;
  char line[192];
  if (o.two_d) {
    const Sequence2D seq = read_sequence2d(o.in);
    csv = "frame,joint,u,v,confidence\n";
    for (std::size_t t = 0; t < seq.frames.size(); ++t)
      for (std::size_t j = 0; j < seq.frames[t].size(); ++j) {
        const auto& p = seq.frames[t].joints[j];
        std::snprintf(line, sizeof line, "%zu,%zu,%.17g,%.17g,%.17g\n", t, j, p.u, p.v,
                      seq.frames[t].confidences[j]);
        csv += line;
      }
  } else {
    const SkeletonSequence seq = read_sequence(o.in);
    csv = "frame,joint,x,y,z,confidence\n";
    for (std::size_t t = 0; t < seq.frames.size(); ++t)
      for (std::size_t j = 0; j < seq.frames[t].size(); ++j) {
        const auto& p = seq.frames[t].joints[j];
        std::snprintf(line, sizeof line, "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", t, j, p.x, p.y, p.z,
                      seq.frames[t].confidences[j]);
        csv += line;
      }
  }
  if (o.out.empty()) {
    out << csv;
    return 0;
  }
  ensure_parent(o.out);
  write_text(o.out, csv);
  run.output(o.out);
  run.finish(manifest_path_for(o.out, false));
  return 0;
}

// ---- rerun ----

int run_rerun(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const RunManifest m = run_manifest_from_json(read_json(manifest_path));
  require(m.command != "rerun", ErrorKind::config, "refusing to rerun a rerun");
  const fs::path previous = fs::current_path();
  if (!m.working_directory.empty()) fs::current_path(m.working_directory);
  int code = 0;
  try {
    std::ostringstream sink;
    code = dispatch(m.argv, sink, err);
  } catch (...) {
    fs::current_path(previous);
    throw;
  }
  const auto changed = changed_outputs(m);
  fs::current_path(previous);
  require(code == 0, ErrorKind::invalid_state, "rerun of '" + m.command + "' exited with " + std::to_string(code));
  out << Json{{"command", m.command}, {"identical", changed.empty()}, {"changed", changed}}.dump() << '\n';
  require(changed.empty(), ErrorKind::invalid_state,
          std::to_string(changed.size()) + " output(s) differ from the recorded hashes");
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skeleton sequence refinement toolkit", "skeletor"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic motion corpus");
  c_synth->add_option("--spec", synth.spec, "Corpus spec JSON");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--count", synth.count, "Number of sequences");
  c_synth->add_option("--frames", synth.frames, "Frames per sequence");
  c_synth->add_option("--seed", synth.seed, "Run seed");
  c_synth->add_flag("--planar", synth.planar, "Planar motion; also writes orthographic 2D projections");

  CorruptOptions corrupt_o;
  auto* c_corrupt = app.add_subcommand("corrupt", "Mask or perturb a sequence");
  c_corrupt->add_option("--in", corrupt_o.in, "Input sequence JSON")->required();
  c_corrupt->add_option("--out", corrupt_o.out, "Output sequence JSON")->required();
  c_corrupt->add_option("--record", corrupt_o.record, "Corruption record JSON (default <out>.record.json)");
  c_corrupt->add_option("--tree", corrupt_o.tree, "Kinematic tree JSON (default: 50-joint upper body)");
  c_corrupt->add_option("--mode", corrupt_o.mode, "mask_frames | mask_joints | noise_frames | noise_joints");
  c_corrupt->add_option("--p", corrupt_o.p, "Fraction of frames or cells");
  c_corrupt->add_option("--s", corrupt_o.s, "Noise strength");
  c_corrupt->add_option("--seed", corrupt_o.seed, "Run seed");
  c_corrupt->add_option("--selection", corrupt_o.selection, "by_confidence | random");

  UpliftOptions uplift_o;
  auto* c_uplift = app.add_subcommand("uplift", "Lift a 2D sequence to 3D");
  c_uplift->add_option("--in", uplift_o.in, "2D sequence JSON");
  c_uplift->add_option("--keypoints", uplift_o.keypoints, "Directory of per-frame keypoint JSON files");
  c_uplift->add_option("--index-map", uplift_o.index_map, "Detector-to-tree joint map JSON");
  c_uplift->add_option("--tree", uplift_o.tree, "Kinematic tree JSON");
  c_uplift->add_option("--config", uplift_o.config, "Uplift config JSON");
  c_uplift->add_option("--out", uplift_o.out, "Output 3D sequence JSON")->required();

  TrainOptions train_o;
  auto* c_train = app.add_subcommand("train", "Train a refinement model");
  c_train->add_option("--data", train_o.data, "Corpus directory")->required();
  c_train->add_option("--config", train_o.config, "JSON with \"model\" and \"training\" sections");
  c_train->add_option("--out", train_o.out, "Output checkpoint")->required();
  c_train->add_option("--tree", train_o.tree, "Kinematic tree JSON");
  c_train->add_option("--checkpoint-dir", train_o.checkpoint_dir, "Directory for periodic checkpoints");
  c_train->add_option("--seed", train_o.seed, "Run seed (overrides the config)");
  c_train->add_option("--radius", train_o.radius, "Averaging radius for the test evaluation");
  c_train->add_flag("--skip-test", train_o.skip_test, "Do not evaluate the test split");

  RefineOptions refine_o;
  auto* c_refine = app.add_subcommand("refine", "Refine a sequence with a trained model");
  c_refine->add_option("--model", refine_o.model, "Checkpoint")->required();
  c_refine->add_option("--in", refine_o.in, "Input sequence JSON")->required();
  c_refine->add_option("--out", refine_o.out, "Output sequence JSON")->required();
  c_refine->add_option("--radius", refine_o.radius, "Averaging radius r (2r+1 windows)");

  EvalOptions eval_o;
  auto* c_eval = app.add_subcommand("eval", "Corrupt, refine and score a corpus split");
  c_eval->add_option("--model", eval_o.model, "Checkpoint");
  c_eval->add_option("--data", eval_o.data, "Corpus directory")->required();
  c_eval->add_option("--mode", eval_o.mode, "Corruption mode");
  c_eval->add_option("--p", eval_o.p, "Fraction of frames or cells");
  c_eval->add_option("--s", eval_o.s, "Noise strength");
  c_eval->add_option("--seed", eval_o.seed, "Protocol seed");
  c_eval->add_option("--selection", eval_o.selection, "by_confidence | random");
  c_eval->add_option("--scope", eval_o.scope, "all_frames | corrupted_only");
  c_eval->add_option("--split", eval_o.split, "train | dev | test | all");
  c_eval->add_option("--radius", eval_o.radius, "Averaging radius");
  c_eval->add_option("--baseline", eval_o.baseline, "model | copy_previous | identity");
  c_eval->add_option("--out", eval_o.out, "Report JSON");

  SweepOptions sweep_o;
  auto* c_sweep = app.add_subcommand("sweep", "Evaluate a grid of protocols or models");
  c_sweep->add_option("--grid", sweep_o.grid, "Grid JSON")->required();
  c_sweep->add_option("--data", sweep_o.data, "Corpus directory")->required();
  c_sweep->add_option("--split", sweep_o.split, "train | dev | test | all");
  c_sweep->add_option("--radius", sweep_o.radius, "Averaging radius");
  c_sweep->add_option("--out", sweep_o.out, "Output prefix (.json and .txt)");

  DumpOptions dump_o;
  auto* c_dump = app.add_subcommand("dump", "Write per-frame joints as CSV");
  c_dump->add_option("--in", dump_o.in, "Sequence JSON")->required();
  c_dump->add_option("--out", dump_o.out, "CSV path (stdout when omitted)");
  c_dump->add_flag("--2d", dump_o.two_d, "Input is a 2D sequence");

  std::string rerun_manifest;
  auto* c_rerun = app.add_subcommand("rerun", "Re-execute a run manifest and compare output hashes");
  c_rerun->add_option("--manifest", rerun_manifest, "Manifest JSON")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    // CLI11 checks required options before leftovers; name the stray
    // arguments first, since they are usually the real mistake.
    std::string message = e.what();
    if (!args.empty() && !args.front().starts_with('-') &&
        app.get_subcommand_no_throw(args.front()) == nullptr) {
      message = "unknown subcommand '" + args.front() + "'";
    } else if (const auto extra = app.remaining(true); !extra.empty()) {
      message = "unexpected argument '" + extra.front() + "'";
    }
    write_error(err, "usage", message);
    return exit_code(ErrorKind::usage);
  }

  try {
    Run run(app.get_subcommands().front()->get_name(), args);
    if (c_synth->parsed()) return run_synth(synth, run, out);
    if (c_corrupt->parsed()) return run_corrupt(corrupt_o, run, out);
    if (c_uplift->parsed()) return run_uplift(uplift_o, run, out);
    if (c_train->parsed()) return run_train(train_o, run, out);
    if (c_refine->parsed()) return run_refine(refine_o, run, out);
    if (c_eval->parsed()) return run_eval(eval_o, run, out);
    if (c_sweep->parsed()) return run_sweep(sweep_o, run, out);
    if (c_dump->parsed()) return run_dump(dump_o, run, out);
    if (c_rerun->parsed()) return run_rerun(rerun_manifest, out, err);
    fail(ErrorKind::usage, "no subcommand given");
  } catch (const Error& e) {
    write_error(err, to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    write_error(err, "io", e.what());
    return exit_code(ErrorKind::io);
  } catch (const std::exception& e) {
    write_error(err, "internal", e.what());
    return 1;
  }
}

}  // namespace skeletor::cli
