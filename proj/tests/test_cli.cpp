#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "skeletor/cli.hpp"
#include "skeletor/io.hpp"
#include "skeletor/manifest.hpp"

namespace fs = std::filesystem;
using namespace skeletor;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string error_category(const std::string& err) {
  return Json::parse(err).at("error").at("category").get<std::string>();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("skeletor_cli_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void expect_manifest_matches(const fs::path& manifest_path) {
  ASSERT_TRUE(fs::exists(manifest_path)) << manifest_path;
  const RunManifest m = run_manifest_from_json(read_json(manifest_path));
  EXPECT_FALSE(m.outputs.empty());
  for (const auto& a : m.outputs) EXPECT_EQ(sha256_file(a.path), a.sha256) << a.path;
  for (const auto& a : m.inputs) EXPECT_EQ(sha256_file(a.path), a.sha256) << a.path;
  EXPECT_TRUE(changed_outputs(m).empty());
}

}  // namespace

TEST(Manifest, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, FileHashAndJsonRoundTrip) {
  TempDir dir("manifest");
  const fs::path file = dir.path() / "a.txt";
  write_text(file, "abc");
  EXPECT_EQ(sha256_file(file), sha256_hex("abc"));

  RunManifest m;
  m.command = "synth";
  m.argv = {"synth", "--out", "x"};
  m.working_directory = dir.path().string();
  m.config = Json{{"k", 1}};
  m.seed = 42;
  m.substreams = {"a", "b"};
  m.outputs = {hash_artifact(file)};
  m.wall_time_seconds = 1.5;
  const RunManifest back = run_manifest_from_json(to_json(m));
  EXPECT_EQ(to_json(back), to_json(m));

  EXPECT_TRUE(changed_outputs(m).empty());
  write_text(file, "abd");
  EXPECT_EQ(changed_outputs(m), std::vector<std::string>{file.string()});
}

TEST(Manifest, PathConvention) {
  EXPECT_EQ(manifest_path_for("runs/corpus", true), fs::path("runs/corpus/manifest.json"));
  EXPECT_EQ(manifest_path_for("runs/out.json", false), fs::path("runs/out.json.manifest.json"));
}

TEST(Cli, HelpExitsZero) {
  const Outcome o = run({"--help"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("synth"), std::string::npos);
}

TEST(Cli, ExitCodesAreDistinct) {
  EXPECT_EQ(cli::exit_code(ErrorKind::usage), 2);
  EXPECT_EQ(cli::exit_code(ErrorKind::parse), 3);
  EXPECT_EQ(cli::exit_code(ErrorKind::io), 4);
  EXPECT_EQ(cli::exit_code(ErrorKind::config), 5);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const Outcome o = run({"bogus"});
  EXPECT_EQ(o.code, 2);
  EXPECT_EQ(error_category(o.err), "usage");
  EXPECT_NE(o.err.find("bogus"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
  const Outcome o = run({"synth", "--bogus"});
  EXPECT_EQ(o.code, 2);
  EXPECT_EQ(error_category(o.err), "usage");
  EXPECT_NE(o.err.find("--bogus"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) {
  const Outcome o = run({});
  EXPECT_EQ(o.code, 2);
  EXPECT_EQ(error_category(o.err), "usage");
}

TEST(Cli, MissingInputIsIoError) {
  TempDir dir("missing");
  const Outcome o = run({"corrupt", "--in", (dir.path() / "nope.json").string(), "--out",
                         (dir.path() / "out.json").string()});
  EXPECT_EQ(o.code, 4);
  EXPECT_EQ(error_category(o.err), "io");
}

TEST(Cli, MalformedJsonIsParseError) {
  TempDir dir("malformed");
  const fs::path bad = dir.path() / "bad.json";
  write_text(bad, "{\"frames\": [");
  const Outcome o = run({"corrupt", "--in", bad.string(), "--out", (dir.path() / "out.json").string()});
  EXPECT_EQ(o.code, 3);
  EXPECT_EQ(error_category(o.err), "parse");
}

TEST(Cli, EndToEndPipelineAndRerun) {
  TempDir dir("pipeline");
  const fs::path corpus = dir.path() / "corpus";
  const fs::path corrupted = dir.path() / "corrupted.json";
  const fs::path model = dir.path() / "model.bin";
  const fs::path refined = dir.path() / "refined.json";
  const fs::path report = dir.path() / "report.json";
  const fs::path config = dir.path() / "train.json";
  write_text(config, R"({"model": {"d_model": 16, "n_layers": 1, "heads": 2, "d_k": 8, "d_v": 8,
                                   "d_ff": 32, "window": 8},
                         "training": {"batch_size": 4, "iterations": 200, "eval_every": 100,
                                      "learning_rate": 0.001, "seed": 5}})");

  Outcome o = run({"synth", "--out", corpus.string(), "--count", "10", "--frames", "40", "--seed", "3"});
  ASSERT_EQ(o.code, 0) << o.err;
  expect_manifest_matches(corpus / "manifest.json");

  const fs::path first = corpus / "seq_0000.json";
  ASSERT_TRUE(fs::exists(first));
  o = run({"corrupt", "--in", first.string(), "--out", corrupted.string(), "--mode", "mask_frames", "--p",
           "0.2", "--seed", "9"});
  ASSERT_EQ(o.code, 0) << o.err;
  expect_manifest_matches(manifest_path_for(corrupted, false));

  o = run({"train", "--data", corpus.string(), "--config", config.string(), "--out", model.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  expect_manifest_matches(manifest_path_for(model, false));

  o = run({"refine", "--model", model.string(), "--in", corrupted.string(), "--out", refined.string(),
           "--radius", "1"});
  ASSERT_EQ(o.code, 0) << o.err;
  expect_manifest_matches(manifest_path_for(refined, false));
  const SkeletonSequence in_seq = sequence_from_json(read_json(corrupted));
  const SkeletonSequence out_seq = sequence_from_json(read_json(refined));
  EXPECT_EQ(out_seq.frame_count(), in_seq.frame_count());

  o = run({"eval", "--model", model.string(), "--data", corpus.string(), "--split", "test", "--out",
           report.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  expect_manifest_matches(manifest_path_for(report, false));

  const fs::path cwd = fs::current_path();
  for (const fs::path m : {corpus / "manifest.json", manifest_path_for(model, false),
                           manifest_path_for(report, false)}) {
    o = run({"rerun", "--manifest", m.string()});
    EXPECT_EQ(o.code, 0) << m << o.err;
    EXPECT_TRUE(Json::parse(o.out).at("identical").get<bool>());
    EXPECT_EQ(fs::current_path(), cwd);
  }
}

TEST(Cli, RerunDetectsTamperedOutput) {
  TempDir dir("tamper");
  const fs::path corpus = dir.path() / "corpus";
  ASSERT_EQ(run({"synth", "--out", corpus.string(), "--count", "3", "--frames", "20"}).code, 0);
  const fs::path manifest = corpus / "manifest.json";
  RunManifest m = run_manifest_from_json(read_json(manifest));
  m.outputs.front().sha256 = std::string(64, '0');
  write_json(manifest, to_json(m));
  const Outcome o = run({"rerun", "--manifest", manifest.string()});
  EXPECT_EQ(o.code, cli::exit_code(ErrorKind::invalid_state));
  EXPECT_EQ(error_category(o.err), "invalid_state");
}
