#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "skeletor/io.hpp"

namespace skeletor {

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

struct Artifact {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // arguments after the program name
  std::string working_directory;
  Json config;  // fully resolved configuration
  std::uint64_t seed = 0;
  std::vector<std::string> substreams;
  std::vector<Artifact> inputs;
  std::vector<Artifact> outputs;
  double wall_time_seconds = 0.0;
  Json extra = Json::object();  // command-specific fields, e.g. split assignment
};

Json to_json(const RunManifest& manifest);
RunManifest run_manifest_from_json(const Json& doc);

Artifact hash_artifact(const std::filesystem::path& path);

// Where a command's manifest goes: <dir>/manifest.json for directory outputs,
// <file>.manifest.json otherwise.
std::filesystem::path manifest_path_for(const std::filesystem::path& output, bool is_directory);

// Recomputes every output hash; returns the paths whose bytes differ.
std::vector<std::string> changed_outputs(const RunManifest& manifest);

}  // namespace skeletor
