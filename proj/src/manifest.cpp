#include "skeletor/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include "skeletor/error.hpp"

namespace skeletor {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    require(ctx_ && EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) == 1, ErrorKind::invalid_state,
            "could not initialise SHA-256");
  }
  void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx_.get(), data, size); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest.data(), &len);
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", digest[i]);
      out += buf;
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

Json to_json(const std::vector<Artifact>& artifacts) {
  Json out = Json::array();
  for (const auto& a : artifacts) out.push_back({{"path", a.path}, {"sha256", a.sha256}});
  return out;
}

std::vector<Artifact> artifacts_from_json(const Json& doc) {
  std::vector<Artifact> out;
  for (const auto& a : doc) out.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path.string() + "' for hashing");
  Sha256 h;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

Artifact hash_artifact(const std::filesystem::path& path) { return {path.string(), sha256_file(path)}; }

Json to_json(const RunManifest& m) {
  return Json{{"command", m.command},
              {"argv", m.argv},
              {"working_directory", m.working_directory},
              {"config", m.config},
              {"seed", m.seed},
              {"substreams", m.substreams},
              {"inputs", to_json(m.inputs)},
              {"outputs", to_json(m.outputs)},
              {"wall_time_seconds", m.wall_time_seconds},
              {"extra", m.extra}};
}

RunManifest run_manifest_from_json(const Json& doc) {
  RunManifest m;
  try {
    m.command = doc.at("command").get<std::string>();
    m.argv = doc.at("argv").get<std::vector<std::string>>();
    m.working_directory = doc.value("working_directory", std::string());
    m.config = doc.value("config", Json::object());
    m.seed = doc.value("seed", std::uint64_t{0});
    m.substreams = doc.value("substreams", std::vector<std::string>{});
    m.inputs = artifacts_from_json(doc.value("inputs", Json::array()));
    m.outputs = artifacts_from_json(doc.value("outputs", Json::array()));
    m.wall_time_seconds = doc.value("wall_time_seconds", 0.0);
    m.extra = doc.value("extra", Json::object());
  } catch (const Json::exception& e) {
    fail(ErrorKind::parse, std::string("run manifest: ") + e.what());
  }
  return m;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output, bool is_directory) {
  if (is_directory) return output / "manifest.json";
  std::filesystem::path p = output;
  p += ".manifest.json";
  return p;
}

std::vector<std::string> changed_outputs(const RunManifest& manifest) {
  std::vector<std::string> changed;
  std::filesystem::path base = manifest.working_directory;
  for (const auto& a : manifest.outputs) {
    std::filesystem::path p = a.path;
    if (p.is_relative() && !base.empty()) p = base / p;
    if (!std::filesystem::exists(p) || sha256_file(p) != a.sha256) changed.push_back(a.path);
  }
  return changed;
}

}  // namespace skeletor
