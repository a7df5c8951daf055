#include "skeletor/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "skeletor/error.hpp"

namespace skeletor {

namespace {

template <typename F>
auto parse_guard(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    fail(ErrorKind::parse, what + ": " + e.what());
  }
}

std::optional<double> read_frame_rate(const Json& doc) {
  if (!doc.contains("frame_rate") || doc.at("frame_rate").is_null()) return std::nullopt;
  return doc.at("frame_rate").get<double>();
}

std::vector<std::vector<double>> read_confidences(const Json& doc, std::size_t frames,
                                                  std::size_t joints) {
  std::vector<std::vector<double>> out(frames, std::vector<double>(joints, 1.0));
  if (!doc.contains("confidence")) return out;
  const Json& c = doc.at("confidence");
  require(c.is_array() && c.size() == frames, ErrorKind::parse,
          "\"confidence\" must have one entry per frame");
  for (std::size_t t = 0; t < frames; ++t) {
    require(c[t].is_array() && c[t].size() == joints, ErrorKind::parse,
            "confidence row " + std::to_string(t) + " has the wrong length");
    for (std::size_t j = 0; j < joints; ++j) out[t][j] = c[t][j].get<double>();
  }
  return out;
}

}  // namespace

Json to_json(const SkeletonSequence& seq) {
  Json joints = Json::array();
  Json conf = Json::array();
  for (const Skeleton& f : seq.frames) {
    Json row = Json::array();
    for (const Joint3D& j : f.joints) row.push_back({j.x, j.y, j.z});
    joints.push_back(std::move(row));
    conf.push_back(f.confidences);
  }
  Json doc;
  doc["id"] = seq.id;
  doc["frame_rate"] = seq.frame_rate ? Json(*seq.frame_rate) : Json(nullptr);
  doc["joints"] = std::move(joints);
  doc["confidence"] = std::move(conf);
  return doc;
}

SkeletonSequence sequence_from_json(const Json& doc) {
  return parse_guard("sequence document", [&] {
    SkeletonSequence seq;
    seq.id = doc.value("id", std::string{});
    seq.frame_rate = read_frame_rate(doc);
    const Json& joints = doc.at("joints");
    require(joints.is_array() && !joints.empty(), ErrorKind::parse, "\"joints\" must be a non-empty array");
    const std::size_t n = joints[0].size();
    const auto conf = read_confidences(doc, joints.size(), n);
    for (std::size_t t = 0; t < joints.size(); ++t) {
      Skeleton f;
      require(joints[t].size() == n, ErrorKind::parse, "frames disagree on joint count");
      for (const Json& j : joints[t]) {
        require(j.is_array() && j.size() == 3, ErrorKind::parse, "joint must be [x,y,z]");
        f.joints.push_back({j[0].get<double>(), j[1].get<double>(), j[2].get<double>()});
      }
      f.confidences = conf[t];
      seq.frames.push_back(std::move(f));
    }
    validate(seq);
    return seq;
  });
}

Json to_json(const Sequence2D& seq) {
  Json joints = Json::array();
  Json conf = Json::array();
  for (const Skeleton2D& f : seq.frames) {
    Json row = Json::array();
    for (const Joint2D& j : f.joints) row.push_back({j.u, j.v});
    joints.push_back(std::move(row));
    conf.push_back(f.confidences);
  }
  Json doc;
  doc["id"] = seq.id;
  doc["frame_rate"] = seq.frame_rate ? Json(*seq.frame_rate) : Json(nullptr);
  doc["joints"] = std::move(joints);
  doc["confidence"] = std::move(conf);
  return doc;
}

Sequence2D sequence2d_from_json(const Json& doc) {
  return parse_guard("2D sequence document", [&] {
    Sequence2D seq;
    seq.id = doc.value("id", std::string{});
    seq.frame_rate = read_frame_rate(doc);
    const Json& joints = doc.at("joints");
    require(joints.is_array() && !joints.empty(), ErrorKind::parse, "\"joints\" must be a non-empty array");
    const std::size_t n = joints[0].size();
    const auto conf = read_confidences(doc, joints.size(), n);
    for (std::size_t t = 0; t < joints.size(); ++t) {
      Skeleton2D f;
      require(joints[t].size() == n, ErrorKind::parse, "frames disagree on joint count");
      for (const Json& j : joints[t]) {
        require(j.is_array() && j.size() == 2, ErrorKind::parse, "2D joint must be [u,v]");
        f.joints.push_back({j[0].get<double>(), j[1].get<double>()});
      }
      f.confidences = conf[t];
      seq.frames.push_back(std::move(f));
    }
    validate(seq);
    return seq;
  });
}

Json to_json(const KinematicTree& tree) {
  Json doc;
  doc["parents"] = tree.parents();
  doc["root"] = tree.root();
  if (tree.has_rest_pose()) {
    Json offsets = Json::array();
    for (const Joint3D& o : tree.rest_offsets()) offsets.push_back({o.x, o.y, o.z});
    doc["rest_offsets"] = std::move(offsets);
  }
  return doc;
}

KinematicTree tree_from_json(const Json& doc) {
  return parse_guard("tree document", [&] {
    auto parents = doc.at("parents").get<std::vector<int>>();
    const auto root = doc.at("root").get<std::size_t>();
    std::vector<Joint3D> offsets;
    if (doc.contains("rest_offsets"))
      for (const Json& o : doc.at("rest_offsets"))
        offsets.push_back({o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()});
    return KinematicTree(std::move(parents), root, std::move(offsets));
  });
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << text;
  require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  write_text(path, doc.dump() + "\n");
}

SkeletonSequence read_sequence(const std::filesystem::path& path) {
  return sequence_from_json(read_json(path));
}

void write_sequence(const std::filesystem::path& path, const SkeletonSequence& seq) {
  write_json(path, to_json(seq));
}

Sequence2D read_sequence2d(const std::filesystem::path& path) {
  return sequence2d_from_json(read_json(path));
}

void write_sequence2d(const std::filesystem::path& path, const Sequence2D& seq) {
  write_json(path, to_json(seq));
}

KinematicTree read_tree(const std::filesystem::path& path) { return tree_from_json(read_json(path)); }

Sequence2D read_keypoint_frames(const std::filesystem::path& directory,
                                const std::filesystem::path& index_map,
                                const std::string& id) {
  struct Source {
    std::string array;
    std::size_t index;
  };
  const Json map_doc = read_json(index_map);
  std::vector<Source> sources = parse_guard("index map", [&] {
    std::vector<Source> s;
    for (const Json& e : map_doc.at("joints"))
      s.push_back({e.at("array").get<std::string>(), e.at("index").get<std::size_t>()});
    return s;
  });
  require(!sources.empty(), ErrorKind::parse, "index map lists no joints");

  require(std::filesystem::is_directory(directory), ErrorKind::io,
          directory.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::io, "no keypoint frames in " + directory.string());

  Sequence2D seq;
  seq.id = id;
  for (const auto& file : files) {
    const Json doc = read_json(file);
    Skeleton2D frame;
    frame.joints.resize(sources.size());
    frame.confidences.assign(sources.size(), 0.0);
    const Json* person = &doc;
    if (doc.contains("people")) {
      const Json& people = doc.at("people");
      person = people.empty() ? nullptr : &people[0];
    }
    if (person) {
      parse_guard(file.string(), [&] {
        for (std::size_t j = 0; j < sources.size(); ++j) {
          if (!person->contains(sources[j].array)) continue;
          const Json& flat = person->at(sources[j].array);
          const std::size_t base = 3 * sources[j].index;
          if (base + 2 >= flat.size()) continue;
          frame.joints[j] = {flat[base].get<double>(), flat[base + 1].get<double>()};
          frame.confidences[j] = std::clamp(flat[base + 2].get<double>(), 0.0, 1.0);
        }
        return 0;
      });
    }
    seq.frames.push_back(std::move(frame));
  }
  validate(seq);
  return seq;
}

}  // namespace skeletor
