#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "skeletor/skeleton.hpp"

namespace skeletor {

using Json = nlohmann::json;

// Sequence documents:
//   {"id": str, "frame_rate": number|null,
//    "joints": [[[x,y,z], ...N] ...T], "confidence": [[c, ...N] ...T]}
// 2D documents use [u,v] pairs. A missing "confidence" means all ones.
Json to_json(const SkeletonSequence& seq);
SkeletonSequence sequence_from_json(const Json& doc);
Json to_json(const Sequence2D& seq);
Sequence2D sequence2d_from_json(const Json& doc);

// Tree documents: {"parents": [...], "root": k, "rest_offsets": [[x,y,z]...]}
// where the root's parent is -1 and rest_offsets is optional. Other keys
// (e.g. "names") are ignored.
Json to_json(const KinematicTree& tree);
KinematicTree tree_from_json(const Json& doc);

Json read_json(const std::filesystem::path& path);
// Compact dump plus trailing newline; byte-stable for equal documents.
void write_json(const std::filesystem::path& path, const Json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

SkeletonSequence read_sequence(const std::filesystem::path& path);
void write_sequence(const std::filesystem::path& path, const SkeletonSequence& seq);
Sequence2D read_sequence2d(const std::filesystem::path& path);
void write_sequence2d(const std::filesystem::path& path, const Sequence2D& seq);
KinematicTree read_tree(const std::filesystem::path& path);

// Keypoint-detector ingestion. Each frame is one JSON file holding flat
// [x, y, confidence, ...] arrays, either at top level or inside the first
// entry of "people" (OpenPose layout). The index map assigns every tree
// joint a source: {"joints": [{"array": "pose_keypoints_2d", "index": 0}, ...]}.
// Frame files are taken in lexicographic filename order.
Sequence2D read_keypoint_frames(const std::filesystem::path& directory,
                                const std::filesystem::path& index_map,
                                const std::string& id = "keypoints");

}  // namespace skeletor
