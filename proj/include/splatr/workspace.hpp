#pragma once

// Episode workspace on disk: dataset/, splat.ckpt, nodes/, embeddings/, report.json and a
// versioned manifest listing every file with its hash.

#include "splatr/io.hpp"
#include "splatr/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace splatr::workspace {

namespace fs = std::filesystem;

constexpr int kVersion = 1;

struct Layout {
  fs::path root;

  fs::path dataset() const { return root / "dataset"; }
  fs::path checkpoint() const { return root / "splat.ckpt"; }
  fs::path nodes() const { return root / "nodes"; }
  fs::path embeddings() const { return root / "embeddings"; }
  fs::path report() const { return root / "report.json"; }
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path config() const { return root / "config.json"; }
  fs::path scene() const { return root / "scene.json"; }
  fs::path shuffle() const { return root / "shuffle.json"; }
  fs::path training() const { return root / "training.json"; }
  fs::path episode() const { return root / "episode.json"; }
};

// Dataset directory: rgb/frame_NNNNNN.png (8-bit), depth/frame_NNNNNN.png (16-bit mm) and
// poses.jsonl. Frames are numbered by their position in the list.
void write_dataset(const fs::path& dir, const std::vector<pipeline::RecordedFrame>& frames);
/// Reads every pose record and its images. The agent pose of an imported frame is left default.
std::vector<pipeline::RecordedFrame> read_dataset(const fs::path& dir);

// Object nodes: nodes.json plus, per node, node_NNN.png (best view), node_NNN_crop.png and
// node_NNN_mask.png (refined mask, when present). Masks are stored as black/white RGB PNGs.
nlohmann::ordered_json nodes_to_json(const std::vector<objects::ObjectNode>& nodes);
/// Restores everything stored in nodes.json; images and masks are left empty.
std::vector<objects::ObjectNode> nodes_from_json(const nlohmann::ordered_json& j);
void write_nodes(const fs::path& dir, const std::vector<objects::ObjectNode>& nodes);
std::vector<objects::ObjectNode> read_nodes(const fs::path& dir);

struct Manifest {
  int version = kVersion;
  std::string status = "ok";  // "ok" or "warning"
  std::vector<std::string> warnings;
  std::map<std::string, std::string> files;  // path relative to the workspace root -> hash

  /// Hashes `path` (absolute or relative to root) and records it.
  void add(const fs::path& root, const fs::path& path);
  void warn(std::string message);
};

nlohmann::ordered_json to_json(const Manifest& m);
/// Throws FormatError for a missing or unsupported version.
Manifest manifest_from_json(const nlohmann::ordered_json& j);
void write_manifest(const Layout& ws, const Manifest& m);
/// An absent manifest reads as an empty one.
Manifest read_manifest(const Layout& ws);

void write_json(const fs::path& path, const nlohmann::ordered_json& j);
nlohmann::ordered_json read_json(const fs::path& path);

}  // namespace splatr::workspace
