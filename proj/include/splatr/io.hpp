#pragma once

// On-disk formats: patch embeddings, concept tables, images, poses, checkpoints and PLY.

#include "splatr/change.hpp"
#include "splatr/core.hpp"
#include "splatr/train.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace splatr::io {

namespace fs = std::filesystem;

// Patch embeddings: "SPLTEMB1", u32 version (=1), u32 rows, u32 cols, u32 dim, then
// rows*cols*dim little-endian float32, row-major. Nothing may follow the payload.
change::PatchFeatureGrid read_spltemb1(const fs::path& path);
change::PatchFeatureGrid parse_spltemb1(const std::string& bytes);
void write_spltemb1(const fs::path& path, const change::PatchFeatureGrid& grid);
std::string serialize_spltemb1(const change::PatchFeatureGrid& grid);

// Concept table: JSON object mapping label -> array of numbers, in table order.
change::ConceptTable read_concepts(const fs::path& path);
change::ConceptTable parse_concepts(const std::string& text);
void write_concepts(const fs::path& path, const change::ConceptTable& table);

// 8-bit RGB PNG. Values are clamped to [0,1] and rounded.
void write_png(const fs::path& path, const ImageRGB& image);
ImageRGB read_png(const fs::path& path);
// 16-bit grayscale PNG holding depth in millimeters; 0 marks invalid depth.
void write_depth_png(const fs::path& path, const ImageF& depth_m);
ImageF read_depth_png(const fs::path& path);

// Poses: one JSON object per line with frame, fx, fy, cx, cy, width, height, rotation
// (world->camera quaternion, wxyz) and translation (world->camera).
struct PoseRecord {
  int frame = 0;
  CameraView view;
  // As stored on disk; written back verbatim so files round-trip byte-identically.
  // When zero, the quaternion is derived from view.pose.rotation.
  Quat rotation = Quat::Zero();
};
void write_poses(const fs::path& path, const std::vector<PoseRecord>& poses);
std::vector<PoseRecord> read_poses(const fs::path& path);

// Checkpoint: "SPLATR1\0", u32 version (=1), u32 sh_degree, u32 count, u32 iteration,
// u64 adam step, u32 has_adam; then float32 groups means, log_scales, rotations,
// opacity_logits, sh; then Adam m and v when present.
void write_checkpoint(const fs::path& path, const train::TrainState& state);
train::TrainState read_checkpoint(const fs::path& path);

/// Binary PLY with the usual splat viewer property layout (f_rest channel-major).
void export_ply(const fs::path& path, const GaussianCloud& cloud);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& bytes);
/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
std::string file_hash(const fs::path& path);

}  // namespace splatr::io
