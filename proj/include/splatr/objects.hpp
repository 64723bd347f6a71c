#pragma once

// Persistent object nodes for the shuffled and goal settings, merged across observations.

#include "splatr/change.hpp"
#include "splatr/core.hpp"

#include <optional>
#include <span>
#include <vector>

namespace splatr::objects {

enum class Setting { kShuffled, kGoal };

enum class CenterMode {
  kCentroid,    // mean of P
  kTrimmedBox,  // per-axis midpoint of the 10th and 90th percentiles of the points of P
                // within 0.4 m (ground plane) of its densest point
};

struct NodeStoreConfig {
  double delta = 0.5;
  double tau_sim = 0.75;
  double nn_dist_threshold = 0.05;
  double voxel = 0.02;  // downsampling of merged point clouds
  double cluster_radius = 0.05;  // a new node keeps the largest cluster of its points; 0 keeps all
  CenterMode center = CenterMode::kTrimmedBox;

  void validate() const;
};

struct ObjectNode {
  int node_id = -1;
  Setting setting = Setting::kShuffled;

  // Best view so far (largest crop): frame index, camera, image, depth and masks.
  int frame = -1;
  CameraView view;
  ImageRGB image;
  ImageF depth;                             // may be empty
  change::Grid<std::uint8_t> patch_mask;
  int patch = 1;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;       // patch-mask pixel bbox, inclusive
  Mask crop;                                // pixels the embedding was computed from
  std::optional<Mask> refined_mask;

  std::vector<double> embedding;  // unit norm
  std::vector<double> fused;      // running mean of raw embeddings, before normalization
  Vec3 center = Vec3::Zero();
  PointCloud points;
  int merge_count = 1;  // observations fused into this node

  void validate() const;
};

/// Fraction of points of `p` whose nearest neighbor in `pi` is within `threshold`.
double nnratio(const PointCloud& p, const PointCloud& pi, double threshold);

double node_similarity(const ObjectNode& o, const ObjectNode& oi, const NodeStoreConfig& cfg);

Vec3 node_center(const PointCloud& points, CenterMode mode);

/// Node from one detected region: P is the backprojection of the crop pixels (eroded by one
/// pixel when enough remain) with valid depth, downsampled and reduced to its largest cluster. Returns nullopt when no crop pixel has valid depth.
std::optional<ObjectNode> make_node(const change::DetectedRegion& det, Setting setting, int frame,
                                    const CameraView& view, const ImageRGB& image, const ImageF& depth,
                                    const NodeStoreConfig& cfg);

struct InsertResult {
  int node_id = -1;
  bool merged = false;
  double similarity = 0.0;  // best similarity found (0 when the store had no candidates)
};

class NodeStore {
 public:
  explicit NodeStore(NodeStoreConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  InsertResult insert(ObjectNode incoming);
  const std::vector<ObjectNode>& nodes() const { return nodes_; }
  std::vector<ObjectNode>& nodes() { return nodes_; }
  std::vector<const ObjectNode*> nodes_in(Setting s) const;
  const NodeStoreConfig& config() const { return cfg_; }

 private:
  NodeStoreConfig cfg_;
  std::vector<ObjectNode> nodes_;
  int next_id_ = 0;
};

/// Depth-band region growing inside the node's bbox: pixels within median +- 3 MAD of the
/// crop's depths, 4-connected to the crop. An external mask, when given, is returned as is.
/// Without depth the rasterized patch mask is returned.
Mask refine_mask(const ObjectNode& node, const Mask* external = nullptr);

}  // namespace splatr::objects
