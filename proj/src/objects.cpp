#include "splatr/objects.hpp"

#include "splatr/pointcloud.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>

namespace splatr::objects {

namespace {

constexpr double kMinMad = 0.005;  // meters; keeps the band open on perfectly flat crops
constexpr double kTrim = 0.10;     // quantile trimmed from each end for the box center
constexpr double kModeRadius = 0.1;  // ground-plane radius for the point density
constexpr double kModeReach = 0.4;   // points farther than this from the densest point are ignored
constexpr size_t kModeCandidates = 512;

// Drops mask pixels with a 4-neighbor outside the mask; silhouette pixels carry mixed depth.
Mask erode(const Mask& m) {
  Mask out(m.width, m.height);
  for (int y = 1; y + 1 < m.height; ++y)
    for (int x = 1; x + 1 < m.width; ++x)
      out.set(x, y, m.at(x, y) && m.at(x - 1, y) && m.at(x + 1, y) && m.at(x, y - 1) && m.at(x, y + 1));
  return out;
}

double median(std::vector<double> v) {
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace

void NodeStoreConfig::validate() const {
  if (!(delta >= 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in [0, 1]");
  if (!(nn_dist_threshold > 0.0)) throw InvalidArgument("nn distance threshold must be positive");
  if (!(voxel > 0.0)) throw InvalidArgument("node voxel size must be positive");
  if (!(cluster_radius >= 0.0)) throw InvalidArgument("cluster radius must be >= 0");
}

void ObjectNode::validate() const {
  if (points.empty()) throw InvalidArgument("object node has an empty point cloud");
  double n = 0.0;
  for (double v : embedding) n += v * v;
  if (std::abs(std::sqrt(n) - 1.0) > 1e-4) throw InvalidArgument("object node embedding is not unit-norm");
  if (fused.size() != embedding.size()) throw InvalidArgument("object node fused/embedding size mismatch");
  if (merge_count < 1) throw InvalidArgument("object node merge count must be positive");
}

double nnratio(const PointCloud& p, const PointCloud& pi, double threshold) {
  if (p.empty() || pi.empty()) throw InvalidArgument("nnratio needs nonempty clouds");
  const RadiusIndex index(pi.points, threshold);
  size_t hits = 0;
  for (const Vec3& q : p.points) hits += index.has_neighbor(q);
  return static_cast<double>(hits) / static_cast<double>(p.size());
}

double node_similarity(const ObjectNode& o, const ObjectNode& oi, const NodeStoreConfig& cfg) {
  if (o.setting != oi.setting) throw InvalidArgument("node similarity across settings");
  return cfg.delta * change::cosine(o.embedding, oi.embedding) +
         (1.0 - cfg.delta) * nnratio(o.points, oi.points, cfg.nn_dist_threshold);
}

Vec3 node_center(const PointCloud& pc, CenterMode mode) {
  if (pc.empty()) throw InvalidArgument("center of an empty cloud");
  if (mode == CenterMode::kCentroid) return pc.centroid();
  // Densest point in the ground plane, over an even subsample of candidates.
  std::vector<Vec3> flat;
  flat.reserve(pc.size());
  for (const Vec3& p : pc.points) flat.emplace_back(p.x(), p.y(), 0.0);
  const RadiusIndex index(flat, kModeRadius);
  const size_t stride = std::max<size_t>(1, pc.size() / kModeCandidates);
  size_t densest = 0, most = 0;
  for (size_t i = 0; i < flat.size(); i += stride) {
    const size_t n = index.neighbors(flat[i]).size();
    if (n > most) {
      most = n;
      densest = i;
    }
  }
  std::array<std::vector<double>, 3> v;
  for (size_t i = 0; i < flat.size(); ++i)
    if ((flat[i] - flat[densest]).norm() <= kModeReach)
      for (int a = 0; a < 3; ++a) v[a].push_back(pc.points[i][a]);
  Vec3 c;
  for (int a = 0; a < 3; ++a) c[a] = 0.5 * (quantile(v[a], kTrim) + quantile(v[a], 1.0 - kTrim));
  return c;
}

std::optional<ObjectNode> make_node(const change::DetectedRegion& det, Setting setting, int frame,
                                    const CameraView& view, const ImageRGB& image, const ImageF& depth,
                                    const NodeStoreConfig& cfg) {
  const Mask inner = erode(det.crop);
  PointCloud pc = backproject(view, depth, &image, inner.count() >= 4 ? &inner : &det.crop);
  if (pc.empty()) return std::nullopt;
  ObjectNode n;
  n.setting = setting;
  n.frame = frame;
  n.view = view;
  n.image = image;
  n.depth = depth;
  n.patch_mask = det.region.patches;
  n.patch = det.region.patch;
  n.x0 = det.region.x0;
  n.y0 = det.region.y0;
  n.x1 = det.region.x1;
  n.y1 = det.region.y1;
  n.crop = det.crop;
  n.fused = det.embedding;
  n.embedding = det.embedding;
  double norm = 0.0;
  for (double v : n.embedding) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) return std::nullopt;
  for (double& v : n.embedding) v /= norm;
  n.points = voxel_downsample(pc, cfg.voxel);
  if (cfg.cluster_radius > 0.0) n.points = largest_cluster(n.points, cfg.cluster_radius);
  n.center = node_center(n.points, cfg.center);
  return n;
}

std::vector<const ObjectNode*> NodeStore::nodes_in(Setting s) const {
  std::vector<const ObjectNode*> out;
  for (const auto& n : nodes_)
    if (n.setting == s) out.push_back(&n);
  return out;
}

InsertResult NodeStore::insert(ObjectNode in) {
  in.validate();
  InsertResult res;
  int best = -1;
  double best_s = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].setting != in.setting) continue;
    const double s = node_similarity(in, nodes_[i], cfg_);
    if (s > best_s) {  // strict: ties keep the lower node id
      best_s = s;
      best = static_cast<int>(i);
    }
  }
  if (best >= 0) res.similarity = best_s;
  if (best >= 0 && best_s > cfg_.tau_sim) {
    ObjectNode& n = nodes_[best];
    const double k = n.merge_count, m = in.merge_count;
    for (size_t i = 0; i < n.fused.size(); ++i) n.fused[i] = (k * n.fused[i] + m * in.fused[i]) / (k + m);
    n.merge_count += in.merge_count;
    double norm = 0.0;
    for (double v : n.fused) norm += v * v;
    norm = std::sqrt(norm);
    // An all-cancelling mean keeps the previous direction.
    if (norm > 0.0)
      for (size_t i = 0; i < n.fused.size(); ++i) n.embedding[i] = n.fused[i] / norm;
    PointCloud merged = n.points;
    merged.append(in.points);
    n.points = voxel_downsample(merged, cfg_.voxel);
    n.center = node_center(n.points, cfg_.center);
    if (in.crop.count() > n.crop.count()) {
      n.frame = in.frame;
      n.view = in.view;
      n.image = std::move(in.image);
      n.depth = std::move(in.depth);
      n.patch_mask = std::move(in.patch_mask);
      n.patch = in.patch;
      n.x0 = in.x0;
      n.y0 = in.y0;
      n.x1 = in.x1;
      n.y1 = in.y1;
      n.crop = std::move(in.crop);
      n.refined_mask.reset();
    }
    res.node_id = n.node_id;
    res.merged = true;
    return res;
  }
  in.node_id = next_id_++;
  res.node_id = in.node_id;
  nodes_.push_back(std::move(in));
  return res;
}

Mask refine_mask(const ObjectNode& node, const Mask* external) {
  if (external) return *external;
  const int w = node.image.width, h = node.image.height;
  const int patch = node.patch;
  Mask patch_pixels(w, h);
  for (int r = 0; r < node.patch_mask.rows; ++r)
    for (int c = 0; c < node.patch_mask.cols; ++c)
      if (node.patch_mask.at(r, c))
        for (int y = r * patch; y < std::min((r + 1) * patch, h); ++y)
          for (int x = c * patch; x < std::min((c + 1) * patch, w); ++x) patch_pixels.set(x, y, true);
  if (node.depth.width != w || node.depth.height != h) return patch_pixels;

  const Mask& seeds = node.crop.width == w && node.crop.count() > 0 ? node.crop : patch_pixels;
  std::vector<double> d;
  for (int y = node.y0; y <= node.y1; ++y)
    for (int x = node.x0; x <= node.x1; ++x)
      if (seeds.at(x, y) && node.depth.at(x, y) > 0.0f) d.push_back(node.depth.at(x, y));
  if (d.empty()) return patch_pixels;
  const double med = median(d);
  std::vector<double> dev;
  dev.reserve(d.size());
  for (double v : d) dev.push_back(std::abs(v - med));
  const double band = 3.0 * std::max(median(dev), kMinMad);
  auto in_band = [&](int x, int y) {
    const double z = node.depth.at(x, y);
    return z > 0.0 && std::abs(z - med) <= band;
  };

  Mask out(w, h);
  std::deque<std::pair<int, int>> q;
  for (int y = node.y0; y <= node.y1; ++y)
    for (int x = node.x0; x <= node.x1; ++x)
      if (seeds.at(x, y) && in_band(x, y)) {
        out.set(x, y, true);
        q.push_back({x, y});
      }
  constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx < node.x0 || ny < node.y0 || nx > node.x1 || ny > node.y1 || out.at(nx, ny)) continue;
      if (!patch_pixels.at(nx, ny) || !in_band(nx, ny)) continue;
      out.set(nx, ny, true);
      q.push_back({nx, ny});
    }
  }
  return out;
}

}  // namespace splatr::objects
