#pragma once

// Point-cloud utilities: voxel averaging and neighbor queries.

#include "splatr/core.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace splatr {

/// One output point per occupied voxel (floor(p / voxel)): centroid position and mean color.
/// Output is ordered by voxel key so the result does not depend on input order.
PointCloud voxel_downsample(const PointCloud& pc, double voxel);

/// Distance from each point to its k-th nearest other point. When fewer than k other
/// points exist, the farthest available neighbor is used; a lone point gets `fallback`.
std::vector<double> kth_neighbor_distance(std::span<const Vec3> points, int k, double cell_hint, double fallback);

/// Hash-grid index answering "is there a point within r of q".
class RadiusIndex {
 public:
  RadiusIndex(std::span<const Vec3> points, double radius);
  bool has_neighbor(const Vec3& q) const;
  /// Indices of the points within r of q, ascending.
  std::vector<std::uint32_t> neighbors(const Vec3& q) const;

 private:
  using Key = std::array<std::int64_t, 3>;
  struct KeyHash {
    size_t operator()(const Key& k) const;
  };
  Key key(const Vec3& p) const;

  std::vector<Vec3> points_;
  double radius_;
  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHash> cells_;
};

/// Points of the largest component of the graph linking points closer than `radius`.
PointCloud largest_cluster(const PointCloud& pc, double radius);

}  // namespace splatr
