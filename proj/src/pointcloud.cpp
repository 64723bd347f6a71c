#include "splatr/pointcloud.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace splatr {

namespace {

using Key = std::array<std::int64_t, 3>;

Key voxel_key(const Vec3& p, double voxel) {
  return {static_cast<std::int64_t>(std::floor(p.x() / voxel)), static_cast<std::int64_t>(std::floor(p.y() / voxel)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
}

struct KeyHasher {
  size_t operator()(const Key& k) const {
    return std::hash<std::int64_t>{}(k[0] * 73856093 ^ k[1] * 19349663 ^ k[2] * 83492791);
  }
};

}  // namespace

PointCloud voxel_downsample(const PointCloud& pc, double voxel) {
  if (!(voxel > 0.0)) throw InvalidArgument("voxel size must be positive");
  if (pc.colors.size() != pc.points.size()) throw InvalidArgument("point cloud colors/points length mismatch");
  struct Acc {
    Vec3 sum = Vec3::Zero();
    Vec3 color = Vec3::Zero();
    std::size_t n = 0;
  };
  std::map<Key, Acc> cells;
  for (size_t i = 0; i < pc.size(); ++i) {
    Acc& a = cells[voxel_key(pc.points[i], voxel)];
    a.sum += pc.points[i];
    a.color += pc.colors[i];
    ++a.n;
  }
  PointCloud out;
  out.points.reserve(cells.size());
  out.colors.reserve(cells.size());
  for (const auto& [k, a] : cells) {
    out.points.push_back(a.sum / static_cast<double>(a.n));
    out.colors.push_back((a.color / static_cast<double>(a.n)).cwiseMax(0.0).cwiseMin(1.0));
  }
  return out;
}

std::vector<double> kth_neighbor_distance(std::span<const Vec3> points, int k, double cell_hint, double fallback) {
  const size_t n = points.size();
  std::vector<double> out(n, fallback);
  if (n < 2 || k < 1) return out;
  const int kk = static_cast<int>(std::min<size_t>(static_cast<size_t>(k), n - 1));
  const double cell = cell_hint > 0.0 ? cell_hint : 1.0;

  if (n <= 256) {
    for (size_t i = 0; i < n; ++i) {
      std::vector<double> d;
      for (size_t j = 0; j < n; ++j)
        if (j != i) d.push_back((points[j] - points[i]).norm());
      std::nth_element(d.begin(), d.begin() + (kk - 1), d.end());
      out[i] = d[kk - 1];
    }
    return out;
  }

  std::unordered_map<Key, std::vector<std::uint32_t>, KeyHasher> grid;
  for (size_t i = 0; i < n; ++i) grid[voxel_key(points[i], cell)].push_back(static_cast<std::uint32_t>(i));

  Key lo{std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
         std::numeric_limits<std::int64_t>::max()};
  Key hi{std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::min(),
         std::numeric_limits<std::int64_t>::min()};
  for (const auto& [key, _] : grid)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], key[a]);
      hi[a] = std::max(hi[a], key[a]);
    }
  const std::int64_t max_ring = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}) + 1;

#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const Key c = voxel_key(points[i], cell);
    std::vector<double> best;  // sorted ascending, at most kk entries
    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      for (std::int64_t dz = -ring; dz <= ring; ++dz)
        for (std::int64_t dy = -ring; dy <= ring; ++dy)
          for (std::int64_t dx = -ring; dx <= ring; ++dx) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
            if (it == grid.end()) continue;
            for (std::uint32_t j : it->second) {
              if (static_cast<std::ptrdiff_t>(j) == i) continue;
              const double d = (points[j] - points[i]).norm();
              if (static_cast<int>(best.size()) < kk || d < best.back()) {
                best.insert(std::upper_bound(best.begin(), best.end(), d), d);
                if (static_cast<int>(best.size()) > kk) best.pop_back();
              }
            }
          }
      // Anything outside this ring is at least ring * cell away.
      if (static_cast<int>(best.size()) == kk && best.back() <= static_cast<double>(ring) * cell) break;
    }
    if (!best.empty()) out[i] = best.back();
  }
  return out;
}

size_t RadiusIndex::KeyHash::operator()(const Key& k) const { return KeyHasher{}(k); }

RadiusIndex::Key RadiusIndex::key(const Vec3& p) const { return voxel_key(p, radius_); }

RadiusIndex::RadiusIndex(std::span<const Vec3> points, double radius)
    : points_(points.begin(), points.end()), radius_(radius) {
  if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
  for (size_t i = 0; i < points_.size(); ++i) cells_[key(points_[i])].push_back(static_cast<std::uint32_t>(i));
}

bool RadiusIndex::has_neighbor(const Vec3& q) const {
  const Key c = key(q);
  const double r2 = radius_ * radius_;
  for (std::int64_t dz = -1; dz <= 1; ++dz)
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
        if (it == cells_.end()) continue;
        for (std::uint32_t j : it->second)
          if ((points_[j] - q).squaredNorm() <= r2) return true;
      }
  return false;
}

std::vector<std::uint32_t> RadiusIndex::neighbors(const Vec3& q) const {
  std::vector<std::uint32_t> out;
  const Key c = key(q);
  const double r2 = radius_ * radius_;
  for (std::int64_t dz = -1; dz <= 1; ++dz)
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
        if (it == cells_.end()) continue;
        for (std::uint32_t j : it->second)
          if ((points_[j] - q).squaredNorm() <= r2) out.push_back(j);
      }
  std::sort(out.begin(), out.end());
  return out;
}

PointCloud largest_cluster(const PointCloud& pc, double radius) {
  if (pc.empty()) return pc;
  const RadiusIndex index(pc.points, radius);
  std::vector<int> label(pc.size(), -1);
  std::vector<size_t> sizes;
  for (size_t seed = 0; seed < pc.size(); ++seed) {
    if (label[seed] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    size_t count = 0;
    std::vector<size_t> stack{seed};
    label[seed] = id;
    while (!stack.empty()) {
      const size_t i = stack.back();
      stack.pop_back();
      ++count;
      for (std::uint32_t j : index.neighbors(pc.points[i]))
        if (label[j] < 0) {
          label[j] = id;
          stack.push_back(j);
        }
    }
    sizes.push_back(count);
  }
  // Ties go to the lowest label, i.e. the cluster containing the earliest point.
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  PointCloud out;
  const bool colored = pc.colors.size() == pc.points.size();
  for (size_t i = 0; i < pc.size(); ++i)
    if (label[i] == best) {
      out.points.push_back(pc.points[i]);
      if (colored) out.colors.push_back(pc.colors[i]);
    }
  return out;
}

}  // namespace splatr
