#pragma once

// Rasterizer state shared between the forward renderer and the gradient pass.

#include "splatr/render.hpp"

#include <cstdint>
#include <vector>

namespace splatr::render::detail {

struct ProjectedSplat {
  std::uint32_t index = 0;  // position in the source cloud
  Vec3 cam = Vec3::Zero();  // mean in the camera frame
  Vec2 center = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();  // dilated
  Vec3 conic = Vec3::Zero();      // inverse of cov2d as (a, b, c)
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds of the 3-sigma box
};

struct Rasterization {
  int width = 0, height = 0;
  int tiles_x = 0, tiles_y = 0;
  std::vector<ProjectedSplat> splats;              // visible splats, in cloud order
  std::vector<std::uint32_t> tile_offsets;         // tiles_x*tiles_y + 1 entries
  std::vector<std::uint32_t> tile_entries;         // indices into `splats`, front-to-back per tile
  std::vector<double> final_transmittance;         // per pixel
  std::vector<std::uint32_t> contributor_count;    // per pixel: list entries consumed before stopping
};

/// Projection, culling, global depth sort and tile binning.
Rasterization prepare(const GaussianCloud& cloud, const CameraView& view);

/// Per-tile compositing. Fills `out` and the per-pixel bookkeeping in `r`.
void composite(Rasterization& r, const Vec3& background, RenderOutput& out);

inline double splat_power(const ProjectedSplat& s, double px, double py) {
  const double dx = px - s.center.x();
  const double dy = py - s.center.y();
  return -0.5 * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) - s.conic[1] * dx * dy;
}

}  // namespace splatr::render::detail
