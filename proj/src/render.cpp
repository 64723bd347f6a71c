#include "splatr/render.hpp"

#include "splatr/detail/raster.hpp"
#include "splatr/sh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatr::render {

using detail::ProjectedSplat;
using detail::Rasterization;

namespace {

std::optional<ProjectedSplat> project_one(const Vec3& mean, const Vec3& log_scale, const Quat& rotation,
                                          double opacity_logit, std::span<const double> sh_block, int sh_degree,
                                          const CameraView& view) {
  const Vec3 t = view.pose.apply(mean);
  if (!(t.z() > kZNear)) return std::nullopt;
  ProjectedSplat s;
  s.cam = t;
  s.center = view.project_camera(t);
  const Mat3 cov = covariance_from(log_scale.array().exp(), rotation);
  s.cov2d = project_covariance(cov, view.pose.rotation, perspective_jacobian(view.fx, view.fy, clamp_to_frustum(view, t)));
  s.cov2d(0, 0) += kDilation;
  s.cov2d(1, 1) += kDilation;
  const double det = s.cov2d.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;
  s.conic = Vec3(s.cov2d(1, 1) / det, -s.cov2d(0, 1) / det, s.cov2d(0, 0) / det);
  s.opacity = sigmoid(opacity_logit);
  s.color = sh::eval_color(sh_degree, sh_block, mean, view.camera_center());
  return s;
}

// Inclusive pixel range covered by [center - r, center + r], clipped to [0, size).
void pixel_span(double center, double radius, int size, int& lo, int& hi) {
  constexpr double kPad = 1e-9;
  lo = std::max(0, static_cast<int>(std::ceil(center - radius - kPad)));
  hi = std::min(size - 1, static_cast<int>(std::floor(center + radius + kPad)));
}

}  // namespace

ImageRGB RenderOutput::to_image() const {
  ImageRGB img(width, height);
  for (size_t i = 0; i < color.size(); ++i) img.data[i] = static_cast<float>(std::clamp(color[i], 0.0, 1.0));
  return img;
}

ImageF RenderOutput::depth_image(double min_alpha) const {
  ImageF img(width, height);
  for (size_t i = 0; i < depth.size(); ++i) img.data[i] = alpha[i] >= min_alpha ? static_cast<float>(depth[i]) : 0.0f;
  return img;
}

Mat23 perspective_jacobian(double fx, double fy, const Vec3& t) {
  const double iz = 1.0 / t.z();
  Mat23 j;
  j << fx * iz, 0.0, -fx * t.x() * iz * iz, 0.0, fy * iz, -fy * t.y() * iz * iz;
  return j;
}

Vec3 clamp_to_frustum(const CameraView& view, const Vec3& t, bool* clamped_x, bool* clamped_y) {
  const double lim_x = kFrustumSlack * 0.5 * view.width / view.fx;
  const double lim_y = kFrustumSlack * 0.5 * view.height / view.fy;
  const double u = t.x() / t.z(), v = t.y() / t.z();
  const double uc = std::clamp(u, -lim_x, lim_x), vc = std::clamp(v, -lim_y, lim_y);
  if (clamped_x) *clamped_x = uc != u;
  if (clamped_y) *clamped_y = vc != v;
  return Vec3(uc * t.z(), vc * t.z(), t.z());
}

Mat2 project_covariance(const Mat3& cov, const Mat3& view_rotation, const Mat23& jacobian) {
  const Mat23 t = jacobian * view_rotation;
  return t * cov * t.transpose();
}

std::optional<Splat2D> project_gaussian(const Gaussian& g, const CameraView& view, int sh_degree) {
  const auto p = project_one(g.mean, g.log_scale, g.rotation, g.opacity_logit, g.sh, sh_degree, view);
  if (!p) return std::nullopt;
  return Splat2D{p->center, p->cov2d, p->cam.z(), p->opacity, p->color};
}

namespace detail {

Rasterization prepare(const GaussianCloud& cloud, const CameraView& view) {
  Rasterization r;
  r.width = view.width;
  r.height = view.height;
  r.tiles_x = (view.width + kTileSize - 1) / kTileSize;
  r.tiles_y = (view.height + kTileSize - 1) / kTileSize;
  const int num_tiles = r.tiles_x * r.tiles_y;
  const int stride = cloud.sh_stride();

  std::vector<std::optional<ProjectedSplat>> projected(cloud.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cloud.size()); ++i) {
    const std::span<const double> block(cloud.sh.data() + i * stride, static_cast<size_t>(stride));
    auto s = project_one(cloud.means[i], cloud.log_scales[i], cloud.rotations[i], cloud.opacity_logits[i], block,
                         cloud.sh_degree, view);
    if (!s) continue;
    pixel_span(s->center.x(), 3.0 * std::sqrt(s->cov2d(0, 0)), view.width, s->x0, s->x1);
    pixel_span(s->center.y(), 3.0 * std::sqrt(s->cov2d(1, 1)), view.height, s->y0, s->y1);
    if (s->x0 > s->x1 || s->y0 > s->y1) continue;
    s->index = static_cast<std::uint32_t>(i);
    projected[i] = *s;
  }
  for (auto& p : projected)
    if (p) r.splats.push_back(*p);

  // Global front-to-back order; equal depths keep cloud order.
  std::vector<std::uint32_t> order(r.splats.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return r.splats[a].cam.z() < r.splats[b].cam.z(); });

  std::vector<std::uint32_t> counts(static_cast<size_t>(num_tiles) + 1, 0);
  for (const auto& s : r.splats)
    for (int ty = s.y0 / kTileSize; ty <= s.y1 / kTileSize; ++ty)
      for (int tx = s.x0 / kTileSize; tx <= s.x1 / kTileSize; ++tx) ++counts[ty * r.tiles_x + tx + 1];
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  r.tile_offsets = counts;
  r.tile_entries.resize(counts.back());
  std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
  for (std::uint32_t k : order) {
    const auto& s = r.splats[k];
    for (int ty = s.y0 / kTileSize; ty <= s.y1 / kTileSize; ++ty)
      for (int tx = s.x0 / kTileSize; tx <= s.x1 / kTileSize; ++tx) r.tile_entries[cursor[ty * r.tiles_x + tx]++] = k;
  }
  return r;
}

void composite(Rasterization& r, const Vec3& background, RenderOutput& out) {
  const size_t num_pixels = static_cast<size_t>(r.width) * r.height;
  r.final_transmittance.assign(num_pixels, 1.0);
  r.contributor_count.assign(num_pixels, 0);
  const int num_tiles = r.tiles_x * r.tiles_y;

#pragma omp parallel for schedule(dynamic)
  for (int tile = 0; tile < num_tiles; ++tile) {
    const int tx = tile % r.tiles_x, ty = tile / r.tiles_x;
    const std::uint32_t begin = r.tile_offsets[tile], end = r.tile_offsets[tile + 1];
    const int x_end = std::min(r.width, (tx + 1) * kTileSize);
    const int y_end = std::min(r.height, (ty + 1) * kTileSize);
    for (int y = ty * kTileSize; y < y_end; ++y) {
      for (int x = tx * kTileSize; x < x_end; ++x) {
        double T = 1.0;
        Vec3 c = Vec3::Zero();
        double d = 0.0;
        std::uint32_t consumed = 0;
        for (std::uint32_t e = begin; e < end; ++e) {
          const ProjectedSplat& s = r.splats[r.tile_entries[e]];
          consumed = e - begin + 1;
          const double power = detail::splat_power(s, x, y);
          if (power < kCutoffPower) continue;
          const double a = s.opacity * std::exp(power);
          const double next_T = T * (1.0 - a);
          if (next_T < kMinTransmittance) {
            consumed = e - begin;
            break;
          }
          const double w = a * T;
          c += w * s.color;
          d += w * s.cam.z();
          T = next_T;
        }
        const size_t p = static_cast<size_t>(y) * r.width + x;
        r.final_transmittance[p] = T;
        r.contributor_count[p] = consumed;
        for (int ch = 0; ch < 3; ++ch) out.color[p * 3 + ch] = c[ch] + T * background[ch];
        out.alpha[p] = 1.0 - T;
        out.depth[p] = (1.0 - T) > 1e-8 ? d / (1.0 - T) : 0.0;
      }
    }
  }
}

}  // namespace detail

RenderOutput render(const GaussianCloud& cloud, const CameraView& view, const Vec3& background) {
  view.validate();
  RenderOutput out(view.width, view.height);
  Rasterization r = detail::prepare(cloud, view);
  detail::composite(r, background, out);
  return out;
}

RenderOutput render_reference(const GaussianCloud& cloud, const CameraView& view, const Vec3& background) {
  view.validate();
  struct Entry {
    double depth;
    size_t index;
    Splat2D splat;
    Mat2 inv;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < cloud.size(); ++i) {
    auto s = project_gaussian(cloud.get(i), view, cloud.sh_degree);
    if (!s) continue;
    entries.push_back({s->depth, i, *s, s->cov2d.inverse()});
  }
  RenderOutput out(view.width, view.height);
  std::vector<const Entry*> sorted;
  for (int y = 0; y < view.height; ++y) {
    for (int x = 0; x < view.width; ++x) {
      // Full sort for every pixel, no tiling and no shared lists.
      sorted.clear();
      for (const auto& e : entries) sorted.push_back(&e);
      std::sort(sorted.begin(), sorted.end(), [](const Entry* a, const Entry* b) {
        return a->depth != b->depth ? a->depth < b->depth : a->index < b->index;
      });
      double T = 1.0, d = 0.0;
      Vec3 c = Vec3::Zero();
      for (const Entry* e : sorted) {
        const Vec2 delta = Vec2(x, y) - e->splat.center;
        const double m2 = delta.dot(e->inv * delta);
        if (m2 > 9.0) continue;
        const double a = e->splat.opacity * std::exp(-0.5 * m2);
        if (T * (1.0 - a) < kMinTransmittance) break;
        c += a * T * e->splat.color;
        d += a * T * e->depth;
        T *= 1.0 - a;
      }
      const size_t p = static_cast<size_t>(y) * view.width + x;
      for (int ch = 0; ch < 3; ++ch) out.color[p * 3 + ch] = c[ch] + T * background[ch];
      out.alpha[p] = 1.0 - T;
      out.depth[p] = (1.0 - T) > 1e-8 ? d / (1.0 - T) : 0.0;
    }
  }
  return out;
}

std::vector<RenderOutput> render_trajectory(const GaussianCloud& cloud, std::span<const CameraView> views,
                                            const Vec3& background) {
  std::vector<RenderOutput> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(render(cloud, v, background));
  return out;
}

}  // namespace splatr::render
