#pragma once

// Forward tile-based rasterization of a Gaussian cloud into an RGB image.
//
// `render` is the production path: projection, one global depth sort, 16x16 tile
// binning and OpenMP-parallel per-tile compositing. `render_reference` is the
// serial per-pixel full-sort compositor kept as a test oracle and benchmark
// baseline. Both evaluate the same truncated image-space Gaussian, so their
// outputs agree up to floating-point reassociation.

#include "splatr/core.hpp"

#include <optional>
#include <span>
#include <vector>

namespace splatr::render {

inline constexpr int kTileSize = 16;
inline constexpr double kZNear = 0.2;
/// The Jacobian is evaluated with x/z and y/z clamped to this multiple of the half field of view.
inline constexpr double kFrustumSlack = 1.3;
/// Isotropic low-pass added to every projected covariance, in px^2.
inline constexpr double kDilation = 0.3;
/// Compositing stops once transmittance would fall below this value.
inline constexpr double kMinTransmittance = 1e-4;
/// Footprint truncation: contributions beyond 3 sigma (Mahalanobis^2 > 9) are zero.
inline constexpr double kCutoffPower = -4.5;

using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Image-space footprint of one Gaussian.
struct Splat2D {
  Vec2 center = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  double depth = 0.0;
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
};

struct RenderOutput {
  int width = 0, height = 0;
  std::vector<double> color;  // H*W*3 interleaved
  std::vector<double> alpha;  // H*W, 1 - final transmittance
  std::vector<double> depth;  // H*W, alpha-normalized expected depth; 0 where nothing was hit

  RenderOutput() = default;
  RenderOutput(int w, int h)
      : width(w), height(h), color(static_cast<size_t>(w) * h * 3), alpha(static_cast<size_t>(w) * h),
        depth(static_cast<size_t>(w) * h) {}

  double& at(int x, int y, int c) { return color[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return color[(static_cast<size_t>(y) * width + x) * 3 + c]; }

  ImageRGB to_image() const;
  ImageF depth_image(double min_alpha = 0.5) const;
};

/// 2x3 perspective Jacobian at camera-frame point `t`.
Mat23 perspective_jacobian(double fx, double fy, const Vec3& t);

/// `t` with x/z and y/z clamped to kFrustumSlack times the half field of view.
Vec3 clamp_to_frustum(const CameraView& view, const Vec3& t, bool* clamped_x = nullptr, bool* clamped_y = nullptr);

/// J W Sigma W^T J^T, without dilation.
Mat2 project_covariance(const Mat3& cov, const Mat3& view_rotation, const Mat23& jacobian);

/// Projects one Gaussian; returns nullopt when its mean is closer than kZNear.
std::optional<Splat2D> project_gaussian(const Gaussian& g, const CameraView& view, int sh_degree = 0);

/// Tiled, OpenMP-parallel renderer.
RenderOutput render(const GaussianCloud& cloud, const CameraView& view, const Vec3& background = Vec3::Zero());

/// Serial per-pixel full-sort compositor.
RenderOutput render_reference(const GaussianCloud& cloud, const CameraView& view,
                              const Vec3& background = Vec3::Zero());

std::vector<RenderOutput> render_trajectory(const GaussianCloud& cloud, std::span<const CameraView> views,
                                            const Vec3& background = Vec3::Zero());

}  // namespace splatr::render
