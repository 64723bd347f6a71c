#pragma once

// Photometric optimization of a Gaussian cloud against posed RGB frames.

#include "splatr/core.hpp"
#include "splatr/render.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splatr::train {

struct TrainConfig {
  int iterations = 7000;
  double lr_mean = 1.6e-4;  // multiplied by the scene extent
  double lr_mean_final_fraction = 0.01;
  double lr_log_scale = 5e-3;
  double lr_rotation = 1e-3;
  double lr_opacity = 5e-2;
  double lr_sh = 2.5e-3;  // band 0; higher bands use lr_sh / 20
  double ssim_weight = 0.2;
  double opacity_prune_threshold = 0.005;
  int prune_interval = 500;
  std::uint64_t seed = 0;
  Vec3 background = Vec3::Zero();

  void validate() const;
};

struct TrainReport {
  std::vector<double> loss;                // per iteration
  std::vector<std::size_t> gaussian_count;  // per iteration, after any pruning in that iteration
  std::vector<double> final_psnr;          // per training view
};

/// One posed RGB observation.
struct Frame {
  CameraView view;
  ImageRGB rgb;
};

/// Per-parameter arrays shaped like the cloud.
struct Gradients {
  std::vector<Vec3> means;
  std::vector<Vec3> log_scales;
  std::vector<Quat> rotations;
  std::vector<double> opacity_logits;
  std::vector<double> sh;

  static Gradients zeros_like(const GaussianCloud& cloud);
};

/// First/second moment state of the Adam optimizer, one slot per parameter scalar.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m, v;  // packed as means | log_scales | rotations | opacity | sh
};

struct TrainState {
  GaussianCloud cloud;
  AdamState adam;
  int iteration = 0;
};

/// One Gaussian per occupied voxel at the voxel centroid, isotropic scale from the
/// 3rd-nearest-neighbor distance, activated opacity 0.1, DC color from the mean point color.
GaussianCloud init_from_pointcloud(const PointCloud& pc, double voxel_size, int sh_degree = 0);

/// Mean SSIM over channels and pixels, 11x11 Gaussian window (sigma 1.5), zero padding.
double ssim(std::span<const double> a, std::span<const double> b, int width, int height);

struct LossValue {
  double total = 0.0;
  double l1 = 0.0;
  double ssim = 1.0;
};

/// (1 - lambda) * L1 + lambda * (1 - SSIM). Optionally writes dLoss/dColor.
LossValue loss(const render::RenderOutput& rendered, const ImageRGB& target, double ssim_weight,
               std::vector<double>* d_color = nullptr);

/// Analytic gradient of `loss` with respect to every raw cloud parameter.
Gradients backward(const GaussianCloud& cloud, const CameraView& view, const ImageRGB& target, double ssim_weight,
                   const Vec3& background = Vec3::Zero(), LossValue* value = nullptr);

double psnr(const render::RenderOutput& rendered, const ImageRGB& target);

/// Radius of the camera centers around their mean, times 1.1 (at least 1).
double scene_extent(std::span<const Frame> frames);

/// Adam step with per-group learning rates; re-normalizes quaternions afterwards.
void adam_step(GaussianCloud& cloud, AdamState& state, const Gradients& grads, const TrainConfig& cfg,
               double lr_mean_scaled);

/// Removes Gaussians with activated opacity below `threshold` together with their optimizer slots.
std::size_t prune(GaussianCloud& cloud, AdamState& state, double threshold);

/// Continues optimization from `state` until cfg.iterations are done.
TrainReport train(TrainState& state, std::span<const Frame> frames, const TrainConfig& cfg);

/// Initializes from a point cloud and trains from scratch.
std::pair<GaussianCloud, TrainReport> train(std::span<const Frame> frames, const PointCloud& pc, double voxel_size,
                                            const TrainConfig& cfg, int sh_degree = 0);

}  // namespace splatr::train
