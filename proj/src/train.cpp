#include "splatr/train.hpp"

#include "splatr/detail/raster.hpp"
#include "splatr/pointcloud.hpp"
#include "splatr/sh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace splatr::train {

using render::RenderOutput;
using render::detail::ProjectedSplat;
using render::detail::Rasterization;

void TrainConfig::validate() const {
  if (iterations <= 0) throw InvalidArgument("iterations must be positive");
  if (!(lr_mean > 0 && lr_log_scale > 0 && lr_rotation > 0 && lr_opacity > 0 && lr_sh > 0))
    throw InvalidArgument("learning rates must be positive");
  if (!(ssim_weight >= 0.0 && ssim_weight < 1.0)) throw InvalidArgument("ssim weight must be in [0,1)");
  if (!(lr_mean_final_fraction > 0.0)) throw InvalidArgument("final mean learning-rate fraction must be positive");
}

Gradients Gradients::zeros_like(const GaussianCloud& cloud) {
  Gradients g;
  g.means.assign(cloud.size(), Vec3::Zero());
  g.log_scales.assign(cloud.size(), Vec3::Zero());
  g.rotations.assign(cloud.size(), Quat::Zero());
  g.opacity_logits.assign(cloud.size(), 0.0);
  g.sh.assign(cloud.sh.size(), 0.0);
  return g;
}

// ---------------------------------------------------------------------------
// Initialization

GaussianCloud init_from_pointcloud(const PointCloud& pc, double voxel_size, int sh_degree) {
  if (pc.empty()) throw InvalidArgument("cannot initialize Gaussians from an empty point cloud");
  if (!(voxel_size > 0.0)) throw InvalidArgument("voxel size must be positive");
  if (sh_degree < 0 || sh_degree > 3) throw InvalidArgument("sh_degree must be in 0..3");
  const PointCloud centers = voxel_downsample(pc, voxel_size);
  const auto dist = kth_neighbor_distance(centers.points, 3, voxel_size, voxel_size);

  GaussianCloud cloud;
  cloud.sh_degree = sh_degree;
  const int stride = cloud.sh_stride();
  for (size_t i = 0; i < centers.size(); ++i) {
    Gaussian g;
    g.mean = centers.points[i];
    g.log_scale = Vec3::Constant(std::log(std::max(dist[i], 1e-6)));
    g.rotation = identity_quat();
    g.opacity_logit = logit(0.1);
    g.sh.assign(static_cast<size_t>(stride), 0.0);
    for (int c = 0; c < 3; ++c) g.sh[c] = rgb_to_sh_dc(centers.colors[i][c]);
    cloud.push_back(g);
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Loss

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    k[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "same" filtering with zero padding on a single-channel plane. The filter is
// symmetric, so this operator is also its own adjoint.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
  static const auto k = gaussian_window();
  constexpr int r = kWindow / 2;
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + r] * in[static_cast<size_t>(y) * w + xx];
      }
      tmp[static_cast<size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + r] * tmp[static_cast<size_t>(yy) * w + x];
      }
      out[static_cast<size_t>(y) * w + x] = s;
    }
  return out;
}

std::vector<double> channel(std::span<const double> img, int c, size_t n) {
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = img[i * 3 + c];
  return out;
}

// Mean SSIM and, when requested, d(mean SSIM)/d a.
double ssim_impl(std::span<const double> a, std::span<const double> b, int w, int h, std::vector<double>* grad) {
  const size_t n = static_cast<size_t>(w) * h;
  const double norm = 1.0 / static_cast<double>(n * 3);
  double total = 0.0;
  if (grad) grad->assign(n * 3, 0.0);
  for (int c = 0; c < 3; ++c) {
    const auto x = channel(a, c, n), y = channel(b, c, n);
    std::vector<double> xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x, w, h), my = blur(y, w, h);
    const auto exx = blur(xx, w, h), eyy = blur(yy, w, h), exy = blur(xy, w, h);
    std::vector<double> d_mx(n), d_exx(n), d_exy(n);
    for (size_t i = 0; i < n; ++i) {
      const double a1 = 2.0 * mx[i] * my[i] + kC1;
      const double a2 = 2.0 * (exy[i] - mx[i] * my[i]) + kC2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + kC1;
      const double b2 = (exx[i] - mx[i] * mx[i]) + (eyy[i] - my[i] * my[i]) + kC2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (grad) {
        d_mx[i] = (2.0 * my[i] * a2 - 2.0 * my[i] * a1) / (b1 * b2) - s * 2.0 * mx[i] / b1 + s * 2.0 * mx[i] / b2;
        d_exx[i] = -s / b2;
        d_exy[i] = 2.0 * a1 / (b1 * b2);
      }
    }
    if (grad) {
      const auto g_m = blur(d_mx, w, h), g_xx = blur(d_exx, w, h), g_xy = blur(d_exy, w, h);
      for (size_t i = 0; i < n; ++i) (*grad)[i * 3 + c] = norm * (g_m[i] + 2.0 * x[i] * g_xx[i] + y[i] * g_xy[i]);
    }
  }
  return total * norm;
}

}  // namespace

double ssim(std::span<const double> a, std::span<const double> b, int width, int height) {
  const size_t n = static_cast<size_t>(width) * height * 3;
  if (a.size() != n || b.size() != n) throw InvalidArgument("ssim: image size mismatch");
  return ssim_impl(a, b, width, height, nullptr);
}

LossValue loss(const RenderOutput& rendered, const ImageRGB& target, double ssim_weight, std::vector<double>* d_color) {
  if (rendered.width != target.width || rendered.height != target.height)
    throw InvalidArgument("loss: rendered and target images differ in size");
  if (!(ssim_weight >= 0.0 && ssim_weight < 1.0)) throw InvalidArgument("loss: ssim weight must be in [0,1)");
  const size_t n = rendered.color.size();
  std::vector<double> tgt(target.data.begin(), target.data.end());
  LossValue v;
  double l1 = 0.0;
  for (size_t i = 0; i < n; ++i) l1 += std::abs(rendered.color[i] - tgt[i]);
  v.l1 = l1 / static_cast<double>(n);
  std::vector<double> d_ssim;
  if (ssim_weight > 0.0) {
    v.ssim = ssim_impl(rendered.color, tgt, rendered.width, rendered.height, d_color ? &d_ssim : nullptr);
  }
  v.total = (1.0 - ssim_weight) * v.l1 + ssim_weight * (1.0 - v.ssim);
  if (d_color) {
    d_color->assign(n, 0.0);
    const double w1 = (1.0 - ssim_weight) / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
      const double r = rendered.color[i] - tgt[i];
      (*d_color)[i] = r > 0.0 ? w1 : (r < 0.0 ? -w1 : 0.0);
      if (ssim_weight > 0.0) (*d_color)[i] -= ssim_weight * d_ssim[i];
    }
  }
  return v;
}

double psnr(const RenderOutput& rendered, const ImageRGB& target) {
  if (rendered.width != target.width || rendered.height != target.height)
    throw InvalidArgument("psnr: image size mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < rendered.color.size(); ++i) {
    const double d = std::clamp(rendered.color[i], 0.0, 1.0) - target.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(rendered.color.size());
  return mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : 99.0;
}

// ---------------------------------------------------------------------------
// Backward pass

namespace {

// Image-space gradient of one projected splat.
struct SplatGrad {
  Vec2 mean2d = Vec2::Zero();
  Vec3 conic = Vec3::Zero();
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();

  SplatGrad& operator+=(const SplatGrad& o) {
    mean2d += o.mean2d;
    conic += o.conic;
    opacity += o.opacity;
    color += o.color;
    return *this;
  }
};

// d R(q) / d q_k for a unit quaternion (w, x, y, z).
std::array<Mat3, 4> rotation_jacobian(const Quat& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
  return d;
}

void pixel_backward(const Rasterization& r, const std::vector<double>& d_color, const Vec3& background, int tile,
                    std::vector<SplatGrad>& tile_grads) {
  const int tx = tile % r.tiles_x, ty = tile / r.tiles_x;
  const std::uint32_t begin = r.tile_offsets[tile];
  const int x_end = std::min(r.width, (tx + 1) * render::kTileSize);
  const int y_end = std::min(r.height, (ty + 1) * render::kTileSize);
  for (int y = ty * render::kTileSize; y < y_end; ++y) {
    for (int x = tx * render::kTileSize; x < x_end; ++x) {
      const size_t p = static_cast<size_t>(y) * r.width + x;
      const Vec3 dC(d_color[p * 3], d_color[p * 3 + 1], d_color[p * 3 + 2]);
      const double T_final = r.final_transmittance[p];
      const double bg_dot = background.dot(dC);
      double T = T_final;
      Vec3 behind = Vec3::Zero();
      double last_alpha = 0.0;
      Vec3 last_color = Vec3::Zero();
      for (std::uint32_t e = begin + r.contributor_count[p]; e-- > begin;) {
        const ProjectedSplat& s = r.splats[r.tile_entries[e]];
        const double power = render::detail::splat_power(s, x, y);
        if (power < render::kCutoffPower) continue;
        const double g = std::exp(power);
        const double a = s.opacity * g;
        T /= (1.0 - a);
        behind = last_alpha * last_color + (1.0 - last_alpha) * behind;
        last_alpha = a;
        last_color = s.color;

        SplatGrad& sg = tile_grads[e - begin];
        sg.color += a * T * dC;
        const double d_alpha = T * (s.color - behind).dot(dC) - T_final / (1.0 - a) * bg_dot;
        sg.opacity += g * d_alpha;
        const double d_power = a * d_alpha;
        const double dx = x - s.center.x(), dy = y - s.center.y();
        sg.mean2d.x() += d_power * (s.conic[0] * dx + s.conic[1] * dy);
        sg.mean2d.y() += d_power * (s.conic[1] * dx + s.conic[2] * dy);
        sg.conic[0] += d_power * (-0.5 * dx * dx);
        sg.conic[1] += d_power * (-dx * dy);
        sg.conic[2] += d_power * (-0.5 * dy * dy);
      }
    }
  }
}

}  // namespace

Gradients backward(const GaussianCloud& cloud, const CameraView& view, const ImageRGB& target, double ssim_weight,
                   const Vec3& background, LossValue* value) {
  view.validate();
  Rasterization r = render::detail::prepare(cloud, view);
  RenderOutput out(view.width, view.height);
  render::detail::composite(r, background, out);
  std::vector<double> d_color;
  const LossValue lv = loss(out, target, ssim_weight, &d_color);
  if (value) *value = lv;

  // Per-tile partial sums, reduced in tile order so the result does not depend on scheduling.
  const int num_tiles = r.tiles_x * r.tiles_y;
  std::vector<SplatGrad> entry_grads(r.tile_entries.size());
#pragma omp parallel for schedule(dynamic)
  for (int tile = 0; tile < num_tiles; ++tile) {
    std::vector<SplatGrad> local(r.tile_offsets[tile + 1] - r.tile_offsets[tile]);
    pixel_backward(r, d_color, background, tile, local);
    std::copy(local.begin(), local.end(), entry_grads.begin() + r.tile_offsets[tile]);
  }
  std::vector<SplatGrad> splat_grads(r.splats.size());
  for (size_t e = 0; e < r.tile_entries.size(); ++e) splat_grads[r.tile_entries[e]] += entry_grads[e];

  Gradients grads = Gradients::zeros_like(cloud);
  const Vec3 cam_center = view.camera_center();
  const Mat3& W = view.pose.rotation;
  const int stride = cloud.sh_stride();

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(r.splats.size()); ++k) {
    const ProjectedSplat& s = r.splats[k];
    const SplatGrad& sg = splat_grads[k];
    const size_t i = s.index;
    Vec3 d_mean = Vec3::Zero();

    // Color through spherical harmonics.
    const std::span<const double> coeffs(cloud.sh.data() + i * stride, static_cast<size_t>(stride));
    const std::span<double> d_coeffs(grads.sh.data() + i * stride, static_cast<size_t>(stride));
    d_mean += sh::backward_color(cloud.sh_degree, coeffs, cloud.means[i], cam_center, sg.color, d_coeffs);

    // Opacity through the logistic activation.
    grads.opacity_logits[i] = sg.opacity * s.opacity * (1.0 - s.opacity);

    // Conic -> 2D covariance.
    Mat2 Q;
    Q << s.conic[0], s.conic[1], s.conic[1], s.conic[2];
    Mat2 gQ;
    gQ << sg.conic[0], 0.5 * sg.conic[1], 0.5 * sg.conic[1], sg.conic[2];
    const Mat2 g_cov2d = -Q * gQ * Q;

    // 2D covariance -> 3D covariance and the Jacobian.
    const Vec3& t = s.cam;
    bool clamped_x = false, clamped_y = false;
    const Vec3 tc = render::clamp_to_frustum(view, t, &clamped_x, &clamped_y);
    const render::Mat23 J = render::perspective_jacobian(view.fx, view.fy, tc);
    const render::Mat23 TW = J * W;
    const Vec3 scale = cloud.log_scales[i].array().exp();
    const Quat qn = normalize_quat(cloud.rotations[i]);
    const Mat3 R = quat_to_matrix(qn);
    const Mat3 M = R * scale.asDiagonal();
    const Mat3 sigma = M * M.transpose();
    const Mat3 g_sigma = TW.transpose() * g_cov2d * TW;
    const render::Mat23 g_TW = 2.0 * g_cov2d * TW * sigma;
    const render::Mat23 g_J = g_TW * W.transpose();

    // Camera-frame mean: projected center and Jacobian entries.
    const double iz = 1.0 / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 d_t = Vec3::Zero();
    d_t.x() += sg.mean2d.x() * view.fx * iz;
    d_t.y() += sg.mean2d.y() * view.fy * iz;
    d_t.z() += -sg.mean2d.x() * view.fx * t.x() * iz2 - sg.mean2d.y() * view.fy * t.y() * iz2;
    d_t.z() += g_J(0, 0) * (-view.fx * iz2) + g_J(1, 1) * (-view.fy * iz2);
    // A clamped J(., 2) = -f * c / z depends on z only.
    if (clamped_x) {
      d_t.z() += g_J(0, 2) * (view.fx * tc.x() * iz3);
    } else {
      d_t.x() += g_J(0, 2) * (-view.fx * iz2);
      d_t.z() += g_J(0, 2) * (2.0 * view.fx * t.x() * iz3);
    }
    if (clamped_y) {
      d_t.z() += g_J(1, 2) * (view.fy * tc.y() * iz3);
    } else {
      d_t.y() += g_J(1, 2) * (-view.fy * iz2);
      d_t.z() += g_J(1, 2) * (2.0 * view.fy * t.y() * iz3);
    }
    d_mean += W.transpose() * d_t;
    grads.means[i] = d_mean;

    // Sigma = M M^T with M = R diag(s).
    const Mat3 g_M = 2.0 * g_sigma * M;
    Vec3 d_scale;
    for (int c = 0; c < 3; ++c) d_scale[c] = g_M.col(c).dot(R.col(c));
    grads.log_scales[i] = d_scale.cwiseProduct(scale);
    const Mat3 g_R = g_M * scale.asDiagonal();
    const auto dR = rotation_jacobian(qn);
    Quat d_qn;
    for (int c = 0; c < 4; ++c) d_qn[c] = (g_R.array() * dR[c].array()).sum();
    // Normalization removes the radial component.
    grads.rotations[i] = (d_qn - qn * qn.dot(d_qn)) / cloud.rotations[i].norm();
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Optimizer

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

size_t packed_size(const GaussianCloud& c) { return c.size() * 11 + c.sh.size(); }

}  // namespace

void adam_step(GaussianCloud& cloud, AdamState& state, const Gradients& grads, const TrainConfig& cfg,
               double lr_mean_scaled) {
  const size_t total = packed_size(cloud);
  if (state.m.size() != total) {
    state.m.assign(total, 0.0);
    state.v.assign(total, 0.0);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  auto update = [&](size_t slot, double& param, double g, double lr) {
    double& m = state.m[slot];
    double& v = state.v[slot];
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g * g;
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
  };
  const size_t n = cloud.size();
  size_t slot = 0;
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) update(slot++, cloud.means[i][c], grads.means[i][c], lr_mean_scaled);
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) update(slot++, cloud.log_scales[i][c], grads.log_scales[i][c], cfg.lr_log_scale);
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < 4; ++c) update(slot++, cloud.rotations[i][c], grads.rotations[i][c], cfg.lr_rotation);
  for (size_t i = 0; i < n; ++i) update(slot++, cloud.opacity_logits[i], grads.opacity_logits[i], cfg.lr_opacity);
  const int stride = cloud.sh_stride();
  for (size_t j = 0; j < cloud.sh.size(); ++j) {
    const bool dc = static_cast<int>(j % static_cast<size_t>(stride)) < 3;
    update(slot++, cloud.sh[j], grads.sh[j], dc ? cfg.lr_sh : cfg.lr_sh / 20.0);
  }
  for (auto& q : cloud.rotations) q = normalize_quat(q);
}

std::size_t prune(GaussianCloud& cloud, AdamState& state, double threshold) {
  const size_t n = cloud.size();
  std::vector<bool> keep(n);
  size_t removed = 0;
  for (size_t i = 0; i < n; ++i) {
    keep[i] = sigmoid(cloud.opacity_logits[i]) >= threshold;
    if (!keep[i]) ++removed;
  }
  if (removed == 0) return 0;
  if (state.m.size() == packed_size(cloud)) {
    const int stride = cloud.sh_stride();
    auto compact = [&](std::vector<double>& buf) {
      std::vector<double> out;
      out.reserve(buf.size());
      size_t base = 0;
      for (int width : {3, 3, 4, 1}) {
        for (size_t i = 0; i < n; ++i)
          if (keep[i]) out.insert(out.end(), buf.begin() + base + i * width, buf.begin() + base + (i + 1) * width);
        base += n * width;
      }
      for (size_t i = 0; i < n; ++i)
        if (keep[i]) out.insert(out.end(), buf.begin() + base + i * stride, buf.begin() + base + (i + 1) * stride);
      buf = std::move(out);
    };
    compact(state.m);
    compact(state.v);
  }
  cloud.filter(keep);
  return removed;
}

double scene_extent(std::span<const Frame> frames) {
  if (frames.empty()) return 1.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& f : frames) mean += f.view.camera_center();
  mean /= static_cast<double>(frames.size());
  double radius = 0.0;
  for (const auto& f : frames) radius = std::max(radius, (f.view.camera_center() - mean).norm());
  return std::max(1.0, 1.1 * radius);
}

TrainReport train(TrainState& state, std::span<const Frame> frames, const TrainConfig& cfg) {
  cfg.validate();
  if (frames.empty()) throw InvalidArgument("training needs at least one frame");
  if (state.cloud.empty()) throw InvalidArgument("training needs a non-empty Gaussian cloud");
  for (const auto& f : frames)
    if (f.rgb.width != f.view.width || f.rgb.height != f.view.height)
      throw InvalidArgument("frame image does not match its camera size");

  const double extent = scene_extent(frames);
  const size_t nf = frames.size();
  TrainReport report;
  std::vector<size_t> order(nf);
  std::int64_t cached_epoch = -1;

  for (int it = state.iteration; it < cfg.iterations; ++it) {
    // Visit order is a pure function of (seed, epoch) so resumed runs replay it exactly.
    const std::int64_t epoch = it / static_cast<std::int64_t>(nf);
    if (epoch != cached_epoch) {
      std::iota(order.begin(), order.end(), size_t{0});
      std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(epoch));
      std::shuffle(order.begin(), order.end(), rng);
      cached_epoch = epoch;
    }
    const Frame& frame = frames[order[static_cast<size_t>(it) % nf]];
    LossValue lv;
    const Gradients g = backward(state.cloud, frame.view, frame.rgb, cfg.ssim_weight, cfg.background, &lv);
    const double progress = static_cast<double>(it) / static_cast<double>(cfg.iterations);
    const double lr_mean = cfg.lr_mean * extent * std::pow(cfg.lr_mean_final_fraction, progress);
    adam_step(state.cloud, state.adam, g, cfg, lr_mean);
    if (cfg.prune_interval > 0 && (it + 1) % cfg.prune_interval == 0 && it + 1 < cfg.iterations) {
      prune(state.cloud, state.adam, cfg.opacity_prune_threshold);
      if (state.cloud.empty()) throw InvalidArgument("pruning removed every Gaussian");
    }
    report.loss.push_back(lv.total);
    report.gaussian_count.push_back(state.cloud.size());
  }
  state.iteration = std::max(state.iteration, cfg.iterations);
  for (const auto& f : frames) report.final_psnr.push_back(psnr(render::render(state.cloud, f.view, cfg.background), f.rgb));
  return report;
}

std::pair<GaussianCloud, TrainReport> train(std::span<const Frame> frames, const PointCloud& pc, double voxel_size,
                                            const TrainConfig& cfg, int sh_degree) {
  if (frames.empty()) throw InvalidArgument("training needs at least one frame");
  TrainState state;
  state.cloud = init_from_pointcloud(pc, voxel_size, sh_degree);
  TrainReport report = train(state, frames, cfg);
  return {std::move(state.cloud), std::move(report)};
}

}  // namespace splatr::train
