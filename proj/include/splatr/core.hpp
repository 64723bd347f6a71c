#pragma once

// Domain types and geometry shared by every stage of the pipeline.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Thrown for violated preconditions (bad shapes, non-finite parameters, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an on-disk artifact cannot be parsed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quaternions are stored scalar-first: (w, x, y, z).
using Quat = Vec4;

inline Quat identity_quat() { return Quat(1.0, 0.0, 0.0, 0.0); }
Quat normalize_quat(const Quat& q);
Quat quat_from_axis_angle(const Vec3& axis, double angle);
Quat quat_multiply(const Quat& a, const Quat& b);
Mat3 quat_to_matrix(const Quat& q);
Quat matrix_to_quat(const Mat3& r);

// ---------------------------------------------------------------------------
// World state

struct ObjectState {
  std::string object_id;
  Vec3 position = Vec3::Zero();
  Quat orientation = identity_quat();
  std::optional<double> openness;  // empty: not openable

  /// Throws InvalidArgument when the quaternion is not unit or openness is out of range.
  void validate() const;
};

struct WorldState {
  std::vector<ObjectState> objects;

  void validate() const;
  const ObjectState* find(const std::string& id) const;
};

// ---------------------------------------------------------------------------
// Camera

/// Rigid world->camera transform: x_cam = rotation * x_world + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
  RigidTransform inverse() const;
};

/// Pinhole camera. Pixel (u, v) addresses the center of column u, row v.
struct CameraView {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  RigidTransform pose;  // world -> camera

  void validate() const;
  Vec3 camera_center() const;
  /// Camera-frame point -> pixel coordinates (no culling).
  Vec2 project_camera(const Vec3& p_cam) const;
  /// World point -> pixel coordinates and camera-frame depth.
  std::pair<Vec2, double> project_world(const Vec3& p_world) const;
};

/// Looks from `eye` toward `target` with world +z as up (OpenCV camera axes).
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

// ---------------------------------------------------------------------------
// Images

/// Interleaved RGB float image, values nominally in [0,1].
struct ImageRGB {
  int width = 0, height = 0;
  std::vector<float> data;

  ImageRGB() = default;
  ImageRGB(int w, int h, float fill = 0.0f) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}
  float& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

/// Single-channel float image. Depth images use 0 as the invalid sentinel.
struct ImageF {
  int width = 0, height = 0;
  std::vector<float> data;

  ImageF() = default;
  ImageF(int w, int h, float fill = 0.0f) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}
  float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

/// Row-major boolean pixel mask.
struct Mask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h, bool fill = false) : width(w), height(h), data(static_cast<size_t>(w) * h, fill ? 1 : 0) {}
  bool at(int x, int y) const { return data[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { data[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  size_t count() const;
};

// ---------------------------------------------------------------------------
// Gaussians

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One Gaussian primitive with raw (pre-activation) parameters.
struct Gaussian {
  Vec3 mean = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Quat rotation = identity_quat();
  double opacity_logit = 0.0;
  std::vector<double> sh;  // (degree+1)^2 coefficients x 3 channels, coefficient-major

  Vec3 scale() const { return log_scale.array().exp(); }
  double opacity() const;
};

/// Structure-of-arrays set of Gaussians.
struct GaussianCloud {
  int sh_degree = 0;
  std::vector<Vec3> means;
  std::vector<Vec3> log_scales;
  std::vector<Quat> rotations;
  std::vector<double> opacity_logits;
  std::vector<double> sh;  // size() * sh_stride()

  size_t size() const { return means.size(); }
  bool empty() const { return means.empty(); }
  int sh_stride() const { return 3 * sh_coeff_count(sh_degree); }

  Gaussian get(size_t i) const;
  void push_back(const Gaussian& g);
  /// Keeps entries where keep[i] is true.
  void filter(const std::vector<bool>& keep);
  /// Throws InvalidArgument on inconsistent array lengths or non-finite values.
  void validate() const;
};

double sigmoid(double x);
double logit(double p);

/// DC spherical-harmonic coefficient that renders as `rgb`.
double rgb_to_sh_dc(double rgb);

// ---------------------------------------------------------------------------
// Point clouds

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void append(const PointCloud& other);
  Vec3 centroid() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Geometry operations

/// Sigma = R S S^T R^T for activated (positive) scales.
Mat3 covariance_from(const Vec3& scale, const Quat& rotation);

/// exp(-1/2 (x-mu)^T Sigma^-1 (x-mu)).
double evaluate_gaussian(const Gaussian& g, const Vec3& x);

/// Pinhole backprojection of valid (> 0) depths into the world frame.
/// Colors are taken from `color` when provided and sized like the depth image.
PointCloud backproject(const CameraView& view, const ImageF& depth, const ImageRGB* color = nullptr,
                       const Mask* select = nullptr, int stride = 1);

}  // namespace splatr
