#include "splatr/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatr {

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

Quat normalize_quat(const Quat& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("quaternion has zero or non-finite norm");
  return q / n;
}

Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double s = std::sin(angle / 2.0);
  return Quat(std::cos(angle / 2.0), a.x() * s, a.y() * s, a.z() * s);
}

Quat quat_multiply(const Quat& a, const Quat& b) {
  return Quat(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Mat3 quat_to_matrix(const Quat& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quat matrix_to_quat(const Mat3& r) {
  const Eigen::Quaterniond q(r);
  Quat out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0) out = -out;
  return out;
}

void ObjectState::validate() const {
  if (std::abs(orientation.norm() - 1.0) > 1e-6) throw InvalidArgument("object '" + object_id + "': quaternion not unit");
  if (!finite(position)) throw InvalidArgument("object '" + object_id + "': non-finite position");
  if (openness && (*openness < 0.0 || *openness > 1.0))
    throw InvalidArgument("object '" + object_id + "': openness outside [0,1]");
}

void WorldState::validate() const {
  std::vector<std::string> ids;
  ids.reserve(objects.size());
  for (const auto& o : objects) {
    o.validate();
    ids.push_back(o.object_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw InvalidArgument("duplicate object ids");
}

const ObjectState* WorldState::find(const std::string& id) const {
  for (const auto& o : objects)
    if (o.object_id == id) return &o;
  return nullptr;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

void CameraView::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("camera size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
    throw InvalidArgument("principal point outside the image");
  const Mat3& r = pose.rotation;
  if (!r.allFinite() || !pose.translation.allFinite()) throw InvalidArgument("non-finite camera pose");
  if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 || std::abs(r.determinant() - 1.0) > 1e-6)
    throw InvalidArgument("camera rotation is not a proper rotation");
}

Vec3 CameraView::camera_center() const { return -(pose.rotation.transpose() * pose.translation); }

Vec2 CameraView::project_camera(const Vec3& p) const {
  return Vec2(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

std::pair<Vec2, double> CameraView::project_world(const Vec3& p_world) const {
  const Vec3 p = pose.apply(p_world);
  return {project_camera(p), p.z()};
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  RigidTransform t;
  t.rotation.row(0) = right.transpose();
  t.rotation.row(1) = down.transpose();
  t.rotation.row(2) = forward.transpose();
  t.translation = -(t.rotation * eye);
  return t;
}

size_t Mask::count() const {
  return static_cast<size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// Band-0 SH basis constant; colors are offset by 0.5 so that zero coefficients render mid-gray.
double rgb_to_sh_dc(double rgb) { return (rgb - 0.5) / 0.28209479177387814; }

double Gaussian::opacity() const { return sigmoid(opacity_logit); }

Gaussian GaussianCloud::get(size_t i) const {
  Gaussian g;
  g.mean = means[i];
  g.log_scale = log_scales[i];
  g.rotation = rotations[i];
  g.opacity_logit = opacity_logits[i];
  const int stride = sh_stride();
  g.sh.assign(sh.begin() + static_cast<std::ptrdiff_t>(i * stride),
              sh.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
  return g;
}

void GaussianCloud::push_back(const Gaussian& g) {
  if (static_cast<int>(g.sh.size()) != sh_stride()) throw InvalidArgument("SH block does not match cloud degree");
  means.push_back(g.mean);
  log_scales.push_back(g.log_scale);
  rotations.push_back(g.rotation);
  opacity_logits.push_back(g.opacity_logit);
  sh.insert(sh.end(), g.sh.begin(), g.sh.end());
}

void GaussianCloud::filter(const std::vector<bool>& keep) {
  if (keep.size() != size()) throw InvalidArgument("filter mask length mismatch");
  const int stride = sh_stride();
  size_t out = 0;
  for (size_t i = 0; i < size(); ++i) {
    if (!keep[i]) continue;
    means[out] = means[i];
    log_scales[out] = log_scales[i];
    rotations[out] = rotations[i];
    opacity_logits[out] = opacity_logits[i];
    std::copy_n(sh.begin() + static_cast<std::ptrdiff_t>(i * stride), stride,
                sh.begin() + static_cast<std::ptrdiff_t>(out * stride));
    ++out;
  }
  means.resize(out);
  log_scales.resize(out);
  rotations.resize(out);
  opacity_logits.resize(out);
  sh.resize(out * stride);
}

void GaussianCloud::validate() const {
  if (sh_degree < 0 || sh_degree > 3) throw InvalidArgument("sh_degree must be in 0..3");
  const size_t n = size();
  if (log_scales.size() != n || rotations.size() != n || opacity_logits.size() != n ||
      sh.size() != n * static_cast<size_t>(sh_stride()))
    throw InvalidArgument("Gaussian cloud arrays have inconsistent lengths");
  for (size_t i = 0; i < n; ++i) {
    if (!means[i].allFinite() || !log_scales[i].allFinite() || !rotations[i].allFinite() ||
        !std::isfinite(opacity_logits[i]))
      throw InvalidArgument("non-finite Gaussian parameter");
  }
  for (double v : sh)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite SH coefficient");
}

void PointCloud::append(const PointCloud& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
  colors.insert(colors.end(), other.colors.begin(), other.colors.end());
}

Vec3 PointCloud::centroid() const {
  if (points.empty()) throw InvalidArgument("centroid of empty point cloud");
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

void PointCloud::validate() const {
  if (colors.size() != points.size()) throw InvalidArgument("point cloud colors/points length mismatch");
  for (const auto& p : points)
    if (!p.allFinite()) throw InvalidArgument("non-finite point");
  for (const auto& c : colors)
    if ((c.array() < 0.0).any() || (c.array() > 1.0).any()) throw InvalidArgument("point color outside [0,1]");
}

Mat3 covariance_from(const Vec3& scale, const Quat& rotation) {
  if (!scale.allFinite() || !rotation.allFinite()) throw InvalidArgument("covariance_from: non-finite input");
  if ((scale.array() <= 0.0).any()) throw InvalidArgument("covariance_from: scales must be positive");
  const Mat3 r = quat_to_matrix(normalize_quat(rotation));
  const Mat3 m = r * scale.asDiagonal();
  return m * m.transpose();
}

double evaluate_gaussian(const Gaussian& g, const Vec3& x) {
  if (!x.allFinite()) throw InvalidArgument("evaluate_gaussian: non-finite point");
  // Work in the Gaussian's principal frame: d = S^-1 R^T (x - mu).
  const Mat3 r = quat_to_matrix(normalize_quat(g.rotation));
  const Vec3 s = g.scale();
  if ((s.array() <= 0.0).any() || !s.allFinite()) throw InvalidArgument("evaluate_gaussian: invalid scale");
  const Vec3 d = (r.transpose() * (x - g.mean)).cwiseQuotient(s);
  return std::exp(-0.5 * d.squaredNorm());
}

PointCloud backproject(const CameraView& view, const ImageF& depth, const ImageRGB* color, const Mask* select,
                       int stride) {
  if (depth.width != view.width || depth.height != view.height)
    throw InvalidArgument("backproject: depth image size does not match the camera");
  if (color && (color->width != depth.width || color->height != depth.height))
    throw InvalidArgument("backproject: color image size mismatch");
  if (select && (select->width != depth.width || select->height != depth.height))
    throw InvalidArgument("backproject: mask size mismatch");
  if (stride < 1) throw InvalidArgument("backproject: stride must be >= 1");
  const RigidTransform cam_to_world = view.pose.inverse();
  PointCloud out;
  for (int y = 0; y < depth.height; y += stride) {
    for (int x = 0; x < depth.width; x += stride) {
      const double d = depth.at(x, y);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      if (select && !select->at(x, y)) continue;
      const Vec3 p_cam((x - view.cx) / view.fx * d, (y - view.cy) / view.fy * d, d);
      out.points.push_back(cam_to_world.apply(p_cam));
      if (color) {
        out.colors.emplace_back(std::clamp<double>(color->at(x, y, 0), 0.0, 1.0),
                                std::clamp<double>(color->at(x, y, 1), 0.0, 1.0),
                                std::clamp<double>(color->at(x, y, 2), 0.0, 1.0));
      } else {
        out.colors.emplace_back(0.5, 0.5, 0.5);
      }
    }
  }
  return out;
}

}  // namespace splatr
