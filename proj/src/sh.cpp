#include "splatr/sh.hpp"

#include <algorithm>
#include <cmath>

namespace splatr::sh {

namespace {

// Forward-mode value with a 3-component tangent, enough to differentiate the basis polynomials.
struct Dual {
  double v = 0.0;
  Vec3 d = Vec3::Zero();
};

Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + b.d * a.v}; }
Dual operator*(double s, const Dual& a) { return {s * a.v, s * a.d}; }
Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }

double value(const Dual& x) { return x.v; }

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277,  -0.5900435899266435};

template <class T>
void eval_basis(int degree, const T& x, const T& y, const T& z, const T& one, std::array<T, kMaxCoeffs>& out) {
  out[0] = kC0 * one;
  if (degree < 1) return;
  out[1] = -kC1 * y;
  out[2] = kC1 * z;
  out[3] = -kC1 * x;
  if (degree < 2) return;
  const T xx = x * x, yy = y * y, zz = z * z;
  const T xy = x * y, yz = y * z, xz = x * z;
  out[4] = kC2[0] * xy;
  out[5] = kC2[1] * yz;
  out[6] = kC2[2] * (2.0 * zz - xx - yy);
  out[7] = kC2[3] * xz;
  out[8] = kC2[4] * (xx - yy);
  if (degree < 3) return;
  out[9] = kC3[0] * y * (3.0 * xx - yy);
  out[10] = kC3[1] * xy * z;
  out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  out[14] = kC3[5] * z * (xx - yy);
  out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

void check_degree(int degree) {
  if (degree < 0 || degree > 3) throw InvalidArgument("SH degree must be in 0..3");
}

}  // namespace

std::array<double, kMaxCoeffs> basis(int degree, const Vec3& dir) {
  check_degree(degree);
  std::array<double, kMaxCoeffs> out{};
  eval_basis<double>(degree, dir.x(), dir.y(), dir.z(), 1.0, out);
  return out;
}

void basis_with_jacobian(int degree, const Vec3& dir, std::array<double, kMaxCoeffs>& values,
                         std::array<Vec3, kMaxCoeffs>& jacobian) {
  check_degree(degree);
  const Dual x{dir.x(), Vec3::UnitX()}, y{dir.y(), Vec3::UnitY()}, z{dir.z(), Vec3::UnitZ()};
  const Dual one{1.0, Vec3::Zero()};
  std::array<Dual, kMaxCoeffs> out{};
  eval_basis<Dual>(degree, x, y, z, one, out);
  for (int k = 0; k < kMaxCoeffs; ++k) {
    values[k] = value(out[k]);
    jacobian[k] = out[k].d;
  }
}

Vec3 eval_color(int degree, std::span<const double> coeffs, const Vec3& mean, const Vec3& camera_center) {
  const int n = sh_coeff_count(degree);
  if (static_cast<int>(coeffs.size()) != 3 * n) throw InvalidArgument("SH coefficient block size mismatch");
  Vec3 dir = mean - camera_center;
  const double len = dir.norm();
  dir = len > 0.0 ? Vec3(dir / len) : Vec3(Vec3::UnitZ());
  const auto y = basis(degree, dir);
  Vec3 c = Vec3::Constant(0.5);
  for (int k = 0; k < n; ++k)
    for (int ch = 0; ch < 3; ++ch) c[ch] += y[k] * coeffs[3 * k + ch];
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

Vec3 backward_color(int degree, std::span<const double> coeffs, const Vec3& mean, const Vec3& camera_center,
                    const Vec3& d_color, std::span<double> d_coeffs) {
  const int n = sh_coeff_count(degree);
  const Vec3 v = mean - camera_center;
  const double len = v.norm();
  const Vec3 dir = len > 0.0 ? Vec3(v / len) : Vec3(Vec3::UnitZ());
  std::array<double, kMaxCoeffs> y{};
  std::array<Vec3, kMaxCoeffs> dy{};
  basis_with_jacobian(degree, dir, y, dy);

  // Clamped channels pass no gradient.
  Vec3 raw = Vec3::Constant(0.5);
  for (int k = 0; k < n; ++k)
    for (int ch = 0; ch < 3; ++ch) raw[ch] += y[k] * coeffs[3 * k + ch];
  Vec3 g = d_color;
  for (int ch = 0; ch < 3; ++ch)
    if (raw[ch] < 0.0 || raw[ch] > 1.0) g[ch] = 0.0;

  Vec3 d_dir = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      d_coeffs[3 * k + ch] += y[k] * g[ch];
      s += coeffs[3 * k + ch] * g[ch];
    }
    d_dir += s * dy[k];
  }
  if (degree == 0 || !(len > 0.0)) return Vec3::Zero();
  // d dir / d v = (I - dir dir^T) / |v|
  return (d_dir - dir * dir.dot(d_dir)) / len;
}

}  // namespace splatr::sh
