#pragma once

// Real spherical-harmonic color evaluation (degrees 0..3) and its derivatives.

#include "splatr/core.hpp"

#include <array>
#include <span>

namespace splatr::sh {

constexpr int kMaxCoeffs = 16;

/// Basis values Y_k(dir) for k < (degree+1)^2. `dir` must be unit length.
std::array<double, kMaxCoeffs> basis(int degree, const Vec3& dir);

/// Basis values plus d Y_k / d dir (rows k).
void basis_with_jacobian(int degree, const Vec3& dir, std::array<double, kMaxCoeffs>& values,
                         std::array<Vec3, kMaxCoeffs>& jacobian);

/// Color seen from `camera_center` toward a Gaussian centered at `mean`:
/// clamp(sum_k Y_k c_k + 0.5, 0, 1) per channel. `coeffs` is coefficient-major RGB.
Vec3 eval_color(int degree, std::span<const double> coeffs, const Vec3& mean, const Vec3& camera_center);

/// Reverse-mode step of eval_color. Accumulates into `d_coeffs` (same layout as coeffs)
/// and returns dL/d mean through the view direction.
Vec3 backward_color(int degree, std::span<const double> coeffs, const Vec3& mean, const Vec3& camera_center,
                    const Vec3& d_color, std::span<double> d_coeffs);

}  // namespace splatr::sh
