#include "doctest.h"
#include "splatr/core.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace splatr;

TEST_CASE("covariance_from: identity rotation gives squared scales on the diagonal") {
  const Mat3 s = covariance_from(Vec3(1, 2, 3), identity_quat());
  CHECK((s - Vec3(1, 4, 9).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance_from: isotropic scale is rotation invariant") {
  const Mat3 s = covariance_from(Vec3(1, 1, 1), quat_from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2));
  CHECK((s - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance_from: symmetric positive definite with det = (s1 s2 s3)^2") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec3 s(std::exp(u(rng)), std::exp(u(rng)), std::exp(u(rng)));
    const Quat q = normalize_quat(Quat(u(rng), u(rng), u(rng), u(rng)));
    const Mat3 c = covariance_from(s, q);
    REQUIRE((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE(Eigen::LLT<Mat3>(c).info() == Eigen::Success);
    const double expected = std::pow(s.prod(), 2);
    REQUIRE(std::abs(c.determinant() - expected) <= 1e-9 * expected);
  }
}

TEST_CASE("covariance_from: non-finite or non-positive input is rejected") {
  CHECK_THROWS_AS(covariance_from(Vec3(1, NAN, 1), identity_quat()), InvalidArgument);
  CHECK_THROWS_AS(covariance_from(Vec3(1, 0, 1), identity_quat()), InvalidArgument);
}

TEST_CASE("evaluate_gaussian") {
  Gaussian g;
  g.mean = Vec3(0.3, -0.2, 1.0);
  SUBCASE("peak at the mean") { CHECK(evaluate_gaussian(g, g.mean) == doctest::Approx(1.0)); }
  SUBCASE("closed form with unit covariance") {
    const Vec3 x = g.mean + Vec3(std::sqrt(2.0 * std::log(2.0)), 0, 0);
    CHECK(evaluate_gaussian(g, x) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("invariant under a joint rotation of offset and orientation") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 100; ++t) {
      Gaussian a;
      a.log_scale = Vec3(u(rng), u(rng), u(rng));
      a.rotation = normalize_quat(Quat(u(rng), u(rng), u(rng), u(rng)));
      const Vec3 d(u(rng), u(rng), u(rng));
      const Quat extra = normalize_quat(Quat(u(rng), u(rng), u(rng), u(rng)));
      Gaussian b = a;
      b.rotation = quat_multiply(extra, a.rotation);
      const double va = evaluate_gaussian(a, a.mean + d);
      const double vb = evaluate_gaussian(b, b.mean + quat_to_matrix(extra) * d);
      REQUIRE(va == doctest::Approx(vb).epsilon(1e-10));
      REQUIRE(va > 0.0);
      REQUIRE(va <= 1.0);
    }
  }
}

TEST_CASE("backproject") {
  CameraView v;
  v.width = 8;
  v.height = 6;
  v.fx = 10;
  v.fy = 12;
  v.cx = 4;
  v.cy = 3;
  SUBCASE("principal ray") {
    ImageF depth(8, 6, 0.0f);
    depth.at(4, 3) = 2.5f;
    const PointCloud pc = backproject(v, depth);
    REQUIRE(pc.size() == 1);
    CHECK((pc.points[0] - Vec3(0, 0, 2.5)).norm() < 1e-12);
  }
  SUBCASE("no valid pixels") { CHECK(backproject(v, ImageF(8, 6, 0.0f)).empty()); }
  SUBCASE("constant depth matches the per-pixel formula and reprojects exactly") {
    v.pose = look_at(Vec3(1, 2, 3), Vec3(0, 0, 0));
    ImageF depth(8, 6, 1.75f);
    const PointCloud pc = backproject(v, depth);
    REQUIRE(pc.size() == 48);
    const Mat3 Rt = v.pose.rotation.transpose();
    size_t k = 0;
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 8; ++x, ++k) {
        const Vec3 cam((x - 4.0) / 10.0 * 1.75, (y - 3.0) / 12.0 * 1.75, 1.75);
        const Vec3 world = Rt * (cam - v.pose.translation);
        CHECK((pc.points[k] - world).norm() < 1e-12);
        const auto [px, z] = v.project_world(pc.points[k]);
        CHECK(std::abs(px.x() - x) < 1e-4);
        CHECK(std::abs(px.y() - y) < 1e-4);
        CHECK(z == doctest::Approx(1.75));
      }
  }
}

TEST_CASE("camera and state validation") {
  CameraView v;
  v.width = 4;
  v.height = 4;
  v.cx = 4.0;
  CHECK_THROWS_AS(v.validate(), InvalidArgument);
  v.cx = 1.5;
  v.cy = 1.5;
  CHECK_NOTHROW(v.validate());
  v.pose.rotation(0, 0) = -1.0;
  CHECK_THROWS_AS(v.validate(), InvalidArgument);

  WorldState w;
  w.objects.push_back({"a", Vec3::Zero(), identity_quat(), std::nullopt});
  w.objects.push_back({"a", Vec3::Ones(), identity_quat(), 0.5});
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
  w.objects[1].object_id = "b";
  CHECK_NOTHROW(w.validate());
  w.objects[1].openness = 1.5;
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
  w.objects[1].openness = 0.5;
  w.objects[1].orientation = Quat(1, 1, 0, 0);
  CHECK_THROWS_AS(w.validate(), InvalidArgument);
}
