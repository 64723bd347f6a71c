#include "doctest.h"
#include "splatr/objects.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace splatr;
using namespace splatr::objects;

namespace {

PointCloud cloud_of(const std::vector<Vec3>& pts) {
  PointCloud pc;
  for (const Vec3& p : pts) {
    pc.points.push_back(p);
    pc.colors.push_back(Vec3::Constant(0.5));
  }
  return pc;
}

PointCloud random_cloud(std::mt19937_64& rng, int n, const Vec3& lo, const Vec3& hi) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.push_back(lo + (hi - lo).cwiseProduct(Vec3(u(rng), u(rng), u(rng))));
  return cloud_of(pts);
}

ObjectNode node(std::vector<double> g, PointCloud pc, Setting s = Setting::kShuffled) {
  ObjectNode n;
  n.setting = s;
  n.fused = g;
  double norm = 0;
  for (double v : g) norm += v * v;
  for (double& v : g) v /= std::sqrt(norm);
  n.embedding = g;
  n.points = std::move(pc);
  n.center = n.points.centroid();
  return n;
}

double brute_nnratio(const PointCloud& p, const PointCloud& q, double thr) {
  size_t hits = 0;
  for (const Vec3& a : p.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& b : q.points) best = std::min(best, (a - b).norm());
    hits += best <= thr;
  }
  return static_cast<double>(hits) / p.size();
}

}  // namespace

TEST_CASE("nnratio") {
  std::mt19937_64 rng(1);
  const PointCloud a = random_cloud(rng, 300, Vec3::Zero(), Vec3::Ones());
  CHECK(nnratio(a, a, 0.05) == 1.0);
  PointCloud far = a;
  for (Vec3& p : far.points) p.x() += 10.0;
  CHECK(nnratio(a, far, 0.1) == 0.0);
  CHECK_THROWS_AS(nnratio(a, PointCloud{}, 0.1), InvalidArgument);
  for (int t = 0; t < 10; ++t) {
    const PointCloud p = random_cloud(rng, 200 + 180 * t, Vec3::Zero(), Vec3::Ones());
    const PointCloud q = random_cloud(rng, 2000 - 150 * t, Vec3(0.3, 0, 0), Vec3(1.3, 1, 1));
    const double thr = 0.02 + 0.01 * t;
    CHECK(nnratio(p, q, thr) == brute_nnratio(p, q, thr));
  }
}

TEST_CASE("node_similarity") {
  // Embeddings with cosine 0.8; 2 of 5 points have a neighbor within the threshold.
  const PointCloud p = cloud_of({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)});
  const PointCloud q = cloud_of({Vec3(0, 0.01, 0), Vec3(1, 0.01, 0), Vec3(9, 9, 9)});
  const ObjectNode a = node({1, 0}, p), b = node({0.8, 0.6}, q);
  NodeStoreConfig cfg;
  cfg.delta = 0.5;
  CHECK(node_similarity(a, b, cfg) == doctest::Approx(0.6));
  cfg.delta = 1.0;
  CHECK(node_similarity(a, b, cfg) == doctest::Approx(0.8));
  cfg.delta = 0.0;
  CHECK(node_similarity(a, b, cfg) == doctest::Approx(0.4));
  CHECK_THROWS_AS(node_similarity(a, node({1, 0}, q, Setting::kGoal), cfg), InvalidArgument);
}

TEST_CASE("node store insert") {
  const PointCloud pc = cloud_of({Vec3(0, 0, 0), Vec3(0.01, 0, 0)});
  SUBCASE("create then merge a duplicate") {
    NodeStore store;
    const auto r1 = store.insert(node({1, 0}, pc));
    CHECK_FALSE(r1.merged);
    CHECK(r1.node_id == 0);
    const auto r2 = store.insert(node({1, 0}, pc));
    CHECK(r2.merged);
    CHECK(r2.node_id == 0);
    CHECK(store.nodes().size() == 1);
    CHECK(store.nodes()[0].merge_count == 2);
  }
  SUBCASE("fusion of (1,0) and (0,1)") {
    NodeStoreConfig cfg;
    cfg.delta = 0.1;  // the clouds coincide, so the nodes merge despite orthogonal embeddings
    NodeStore store(cfg);
    store.insert(node({1, 0}, pc));
    REQUIRE(store.insert(node({0, 1}, pc)).merged);
    const ObjectNode& n = store.nodes()[0];
    CHECK(n.fused[0] == doctest::Approx(0.5));
    CHECK(n.fused[1] == doctest::Approx(0.5));
    CHECK(n.embedding[0] == doctest::Approx(std::sqrt(0.5)));
    CHECK(n.embedding[1] == doctest::Approx(std::sqrt(0.5)));
  }
  SUBCASE("pre-normalization vector is the arithmetic mean of all raw embeddings") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    NodeStoreConfig cfg;
    cfg.delta = 0.2;
    NodeStore store(cfg);
    std::vector<double> sum(6, 0.0);
    for (int k = 1; k <= 25; ++k) {
      std::vector<double> g(6);
      for (double& v : g) v = u(rng);
      for (int i = 0; i < 6; ++i) sum[i] += g[i];
      // Raw embedding enters unnormalized through `fused`.
      ObjectNode n = node(g, pc);
      n.fused = g;
      store.insert(n);
      REQUIRE(store.nodes().size() == 1);
      for (int i = 0; i < 6; ++i) CHECK(store.nodes()[0].fused[i] == doctest::Approx(sum[i] / k).epsilon(1e-12));
      double norm = 0;
      for (double v : store.nodes()[0].embedding) norm += v * v;
      CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("settings are kept apart and ties go to the lowest id") {
    NodeStoreConfig cfg;
    cfg.delta = 1.0;
    cfg.tau_sim = 0.5;
    NodeStore store(cfg);
    ObjectNode a = node({1, 0}, pc);
    store.insert(a);
    store.insert(node({0, 1}, pc));
    CHECK(store.insert(node({1, 0}, pc, Setting::kGoal)).node_id == 2);
    // Equidistant from nodes 0 and 1.
    const auto r = store.insert(node({1, 1}, pc));
    CHECK(r.merged);
    CHECK(r.node_id == 0);
    CHECK(store.nodes_in(Setting::kShuffled).size() == 2);
    CHECK(store.nodes_in(Setting::kGoal).size() == 1);
  }
  SUBCASE("at most one node changes per insert") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    NodeStore store;
    for (int k = 0; k < 40; ++k) {
      const auto before = store.nodes();
      const Vec3 off(std::floor(u(rng) * 3), 0, 0);
      PointCloud shifted = pc;
      for (Vec3& p : shifted.points) p += off;
      store.insert(node({u(rng), u(rng), u(rng)}, shifted));
      int changed = 0;
      for (size_t i = 0; i < before.size(); ++i)
        changed += before[i].fused != store.nodes()[i].fused || before[i].merge_count != store.nodes()[i].merge_count;
      changed += store.nodes().size() != before.size();
      CHECK(changed <= 1);
    }
  }
}

TEST_CASE("node_center") {
  const PointCloud pc = cloud_of({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 2, 0), Vec3(0, 2, 2)});
  CHECK((node_center(pc, CenterMode::kCentroid) - Vec3(0.5, 1, 0.5)).norm() < 1e-12);
  // One-sided sampling of a box face: the trimmed box center stays at the face center.
  std::vector<Vec3> pts;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) pts.push_back(Vec3(i * 0.01, j * 0.01, 0.1));
  for (int i = 0; i <= 20; ++i) pts.push_back(Vec3(i * 0.01, 0.0, 0.05));
  const Vec3 c = node_center(cloud_of(pts), CenterMode::kTrimmedBox);
  const Vec3 m = node_center(cloud_of(pts), CenterMode::kCentroid);
  CHECK(c.x() == doctest::Approx(0.1));
  CHECK(std::abs(c.y() - 0.1) < 0.01);
  CHECK(std::abs(m.y() - 0.1) > 0.004);
  // A few far outliers move the centroid but not the trimmed box.
  std::vector<Vec3> noisy = pts;
  for (int i = 0; i < 5; ++i) noisy.push_back(Vec3(0.1, 0.1, 3.0));
  CHECK(std::abs(node_center(cloud_of(noisy), CenterMode::kTrimmedBox).z() - 0.075) < 0.03);
  // A smaller blob a meter away does not pull the center.
  std::vector<Vec3> two = pts;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j) two.push_back(Vec3(1.1 + i * 0.01, j * 0.01, 0.1));
  const Vec3 c2 = node_center(cloud_of(two), CenterMode::kTrimmedBox);
  CHECK((c2 - c).norm() < 1e-9);
  CHECK(node_center(cloud_of(two), CenterMode::kCentroid).x() > 0.3);
}

TEST_CASE("refine_mask") {
  const int w = 32, h = 32, patch = 8;
  ObjectNode n;
  n.image = ImageRGB(w, h);
  n.patch = patch;
  n.patch_mask = change::Grid<std::uint8_t>(4, 4, 0);
  n.patch_mask.at(1, 1) = n.patch_mask.at(1, 2) = n.patch_mask.at(2, 1) = n.patch_mask.at(2, 2) = 1;
  n.x0 = n.y0 = 8;
  n.x1 = n.y1 = 23;
  SUBCASE("uniform depth fills the box") {
    n.depth = ImageF(w, h, 2.0f);
    const Mask m = refine_mask(n);
    CHECK(m.count() == 16 * 16);
    for (int y = 8; y < 24; ++y)
      for (int x = 8; x < 24; ++x) CHECK(m.at(x, y));
  }
  SUBCASE("object half and far background half") {
    n.depth = ImageF(w, h, 6.0f);
    Mask truth(w, h);
    for (int y = 8; y < 24; ++y)
      for (int x = 8; x < 16; ++x) {
        n.depth.at(x, y) = 2.0f + 0.01f * static_cast<float>(y - 8);
        truth.set(x, y, true);
      }
    n.crop = Mask(w, h);
    for (int y = 10; y < 20; ++y) n.crop.set(10, y, true);
    const Mask m = refine_mask(n);
    size_t inter = 0, uni = 0;
    for (int i = 0; i < w * h; ++i) {
      inter += m.data[i] && truth.data[i];
      uni += m.data[i] || truth.data[i];
    }
    CHECK(static_cast<double>(inter) / uni > 0.8);
  }
  SUBCASE("external mask overrides") {
    n.depth = ImageF(w, h, 2.0f);
    Mask ext(w, h);
    ext.set(3, 4, true);
    CHECK(refine_mask(n, &ext).data == ext.data);
  }
  SUBCASE("missing depth gives the patch mask") {
    const Mask m = refine_mask(n);
    CHECK(m.count() == 256);
    CHECK(m.at(8, 8));
    CHECK_FALSE(m.at(7, 8));
  }
}
