#include "doctest.h"
#include "splatr/explore.hpp"
#include "support/grid_oracles.hpp"

#include <cmath>
#include <map>
#include <random>
#include <set>

using namespace splatr;
using namespace splatr::explore;
using splatr::testing::dijkstra8;
using splatr::testing::random_obstacle_map;

namespace {

OccupancyMap free_map(int rows, int cols, double res = 1.0) {
  OccupancyMap m(rows, cols, res, Vec2::Zero());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m.set({r, c}, CellState::kFree);
  return m;
}

}  // namespace

TEST_CASE("occupancy map geometry") {
  OccupancyMap m(4, 6, 0.25, Vec2(-1.0, 2.0));
  CHECK(m.count(CellState::kUnknown) == 24);
  const Cell c = m.cell_of(Vec2(-0.6, 2.3));
  CHECK(c == Cell{1, 1});
  CHECK((m.center_of(c) - Vec2(-0.625, 2.375)).norm() < 1e-12);
  CHECK_THROWS_AS(OccupancyMap(0, 3, 1.0, Vec2::Zero()), InvalidArgument);
  CHECK_THROWS_AS(OccupancyMap(3, 3, 0.0, Vec2::Zero()), InvalidArgument);
}

TEST_CASE("update_map") {
  OccupancyMap m(5, 5, 1.0, Vec2::Zero());
  const auto before = m.data();
  update_map(m, {});
  CHECK(m.data() == before);
  update_map(m, {{{2, 2}, {2, 3}}, Cell{2, 4}});
  CHECK(m.at({2, 2}) == CellState::kFree);
  CHECK(m.at({2, 3}) == CellState::kFree);
  CHECK(m.at({2, 4}) == CellState::kObstacle);
  CHECK(m.count(CellState::kUnknown) == 22);
  // The agent's own cell is never an obstacle.
  update_map(m, {{{1, 1}}, Cell{1, 1}});
  CHECK(m.at({1, 1}) == CellState::kFree);
  update_map(m, {{}, Cell{9, 9}});
  CHECK(m.count(CellState::kObstacle) == 1);
}

TEST_CASE("sample_goal") {
  std::mt19937_64 rng(1);
  SUBCASE("all known") {
    OccupancyMap m = free_map(4, 4);
    CHECK_FALSE(sample_goal(m, {0, 0}, rng).has_value());
  }
  SUBCASE("single reachable unknown cell") {
    OccupancyMap m = free_map(4, 4);
    m.set({3, 3}, CellState::kUnknown);
    m.set({0, 3}, CellState::kObstacle);
    m.set({1, 3}, CellState::kUnknown);  // walled off below
    m.set({2, 3}, CellState::kObstacle);
    m.set({2, 2}, CellState::kObstacle);
    m.set({3, 2}, CellState::kObstacle);
    const auto g = sample_goal(m, {0, 0}, rng);
    REQUIRE(g.has_value());
    CHECK(*g == Cell{1, 3});
  }
  SUBCASE("uniform over 20 candidates (chi-square, p > 0.01)") {
    OccupancyMap m(5, 10, 1.0, Vec2::Zero());
    for (int c = 0; c < 10; ++c) m.set({2, c}, CellState::kObstacle);
    for (int r = 3; r < 5; ++r)
      for (int c = 0; c < 10; ++c) m.set({r, c}, CellState::kFree);
    // Rows 0..1 are the 20 reachable unknown cells; the free rows below are walled off.
    std::map<Cell, int> counts;
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[*sample_goal(m, {0, 0}, rng)];
    REQUIRE(counts.size() == 20);
    double chi2 = 0.0;
    for (const auto& [cell, k] : counts) chi2 += (k - n / 20.0) * (k - n / 20.0) / (n / 20.0);
    CHECK(chi2 < 36.19);  // 19 degrees of freedom, upper 1% point
  }
  SUBCASE("agent boxed in") {
    OccupancyMap m(3, 3, 1.0, Vec2::Zero());
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m.set({r, c}, CellState::kObstacle);
    m.set({1, 1}, CellState::kFree);
    CHECK_FALSE(sample_goal(m, {1, 1}, rng).has_value());
  }
}

TEST_CASE("fmm_distance") {
  SUBCASE("zero at the source, error on obstacle source") {
    OccupancyMap m = free_map(10, 10, 0.5);
    CHECK(fmm_distance(m, {3, 4})[m.index({3, 4})] == 0.0);
    m.set({1, 1}, CellState::kObstacle);
    CHECK_THROWS_AS(fmm_distance(m, {1, 1}), InvalidArgument);
  }
  SUBCASE("empty 200x200 grid against Euclidean distance") {
    const double res = 0.05;
    OccupancyMap m(200, 200, res, Vec2::Zero());  // unknown cells are traversable
    const auto T = fmm_distance(m, {0, 0});
    CHECK(T[m.index({30, 40})] == doctest::Approx(50 * res).epsilon(0.02));
    double worst = 0.0;
    for (int r = 0; r < 200; r += 7)
      for (int c = 0; c < 200; c += 7) {
        if (r + c == 0) continue;
        worst = std::max(worst, std::abs(T[m.index({r, c})] / (res * std::hypot(r, c)) - 1.0));
      }
    CHECK(worst < 0.02);
  }
  SUBCASE("wall with one gap against Dijkstra") {
    OccupancyMap m = free_map(100, 100, 0.1);
    for (int r = 0; r < 100; ++r)
      if (r < 45 || r > 54) m.set({r, 50}, CellState::kObstacle);
    const auto T = fmm_distance(m, {10, 10});
    const auto D = dijkstra8(m, {10, 10});
    for (Cell c : {Cell{10, 90}, Cell{90, 90}, Cell{20, 70}}) CHECK(T[m.index(c)] == doctest::Approx(D[m.index(c)]).epsilon(0.05));
  }
  SUBCASE("enclosed region is unreachable") {
    OccupancyMap m = free_map(9, 9);
    for (int i = 0; i < 9; ++i) m.set({4, i}, CellState::kObstacle);
    const auto T = fmm_distance(m, {0, 0});
    CHECK(std::isinf(T[m.index({8, 8})]));
    CHECK(std::isinf(T[m.index({4, 4})]));
  }
  SUBCASE("triangle consistency on random maps") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      OccupancyMap m = random_obstacle_map(rng, 40, 40, 10);
      m.set({0, 0}, CellState::kFree);
      const auto T = fmm_distance(m, {0, 0});
      std::uniform_int_distribution<int> u(0, 39);
      for (int k = 0; k < 30; ++k) {
        const Cell a{u(rng), u(rng)};
        if (m.at(a) == CellState::kObstacle || std::isinf(T[m.index(a)])) continue;
        const auto G = dijkstra8(m, a);
        for (int j = 0; j < 10; ++j) {
          const Cell b{u(rng), u(rng)};
          if (std::isinf(G[m.index(b)])) continue;
          CHECK(std::abs(T[m.index(a)] - T[m.index(b)]) <= G[m.index(b)] * 1.05 + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("plan_path") {
  SUBCASE("start equals goal") {
    OccupancyMap m = free_map(5, 5);
    CHECK(plan_path(m, {2, 2}, {2, 2}) == std::vector<Cell>{{2, 2}});
  }
  SUBCASE("straight corridor") {
    OccupancyMap m = free_map(3, 20);
    for (int c = 0; c < 20; ++c) {
      m.set({0, c}, CellState::kObstacle);
      m.set({2, c}, CellState::kObstacle);
    }
    const auto p = plan_path(m, {1, 0}, {1, 19});
    CHECK(std::abs(static_cast<int>(p.size()) - 20) <= 1);
    CHECK(path_length(p, 1.0) == doctest::Approx(19.0));
  }
  SUBCASE("unreachable goal") {
    OccupancyMap m = free_map(5, 5);
    for (int i = 0; i < 5; ++i) m.set({2, i}, CellState::kObstacle);
    CHECK_THROWS_AS(plan_path(m, {0, 0}, {4, 4}), InvalidArgument);
  }
  SUBCASE("50 random maps against the Dijkstra optimum") {
    std::mt19937_64 rng(11);
    int done = 0;
    while (done < 50) {
      OccupancyMap m = random_obstacle_map(rng, 60, 60, 25);
      std::uniform_int_distribution<int> u(0, 59);
      const Cell s{u(rng), u(rng)}, g{u(rng), u(rng)};
      if (m.at(s) == CellState::kObstacle || m.at(g) == CellState::kObstacle) continue;
      const auto D = dijkstra8(m, g);
      if (std::isinf(D[m.index(s)]) || s == g) continue;
      const auto p = plan_path(m, s, g);
      const auto T = fmm_distance(m, g);
      REQUIRE(p.front() == s);
      REQUIRE(p.back() == g);
      for (size_t i = 0; i < p.size(); ++i) {
        CHECK(m.at(p[i]) != CellState::kObstacle);
        if (i > 0) CHECK(T[m.index(p[i])] < T[m.index(p[i - 1])]);
      }
      CHECK(path_length(p, m.resolution()) <= D[m.index(s)] * 1.05 + 1e-12);
      ++done;
    }
  }
}

TEST_CASE("explore terminates and recovers the walkable set of closed rooms") {
  for (int seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    // Ground truth: a 10x10 room with a wall ring and a few interior pillars.
    OccupancyMap truth = free_map(12, 12);
    for (int i = 0; i < 12; ++i)
      for (Cell c : {Cell{0, i}, Cell{11, i}, Cell{i, 0}, Cell{i, 11}}) truth.set(c, CellState::kObstacle);
    std::uniform_int_distribution<int> u(2, 9);
    for (int k = 0; k < 6; ++k) truth.set({u(rng), u(rng)}, CellState::kObstacle);
    truth.set({5, 5}, CellState::kFree);

    OccupancyMap map(12, 12, 1.0, Vec2::Zero());
    auto move = [&](const Cell&, const Cell& to) { return truth.at(to) == CellState::kFree; };
    const ExplorationResult res = run_exploration(map, {5, 5}, rng, move, 5000);
    CHECK(res.exhausted);

    std::set<Cell> walkable, freed;
    const auto reach = dijkstra8(truth, {5, 5});
    for (int r = 0; r < 12; ++r)
      for (int c = 0; c < 12; ++c) {
        if (std::isfinite(reach[truth.index({r, c})])) walkable.insert({r, c});
        if (map.at({r, c}) == CellState::kFree) freed.insert({r, c});
      }
    CHECK(freed == walkable);
  }
}
