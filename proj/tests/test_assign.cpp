#include "doctest.h"
#include "splatr/assign.hpp"
#include "support/assign_oracles.hpp"

#include <random>
#include <set>

using namespace splatr;
using namespace splatr::assign;
using splatr::testing::brute_force_max;

namespace {

double total_of(const Eigen::MatrixXd& s, const std::vector<int>& a) {
  double t = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] >= 0) t += s(static_cast<int>(i), a[i]);
  return t;
}

bool is_matching(const std::vector<int>& a, int cols) {
  std::set<int> used;
  int matched = 0;
  for (int c : a) {
    if (c < 0) continue;
    if (c >= cols || !used.insert(c).second) return false;
    ++matched;
  }
  return matched == std::min(static_cast<int>(a.size()), cols);
}


ObjectState obj(const std::string& id, double x, std::optional<double> open = std::nullopt) {
  ObjectState s;
  s.object_id = id;
  s.position = Vec3(x, 0, 0);
  s.openness = open;
  return s;
}

}  // namespace

TEST_CASE("pair_similarity") {
  const std::vector<double> a{1, 2, 3}, b{-1, -2, -3}, c{3, 0, -1}, d{2, 4, 6};
  CHECK(pair_similarity(a, a) == doctest::Approx(1.0));
  CHECK(pair_similarity(a, b) == doctest::Approx(-1.0));
  CHECK(pair_similarity(a, c) == doctest::Approx(0.0));
  CHECK(pair_similarity(a, d) == doctest::Approx(1.0));
}

TEST_CASE("matching: worked examples") {
  SUBCASE("empty sides") {
    CHECK(match_hungarian({}, {}, Eigen::MatrixXd(0, 0)).pairs.empty());
    const auto r = match_greedy({1, 2}, {}, Eigen::MatrixXd(2, 0));
    CHECK(r.pairs.empty());
    CHECK(r.unmatched_shuffled == std::vector<int>{1, 2});
  }
  SUBCASE("diagonal-dominant 2x2") {
    Eigen::MatrixXd s(2, 2);
    s << 0.9, 0.1, 0.2, 0.8;
    const auto h = match_hungarian({1, 2}, {1, 2}, s);
    REQUIRE(h.pairs.size() == 2);
    CHECK(h.pairs[0].goal_id == 1);
    CHECK(h.pairs[1].goal_id == 2);
    CHECK(h.total() == doctest::Approx(1.7));
    CHECK(match_greedy({1, 2}, {1, 2}, s).total() == doctest::Approx(1.7));
  }
  SUBCASE("greedy is fooled") {
    Eigen::MatrixXd s(2, 2);
    s << 0.9, 0.85, 0.8, 0.1;
    const auto g = match_greedy({1, 2}, {1, 2}, s);
    CHECK(g.total() == doctest::Approx(1.0));
    CHECK(g.pairs[0].goal_id == 1);
    CHECK(g.pairs[1].goal_id == 2);
    const auto h = match_hungarian({1, 2}, {1, 2}, s);
    CHECK(h.total() == doctest::Approx(1.65));
    CHECK(h.pairs[0].goal_id == 2);
  }
  SUBCASE("ties resolve to the lexicographically smallest pairs") {
    const Eigen::MatrixXd s = Eigen::MatrixXd::Constant(3, 3, 0.5);
    const auto h = hungarian_max(s);
    CHECK(h == std::vector<int>{0, 1, 2});
    Eigen::MatrixXd t(2, 3);
    t << 1, 1, 0, 1, 1, 0;
    CHECK(hungarian_max(t) == std::vector<int>{0, 1});
  }
  SUBCASE("rectangular sides report unmatched nodes") {
    Eigen::MatrixXd s(3, 2);
    s << 0.1, 0.2, 0.9, 0.3, 0.4, 0.8;
    const auto h = match_hungarian({4, 5, 6}, {10, 11}, s);
    CHECK(h.total() == doctest::Approx(1.7));
    CHECK(h.unmatched_shuffled == std::vector<int>{4});
    CHECK(h.unmatched_goal.empty());
  }
  SUBCASE("shape and order validation") {
    CHECK_THROWS_AS(match_hungarian({1}, {1, 2}, Eigen::MatrixXd(1, 1)), InvalidArgument);
    CHECK_THROWS_AS(match_greedy({2, 1}, {1}, Eigen::MatrixXd(2, 1)), InvalidArgument);
  }
}

TEST_CASE("matching: random matrices against exhaustive enumeration") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const int n = 1 + static_cast<int>(rng() % 6), m = 1 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd s(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) s(i, j) = u(rng);
    if (t % 5 == 0) s = (s * 4).array().round() / 4;  // force ties
    const auto h = hungarian_max(s), g = greedy_max(s);
    CHECK(is_matching(h, m));
    CHECK(is_matching(g, m));
    CHECK(std::abs(total_of(s, h) - brute_force_max(s)) < 1e-12);
    CHECK(total_of(s, g) <= total_of(s, h) + 1e-12);
    CHECK(hungarian_max(s) == h);
  }
}

TEST_CASE("plan_rearrangement") {
  std::vector<objects::ObjectNode> nodes(4);
  for (int i = 0; i < 4; ++i) {
    nodes[i].node_id = i;
    nodes[i].center = Vec3(i, 0, 0);
  }
  CHECK(plan_rearrangement(MatchResult{}, nodes).actions.empty());
  MatchResult m;
  m.pairs = {{0, 2, 0.7}, {1, 3, 0.9}};
  const Plan p = plan_rearrangement(m, nodes);
  REQUIRE(p.pairs.size() == 2);
  CHECK(p.pairs[0].pair.shuffled_id == 1);
  CHECK(p.actions.size() == 8);
  CHECK(p.actions[0].kind == ActionKind::kNavigate);
  CHECK(p.actions[1].kind == ActionKind::kPick);
  CHECK(p.actions[3].kind == ActionKind::kPlace);
  CHECK((p.actions[3].target - Vec3(3, 0, 0)).norm() == 0.0);

  m.pairs = {{1, 3, 0.8}, {0, 2, 0.8}};
  CHECK(plan_rearrangement(m, nodes).pairs[0].pair.shuffled_id == 0);

  m.pairs = {{2, 3, 0.9}};
  nodes[3].center = Vec3(2.02, 0.01, 0.3);
  const Plan skip = plan_rearrangement(m, nodes, 0.1);
  CHECK(skip.pairs.empty());
  CHECK(skip.skipped.size() == 1);

  m.pairs = {{0, 7, 0.9}};
  CHECK_THROWS_AS(plan_rearrangement(m, nodes), InvalidArgument);
}

TEST_CASE("metrics") {
  WorldState goal{{obj("a", 0), obj("b", 1), obj("c", 2), obj("d", 3, 0.0)}};
  SUBCASE("final equals goal") {
    WorldState init = goal;
    init.objects[0].position.x() = 0.7;
    const auto r = metrics(init, goal, goal);
    CHECK(r.success == 1.0);
    CHECK(r.misplaced == 0.0);
    CHECK(r.fixed == 1.0);
    CHECK(r.fixed_strict == 1.0);
    CHECK(r.energy_remaining == 0.0);
  }
  SUBCASE("fixing both misplaced objects but disturbing a correct one zeroes fixed_strict") {
    WorldState init = goal, fin = goal;
    init.objects[0].position.x() = 0.6;
    init.objects[1].position.x() = 1.6;
    fin.objects[2].position.x() = 2.4;
    const auto r = metrics(init, fin, goal);
    CHECK(r.fixed == 1.0);
    CHECK(r.fixed_strict == 0.0);
    CHECK(r.success == 0.0);
  }
  SUBCASE("two misplaced become three") {
    WorldState init = goal, fin = goal;
    init.objects[0].position.x() = 0.6;
    init.objects[1].position.x() = 1.6;
    fin.objects[0].position.x() = 0.6;
    fin.objects[1].position.x() = 1.6;
    fin.objects[2].position.x() = 2.6;
    CHECK(metrics(init, fin, goal).misplaced == 1.5);
  }
  SUBCASE("final equals initial") {
    WorldState init = goal;
    init.objects[1].position.x() = 1.2;
    init.objects[3].openness = 0.5;
    const auto r = metrics(init, init, goal);
    CHECK(r.misplaced == 1.0);
    CHECK(r.energy_remaining == 1.0);
    CHECK(r.fixed == 0.0);
  }
  SUBCASE("energy and tolerances") {
    Tolerance tol;
    CHECK(energy(obj("x", 0.25), obj("x", 0), tol) == doctest::Approx(0.5));
    CHECK(energy(obj("x", 5), obj("x", 0), tol) == 1.0);
    CHECK(energy(obj("x", 0, 0.3), obj("x", 0, 0.1), tol) == doctest::Approx(0.2));
    CHECK(at_goal(obj("x", 0.049), obj("x", 0), tol));
    CHECK_FALSE(at_goal(obj("x", 0.051), obj("x", 0), tol));
    CHECK_FALSE(at_goal(obj("x", 0, 0.2), obj("x", 0, 0.1), tol));
  }
  SUBCASE("no shuffles") {
    const auto r = metrics(goal, goal, goal);
    CHECK(r.success == 1.0);
    CHECK(r.fixed_strict == 1.0);
    CHECK(r.misplaced == 0.0);
    CHECK(r.energy_remaining == 0.0);
  }
  SUBCASE("random states: fixed_strict never exceeds fixed") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (int t = 0; t < 200; ++t) {
      WorldState init = goal, fin = goal;
      for (auto& o : init.objects) o.position.x() += (rng() % 2) ? u(rng) : 0.0;
      for (auto& o : fin.objects) o.position.x() += (rng() % 3 == 0) ? u(rng) : 0.0;
      const auto r = metrics(init, fin, goal);
      CHECK(r.fixed_strict <= r.fixed);
      CHECK(r.misplaced >= 0.0);
      CHECK(r.energy_remaining >= 0.0);
    }
  }
  SUBCASE("mismatched ids") {
    WorldState other = goal;
    other.objects[0].object_id = "zz";
    CHECK_THROWS_AS(metrics(other, goal, goal), InvalidArgument);
  }
}
