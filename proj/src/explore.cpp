#include "splatr/explore.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

namespace splatr::explore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDr4[4] = {-1, 1, 0, 0};
constexpr int kDc4[4] = {0, 0, -1, 1};
constexpr int kDr8[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
constexpr int kDc8[8] = {0, 0, -1, 1, -1, 1, -1, 1};

bool passable(const OccupancyMap& m, const Cell& c) { return m.inside(c) && m.at(c) != CellState::kObstacle; }

constexpr int kSeedRadius = 5;

// Conservative: every cell whose square the segment between centers touches must be passable.
bool line_of_sight(const OccupancyMap& m, const Cell& a, const Cell& b) {
  const int r0 = std::min(a.row, b.row), r1 = std::max(a.row, b.row);
  const int c0 = std::min(a.col, b.col), c1 = std::max(a.col, b.col);
  const double dr = b.row - a.row, dc = b.col - a.col;
  const double len = std::hypot(dr, dc);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) {
      // Distance from cell center to the segment line, against the half-diagonal of a cell.
      const double cross = len > 0.0 ? std::abs((r - a.row) * dc - (c - a.col) * dr) / len : 0.0;
      if (cross <= std::sqrt(0.5) && !passable(m, {r, c})) return false;
    }
  return true;
}

}  // namespace

OccupancyMap::OccupancyMap(int rows, int cols, double resolution, const Vec2& origin)
    : rows_(rows), cols_(cols), resolution_(resolution), origin_(origin) {
  if (rows <= 0 || cols <= 0) throw InvalidArgument("occupancy map must have positive size");
  if (!(resolution > 0.0)) throw InvalidArgument("map resolution must be positive");
  grid_.assign(static_cast<size_t>(rows) * cols, CellState::kUnknown);
}

size_t OccupancyMap::count(CellState s) const { return static_cast<size_t>(std::count(grid_.begin(), grid_.end(), s)); }

Cell OccupancyMap::cell_of(const Vec2& p) const {
  return {static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_)),
          static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_))};
}

Vec2 OccupancyMap::center_of(const Cell& c) const {
  return origin_ + Vec2((c.col + 0.5) * resolution_, (c.row + 0.5) * resolution_);
}

void update_map(OccupancyMap& map, const Evidence& ev) {
  if (ev.blocked && map.inside(*ev.blocked) &&
      std::find(ev.traversed.begin(), ev.traversed.end(), *ev.blocked) == ev.traversed.end())
    map.set(*ev.blocked, CellState::kObstacle);
  for (const Cell& c : ev.traversed)
    if (map.inside(c)) map.set(c, CellState::kFree);
}

std::optional<Cell> sample_goal(const OccupancyMap& map, const Cell& agent, std::mt19937_64& rng) {
  if (!passable(map, agent)) return std::nullopt;
  // 4-connected reachability equals 8-connected reachability without corner cutting.
  std::vector<std::uint8_t> seen(map.data().size(), 0);
  std::deque<Cell> queue{agent};
  seen[map.index(agent)] = 1;
  std::vector<Cell> candidates;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (map.at(c) == CellState::kUnknown) candidates.push_back(c);
    for (int k = 0; k < 4; ++k) {
      const Cell n{c.row + kDr4[k], c.col + kDc4[k]};
      if (!passable(map, n) || seen[map.index(n)]) continue;
      seen[map.index(n)] = 1;
      queue.push_back(n);
    }
  }
  if (candidates.empty()) return std::nullopt;
  std::sort(candidates.begin(), candidates.end());
  std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

std::vector<double> fmm_distance(const OccupancyMap& map, const Cell& source) {
  if (!map.inside(source)) throw InvalidArgument("fmm source outside the map");
  if (map.at(source) == CellState::kObstacle) throw InvalidArgument("fmm source is an obstacle");
  const double h = map.resolution();
  std::vector<double> T(map.data().size(), kInf);
  std::vector<std::uint8_t> frozen(T.size(), 0);
  using Entry = std::pair<double, size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  // Cells near the source with an obstacle-free straight line get their exact distance; the
  // point-source singularity is where the first-order scheme loses most accuracy.
  for (int dr = -kSeedRadius; dr <= kSeedRadius; ++dr)
    for (int dc = -kSeedRadius; dc <= kSeedRadius; ++dc) {
      const Cell c{source.row + dr, source.col + dc};
      if (dr * dr + dc * dc > kSeedRadius * kSeedRadius || !passable(map, c) || !line_of_sight(map, source, c))
        continue;
      T[map.index(c)] = h * std::hypot(dr, dc);
      heap.push({T[map.index(c)], map.index(c)});
    }

  auto frozen_value = [&](const Cell& n) { return passable(map, n) && frozen[map.index(n)] ? T[map.index(n)] : kInf; };
  auto quadratic = [](double a, double b, double step) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (hi - lo >= step) return lo + step;
    return 0.5 * (lo + hi + std::sqrt(2.0 * step * step - (hi - lo) * (hi - lo)));
  };
  // Axis-aligned stencil plus the same stencil rotated by 45 degrees (spacing h * sqrt 2);
  // the smaller root wins. Diagonal neighbors count only when no obstacle corner is cut.
  auto solve = [&](const Cell& c) {
    const double a = std::min(frozen_value({c.row - 1, c.col}), frozen_value({c.row + 1, c.col}));
    const double b = std::min(frozen_value({c.row, c.col - 1}), frozen_value({c.row, c.col + 1}));
    double best = quadratic(a, b, h);
    auto diag = [&](int dr, int dc) {
      if (!passable(map, {c.row + dr, c.col}) || !passable(map, {c.row, c.col + dc})) return kInf;
      return frozen_value({c.row + dr, c.col + dc});
    };
    const double d1 = std::min(diag(-1, -1), diag(1, 1));
    const double d2 = std::min(diag(-1, 1), diag(1, -1));
    if (std::isfinite(std::min(d1, d2))) best = std::min(best, quadratic(d1, d2, std::sqrt(2.0) * h));
    return best;
  };

  while (!heap.empty()) {
    const auto [t, idx] = heap.top();
    heap.pop();
    if (frozen[idx] || t > T[idx]) continue;
    frozen[idx] = 1;
    const Cell c{static_cast<int>(idx / map.cols()), static_cast<int>(idx % map.cols())};
    for (int k = 0; k < 8; ++k) {
      const Cell n{c.row + kDr8[k], c.col + kDc8[k]};
      if (!passable(map, n) || frozen[map.index(n)]) continue;
      const double v = solve(n);
      if (v < T[map.index(n)]) {
        T[map.index(n)] = v;
        heap.push({v, map.index(n)});
      }
    }
  }
  return T;
}

std::vector<Cell> plan_path(const OccupancyMap& map, const Cell& start, const Cell& goal) {
  if (!passable(map, start)) throw InvalidArgument("path start is not traversable");
  if (!passable(map, goal)) throw InvalidArgument("path goal is not traversable");
  const std::vector<double> T = fmm_distance(map, goal);
  if (!std::isfinite(T[map.index(start)])) throw InvalidArgument("goal unreachable from start");
  std::vector<Cell> path{start};
  Cell cur = start;
  while (cur != goal) {
    Cell best = cur;
    double best_t = T[map.index(cur)];
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const Cell n{cur.row + dr, cur.col + dc};
        if (!passable(map, n)) continue;
        if (dr != 0 && dc != 0 && (!passable(map, {cur.row + dr, cur.col}) || !passable(map, {cur.row, cur.col + dc})))
          continue;
        if (T[map.index(n)] < best_t) {
          best_t = T[map.index(n)];
          best = n;
        }
      }
    // Every accepted value was computed from a smaller 4-neighbor, so descent cannot stall.
    if (best == cur) throw std::logic_error("fast-marching descent stalled");
    path.push_back(best);
    cur = best;
  }
  return path;
}

double path_length(const std::vector<Cell>& path, double resolution) {
  double len = 0.0;
  for (size_t i = 1; i < path.size(); ++i) {
    const bool diagonal = path[i].row != path[i - 1].row && path[i].col != path[i - 1].col;
    len += diagonal ? std::sqrt(2.0) * resolution : resolution;
  }
  return len;
}

ExplorationResult run_exploration(OccupancyMap& map, const Cell& start, std::mt19937_64& rng, const MoveFn& move,
                          int max_moves) {
  if (!map.inside(start)) throw InvalidArgument("agent starts outside the map");
  ExplorationResult res;
  Cell cur = start;
  update_map(map, {{cur}, std::nullopt});
  while (res.moves < max_moves) {
    const std::optional<Cell> goal = sample_goal(map, cur, rng);
    if (!goal) {
      res.exhausted = true;
      break;
    }
    const std::vector<Cell> path = plan_path(map, cur, *goal);
    bool bumped = false;
    for (size_t i = 1; i < path.size() && !bumped && res.moves < max_moves; ++i) {
      std::vector<Cell> hops;
      if (path[i].row != cur.row && path[i].col != cur.col) hops.push_back({path[i].row, cur.col});
      hops.push_back(path[i]);
      for (const Cell& next : hops) {
        if (res.moves >= max_moves) break;
        ++res.moves;
        if (!move(cur, next)) {
          update_map(map, {{}, next});
          bumped = true;
          break;
        }
        cur = next;
        update_map(map, {{cur}, std::nullopt});
      }
    }
  }
  res.final_cell = cur;
  return res;
}

void AgentTrace::append(TraceStep step) {
  step.index = static_cast<int>(steps.size());
  steps.push_back(std::move(step));
}

}  // namespace splatr::explore
