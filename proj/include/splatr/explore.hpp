#pragma once

// 2D occupancy mapping, frontier goal sampling and fast-marching navigation.

#include "splatr/core.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace splatr::explore {

enum class CellState : std::uint8_t { kUnknown = 0, kFree = 1, kObstacle = 2 };

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

/// Row index grows with world y, column index with world x.
class OccupancyMap {
 public:
  OccupancyMap() = default;
  OccupancyMap(int rows, int cols, double resolution, const Vec2& origin);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double resolution() const { return resolution_; }
  const Vec2& origin() const { return origin_; }

  bool inside(const Cell& c) const { return c.row >= 0 && c.col >= 0 && c.row < rows_ && c.col < cols_; }
  CellState at(const Cell& c) const { return grid_[index(c)]; }
  void set(const Cell& c, CellState s) { grid_[index(c)] = s; }
  size_t index(const Cell& c) const { return static_cast<size_t>(c.row) * cols_ + c.col; }
  size_t count(CellState s) const;

  Cell cell_of(const Vec2& world_xy) const;
  Vec2 center_of(const Cell& c) const;

  const std::vector<CellState>& data() const { return grid_; }

 private:
  int rows_ = 0, cols_ = 0;
  double resolution_ = 1.0;
  Vec2 origin_ = Vec2::Zero();
  std::vector<CellState> grid_;
};

/// What the agent learned on one step: cells it stood on, and the cell it bumped into.
struct Evidence {
  std::vector<Cell> traversed;
  std::optional<Cell> blocked;
};

/// Marks traversed cells free and the blocked cell obstacle. Cells outside the map are
/// ignored; a blocked cell that is also traversed in the same evidence stays free.
void update_map(OccupancyMap& map, const Evidence& evidence);

/// Uniform draw over unknown cells reachable from `agent` through non-obstacle cells.
/// Returns nullopt when exploration is exhausted.
std::optional<Cell> sample_goal(const OccupancyMap& map, const Cell& agent, std::mt19937_64& rng);

/// First-order upwind fast marching from `source` over free and unknown cells, in meters.
/// Obstacle and unreachable cells hold +infinity. Throws InvalidArgument for an obstacle source.
std::vector<double> fmm_distance(const OccupancyMap& map, const Cell& source);

/// Steepest descent on the goal's distance field with 8-connected moves that never cut an
/// obstacle corner. The returned path starts at `start` and ends at `goal`.
std::vector<Cell> plan_path(const OccupancyMap& map, const Cell& start, const Cell& goal);

/// Sum of step lengths (resolution per axis step, sqrt(2) * resolution per diagonal).
double path_length(const std::vector<Cell>& path, double resolution);

/// Attempts to move the agent one 4-neighbor cell. Returns false when the move was blocked.
using MoveFn = std::function<bool(const Cell& from, const Cell& to)>;

struct ExplorationResult {
  int moves = 0;         // MoveFn calls
  bool exhausted = false;  // no reachable unknown cell remained
  Cell final_cell;
};

/// Sample a goal, plan to it, walk the plan until it finishes or bumps, update the map,
/// and repeat until exhausted or `max_moves` attempts were made. Diagonal plan steps are
/// walked as a row move followed by a column move.
ExplorationResult run_exploration(OccupancyMap& map, const Cell& start, std::mt19937_64& rng, const MoveFn& move,
                          int max_moves);

/// One recorded exploration step.
struct TraceStep {
  int index = 0;
  std::string rgb_path;
  std::string depth_path;
  CameraView view;
  Vec3 agent_position = Vec3::Zero();
  double agent_yaw = 0.0;
};

struct AgentTrace {
  std::vector<TraceStep> steps;

  void append(TraceStep step);  // assigns the next index
};

}  // namespace splatr::explore
