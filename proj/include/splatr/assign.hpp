#pragma once

// Matching shuffled-setting nodes to goal-setting nodes, rearrangement ordering, and
// episode metrics.

#include "splatr/core.hpp"
#include "splatr/objects.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace splatr::assign {

struct Pair {
  int shuffled_id = -1;
  int goal_id = -1;
  double similarity = 0.0;
};

struct MatchResult {
  std::vector<Pair> pairs;  // ordered by shuffled id
  std::vector<int> unmatched_shuffled;
  std::vector<int> unmatched_goal;

  double total() const;
};

double pair_similarity(std::span<const double> shuffled_embedding, std::span<const double> goal_embedding);

/// Row -> column assignment maximizing the total over matchings of size min(rows, cols).
/// Unassigned rows map to -1. Among optimal matchings the one whose (row, col) pair list is
/// lexicographically smallest is returned; values within `tie_tol` count as equal.
std::vector<int> hungarian_max(const Eigen::MatrixXd& s, double tie_tol = 1e-9);

/// Rows in order, each taking the best unclaimed column (ties to the lower column).
std::vector<int> greedy_max(const Eigen::MatrixXd& s);

/// Matrix form: rows are shuffled ids, columns goal ids, both ascending.
MatchResult match_hungarian(const std::vector<int>& shuffled_ids, const std::vector<int>& goal_ids,
                            const Eigen::MatrixXd& s);
MatchResult match_greedy(const std::vector<int>& shuffled_ids, const std::vector<int>& goal_ids,
                         const Eigen::MatrixXd& s);

/// Node form: builds the cosine similarity matrix from node embeddings.
MatchResult match_hungarian(const std::vector<const objects::ObjectNode*>& shuffled,
                            const std::vector<const objects::ObjectNode*>& goal);
MatchResult match_greedy(const std::vector<const objects::ObjectNode*>& shuffled,
                         const std::vector<const objects::ObjectNode*>& goal);

enum class ActionKind { kNavigate, kPick, kPlace };

struct Action {
  ActionKind kind = ActionKind::kNavigate;
  int shuffled_id = -1;
  int goal_id = -1;
  Vec3 target = Vec3::Zero();  // navigate: where to go; place: object position
};

struct PlannedPair {
  Pair pair;
  Vec3 pick = Vec3::Zero();   // shuffled node center
  Vec3 place = Vec3::Zero();  // goal node center
};

struct Plan {
  std::vector<PlannedPair> pairs;  // execution order
  std::vector<Pair> skipped;       // already in place (centers closer than the no-op distance)
  std::vector<Action> actions;     // navigate, pick, navigate, place per pair
};

/// Pairs sorted by similarity, descending (ties to the lower shuffled id). Pairs whose
/// pick and place centers are within `noop_distance` in the ground plane are skipped.
Plan plan_rearrangement(const MatchResult& match, const std::vector<objects::ObjectNode>& nodes,
                        double noop_distance = 0.0);

struct Tolerance {
  double eps_pos = 0.05;
  double eps_open = 0.05;
  double d_norm = 0.5;
};

struct ObjectDiagnostics {
  std::string object_id;
  bool at_goal_initial = false;
  bool at_goal_final = false;
  double distance_initial = 0.0;
  double distance_final = 0.0;
};

struct EpisodeReport {
  double success = 0.0;
  double fixed = 0.0;
  double fixed_strict = 0.0;
  double misplaced = 0.0;
  double energy_remaining = 0.0;
  std::string matcher;
  std::vector<ObjectDiagnostics> objects;
};

bool at_goal(const ObjectState& s, const ObjectState& goal, const Tolerance& tol);
double energy(const ObjectState& s, const ObjectState& goal, const Tolerance& tol);

/// Zero denominators: misplaced and energy_remaining report 0; fixed and fixed_strict report
/// 1 when nothing was misplaced initially and nothing is misplaced finally, else 0.
EpisodeReport metrics(const WorldState& initial, const WorldState& final_state, const WorldState& goal,
                      const Tolerance& tol = {});

}  // namespace splatr::assign
