#include "splatr/assign.hpp"

#include "splatr/change.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace splatr::assign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimum-cost perfect matching on a square matrix (potentials, O(n^3)). Returns row -> col.
std::vector<int> min_cost_square(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Optimal total over matchings of size min(rows, cols) of the submatrix with the given
// rows and columns.
double optimum(const Eigen::MatrixXd& s, const std::vector<int>& rows, const std::vector<int>& cols) {
  const int n = static_cast<int>(std::max(rows.size(), cols.size()));
  if (rows.empty() || cols.empty()) return 0.0;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) cost(static_cast<int>(i), static_cast<int>(j)) = -s(rows[i], cols[j]);
  const auto a = min_cost_square(cost);
  double total = 0.0;
  for (size_t i = 0; i < rows.size(); ++i)
    if (a[i] < static_cast<int>(cols.size())) total += s(rows[i], cols[a[i]]);
  return total;
}

MatchResult to_result(const std::vector<int>& shuffled_ids, const std::vector<int>& goal_ids, const Eigen::MatrixXd& s,
                      const std::vector<int>& assignment) {
  MatchResult r;
  std::vector<char> goal_used(goal_ids.size(), 0);
  for (size_t i = 0; i < shuffled_ids.size(); ++i) {
    if (assignment[i] < 0) {
      r.unmatched_shuffled.push_back(shuffled_ids[i]);
      continue;
    }
    goal_used[assignment[i]] = 1;
    r.pairs.push_back({shuffled_ids[i], goal_ids[assignment[i]], s(static_cast<int>(i), assignment[i])});
  }
  for (size_t j = 0; j < goal_ids.size(); ++j)
    if (!goal_used[j]) r.unmatched_goal.push_back(goal_ids[j]);
  return r;
}

void check_shape(const std::vector<int>& a, const std::vector<int>& b, const Eigen::MatrixXd& s) {
  if (static_cast<size_t>(s.rows()) != a.size() || static_cast<size_t>(s.cols()) != b.size())
    throw InvalidArgument("similarity matrix shape does not match the id lists");
  if (!std::is_sorted(a.begin(), a.end()) || !std::is_sorted(b.begin(), b.end()))
    throw InvalidArgument("node ids must be ascending");
}

Eigen::MatrixXd similarity_matrix(const std::vector<const objects::ObjectNode*>& sh,
                                  const std::vector<const objects::ObjectNode*>& go) {
  Eigen::MatrixXd s(sh.size(), go.size());
  for (size_t i = 0; i < sh.size(); ++i)
    for (size_t j = 0; j < go.size(); ++j)
      s(static_cast<int>(i), static_cast<int>(j)) = pair_similarity(sh[i]->embedding, go[j]->embedding);
  return s;
}

std::vector<int> ids_of(const std::vector<const objects::ObjectNode*>& nodes) {
  std::vector<int> ids;
  for (const auto* n : nodes) ids.push_back(n->node_id);
  return ids;
}

}  // namespace

double MatchResult::total() const {
  double t = 0.0;
  for (const Pair& p : pairs) t += p.similarity;
  return t;
}

double pair_similarity(std::span<const double> a, std::span<const double> b) { return change::cosine(a, b); }

std::vector<int> hungarian_max(const Eigen::MatrixXd& s, double tie_tol) {
  const int n = static_cast<int>(s.rows()), m = static_cast<int>(s.cols());
  std::vector<int> out(n, -1);
  if (n == 0 || m == 0) return out;
  std::vector<int> rows(n), cols(m);
  for (int i = 0; i < n; ++i) rows[i] = i;
  for (int j = 0; j < m; ++j) cols[j] = j;
  double remaining = optimum(s, rows, cols);
  // Fix rows in order, each to the smallest column that keeps the optimum reachable. A row
  // is left unmatched only when rows outnumber columns and no column keeps the optimum.
  for (int i = 0; i < n; ++i) {
    std::vector<int> rest_rows(rows.begin() + 1, rows.end());
    int chosen = -1;
    double best_value = -kInf;
    size_t best_k = 0;
    for (size_t k = 0; k < cols.size(); ++k) {
      std::vector<int> rest_cols = cols;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
      const double value = s(i, cols[k]) + optimum(s, rest_rows, rest_cols);
      if (value > best_value) {
        best_value = value;
        best_k = k;
      }
      if (value >= remaining - tie_tol) {
        chosen = static_cast<int>(k);
        break;
      }
    }
    const bool must_match = rest_rows.size() < cols.size();
    if (chosen < 0 && must_match && !cols.empty()) chosen = static_cast<int>(best_k);  // rounding guard
    if (chosen >= 0) {
      out[i] = cols[chosen];
      remaining -= s(i, cols[chosen]);
      cols.erase(cols.begin() + chosen);
    }
    rows = std::move(rest_rows);
  }
  return out;
}

std::vector<int> greedy_max(const Eigen::MatrixXd& s) {
  std::vector<int> out(s.rows(), -1);
  std::vector<char> taken(s.cols(), 0);
  for (int i = 0; i < s.rows(); ++i) {
    int best = -1;
    for (int j = 0; j < s.cols(); ++j)
      if (!taken[j] && (best < 0 || s(i, j) > s(i, best))) best = j;
    if (best < 0) break;
    taken[best] = 1;
    out[i] = best;
  }
  return out;
}

MatchResult match_hungarian(const std::vector<int>& a, const std::vector<int>& b, const Eigen::MatrixXd& s) {
  check_shape(a, b, s);
  return to_result(a, b, s, hungarian_max(s));
}

MatchResult match_greedy(const std::vector<int>& a, const std::vector<int>& b, const Eigen::MatrixXd& s) {
  check_shape(a, b, s);
  return to_result(a, b, s, greedy_max(s));
}

MatchResult match_hungarian(const std::vector<const objects::ObjectNode*>& sh,
                            const std::vector<const objects::ObjectNode*>& go) {
  return match_hungarian(ids_of(sh), ids_of(go), similarity_matrix(sh, go));
}

MatchResult match_greedy(const std::vector<const objects::ObjectNode*>& sh,
                         const std::vector<const objects::ObjectNode*>& go) {
  return match_greedy(ids_of(sh), ids_of(go), similarity_matrix(sh, go));
}

Plan plan_rearrangement(const MatchResult& match, const std::vector<objects::ObjectNode>& nodes, double noop_distance) {
  auto find = [&](int id) -> const objects::ObjectNode& {
    for (const auto& n : nodes)
      if (n.node_id == id) return n;
    throw InvalidArgument("match refers to unknown node " + std::to_string(id));
  };
  std::vector<Pair> order = match.pairs;
  std::stable_sort(order.begin(), order.end(), [](const Pair& a, const Pair& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.shuffled_id < b.shuffled_id;
  });
  Plan plan;
  for (const Pair& p : order) {
    const Vec3 pick = find(p.shuffled_id).center, place = find(p.goal_id).center;
    if ((pick - place).head<2>().norm() < noop_distance) {
      plan.skipped.push_back(p);
      continue;
    }
    plan.pairs.push_back({p, pick, place});
    plan.actions.push_back({ActionKind::kNavigate, p.shuffled_id, p.goal_id, pick});
    plan.actions.push_back({ActionKind::kPick, p.shuffled_id, p.goal_id, pick});
    plan.actions.push_back({ActionKind::kNavigate, p.shuffled_id, p.goal_id, place});
    plan.actions.push_back({ActionKind::kPlace, p.shuffled_id, p.goal_id, place});
  }
  return plan;
}

bool at_goal(const ObjectState& s, const ObjectState& g, const Tolerance& tol) {
  if ((s.position - g.position).norm() > tol.eps_pos) return false;
  if (s.openness.has_value() != g.openness.has_value()) return false;
  return !s.openness || std::abs(*s.openness - *g.openness) <= tol.eps_open;
}

double energy(const ObjectState& s, const ObjectState& g, const Tolerance& tol) {
  double e = std::min(1.0, (s.position - g.position).norm() / tol.d_norm);
  if (s.openness && g.openness) e += std::abs(*s.openness - *g.openness);
  return e;
}

EpisodeReport metrics(const WorldState& initial, const WorldState& fin, const WorldState& goal, const Tolerance& tol) {
  auto ids = [](const WorldState& w) {
    std::set<std::string> s;
    for (const auto& o : w.objects) s.insert(o.object_id);
    if (s.size() != w.objects.size()) throw InvalidArgument("duplicate object ids");
    return s;
  };
  const auto gi = ids(goal);
  if (ids(initial) != gi || ids(fin) != gi) throw InvalidArgument("world states have different object id sets");

  EpisodeReport r;
  int mis_initial = 0, mis_final = 0, fixed = 0;
  bool disturbed = false;
  double e_initial = 0.0, e_final = 0.0;
  for (const ObjectState& g : goal.objects) {
    const ObjectState& a = *initial.find(g.object_id);
    const ObjectState& b = *fin.find(g.object_id);
    ObjectDiagnostics d{g.object_id, at_goal(a, g, tol), at_goal(b, g, tol), (a.position - g.position).norm(),
                        (b.position - g.position).norm()};
    mis_initial += !d.at_goal_initial;
    mis_final += !d.at_goal_final;
    fixed += !d.at_goal_initial && d.at_goal_final;
    disturbed |= d.at_goal_initial && !d.at_goal_final;
    e_initial += energy(a, g, tol);
    e_final += energy(b, g, tol);
    r.objects.push_back(std::move(d));
  }
  r.success = mis_final == 0 ? 1.0 : 0.0;
  r.misplaced = mis_initial > 0 ? static_cast<double>(mis_final) / mis_initial : 0.0;
  r.fixed = mis_initial > 0 ? static_cast<double>(fixed) / mis_initial : (mis_final == 0 ? 1.0 : 0.0);
  r.fixed_strict = disturbed ? 0.0 : r.fixed;
  r.energy_remaining = e_initial > 0.0 ? e_final / e_initial : 0.0;
  return r;
}

}  // namespace splatr::assign
