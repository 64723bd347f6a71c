#pragma once

// Exhaustive maximum over all injective row -> column maps of size min(rows, cols).

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace splatr::testing {

inline double brute_force_max(const Eigen::MatrixXd& s) {
  const int n = static_cast<int>(s.rows()), m = static_cast<int>(s.cols());
  if (n == 0 || m == 0) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  if (n <= m) {
    // Choose an ordered n-subset of columns: permute all columns, use the first n, and
    // skip permutations whose tail is not sorted to avoid repeats.
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      if (!std::is_sorted(perm.begin() + n, perm.end())) continue;
      double t = 0.0;
      for (int i = 0; i < n; ++i) t += s(i, perm[i]);
      best = std::max(best, t);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  return brute_force_max(s.transpose());
}

}  // namespace splatr::testing
