#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "skit/common.hpp"

namespace skit {

/// Low-rank factor K ~ G G^T produced by greedy pivoted incomplete Cholesky.
/// Rows follow the original index order; `pivots` records the pivot sequence.
/// For a PSD source the nuclear norm of the residual equals its trace, which
/// is tracked exactly, so residual_trace <= delta unless `truncated` is set.
struct LowRankFactor {
  Matrix g;
  std::vector<Eigen::Index> pivots;
  double residual_trace{0.0};
  double delta{0.0};
  bool truncated{false};

  Eigen::Index rank() const { return g.cols(); }
};

inline constexpr double kPivotTolerance = 1e-10;

inline LowRankFactor pivoted_incomplete_cholesky(
    const std::function<double(Eigen::Index, Eigen::Index)>& k, Eigen::Index n,
    double delta, Eigen::Index max_rank) {
  if (n <= 0) throw InputError("pivoted_incomplete_cholesky: empty input");
  if (!(delta >= 0.0)) throw InputError("pivoted_incomplete_cholesky: delta must be >= 0");
  max_rank = std::min(max_rank, n);

  Vector diag(n);
  for (Eigen::Index i = 0; i < n; ++i) diag(i) = k(i, i);
  double trace = diag.sum();

  LowRankFactor out;
  out.delta = delta;
  Matrix g(n, max_rank);
  std::vector<bool> used(static_cast<std::size_t>(n), false);

  Eigen::Index m = 0;
  while (m < max_rank && trace > delta) {
    Eigen::Index p = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!used[static_cast<std::size_t>(i)] && diag(i) > best) {
        best = diag(i);
        p = i;
      }
    }
    if (best < -kPivotTolerance) {
      throw InputError("pivoted_incomplete_cholesky: input is not PSD");
    }
    if (best <= 0.0) break;  // remaining diagonal is numerically zero

    const double piv = std::sqrt(best);
    g(p, m) = piv;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == p || used[static_cast<std::size_t>(i)]) {
        if (i != p) g(i, m) = 0.0;
        continue;
      }
      double v = k(i, p);
      if (m > 0) v -= g.row(i).head(m).dot(g.row(p).head(m));
      g(i, m) = v / piv;
      diag(i) -= g(i, m) * g(i, m);
      if (diag(i) < -kPivotTolerance) {
        throw InputError("pivoted_incomplete_cholesky: input is not PSD");
      }
      diag(i) = std::max(diag(i), 0.0);
    }
    used[static_cast<std::size_t>(p)] = true;
    diag(p) = 0.0;
    out.pivots.push_back(p);
    ++m;
    trace = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!used[static_cast<std::size_t>(i)]) trace += diag(i);
    }
  }

  out.g = g.leftCols(m);
  out.residual_trace = std::max(trace, 0.0);
  out.truncated = out.residual_trace > delta;
  return out;
}

inline LowRankFactor pivoted_incomplete_cholesky(const Matrix& k, double delta,
                                                 Eigen::Index max_rank) {
  return pivoted_incomplete_cholesky(
      [&k](Eigen::Index i, Eigen::Index j) { return k(i, j); }, k.rows(), delta, max_rank);
}

}  // namespace skit
