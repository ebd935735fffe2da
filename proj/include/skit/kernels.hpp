#pragma once

#include <algorithm>
#include <vector>

#include "skit/common.hpp"

namespace skit {

enum class KernelKind { RBF, Laplace, Linear };

/// A kernel with rate parametrization: RBF is exp(-lambda * ||x-x'||^2) and
/// Laplace is exp(-lambda * ||x-x'||_1), where `bandwidth` stores lambda.
/// Note that many libraries use sigma with k = exp(-||x-x'||^2 / (2 sigma^2));
/// here lambda = 1/(2 sigma^2). Linear ignores `bandwidth`.
struct KernelSpec {
  KernelKind kind{KernelKind::RBF};
  double bandwidth{1.0};

  KernelSpec() = default;
  KernelSpec(KernelKind k, double bw) : kind(k), bandwidth(bw) {
    if (kind != KernelKind::Linear && !(bandwidth > 0.0)) {
      throw InputError("kernel bandwidth must be positive");
    }
  }
  static KernelSpec rbf(double lambda) { return {KernelKind::RBF, lambda}; }
  static KernelSpec laplace(double lambda) { return {KernelKind::Laplace, lambda}; }
  static KernelSpec linear() { return {KernelKind::Linear, 1.0}; }

  bool bounded() const { return kind != KernelKind::Linear; }
};

inline double eval_kernel(const KernelSpec& spec, const Vector& x, const Vector& xp) {
  if (x.size() != xp.size()) throw InputError("eval_kernel: dimension mismatch");
  switch (spec.kind) {
    case KernelKind::RBF:
      return std::exp(-spec.bandwidth * (x - xp).squaredNorm());
    case KernelKind::Laplace:
      return std::exp(-spec.bandwidth * (x - xp).lpNorm<1>());
    case KernelKind::Linear:
      return x.dot(xp);
  }
  throw InternalInvariantError("eval_kernel: unknown kernel kind");
}

/// Kernel evaluations of one point against columns of `pts` (dim x n).
inline Array eval_kernel_columns(const KernelSpec& spec, const Matrix& pts, const Vector& x) {
  if (pts.rows() != x.size()) throw InputError("eval_kernel_columns: dimension mismatch");
  switch (spec.kind) {
    case KernelKind::RBF:
      return (-spec.bandwidth *
              (pts.colwise() - x).colwise().squaredNorm().transpose().array())
          .exp();
    case KernelKind::Laplace:
      return (-spec.bandwidth *
              (pts.colwise() - x).cwiseAbs().colwise().sum().transpose().array())
          .exp();
    case KernelKind::Linear:
      return (pts.transpose() * x).array();
  }
  throw InternalInvariantError("eval_kernel_columns: unknown kernel kind");
}

/// Symmetric Gram matrix; each unordered pair is evaluated once.
inline Matrix gram_matrix(const KernelSpec& spec, const std::vector<Vector>& points) {
  if (points.empty()) throw InputError("gram_matrix: empty input");
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = eval_kernel(spec, points[i], points[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// Median-heuristic rate: lambda = 1/(2 m^2) with m the median of pairwise
/// Euclidean distances (median over distances, not squared distances; an
/// even-length list takes the mean of the two central values).
inline double median_heuristic(const std::vector<Vector>& points) {
  if (points.size() < 2) throw InputError("median_heuristic: need at least 2 points");
  std::vector<double> dists;
  dists.reserve(points.size() * (points.size() - 1) / 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      dists.push_back((points[i] - points[j]).norm());
    }
  }
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  double med;
  if (m % 2 == 1) {
    med = dists[m / 2];
  } else {
    med = 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  }
  if (!(med > 0.0)) throw DegenerateDataError("median_heuristic: all points identical");
  return 1.0 / (2.0 * med * med);
}

}  // namespace skit
