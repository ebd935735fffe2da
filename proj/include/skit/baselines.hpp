#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "skit/common.hpp"
#include "skit/hsic.hpp"
#include "skit/kernels.hpp"

namespace skit {

struct PermutationTestResult {
  double statistic{0.0};
  double p_value{1.0};
  int m_permutations{0};
};

namespace detail {

inline Matrix gram_from_columns(const KernelSpec& spec, const Matrix& pts) {
  const Eigen::Index n = pts.cols();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = eval_kernel(spec, pts.col(i), pts.col(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// (1/t^2) tr(KHLH) from dense Gram matrices via the shared sum formula.
inline double biased_hsic_from_grams(const Matrix& k, const Matrix& l) {
  const double n = static_cast<double>(k.rows());
  const double d1 = k.cwiseProduct(l).sum();
  const double d2 = k.sum();
  const double d3 = l.sum();
  const Vector krs = k.rowwise().sum();
  const Vector lrs = l.rowwise().sum();
  const double d4 = krs.dot(lrs);
  return hsic_sq_norm_from_sums(d1, d2, d3, d4, n);
}

}  // namespace detail

/// Biased batch HSIC estimator (1/t^2) tr(KHLH); equals the squared witness
/// norm of the streaming caches on the same data.
inline double biased_hsic(const Matrix& xs, const Matrix& ys, const KernelSpec& kx,
                          const KernelSpec& ky) {
  if (xs.cols() != ys.cols() || xs.cols() < 2) {
    throw InputError("biased_hsic: need >= 2 paired points");
  }
  return detail::biased_hsic_from_grams(detail::gram_from_columns(kx, xs),
                                        detail::gram_from_columns(ky, ys));
}

/// Streaming-friendly variant for large samples: accumulates the sums row by
/// row without materializing the Gram matrices.
inline double biased_hsic_blockwise(const Matrix& xs, const Matrix& ys,
                                    const KernelSpec& kx, const KernelSpec& ky) {
  const Eigen::Index n = xs.cols();
  if (ys.cols() != n || n < 2) throw InputError("biased_hsic: need >= 2 paired points");
  double d1 = 0.0;
  Vector krs = Vector::Zero(n), lrs = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Array krow = eval_kernel_columns(kx, xs, xs.col(i));
    const Array lrow = eval_kernel_columns(ky, ys, ys.col(i));
    d1 += (krow * lrow).sum();
    krs(i) = krow.sum();
    lrs(i) = lrow.sum();
  }
  return hsic_sq_norm_from_sums(d1, krs.sum(), lrs.sum(), krs.dot(lrs),
                                static_cast<double>(n));
}

/// Permutation p-value P = (1 + #{T_m >= T}) / (M + 1), permuting the y side.
inline PermutationTestResult permutation_test(const Matrix& xs, const Matrix& ys,
                                              const KernelSpec& kx, const KernelSpec& ky,
                                              int m_permutations, std::mt19937_64& rng) {
  if (m_permutations < 1) throw InputError("permutation_test: M must be >= 1");
  const Eigen::Index n = xs.cols();
  if (ys.cols() != n || n < 2) throw InputError("permutation_test: need >= 2 paired points");

  const Matrix k = detail::gram_from_columns(kx, xs);
  const Matrix l = detail::gram_from_columns(ky, ys);
  const double statistic = detail::biased_hsic_from_grams(k, l);

  // tr(K H L_sigma H) = sum_ij Ktilde_ij L_{sigma(i) sigma(j)} with the
  // double-centered Ktilde fixed across permutations.
  Matrix kc = k;
  kc.rowwise() -= k.colwise().mean();
  kc.colwise() -= kc.rowwise().mean();
  const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  Matrix lp(n, n);
  int exceed = 0;
  for (int m = 0; m < m_permutations; ++m) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
      for (Eigen::Index i = 0; i < n; ++i) {
        lp(i, j) = l(perm[static_cast<std::size_t>(i)], pj);
      }
    }
    const double tm = inv_n2 * kc.cwiseProduct(lp).sum();
    if (tm >= statistic) ++exceed;
  }

  PermutationTestResult out;
  out.statistic = statistic;
  out.m_permutations = m_permutations;
  out.p_value = (1.0 + static_cast<double>(exceed)) /
                (static_cast<double>(m_permutations) + 1.0);
  return out;
}

struct MonitoringReport {
  std::optional<std::size_t> first_rejection;  // index into checkpoints
  std::vector<double> p_values;
  std::vector<double> thresholds;
};

/// Re-runs the batch permutation test at each checkpoint on all data so far.
/// Uncorrected compares p < alpha; corrected uses alpha / (i(i+1)) for the
/// i-th test (the error budget sums to alpha).
template <typename Stream>
MonitoringReport continuous_monitor(Stream&& stream, const std::vector<long>& checkpoints,
                                    double alpha, bool corrected, const KernelSpec& kx,
                                    const KernelSpec& ky, int m_permutations,
                                    std::mt19937_64& rng) {
  for (std::size_t i = 1; i < checkpoints.size(); ++i) {
    if (checkpoints[i] <= checkpoints[i - 1]) {
      throw InputError("continuous_monitor: checkpoints must be strictly increasing");
    }
  }
  MonitoringReport report;
  if (checkpoints.empty()) return report;

  std::vector<PairedObservation> data;
  data.reserve(static_cast<std::size_t>(checkpoints.back()));
  long consumed = 0;
  for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
    while (consumed < checkpoints[ci]) {
      data.push_back(stream());
      ++consumed;
    }
    Matrix xs(data[0].x.size(), static_cast<Eigen::Index>(data.size()));
    Matrix ys(data[0].y.size(), static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      xs.col(static_cast<Eigen::Index>(i)) = data[i].x;
      ys.col(static_cast<Eigen::Index>(i)) = data[i].y;
    }
    const auto result = permutation_test(xs, ys, kx, ky, m_permutations, rng);
    const double i1 = static_cast<double>(ci + 1);
    const double threshold = corrected ? alpha / (i1 * (i1 + 1.0)) : alpha;
    report.p_values.push_back(result.p_value);
    report.thresholds.push_back(threshold);
    if (!report.first_rejection && result.p_value < threshold) {
      report.first_rejection = ci;
    }
  }
  return report;
}

}  // namespace skit
