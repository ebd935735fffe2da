#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "skit/common.hpp"
#include "skit/kernels.hpp"

namespace skit {

// Payoff below this witness-norm threshold is suppressed (constant data).
inline constexpr double kNormEpsilon = 1e-12;
// Slack allowed before |payoff| > 1 is treated as a bug.
inline constexpr double kPayoffSlack = 1e-9;

inline double clamp_payoff(double raw, const char* where) {
  if (std::abs(raw) > 1.0 + kPayoffSlack) {
    throw InternalInvariantError(std::string(where) + ": payoff magnitude exceeds 1");
  }
  return std::clamp(raw, -1.0, 1.0);
}

/// Combines the four cached sums into the squared norm of the plug-in
/// cross-covariance estimate: d1/n^2 + d2*d3/n^4 - 2*d4/n^3, clamped at 0.
/// Shared by the streaming witness normalizer and the batch HSIC estimator.
inline double hsic_sq_norm_from_sums(double d1, double d2, double d3, double d4, double n) {
  const double v = d1 / (n * n) + d2 * d3 / (n * n * n * n) - 2.0 * d4 / (n * n * n);
  return std::max(0.0, v);
}

/// Streaming sufficient statistics for the HSIC plug-in witness: the stored
/// points, the sums Delta1 = sum K.*L, Delta2 = 1'K1, Delta3 = 1'L1,
/// Delta4 = 1'KL1 and the row sums K1, L1, all updated in O(n) per append.
class HsicState {
 public:
  HsicState() = default;
  HsicState(KernelSpec kx, KernelSpec ky) : kernel_x_(kx), kernel_y_(ky) {}

  const KernelSpec& kernel_x() const { return kernel_x_; }
  const KernelSpec& kernel_y() const { return kernel_y_; }
  Eigen::Index n() const { return n_; }
  double delta1() const { return delta1_; }
  double delta2() const { return delta2_; }
  double delta3() const { return delta3_; }
  double delta4() const { return delta4_; }

  Matrix stored_x() const { return xs_.leftCols(n_); }
  Matrix stored_y() const { return ys_.leftCols(n_); }
  Vector k_rowsums() const { return k_rowsums_.head(n_); }
  Vector l_rowsums() const { return l_rowsums_.head(n_); }

  /// Kernel columns of a query point against the stored sample.
  Array x_columns(const Vector& x) const {
    return eval_kernel_columns(kernel_x_, xs_.leftCols(n_), x);
  }
  Array y_columns(const Vector& y) const {
    return eval_kernel_columns(kernel_y_, ys_.leftCols(n_), y);
  }

  /// (mu_XY - mu_X (x) mu_Y)(x, y) with empirical mean embeddings.
  double unnormalized_witness_eval(const Vector& x, const Vector& y) const {
    if (n_ == 0) throw StateError("witness eval on empty state");
    const Array kc = x_columns(x);
    const Array lc = y_columns(y);
    return witness_from_columns(kc, lc);
  }

  double witness_from_columns(const Array& kc, const Array& lc) const {
    const double n = static_cast<double>(n_);
    return (kc * lc).sum() / n - (kc.sum() / n) * (lc.sum() / n);
  }

  /// RKHS norm of the plug-in estimate; equals (1/n) sqrt(tr(KHLH)).
  double witness_norm() const {
    if (n_ == 0) throw StateError("witness_norm on empty state");
    return std::sqrt(hsic_sq_norm_from_sums(delta1_, delta2_, delta3_, delta4_,
                                            static_cast<double>(n_)));
  }

  /// Eq. 12-style payoff with the normalized plug-in witness. Zero on cold
  /// start or degenerate norm.
  double payoff(const PairedObservation& z1, const PairedObservation& z2) const {
    if (n_ == 0) return 0.0;
    const double norm = witness_norm();
    if (norm < kNormEpsilon) return 0.0;
    const Array k1 = x_columns(z1.x), k2 = x_columns(z2.x);
    const Array l1 = y_columns(z1.y), l2 = y_columns(z2.y);
    // u(x1,y1)+u(x2,y2)-u(x1,y2)-u(x2,y1) collapses by bilinearity.
    const Array dk = k1 - k2, dl = l1 - l2;
    const double n = static_cast<double>(n_);
    const double num = (dk * dl).sum() / n - (dk.sum() / n) * (dl.sum() / n);
    return clamp_payoff(num / (2.0 * norm), "hsic_payoff");
  }

  /// W_t of the symmetry-based strategies: the same antisymmetric combination
  /// without normalization.
  double unnormalized_w(const PairedObservation& z1, const PairedObservation& z2) const {
    if (n_ == 0) return 0.0;
    const Array dk = x_columns(z1.x) - x_columns(z2.x);
    const Array dl = y_columns(z1.y) - y_columns(z2.y);
    const double n = static_cast<double>(n_);
    return (dk * dl).sum() / n - (dk.sum() / n) * (dl.sum() / n);
  }

  /// Minibatched payoff over a block of b >= 2 observations.
  double minibatch_payoff(const std::vector<PairedObservation>& block,
                          Eigen::Index b) const {
    if (static_cast<Eigen::Index>(block.size()) != b || b < 2) {
      throw InputError("minibatch_payoff: block length must equal b >= 2");
    }
    if (n_ == 0) return 0.0;
    const double norm = witness_norm();
    if (norm < kNormEpsilon) return 0.0;
    std::vector<Array> kc(block.size()), lc(block.size());
    for (std::size_t i = 0; i < block.size(); ++i) {
      kc[i] = x_columns(block[i].x);
      lc[i] = y_columns(block[i].y);
    }
    double diag = 0.0, off = 0.0;
    for (std::size_t i = 0; i < block.size(); ++i) {
      for (std::size_t j = 0; j < block.size(); ++j) {
        const double g = witness_from_columns(kc[i], lc[j]) / norm;
        if (i == j) {
          diag += g;
        } else {
          off += g;
        }
      }
    }
    const double bb = static_cast<double>(b);
    return clamp_payoff(diag / bb - off / (bb * (bb - 1.0)), "minibatch_payoff");
  }

  /// Appends a betting pair and refreshes all caches in O(n).
  void append_pair(const PairedObservation& z1, const PairedObservation& z2) {
    append_one(z1);
    append_one(z2);
  }

  void append_one(const PairedObservation& z) {
    if (n_ == 0 && xs_.rows() == 0) {
      dx_ = z.x.size();
      dy_ = z.y.size();
      xs_.resize(dx_, 16);
      ys_.resize(dy_, 16);
      k_rowsums_.resize(16);
      l_rowsums_.resize(16);
    }
    if (z.x.size() != dx_ || z.y.size() != dy_) {
      throw InputError("append: dimension mismatch with stored data");
    }
    if (n_ == xs_.cols()) grow();

    const Array kc = n_ > 0 ? x_columns(z.x) : Array(0);
    const Array lc = n_ > 0 ? y_columns(z.y) : Array(0);
    const double kself = eval_kernel(kernel_x_, z.x, z.x);
    const double lself = eval_kernel(kernel_y_, z.y, z.y);

    delta1_ += 2.0 * (kc * lc).sum() + kself * lself;
    delta2_ += 2.0 * kc.sum() + kself;
    delta3_ += 2.0 * lc.sum() + lself;
    if (n_ > 0) {
      k_rowsums_.head(n_) += kc.matrix();
      l_rowsums_.head(n_) += lc.matrix();
    }
    k_rowsums_(n_) = kc.sum() + kself;
    l_rowsums_(n_) = lc.sum() + lself;
    xs_.col(n_) = z.x;
    ys_.col(n_) = z.y;
    ++n_;
    // 1'KL1 = (K1) . (L1) by symmetry of K.
    delta4_ = k_rowsums_.head(n_).dot(l_rowsums_.head(n_));
  }

  // Snapshot plumbing: reconstructs a state from raw fields.
  static HsicState from_fields(KernelSpec kx, KernelSpec ky, Matrix xs, Matrix ys,
                               Vector krs, Vector lrs, double d1, double d2, double d3,
                               double d4) {
    HsicState s(kx, ky);
    s.n_ = xs.cols();
    s.dx_ = xs.rows();
    s.dy_ = ys.rows();
    s.xs_ = std::move(xs);
    s.ys_ = std::move(ys);
    s.k_rowsums_ = std::move(krs);
    s.l_rowsums_ = std::move(lrs);
    s.delta1_ = d1;
    s.delta2_ = d2;
    s.delta3_ = d3;
    s.delta4_ = d4;
    return s;
  }

 private:
  void grow() {
    const Eigen::Index cap = std::max<Eigen::Index>(16, xs_.cols() * 2);
    xs_.conservativeResize(Eigen::NoChange, cap);
    ys_.conservativeResize(Eigen::NoChange, cap);
    k_rowsums_.conservativeResize(cap);
    l_rowsums_.conservativeResize(cap);
  }

  KernelSpec kernel_x_{};
  KernelSpec kernel_y_{};
  Eigen::Index dx_{0}, dy_{0};
  Eigen::Index n_{0};
  Matrix xs_{}, ys_{};  // dim x capacity, first n_ columns live
  Vector k_rowsums_{}, l_rowsums_{};
  double delta1_{0.0}, delta2_{0.0}, delta3_{0.0}, delta4_{0.0};
};

}  // namespace skit
