#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "skit/cholesky.hpp"
#include "skit/common.hpp"
#include "skit/eigsolve.hpp"
#include "skit/hsic.hpp"
#include "skit/kernels.hpp"

namespace skit {

/// COCO/KCC payoff state: stored stream, current witness-pair coefficients
/// (fit on a prefix) and the 2t^2 re-estimation schedule. Degenerate solves
/// never abort a running test; they only suppress betting.
class CocoKccState {
 public:
  static constexpr double kDefaultDelta0 = 1e-6;
  static constexpr double kDefaultKappa = 0.1;

  CocoKccState() = default;
  CocoKccState(KernelSpec kx, KernelSpec ky, DependenceCriterion crit,
               double kappa1 = kDefaultKappa, double kappa2 = kDefaultKappa,
               double delta0 = kDefaultDelta0)
      : kernel_x_(kx),
        kernel_y_(ky),
        criterion_(crit),
        kappa1_(kappa1),
        kappa2_(kappa2),
        delta0_(delta0) {}

  const KernelSpec& kernel_x() const { return kernel_x_; }
  const KernelSpec& kernel_y() const { return kernel_y_; }
  DependenceCriterion criterion() const { return criterion_; }
  double kappa1() const { return kappa1_; }
  double kappa2() const { return kappa2_; }
  double delta0() const { return delta0_; }
  Eigen::Index n() const { return n_; }
  Eigen::Index next_refit_at() const { return next_refit_at_; }
  Eigen::Index fit_n() const { return fit_n_; }
  bool has_coeffs() const { return coeffs_.has_value(); }
  const WitnessCoefficients& coeffs() const { return *coeffs_; }
  long degenerate_refits() const { return degenerate_refits_; }
  long clamp_events() const { return clamp_events_; }
  Matrix stored_x() const { return xs_.leftCols(n_); }
  Matrix stored_y() const { return ys_.leftCols(n_); }

  /// Centered kernel expansions of the fitted witness pair at (x, y).
  std::pair<double, double> witness_pair_eval(const Vector& x, const Vector& y) const {
    if (!coeffs_) throw StateError("witness_pair_eval: no fitted coefficients");
    const Array kc = eval_kernel_columns(kernel_x_, xs_.leftCols(fit_n_), x);
    const Array lc = eval_kernel_columns(kernel_y_, ys_.leftCols(fit_n_), y);
    const double g = (kc - kc.mean()).matrix().dot(coeffs_->alpha);
    const double h = (lc - lc.mean()).matrix().dot(coeffs_->beta);
    return {g, h};
  }

  /// Eq. 22 payoff: (1/2)(g(x2) - g(x1))(h(y2) - h(y1)); zero on cold start.
  double payoff(const PairedObservation& z1, const PairedObservation& z2) {
    if (!coeffs_) return 0.0;
    const auto [g1, h1] = witness_pair_eval(z1.x, z1.y);
    const auto [g2, h2] = witness_pair_eval(z2.x, z2.y);
    const double raw = 0.5 * (g2 - g1) * (h2 - h1);
    // Unit-norm witnesses on a bounded kernel give |raw| <= 2, so clamping to
    // [-1, 1] is expected behaviour here, not an invariant violation.
    if (std::abs(raw) > 1.0) ++clamp_events_;
    return std::clamp(raw, -1.0, 1.0);
  }

  void append_pair(const PairedObservation& z1, const PairedObservation& z2) {
    append_one(z1);
    append_one(z2);
  }

  /// Re-estimates the witness pair once n crosses the 2t^2 schedule.
  void maybe_refit(Eigen::Index max_rank = 256) {
    if (n_ < next_refit_at_) return;
    try {
      const double delta = static_cast<double>(n_) * delta0_;
      const Matrix x = xs_.leftCols(n_);
      const Matrix y = ys_.leftCols(n_);
      const auto fx = pivoted_incomplete_cholesky(
          [&](Eigen::Index i, Eigen::Index j) {
            return eval_kernel(kernel_x_, x.col(i), x.col(j));
          },
          n_, delta, max_rank);
      const auto fy = pivoted_incomplete_cholesky(
          [&](Eigen::Index i, Eigen::Index j) {
            return eval_kernel(kernel_y_, y.col(i), y.col(j));
          },
          n_, delta, max_rank);
      auto [coeffs, value] = criterion_ == DependenceCriterion::COCO
                                 ? solve_coco(fx, fy, n_)
                                 : solve_kcc(fx, fy, n_, kappa1_, kappa2_);
      coeffs_ = std::move(coeffs);
      fit_n_ = n_;
      last_value_ = value;
    } catch (const DegenerateDataError&) {
      // Constant or near-constant streams: keep the previous witnesses
      // (possibly none) and keep the test running.
      ++degenerate_refits_;
    }
    advance_schedule();
  }

  double last_value() const { return last_value_; }

  static CocoKccState from_fields(KernelSpec kx, KernelSpec ky, DependenceCriterion crit,
                                  double kappa1, double kappa2, double delta0, Matrix xs,
                                  Matrix ys, std::optional<WitnessCoefficients> coeffs,
                                  Eigen::Index fit_n, Eigen::Index next_refit,
                                  double last_value, long degenerate, long clamps) {
    CocoKccState s(kx, ky, crit, kappa1, kappa2, delta0);
    s.n_ = xs.cols();
    s.dx_ = xs.rows();
    s.dy_ = ys.rows();
    s.xs_ = std::move(xs);
    s.ys_ = std::move(ys);
    s.coeffs_ = std::move(coeffs);
    s.fit_n_ = fit_n;
    s.next_refit_at_ = next_refit;
    s.last_value_ = last_value;
    s.degenerate_refits_ = degenerate;
    s.clamp_events_ = clamps;
    return s;
  }

 private:
  void append_one(const PairedObservation& z) {
    if (n_ == 0 && xs_.rows() == 0) {
      dx_ = z.x.size();
      dy_ = z.y.size();
      xs_.resize(dx_, 16);
      ys_.resize(dy_, 16);
    }
    if (z.x.size() != dx_ || z.y.size() != dy_) {
      throw InputError("append: dimension mismatch with stored data");
    }
    if (n_ == xs_.cols()) {
      const Eigen::Index cap = std::max<Eigen::Index>(16, xs_.cols() * 2);
      xs_.conservativeResize(Eigen::NoChange, cap);
      ys_.conservativeResize(Eigen::NoChange, cap);
    }
    xs_.col(n_) = z.x;
    ys_.col(n_) = z.y;
    ++n_;
  }

  void advance_schedule() {
    // next_refit_at follows {2, 8, 18, 32, ...} = 2 t^2.
    Eigen::Index t = 1;
    while (2 * t * t <= n_) ++t;
    next_refit_at_ = 2 * t * t;
  }

  KernelSpec kernel_x_{}, kernel_y_{};
  DependenceCriterion criterion_{DependenceCriterion::COCO};
  double kappa1_{0.0}, kappa2_{0.0};
  double delta0_{kDefaultDelta0};
  Eigen::Index dx_{0}, dy_{0};
  Eigen::Index n_{0};
  Matrix xs_{}, ys_{};
  std::optional<WitnessCoefficients> coeffs_{};
  Eigen::Index fit_n_{0};
  Eigen::Index next_refit_at_{2};
  double last_value_{0.0};
  long degenerate_refits_{0};
  long clamp_events_{0};
};

}  // namespace skit
