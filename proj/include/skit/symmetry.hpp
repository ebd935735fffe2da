#pragma once

#include <algorithm>
#include <vector>

#include "skit/common.hpp"
#include "skit/hsic.hpp"

namespace skit {

enum class SymmetryPayoff { Odd, Rank, Predictive };

inline double sign_of(double w) { return w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0); }

/// State of the symmetry-based strategies: the unnormalized witness (shared
/// HSIC caches), the sorted |W| history, the sign history and the online
/// logistic predictor. The current round's W joins the histories only after
/// its payoff has been computed, keeping the normalizer and the predictor
/// predictable.
class SymmetryState {
 public:
  static constexpr double kLearningRate = 0.1;

  SymmetryState() = default;
  SymmetryState(KernelSpec kx, KernelSpec ky, double q_lo = 0.1, double q_hi = 0.9)
      : hsic_(kx, ky), quantile_lo_(q_lo), quantile_hi_(q_hi) {}

  const HsicState& hsic() const { return hsic_; }
  HsicState& hsic() { return hsic_; }
  const std::vector<double>& abs_history() const { return abs_history_; }
  const std::vector<double>& sign_history() const { return sign_history_; }
  double predictor_weight() const { return weight_; }
  double predictor_bias() const { return bias_; }
  double quantile_lo() const { return quantile_lo_; }
  double quantile_hi() const { return quantile_hi_; }

  double compute_w(const PairedObservation& z1, const PairedObservation& z2) const {
    if (hsic_.n() == 0) return 0.0;
    return hsic_.unnormalized_w(z1, z2);
  }

  /// Inter-quantile normalizer N = Q_hi - Q_lo over past |W| values.
  double normalizer() const {
    if (abs_history_.size() < 2) return 0.0;
    return quantile(quantile_hi_) - quantile(quantile_lo_);
  }

  double odd_payoff(double w) const {
    const double n = normalizer();
    if (n < 1e-12) return 0.0;
    return std::tanh(w / n);
  }

  /// sign(W) * rk(|W|)/t with the inclusive rank (the current W counts).
  double rank_payoff(double w) const {
    const double s = sign_of(w);
    if (s == 0.0) return 0.0;
    const double aw = std::abs(w);
    const auto it = std::upper_bound(abs_history_.begin(), abs_history_.end(), aw);
    const double rank = static_cast<double>(it - abs_history_.begin()) + 1.0;
    const double t = static_cast<double>(abs_history_.size()) + 1.0;
    return s * rank / t;
  }

  /// (2p-1)_+ scaled by whether the predicted sign matched.
  double predictive_payoff(double w) const {
    const double p = sigmoid(weight_ * std::abs(w) + bias_);
    const double conf = std::max(0.0, 2.0 * p - 1.0);
    if (conf == 0.0) return 0.0;
    const double s = sign_of(w);
    if (s == 0.0) return 0.0;
    return conf * (s > 0.0 ? 1.0 : -1.0);
  }

  double payoff(SymmetryPayoff kind, double w) const {
    switch (kind) {
      case SymmetryPayoff::Odd:
        return odd_payoff(w);
      case SymmetryPayoff::Rank:
        return rank_payoff(w);
      case SymmetryPayoff::Predictive:
        return predictive_payoff(w);
    }
    throw InternalInvariantError("unknown symmetry payoff kind");
  }

  /// Records this round: pushes W into the histories, takes one logistic
  /// gradient step and appends the pair to the witness caches.
  void finish_round(double w, const PairedObservation& z1, const PairedObservation& z2) {
    const double aw = std::abs(w);
    abs_history_.insert(
        std::upper_bound(abs_history_.begin(), abs_history_.end(), aw), aw);
    const double s = sign_of(w);
    sign_history_.push_back(s);
    if (s != 0.0) {
      const double label = s > 0.0 ? 1.0 : 0.0;
      const double p = sigmoid(weight_ * aw + bias_);
      weight_ -= kLearningRate * (p - label) * aw;
      bias_ -= kLearningRate * (p - label);
    }
    hsic_.append_pair(z1, z2);
  }

  static SymmetryState from_fields(HsicState hsic, std::vector<double> abs_hist,
                                   std::vector<double> sign_hist, double weight,
                                   double bias, double q_lo, double q_hi) {
    SymmetryState s;
    s.hsic_ = std::move(hsic);
    s.abs_history_ = std::move(abs_hist);
    s.sign_history_ = std::move(sign_hist);
    s.weight_ = weight;
    s.bias_ = bias;
    s.quantile_lo_ = q_lo;
    s.quantile_hi_ = q_hi;
    return s;
  }

 private:
  static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  /// Linear-interpolation empirical quantile on the sorted |W| multiset.
  double quantile(double p) const {
    const std::size_t m = abs_history_.size();
    const double pos = p * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, m - 1);
    const double frac = pos - static_cast<double>(lo);
    return abs_history_[lo] * (1.0 - frac) + abs_history_[hi] * frac;
  }

  HsicState hsic_{};
  std::vector<double> abs_history_{};   // sorted ascending
  std::vector<double> sign_history_{};  // in round order
  double weight_{0.0};
  double bias_{0.0};
  double quantile_lo_{0.1};
  double quantile_hi_{0.9};
};

}  // namespace skit
